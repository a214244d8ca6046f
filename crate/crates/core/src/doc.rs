//! JSON shift documents.
//!
//! A document is a small JSON object with a `kind` discriminant and the
//! data needed to rebuild the shift: symbol names, forbidden words as
//! arrays of names, labeled-graph presentations, cancellation tables as
//! opener/closer lists with a `"unit"`/`"zero"` rule matrix, and nested
//! documents for products and relabelings.  Semantic errors are pinpointed
//! by a JSON-ish path into the document (`forbidden[2][0]`, `rules[1][0]`),
//! syntax errors carry serde's line and column.

use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::alphabet::{Alphabet, AlphabetError, SymbolId};
use crate::monoid::{MonoidError, MonoidTable, PairRule};
use crate::subshift::{LabeledGraph, ShiftError, Subshift};

#[derive(Debug, Error)]
pub enum DocError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid shift document: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("{path}: unknown symbol {symbol:?}")]
    UnknownSymbol { path: String, symbol: String },
    #[error("{path}: unknown vertex {vertex:?}")]
    UnknownVertex { path: String, vertex: String },
    #[error("rules[{row}][{col}]: expected \"unit\" or \"zero\", found {value:?}")]
    BadRuleCell {
        row: usize,
        col: usize,
        value: String,
    },
    #[error(transparent)]
    Alphabet(#[from] AlphabetError),
    #[error(transparent)]
    Shift(#[from] ShiftError),
    #[error(transparent)]
    Monoid(#[from] MonoidError),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ShiftDoc {
    Full {
        name: Option<String>,
        alphabet: Vec<String>,
    },
    Sft {
        name: Option<String>,
        alphabet: Vec<String>,
        forbidden: Vec<Vec<String>>,
    },
    Sofic {
        name: Option<String>,
        alphabet: Vec<String>,
        vertices: Vec<String>,
        edges: Vec<(String, String, String)>,
    },
    Monoid {
        name: Option<String>,
        openers: Vec<String>,
        closers: Vec<String>,
        rules: Vec<Vec<String>>,
    },
    Product {
        name: Option<String>,
        factors: Vec<ShiftDoc>,
    },
    Embedding {
        name: Option<String>,
        source: Box<ShiftDoc>,
        alphabet: Vec<String>,
        /// Target symbol name for each source symbol, in source order.
        map: Vec<String>,
    },
}

/// Parse a document from JSON text.  `default_name` is used when the
/// document does not name itself (the loader passes the file stem).
pub fn parse_shift(text: &str, default_name: &str) -> Result<Subshift, DocError> {
    let doc: ShiftDoc = serde_json::from_str(text)?;
    realize(&doc, default_name)
}

/// Load a document from disk; unnamed documents take the file stem.
pub fn load_shift(path: &Path) -> Result<Subshift, DocError> {
    let text = std::fs::read_to_string(path).map_err(|source| DocError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "document".to_string());
    parse_shift(&text, &stem)
}

fn lookup(
    alphabet: &Alphabet,
    name: &str,
    path: impl FnOnce() -> String,
) -> Result<SymbolId, DocError> {
    alphabet.id(name).map_err(|_| DocError::UnknownSymbol {
        path: path(),
        symbol: name.to_string(),
    })
}

fn realize(doc: &ShiftDoc, default_name: &str) -> Result<Subshift, DocError> {
    match doc {
        ShiftDoc::Full { name, alphabet } => {
            let alpha = Alphabet::new(alphabet.iter().cloned())?;
            Ok(Subshift::full(pick(name, default_name), alpha))
        }
        ShiftDoc::Sft {
            name,
            alphabet,
            forbidden,
        } => {
            let alpha = Alphabet::new(alphabet.iter().cloned())?;
            let mut words = Vec::with_capacity(forbidden.len());
            for (i, w) in forbidden.iter().enumerate() {
                let word = w
                    .iter()
                    .enumerate()
                    .map(|(j, s)| lookup(&alpha, s, || format!("forbidden[{i}][{j}]")))
                    .collect::<Result<Vec<_>, _>>()?;
                words.push(word);
            }
            Ok(Subshift::sft(pick(name, default_name), alpha, &words)?)
        }
        ShiftDoc::Sofic {
            name,
            alphabet,
            vertices,
            edges,
        } => {
            let alpha = Alphabet::new(alphabet.iter().cloned())?;
            let vertex = |n: &str, path: String| {
                vertices
                    .iter()
                    .position(|v| v == n)
                    .ok_or(DocError::UnknownVertex {
                        path,
                        vertex: n.to_string(),
                    })
            };
            let mut resolved = Vec::with_capacity(edges.len());
            for (i, (u, s, v)) in edges.iter().enumerate() {
                resolved.push((
                    vertex(u, format!("edges[{i}][0]"))?,
                    lookup(&alpha, s, || format!("edges[{i}][1]"))?,
                    vertex(v, format!("edges[{i}][2]"))?,
                ));
            }
            let graph = LabeledGraph::new(vertices.clone(), resolved);
            Ok(Subshift::sofic(pick(name, default_name), alpha, graph)?)
        }
        ShiftDoc::Monoid {
            name,
            openers,
            closers,
            rules,
        } => {
            let mut table = Vec::with_capacity(rules.len());
            for (row, cells) in rules.iter().enumerate() {
                let mut out = Vec::with_capacity(cells.len());
                for (col, cell) in cells.iter().enumerate() {
                    out.push(match cell.as_str() {
                        "unit" => PairRule::Unit,
                        "zero" => PairRule::Zero,
                        other => {
                            return Err(DocError::BadRuleCell {
                                row,
                                col,
                                value: other.to_string(),
                            })
                        }
                    });
                }
                table.push(out);
            }
            let table = MonoidTable::new(openers.clone(), closers.clone(), table)?;
            Ok(Subshift::monoid(pick(name, default_name), table))
        }
        ShiftDoc::Product { name, factors } => {
            let parent = pick(name, default_name);
            let built = factors
                .iter()
                .enumerate()
                .map(|(i, f)| realize(f, &format!("{parent}.{i}")))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Subshift::product(parent, built)?)
        }
        ShiftDoc::Embedding {
            name,
            source,
            alphabet,
            map,
        } => {
            let parent = pick(name, default_name);
            let src = realize(source, &format!("{parent}.source"))?;
            let target = Alphabet::new(alphabet.iter().cloned())?;
            let ids = map
                .iter()
                .enumerate()
                .map(|(i, s)| lookup(&target, s, || format!("map[{i}]")))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Subshift::embedding(parent, src, target, ids)?)
        }
    }
}

fn pick(name: &Option<String>, default_name: &str) -> String {
    name.clone().unwrap_or_else(|| default_name.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn forbidden_word_document_matches_the_builtin_golden_mean() {
        let text = r#"{
            "kind": "sft",
            "alphabet": ["0", "1"],
            "forbidden": [["1", "1"]]
        }"#;
        let shift = parse_shift(text, "gm").unwrap();
        assert_eq!(shift.name(), "gm");
        let builtin = fixtures::golden_mean();
        for n in 1..=6 {
            assert_eq!(shift.count_words(n), builtin.count_words(n));
        }
    }

    #[test]
    fn cancellation_document_matches_the_builtin_bracket_shift() {
        let text = r#"{
            "kind": "monoid",
            "name": "dyck2",
            "openers": ["(0", "(1"],
            "closers": [")0", ")1"],
            "rules": [["unit", "zero"], ["zero", "unit"]]
        }"#;
        let shift = parse_shift(text, "ignored").unwrap();
        assert_eq!(shift.name(), "dyck2");
        let builtin = fixtures::dyck(2);
        for n in 1..=5 {
            assert_eq!(shift.count_words(n), builtin.count_words(n));
        }
    }

    #[test]
    fn bad_rule_cells_are_named() {
        let text = r#"{
            "kind": "monoid",
            "openers": ["a"],
            "closers": ["b"],
            "rules": [["maybe"]]
        }"#;
        let err = parse_shift(text, "m").unwrap_err();
        assert!(matches!(
            err,
            DocError::BadRuleCell { row: 0, col: 0, ref value } if value == "maybe"
        ));
    }

    #[test]
    fn unknown_symbols_carry_their_position() {
        let text = r#"{
            "kind": "sft",
            "alphabet": ["0", "1"],
            "forbidden": [["0", "2"]]
        }"#;
        match parse_shift(text, "s").unwrap_err() {
            DocError::UnknownSymbol { path, symbol } => {
                assert_eq!(path, "forbidden[0][1]");
                assert_eq!(symbol, "2");
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn unknown_kinds_are_rejected_at_parse_time() {
        let err = parse_shift(r#"{"kind": "beta", "alphabet": ["0"]}"#, "b").unwrap_err();
        assert!(err.to_string().contains("unknown variant"));
    }

    #[test]
    fn nested_documents_build_products_and_relabelings() {
        let text = r#"{
            "kind": "embedding",
            "name": "wide",
            "source": {"kind": "full", "alphabet": ["x", "y"]},
            "alphabet": ["a", "b", "c"],
            "map": ["a", "c"]
        }"#;
        let shift = parse_shift(text, "ignored").unwrap();
        let id = |n: &str| shift.alphabet().id(n).unwrap();
        assert!(shift.is_admissible(&[id("a"), id("c"), id("a")]));
        assert!(!shift.is_admissible(&[id("b")]));

        let text = r#"{
            "kind": "product",
            "factors": [
                {"kind": "full", "alphabet": ["0", "1"]},
                {"kind": "sft", "alphabet": ["0", "1"], "forbidden": [["1", "1"]]}
            ]
        }"#;
        let product = parse_shift(text, "pair").unwrap();
        assert_eq!(product.alphabet().len(), 4);
        assert_eq!(product.count_words(1), 4);
        assert_eq!(product.count_words(2), 12);
    }

    #[test]
    fn loading_takes_the_file_stem_as_the_name() {
        let dir = std::env::temp_dir().join("lgs-doc-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("even.json");
        std::fs::write(
            &path,
            r#"{"kind": "sofic", "alphabet": ["0", "1"],
               "vertices": ["e", "o"],
               "edges": [["e", "0", "e"], ["e", "1", "o"], ["o", "1", "e"]]}"#,
        )
        .unwrap();
        let shift = load_shift(&path).unwrap();
        assert_eq!(shift.name(), "even");
        let builtin = fixtures::even_shift();
        for n in 1..=6 {
            assert_eq!(shift.count_words(n), builtin.count_words(n));
        }
    }
}
