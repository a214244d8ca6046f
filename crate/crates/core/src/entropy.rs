//! Growth-rate estimates read off the level counts of a graph system.
//!
//! Every estimator produces an [`EntropyReport`]: the raw per-level counts
//! (so callers can assert numbers, not just rates), the normalised values
//! `ln(count_n)/n`, the per-level increments `ln(count_n / count_{n-1})`,
//! and a quoted rate taken from the increment at the deepest level.  The
//! limit superior behind the definitions is out of reach of any finite
//! computation, so the quoted rate carries two caveat flags instead: one
//! inherited from approximately-built systems, and one raised whenever the
//! final three increments have not settled within [`STABLE_SPREAD`].
//!
//! All logarithms are natural; base-2 values are carried alongside for
//! display.

use std::collections::BTreeSet;
use std::f64::consts::LN_2;
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::builders::{
    build_pair_lgs, build_pair_word_lgs, BuildError, BuilderConfig, PairLgs,
};
use crate::lgs::LambdaGraphSystem;
use crate::subshift::Subshift;

/// Maximum spread (max minus min) allowed over the last three increment
/// estimates before the quoted rate is flagged as not yet stabilised.
pub const STABLE_SPREAD: f64 = 0.05;

#[derive(Debug, Error)]
pub enum EntropyError {
    #[error("rate estimation needs at least levels 0..=2, got a system of depth {depth}")]
    InsufficientLevels { depth: usize },
    #[error("level {level} has count 0, so its growth rate is undefined")]
    EmptyLevel { level: usize },
    #[error(transparent)]
    Build(#[from] BuildError),
}

/// Per-level growth data for one counting function on a graph system.
#[derive(Debug, Clone, Serialize)]
pub struct EntropyReport {
    /// What was counted per level ("vertices" or "paths").
    pub quantity: String,
    /// Raw counts, one entry per level starting at level 0.
    pub counts: Vec<u128>,
    /// `ln(counts[n]) / n`; the level-0 entry is fixed at 0.
    pub normalized: Vec<f64>,
    /// `ln(counts[n] / counts[n-1])`; the level-0 entry is fixed at 0.
    pub increments: Vec<f64>,
    /// Increment estimate at the deepest level, in nats.
    pub quoted_rate: f64,
    /// The same rate in bits.
    pub quoted_rate_log2: f64,
    /// Whether the underlying system was built by truncation rather than
    /// exactly; inherited from the system.
    pub approximate: bool,
    /// Path length certified by the builder (0 for exact systems).
    pub certified_path_length: usize,
    /// Raised when fewer than three increments exist or the last three
    /// spread wider than [`STABLE_SPREAD`].
    pub non_stabilized: bool,
    /// For path counting only: the largest single-vertex count per level.
    /// Bounded between `counts[n] / |V_n|` and `counts[n]`, so it yields
    /// the same rate as the total.
    pub max_counts: Option<Vec<u128>>,
}

impl EntropyReport {
    /// Build a report from raw counts.  `counts[n]` is the value measured
    /// at level `n`; at least levels 0, 1 and 2 must be present, and no
    /// count may be zero.
    pub fn from_counts(
        quantity: &str,
        counts: Vec<u128>,
        approximate: bool,
        certified_path_length: usize,
    ) -> Result<Self, EntropyError> {
        if counts.len() < 3 {
            return Err(EntropyError::InsufficientLevels {
                depth: counts.len().saturating_sub(1),
            });
        }
        if let Some(level) = counts.iter().position(|&c| c == 0) {
            return Err(EntropyError::EmptyLevel { level });
        }
        let logs: Vec<f64> = counts.iter().map(|&c| (c as f64).ln()).collect();
        let mut normalized = vec![0.0];
        let mut increments = vec![0.0];
        for n in 1..counts.len() {
            normalized.push(logs[n] / n as f64);
            increments.push(logs[n] - logs[n - 1]);
        }
        let quoted_rate = *increments.last().unwrap();
        let tail = &increments[1..];
        let non_stabilized = if tail.len() < 3 {
            true
        } else {
            let last = &tail[tail.len() - 3..];
            let spread = last.iter().cloned().fold(f64::MIN, f64::max)
                - last.iter().cloned().fold(f64::MAX, f64::min);
            spread >= STABLE_SPREAD
        };
        Ok(EntropyReport {
            quantity: quantity.to_string(),
            counts,
            normalized,
            increments,
            quoted_rate,
            quoted_rate_log2: quoted_rate / LN_2,
            approximate,
            certified_path_length,
            non_stabilized,
            max_counts: None,
        })
    }

    pub fn top_level(&self) -> usize {
        self.counts.len() - 1
    }

    /// Human-readable table plus the quoted rate with its caveats.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "level  {:>20}  ln/n      increment", self.quantity);
        for n in 0..self.counts.len() {
            let _ = write!(out, "{:<5}  {:>20}", n, self.counts[n]);
            if n == 0 {
                let _ = writeln!(out, "  {:>8}  {:>9}", "-", "-");
            } else {
                let _ = writeln!(
                    out,
                    "  {:>8.4}  {:>9.4}",
                    self.normalized[n], self.increments[n]
                );
            }
        }
        let _ = write!(
            out,
            "rate estimate: {:.4} nats ({:.4} bits)",
            self.quoted_rate, self.quoted_rate_log2
        );
        if self.approximate {
            let _ = write!(
                out,
                " [approximate build, paths certified to length {}]",
                self.certified_path_length
            );
        }
        if self.non_stabilized {
            let _ = write!(out, " [increments not yet stabilized]");
        }
        out.push('\n');
        out
    }
}

/// Growth rate of the vertex counts `|V_n|`.
pub fn lambda_entropy(system: &LambdaGraphSystem) -> Result<EntropyReport, EntropyError> {
    let counts = system.vertex_counts().iter().map(|&c| c as u128).collect();
    EntropyReport::from_counts(
        "vertices",
        counts,
        system.approximate,
        system.certified_path_length,
    )
}

/// Growth rate of the label-path counts: each level-0 vertex carries one
/// path, and a vertex higher up carries the sum over its outgoing edges of
/// the counts below.  The per-level total is the quoted quantity; the
/// largest single-vertex count is reported alongside.
pub fn volume_entropy(system: &LambdaGraphSystem) -> Result<EntropyReport, EntropyError> {
    let totals = system.path_counts();
    let mut maxes = Vec::with_capacity(system.levels.len());
    let mut below: Vec<u128> = vec![1; system.levels[0].vertex_count()];
    maxes.push(1);
    for level in &system.levels[1..] {
        let mut here = vec![0u128; level.vertex_count()];
        for &(u, _, v) in &level.edges {
            here[u] += below[v];
        }
        maxes.push(here.iter().copied().max().unwrap_or(0));
        below = here;
    }
    let mut report = EntropyReport::from_counts(
        "paths",
        totals,
        system.approximate,
        system.certified_path_length,
    )?;
    report.max_counts = Some(maxes);
    Ok(report)
}

/// Vertex growth rate of the pair system of `sub` inside `sup`.  The caveat
/// flags of the pair build (always approximate) carry into the report.
pub fn separation_entropy(
    sub: &Subshift,
    sup: &Subshift,
    config: &BuilderConfig,
) -> Result<EntropyReport, EntropyError> {
    let pair = build_pair_lgs(sub, sup, config)?;
    lambda_entropy(&pair.system)
}

/// Level-wise check that forgetting the ambient class maps the pair system
/// onto the subsystem's own classes.  Entry `n` is true when every vertex
/// of `canonical_sub` at level `n` appears as the first component of some
/// pair vertex, and the pair level is at least as large.  Together these
/// witness `|V_n(sub)| <= |V_n(sub, sup)|`.
pub fn check_projection_inequality(
    pair: &PairLgs,
    canonical_sub: &LambdaGraphSystem,
) -> Vec<bool> {
    let top = pair.system.top_level().min(canonical_sub.top_level());
    let pair_counts = pair.system.vertex_counts();
    let sub_counts = canonical_sub.vertex_counts();
    (0..=top)
        .map(|n| {
            let hit: BTreeSet<usize> = pair.pairs[n].iter().map(|&(y, _)| y).collect();
            let surjective = hit.len() == pair.side_sub.levels[n].vertex_count();
            surjective && sub_counts[n] <= pair_counts[n]
        })
        .collect()
}

/// Level-wise check that the word-class pair system has exactly one vertex
/// per label path of the canonical system.  Entry `n` compares `|V̂_n|`
/// with the path total at level `n`; both are exact integers, so equality
/// is required, not approximation.
pub fn check_pairword_path_bijection(
    shift: &Subshift,
    top: usize,
) -> Result<Vec<bool>, EntropyError> {
    let built = build_pair_word_lgs(shift, top)?;
    let paths = built.canonical.path_counts();
    Ok(built
        .system
        .vertex_counts()
        .iter()
        .zip(paths)
        .map(|(&v, p)| v as u128 == p)
        .collect())
}

/// CSV with one row per level: vertex count, path count, and the increment
/// estimate of the given report.  The level-0 increment cell is left empty.
pub fn report_csv(system: &LambdaGraphSystem, report: &EntropyReport) -> String {
    let vertices = system.vertex_counts();
    let paths = system.path_counts();
    let mut out = String::from("level,vertex_count,path_count,increment_estimate\n");
    for n in 0..system.levels.len() {
        let _ = write!(out, "{},{},{},", n, vertices[n], paths[n]);
        match report.increments.get(n) {
            Some(inc) if n > 0 => {
                let _ = writeln!(out, "{inc:.6}");
            }
            _ => out.push('\n'),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builders::{build_canonical_lgs, build_word_lgs};
    use crate::fixtures::{dyck, dyck_in_gamma, full_shift, gamma_shift, golden_mean};

    #[test]
    fn full_shift_vertex_growth_is_flat() {
        let system = build_canonical_lgs(&full_shift(2), &BuilderConfig::for_levels(6)).unwrap();
        let report = lambda_entropy(&system).unwrap();
        assert_eq!(report.counts, vec![1; 7]);
        assert_eq!(report.quoted_rate, 0.0);
        assert!(!report.non_stabilized);
        assert!(!report.approximate);
    }

    #[test]
    fn dyck_vertex_counts_double_per_level() {
        let system = build_canonical_lgs(&dyck(2), &BuilderConfig::for_levels(8)).unwrap();
        let report = lambda_entropy(&system).unwrap();
        for n in 0..=8u32 {
            assert_eq!(report.counts[n as usize], (1u128 << (n + 1)) - 1);
        }
        assert!((report.quoted_rate - 2f64.ln()).abs() < 0.01);
        assert!((report.quoted_rate_log2 - 1.0).abs() < 0.015);
        assert!(!report.non_stabilized);
    }

    #[test]
    fn golden_mean_path_totals_follow_the_fibonacci_recursion() {
        let system = build_canonical_lgs(&golden_mean(), &BuilderConfig::for_levels(12)).unwrap();
        let report = volume_entropy(&system).unwrap();
        // The single root vertex lumps the two follower classes, so the
        // recursion starts once both levels being summed are split.
        for n in 3..report.counts.len() {
            assert_eq!(
                report.counts[n],
                report.counts[n - 1] + report.counts[n - 2],
                "level {n}"
            );
        }
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((report.quoted_rate - phi.ln()).abs() < 0.01);
        let maxes = report.max_counts.as_ref().unwrap();
        assert_eq!(maxes.len(), report.counts.len());
        assert!(maxes[12] <= report.counts[12]);
    }

    #[test]
    fn word_systems_carry_one_path_per_vertex() {
        let built = build_word_lgs(&golden_mean(), 6).unwrap();
        let report = volume_entropy(&built).unwrap();
        let vertices: Vec<u128> = built.vertex_counts().iter().map(|&c| c as u128).collect();
        assert_eq!(report.counts, vertices);
        assert_eq!(report.max_counts.as_ref().unwrap(), &vec![1u128; 7]);
    }

    #[test]
    fn separation_of_a_shift_inside_itself_is_flat() {
        let gm = golden_mean();
        let report = separation_entropy(&gm, &gm, &BuilderConfig::for_levels(4)).unwrap();
        assert_eq!(report.counts, vec![1, 2, 2, 2, 2]);
        assert_eq!(report.quoted_rate, 0.0);
        assert!(!report.approximate, "finite-keyed pairs certify exactness");
    }

    #[test]
    fn shallow_systems_cannot_quote_a_rate() {
        let system = build_canonical_lgs(&golden_mean(), &BuilderConfig::for_levels(1)).unwrap();
        match lambda_entropy(&system) {
            Err(EntropyError::InsufficientLevels { depth: 1 }) => {}
            other => panic!("expected the depth guard, got {other:?}"),
        }
    }

    #[test]
    fn wobbling_increments_raise_the_caveat() {
        let report =
            EntropyReport::from_counts("vertices", vec![1, 2, 6, 24, 120], false, 0).unwrap();
        assert!(report.non_stabilized);
        assert!((report.quoted_rate - 5f64.ln()).abs() < 1e-12);
        let short = EntropyReport::from_counts("vertices", vec![1, 1, 1], false, 0).unwrap();
        assert!(short.non_stabilized, "two increments cannot witness stability");
    }

    #[test]
    fn projection_onto_the_subsystem_is_surjective() {
        let sub = dyck_in_gamma(1);
        let sup = gamma_shift(1);
        let pair = build_pair_lgs(&sub, &sup, &BuilderConfig::for_levels(2)).unwrap();
        let canonical = build_canonical_lgs(&sub, &BuilderConfig::for_levels(2)).unwrap();
        let checks = check_projection_inequality(&pair, &canonical);
        assert_eq!(checks, vec![true; 3]);
    }

    #[test]
    fn pair_word_vertices_count_label_paths() {
        assert_eq!(
            check_pairword_path_bijection(&golden_mean(), 6).unwrap(),
            vec![true; 7]
        );
    }

    #[test]
    fn csv_rows_cover_every_level() {
        let system = build_canonical_lgs(&golden_mean(), &BuilderConfig::for_levels(4)).unwrap();
        let report = lambda_entropy(&system).unwrap();
        let csv = report_csv(&system, &report);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "level,vertex_count,path_count,increment_estimate");
        assert_eq!(lines.len(), 6);
        assert!(lines[1].starts_with("0,1,1,"));
        assert!(lines[4].starts_with("3,2,"));
        assert!(lines[2].ends_with("0.693147"));
    }
}
