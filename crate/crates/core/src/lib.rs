//! Symbolic dynamics toolkit: shift spaces, their vertex-labeled transition
//! systems at finite resolution, growth-rate estimates, and strong shift
//! equivalence witnesses.
//!
//! The crate is organized bottom-up:
//!
//! * [`alphabet`], [`monoid`], [`subshift`] — alphabets, cancellation tables
//!   and shift spaces with a word-admissibility oracle;
//! * [`shannon`] — deterministic transition structures on left-context
//!   classes, and the per-level state spaces the builders work with;
//! * [`lgs`] — leveled transition systems (vertex sets per level, labeled
//!   step maps, and upward inclusions) together with their symbolic adjacency
//!   matrices;
//! * [`builders`] — construction of those systems from a shift, or from a
//!   shift sitting inside a larger one, plus an independent brute-force
//!   reference;
//! * [`entropy`] — growth-rate reports from vertex and path counts;
//! * [`sse`] — bipartite recodings of edge shifts and the resulting one-step
//!   strong shift equivalence witnesses;
//! * [`fixtures`] — the named example shifts used by the command line tool
//!   and the test suite.

pub mod alphabet;
pub mod builders;
pub mod doc;
pub mod entropy;
pub mod fixtures;
pub mod lgs;
pub mod monoid;
pub mod sse;
pub mod shannon;
pub mod subshift;
