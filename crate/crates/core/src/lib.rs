//! Tie-aware evaluation of rankings produced by low-precision scoring.
//!
//! Reduced-precision arithmetic (BF16, FP16, ...) collapses nearby relevance
//! scores onto the same grid value. Sorting then has to break the resulting
//! ties somehow, and a single arbitrary order can swing a metric by several
//! points. This crate emulates the formats bit-exactly, scores logits in them,
//! groups tied candidates, and reports each metric as the exact expectation
//! over uniformly random tie orders together with its best and worst case.
//!
//! ```
//! use tierank::{MetricKind, ScoredCandidate, Query};
//!
//! // two candidates tied at the top, the relevant one second in input order
//! let q = Query::new(vec![
//!     ScoredCandidate::new("a", 0.9, false, 0),
//!     ScoredCandidate::new("b", 0.9, true, 1),
//!     ScoredCandidate::new("c", 0.1, false, 2),
//! ])
//! .unwrap();
//! let r = q.report(MetricKind::Rr, 10).unwrap();
//! assert_eq!(r.oblivious, 0.5);
//! assert_eq!(r.expected, 0.75);
//! assert_eq!((r.minimum, r.maximum), (0.5, 1.0));
//! ```

pub mod cli;
pub mod error;
pub mod floatsim;
pub mod io;
pub mod metrics;
pub mod oracle;
pub mod scoring;
pub mod synth;
pub mod ties;

pub use error::{Error, Result};
pub use floatsim::{qfunc, qop, quantize, ulp, BinaryOp, PrecisionFormat, QuantizedValue, UnaryFn};
pub use metrics::{aggregate, AggregateReport, MetricKind, MetricReport, Query, QueryReport};
pub use oracle::{enumerate_metric, EnumerationBudget};
pub use scoring::{score, LogitInput, RelevanceScore, ScoringFunction, ScoringRegime};
pub use ties::{group_ties, RankedList, ScoredCandidate, TieGroup, TieProfile};
