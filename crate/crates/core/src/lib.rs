//! Bounds on probabilities of causation for multivalued treatments and
//! effects.
//!
//! Given an experimental distribution `P(y_i | do(x_j))` and an
//! observational joint `P(x_j, y_i)`, the [`engine`] computes closed-form
//! lower/upper bounds for any conjunction of counterfactual events
//! `Y_{x_j} = y_i`, optionally joint with (or conditioned on) observed
//! values of `X` and `Y`. The [`oracle`] solves the same question exactly
//! with a linear program over response types and serves as ground truth.
//!
//! ```
//! use causation_bounds::{engine, fixtures, query};
//!
//! let data = fixtures::load("treatment").unwrap();
//! let q = query::parse_query("P(y3_x1, y1_x2, y2_x3)", data.space()).unwrap();
//! let result = engine::bound(&data, &q).unwrap();
//! assert!(result.interval.hi < 0.0995);
//! ```

pub mod cli;
pub mod engine;
pub mod error;
pub mod fixtures;
pub mod frechet;
pub mod model;
pub mod oracle;
pub mod query;
pub mod simgen;
pub mod simplex;

pub use error::{Error, Result};
pub use frechet::Interval;
pub use model::{Dataset, ProblemSpace};
pub use query::{CanonicalQuery, Query};

/// Slack used when comparing derived probabilities (infeasibility checks,
/// containment tests, zero-evidence detection).
pub const EPS_NUM: f64 = 1e-9;
