//! Minimal tensor norms of unitary tuples and the numerics around the
//! min/max norm gap on `B(H) ⊗ B(H)`.
//!
//! * [`linalg`]: dense complex matrices, unitary tuples, traces.
//! * [`tuple_io`]: the `.utpl` binary format and its JSON mirror.
//! * [`ensembles`]: Haar and permutation-complement tuples.
//! * [`superop`]: matrix-free `||sum a_i ⊗ conj(b_i)||_min`, a dense
//!   oracle, and tracial lower-bound witnesses.
//! * [`words`]: words in the generators and their adjoints, moment tables,
//!   distances between distributions.
//! * [`harness`]: empirical `C(n)`, direct-sum tensors and ratio reports.

pub mod ensembles;
pub mod harness;
pub mod error;
pub mod lanczos;
pub mod linalg;
pub mod rng;
pub mod superop;
pub mod tuple_io;
pub mod words;

pub use error::{Error, Result};
pub use linalg::{check_unitary, ComplexMatrix, UnitaryTuple, C64};
pub use superop::{min_norm, BimultiplicationOperator, NormEstimate, SolverParams};
