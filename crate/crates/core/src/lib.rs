//! Convex relaxation of multiclass image labeling on regular 2-D grids.
//!
//! The crate solves the relaxed labeling problem
//!
//! ```text
//!   min_u  Σ_x <u(x), s(x)> h²  +  Σ_x Ψ(Du(x)) h²,    u(x) ∈ Δ_l
//! ```
//!
//! with a first-order primal-dual method ([`solver`]), turns relaxed
//! solutions into integral labelings with randomized multiclass rounding
//! ([`rounding`]), and reports a priori and a posteriori quality
//! certificates ([`certify`]).
//!
//! Layout conventions shared by every container:
//!
//! * pixels are stored row-major (x fastest, then y);
//! * per-pixel label vectors are contiguous (label index fastest);
//! * per-pixel `dim × l` matrices are stored row by row, i.e. entry
//!   `(k, i)` (spatial coordinate `k`, label `i`) lives at `k * l + i`.
//!
//! Label indices are zero-based in the API.

pub mod certify;
pub mod error;
pub mod grid;
pub mod metric;
pub mod reduce;
pub mod regularizer;
pub mod rounding;
pub mod simplex;
pub mod solver;

pub use error::{Error, Result};
pub use grid::{
    datacost, embed_integral, DataTerm, DualField, GradientField, GridShape, IntegralField,
    MatrixField, SimplexField, DIM, FEAS_EPS,
};
pub use metric::{validate_metric, Metric, MetricViolation};
pub use regularizer::{DlocConfig, LambdaBounds, RegularizerKind};
pub use rounding::RngSpec;
pub use simplex::project_simplex;
pub use solver::{EnergyReport, SolverConfig};

/// Version of this crate, recorded in serialized reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
