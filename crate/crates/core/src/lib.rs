//! Accuracy-controlled principal-eigenpair solver for the criticality
//! problem of slab-geometry discrete-ordinates transport.
//!
//! The crate is organized around a fixed reference discretization. Matrix-free
//! transport operators ([`ops`]) feed certified source solves ([`solver`]),
//! which realize the criticality map `C = B^-1 F` within requested
//! tolerances. On top of that sit a globally convergent power iteration
//! ([`power`]), a locally quadratic Newton scheme with scheduled update
//! tolerances ([`newton`]), and a contour-quadrature route to the shifted
//! solves ([`contour`]). Everything quantitative is cross-checked against a
//! dense spectral oracle ([`spectral`]) that only communicates through
//! residual certificates.

pub mod contour;
pub mod dense;
pub mod error;
pub mod field;
pub mod newton;
pub mod ops;
pub mod phase;
pub mod pipeline;
pub mod power;
pub mod scenario;
pub mod solver;
pub mod space;
pub mod spectral;

pub use dense::{DenseOperator, Metric};
pub use error::{Error, Result};
pub use field::{ComplexStateField, StateField};
pub use newton::{EigenIterate, NewtonTrace, ToleranceSchedule, UpdateBackend};
pub use ops::{AdjointKind, MatKind, OperatorSet};
pub use phase::{
    build_grid, check_assumptions, compute_rho, AssumptionReport, OpticalField, PhaseGrid,
};
pub use power::{PowerTrace, TolerancePolicy};
pub use scenario::Scenario;
pub use solver::{apply_c, apply_c_adjoint, solve_b, CertifiedMap, CertifiedResult, TransportMap};
pub use space::{PhaseSpace, Weighting};
pub use spectral::{ConstantBudget, SpectralReport};
