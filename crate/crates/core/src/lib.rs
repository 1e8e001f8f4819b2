//! Sparse interaction models with hierarchy-inducing convex penalties, fitted by ADMM.
//!
//! The response is modeled as `y = W * B + noise`, where `W * B` sums
//! `B[j,k] * x_j * z_k` over an intercept, the main effects of two covariate blocks
//! and all their pairwise interactions. Row and column penalties on `B` make an
//! interaction enter the model only together with its main effects.

pub mod cli;
pub mod coef;
pub mod design;
pub mod dof;
pub mod error;
pub mod glm;
pub mod penalty;
pub mod postfit;
pub mod simulate;
pub mod solver;

pub use coef::CoefficientMatrix;
pub use design::{build_design, standardize, Dataset, DesignTensor, Standardizer};
pub use error::{Error, Result};
pub use penalty::{PenaltyKind, PenaltySpec};
pub use solver::{admm_fit, AdmmOptions, FactorCache, FitResult};
