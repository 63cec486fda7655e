//! Dense-matrix and distribution primitives shared by the test statistics
//! and the model kits.

mod chi2;
mod hac;
mod linalg;
mod rng;

pub use chi2::{chi2_quantile, chi2_sf, ln_gamma, regularized_gamma_p, regularized_gamma_q};
pub use hac::{newey_west, HacConfig};
pub use linalg::{
    cholesky_lower, duplication_map, kron, row_rank, sym_inverse, vec_of, vech, SymMatrix,
    PIVOT_REL_TOL,
};
pub use rng::{SeedSpec, StreamRng};
