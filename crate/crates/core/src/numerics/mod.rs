//! Dense complex linear algebra: Hermitian eigendecomposition, least squares and
//! positive-definite solves.

mod eig;
mod lstsq;
mod matrix;
mod solve;

pub use eig::{eig_hermitian, HermitianEig, HERMITIAN_TOL};
pub use lstsq::{least_squares, LeastSquares, RANK_TOL};
pub use matrix::{dot_conj, norm2, ComplexMatrix, C64};
pub use solve::solve_hermitian_pd;

/// e^{j x}
#[inline]
pub fn cis(x: f64) -> C64 {
    C64::from_polar(1.0, x)
}
