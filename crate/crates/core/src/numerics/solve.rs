use super::matrix::{ComplexMatrix, C64};
use crate::error::{Error, Result};

/// Solve (A + ridge I) X = B by Cholesky factorization.
pub fn solve_hermitian_pd(
    a: &ComplexMatrix,
    b: &ComplexMatrix,
    ridge: f64,
) -> Result<ComplexMatrix> {
    let n = a.rows();
    if !a.is_square() || b.rows() != n {
        return Err(Error::Dimension(format!(
            "solve: A is {}x{}, B is {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    if ridge < 0.0 || !ridge.is_finite() {
        return Err(Error::InvalidOption(format!(
            "ridge must be nonnegative, got {ridge}"
        )));
    }
    let asym = a.hermitian_asymmetry();
    if asym > super::eig::HERMITIAN_TOL {
        return Err(Error::NotHermitian { asymmetry: asym });
    }

    // Lower-triangular L with A + ridge I = L L^H.
    let mut l = ComplexMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)].re + ridge;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if !(d > 0.0) {
            return Err(Error::NotPositiveDefinite { pivot: j, value: d });
        }
        let djj = d.sqrt();
        l[(j, j)] = C64::new(djj, 0.0);
        for i in j + 1..n {
            // Use the lower triangle of the Hermitian part.
            let mut s = (a[(i, j)] + a[(j, i)].conj()) * 0.5;
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / djj;
        }
    }

    let m = b.cols();
    let mut x = b.clone();
    for c in 0..m {
        // Forward: L y = b
        for i in 0..n {
            let mut s = x[(i, c)];
            for k in 0..i {
                s -= l[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
        // Backward: L^H x = y
        for i in (0..n).rev() {
            let mut s = x[(i, c)];
            for k in i + 1..n {
                s -= l[(k, i)].conj() * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
    }
    Ok(x)
}
