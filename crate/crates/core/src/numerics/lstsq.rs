use super::matrix::{ComplexMatrix, C64};
use crate::error::{Error, Result};

/// Relative size of a pivot of R below which a column counts as dependent.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct LeastSquares {
    pub x: Vec<C64>,
    /// |R_00| / |R_nn| of the pivoted factorization.
    pub condition: f64,
    pub residual_norm: f64,
}

/// Solve min ||A x - b|| by Householder QR with column pivoting.
pub fn least_squares(a: &ComplexMatrix, b: &[C64]) -> Result<LeastSquares> {
    let (m, n) = (a.rows(), a.cols());
    if b.len() != m {
        return Err(Error::Dimension(format!(
            "lstsq: A is {m}x{n}, b has {}",
            b.len()
        )));
    }
    if m < n || n == 0 {
        return Err(Error::Dimension(format!(
            "lstsq needs m >= n >= 1, got {m}x{n}"
        )));
    }

    // Column-major working copy.
    let mut cols: Vec<Vec<C64>> = (0..n).map(|c| a.column(c)).collect();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut rhs = b.to_vec();
    let mut diag = vec![C64::new(0.0, 0.0); n];
    let mut col_norms: Vec<f64> = cols.iter().map(|c| super::matrix::norm2(c)).collect();

    for k in 0..n {
        // Pivot on the remaining column with the largest trailing norm.
        let p = (k..n)
            .max_by(|&i, &j| col_norms[i].total_cmp(&col_norms[j]))
            .unwrap();
        cols.swap(k, p);
        perm.swap(k, p);
        col_norms.swap(k, p);

        let alpha_norm = super::matrix::norm2(&cols[k][k..]);
        if alpha_norm == 0.0 {
            diag[k] = C64::new(0.0, 0.0);
            break;
        }
        let x0 = cols[k][k];
        let phase = if x0.norm() == 0.0 {
            C64::new(1.0, 0.0)
        } else {
            x0 / x0.norm()
        };
        let beta = -phase * alpha_norm;
        // v = x - beta e1, H = I - 2 v v^H / (v^H v)
        let mut v: Vec<C64> = cols[k][k..].to_vec();
        v[0] -= beta;
        let vnorm2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        diag[k] = beta;
        cols[k][k] = beta;
        for z in cols[k][k + 1..].iter_mut() {
            *z = C64::new(0.0, 0.0);
        }
        if vnorm2 > 0.0 {
            for col in cols.iter_mut().skip(k + 1) {
                apply_reflector(&v, vnorm2, &mut col[k..]);
            }
            apply_reflector(&v, vnorm2, &mut rhs[k..]);
        }
        for j in k + 1..n {
            col_norms[j] = super::matrix::norm2(&cols[j][k + 1..]);
        }
    }

    let r00 = diag[0].norm();
    let rank = diag
        .iter()
        .take_while(|d| d.norm() > RANK_TOL * r00)
        .count();
    if rank < n {
        return Err(Error::RankDeficient { rank, cols: n });
    }

    // Back substitution on R z = Q^H b.
    let mut z = vec![C64::new(0.0, 0.0); n];
    for i in (0..n).rev() {
        let mut s = rhs[i];
        for j in i + 1..n {
            s -= cols[j][i] * z[j];
        }
        z[i] = s / cols[i][i];
    }
    let mut x = vec![C64::new(0.0, 0.0); n];
    for (k, &orig) in perm.iter().enumerate() {
        x[orig] = z[k];
    }
    let residual_norm = super::matrix::norm2(&rhs[n..]);
    Ok(LeastSquares {
        x,
        condition: r00 / diag[n - 1].norm(),
        residual_norm,
    })
}

fn apply_reflector(v: &[C64], vnorm2: f64, y: &mut [C64]) {
    let proj: C64 = v.iter().zip(y.iter()).map(|(a, b)| a.conj() * b).sum();
    let f = proj * (2.0 / vnorm2);
    for (yi, vi) in y.iter_mut().zip(v) {
        *yi -= vi * f;
    }
}
