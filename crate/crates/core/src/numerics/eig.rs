use super::matrix::{ComplexMatrix, C64};
use crate::error::{Error, Result};

/// Asymmetry tolerated before a matrix is rejected as non-Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-8;
const OFF_DIAGONAL_TOL: f64 = 1e-13;
const MAX_SWEEPS: usize = 100;

#[derive(Clone, Debug)]
pub struct HermitianEig {
    /// Descending.
    pub values: Vec<f64>,
    /// Column `i` pairs with `values[i]`.
    pub vectors: ComplexMatrix,
}

impl HermitianEig {
    /// Eigenvectors of the `count` largest eigenvalues, as columns.
    pub fn leading(&self, count: usize) -> ComplexMatrix {
        let idx: Vec<usize> = (0..count).collect();
        self.vectors.select_columns(&idx)
    }

    /// Eigenvectors of the `count` smallest eigenvalues, as columns, smallest last.
    pub fn trailing(&self, count: usize) -> ComplexMatrix {
        let n = self.values.len();
        let idx: Vec<usize> = (n - count..n).collect();
        self.vectors.select_columns(&idx)
    }
}

/// Eigendecomposition of a Hermitian matrix by cyclic two-sided Jacobi rotations.
///
/// Each eigenvector is scaled so that its largest-magnitude entry is real positive.
pub fn eig_hermitian(a: &ComplexMatrix) -> Result<HermitianEig> {
    if !a.is_square() || a.rows() == 0 {
        return Err(Error::Dimension(format!(
            "eig of {}x{} matrix",
            a.rows(),
            a.cols()
        )));
    }
    let asym = a.hermitian_asymmetry();
    if asym > HERMITIAN_TOL {
        return Err(Error::NotHermitian { asymmetry: asym });
    }
    let n = a.rows();
    let mut h = a.hermitian_part();
    for i in 0..n {
        h[(i, i)].im = 0.0;
    }
    let mut v = ComplexMatrix::identity(n);
    let total = h.frobenius_norm();

    let mut converged = n == 1 || total == 0.0;
    let mut sweeps = 0;
    while !converged {
        if sweeps == MAX_SWEEPS {
            return Err(Error::NoConvergence { sweeps });
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                rotate(&mut h, &mut v, p, q);
            }
        }
        sweeps += 1;
        converged = off_diagonal(&h) <= OFF_DIAGONAL_TOL * total;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| h[(j, j)].re.total_cmp(&h[(i, i)].re));
    let values = order.iter().map(|&i| h[(i, i)].re).collect();
    let mut vectors = v.select_columns(&order);
    for c in 0..n {
        fix_phase(&mut vectors, c);
    }
    Ok(HermitianEig { values, vectors })
}

fn off_diagonal(h: &ComplexMatrix) -> f64 {
    let n = h.rows();
    let mut s = 0.0;
    for r in 0..n {
        for c in 0..n {
            if r != c {
                s += h[(r, c)].norm_sqr();
            }
        }
    }
    s.sqrt()
}

/// Zero h[p][q] with the unitary U = diag(1, e^{-i phi}) * [[c, s], [-s, c]] acting on (p, q).
fn rotate(h: &mut ComplexMatrix, v: &mut ComplexMatrix, p: usize, q: usize) {
    let apq = h[(p, q)];
    let g = apq.norm();
    if g == 0.0 {
        return;
    }
    let app = h[(p, p)].re;
    let aqq = h[(q, q)].re;
    let theta = (aqq - app) / (2.0 * g);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let t = if theta == 0.0 { 1.0 } else { t };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let e = apq.conj() / g; // e^{-i phi}

    // U entries
    let upp = C64::new(c, 0.0);
    let upq = C64::new(s, 0.0);
    let uqp = -e * s;
    let uqq = e * c;

    let n = h.rows();
    // H <- H U (columns p, q)
    for r in 0..n {
        let hp = h[(r, p)];
        let hq = h[(r, q)];
        h[(r, p)] = hp * upp + hq * uqp;
        h[(r, q)] = hp * upq + hq * uqq;
    }
    // H <- U^H H (rows p, q)
    for k in 0..n {
        let hp = h[(p, k)];
        let hq = h[(q, k)];
        h[(p, k)] = upp.conj() * hp + uqp.conj() * hq;
        h[(q, k)] = upq.conj() * hp + uqq.conj() * hq;
    }
    h[(p, q)] = C64::new(0.0, 0.0);
    h[(q, p)] = C64::new(0.0, 0.0);
    h[(p, p)].im = 0.0;
    h[(q, q)].im = 0.0;
    for r in 0..n {
        let vp = v[(r, p)];
        let vq = v[(r, q)];
        v[(r, p)] = vp * upp + vq * uqp;
        v[(r, q)] = vp * upq + vq * uqq;
    }
}

fn fix_phase(v: &mut ComplexMatrix, c: usize) {
    let n = v.rows();
    let mut best = 0;
    let mut best_mag = -1.0;
    for r in 0..n {
        let m = v[(r, c)].norm();
        if m > best_mag {
            best_mag = m;
            best = r;
        }
    }
    if best_mag <= 0.0 {
        return;
    }
    let phase = v[(best, c)].conj() / best_mag;
    for r in 0..n {
        v[(r, c)] *= phase;
    }
    v[(best, c)].im = 0.0;
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(n: usize, rng: &mut impl Rng) -> ComplexMatrix {
        let a = ComplexMatrix::from_fn(n, n, |_, _| {
            C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        (&a + &a.adjoint()).scale_real(0.5)
    }

    #[test]
    fn identity_has_unit_eigenvalues() {
        let e = eig_hermitian(&ComplexMatrix::identity(2)).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0]);
    }

    #[test]
    fn diagonal_sorted_descending_with_basis_vectors() {
        let d = ComplexMatrix::diag(&[C64::new(1.0, 0.0), C64::new(3.0, 0.0)]);
        let e = eig_hermitian(&d).unwrap();
        assert_eq!(e.values, vec![3.0, 1.0]);
        assert_eq!(e.vectors[(1, 0)], C64::new(1.0, 0.0));
        assert_eq!(e.vectors[(0, 1)], C64::new(1.0, 0.0));
    }

    #[test]
    fn random_8x8_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_hermitian(8, &mut rng);
        let e = eig_hermitian(&a).unwrap();
        let lam: Vec<C64> = e.values.iter().map(|&x| C64::new(x, 0.0)).collect();
        let rec = &e.vectors.scale_columns(&lam) * &e.vectors.adjoint();
        assert!((&a - &rec).frobenius_norm() / a.frobenius_norm() <= 1e-12);
        let gram = &e.vectors.adjoint() * &e.vectors;
        assert!((&gram - &ComplexMatrix::identity(8)).max_abs() <= 1e-10);
    }

    #[test]
    fn largest_component_is_real_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_hermitian(6, &mut rng);
        let e = eig_hermitian(&a).unwrap();
        for c in 0..6 {
            let col = e.vectors.column(c);
            let (i, _) = col
                .iter()
                .enumerate()
                .max_by(|x, y| x.1.norm().total_cmp(&y.1.norm()))
                .unwrap();
            assert_eq!(col[i].im, 0.0);
            assert!(col[i].re > 0.0);
        }
    }

    #[test]
    fn rejects_non_hermitian() {
        let a = ComplexMatrix::from_row_major(
            2,
            2,
            vec![
                C64::new(1.0, 0.0),
                C64::new(1.0, 0.0),
                C64::new(0.0, 0.0),
                C64::new(1.0, 0.0),
            ],
        );
        assert!(matches!(eig_hermitian(&a), Err(Error::NotHermitian { .. })));
    }
}
