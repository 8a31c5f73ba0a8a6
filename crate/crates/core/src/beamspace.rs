//! Snapshot extraction and the factorization Φ̂^[n] = P·Ŝ^[n]·W(θ)·D^[n] that turns delay
//! estimation into beamspace direction finding.

use crate::error::{Error, Result};
use crate::numerics::{cis, ComplexMatrix, C64};
use crate::operator::{Measurement, QuadCsConfig, QuadCsSystem};
use std::f64::consts::PI;

/// N decimated sequences of length M; entry m of snapshot n is ŝ_cs[m·N + n] (0-based).
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotSet {
    pub snapshots: Vec<Vec<C64>>,
}

impl SnapshotSet {
    pub fn count(&self) -> usize {
        self.snapshots.len()
    }

    /// Inverse of [`extract_snapshots`].
    pub fn interleave(&self) -> Vec<C64> {
        let n = self.snapshots.len();
        let m = self.snapshots.first().map_or(0, Vec::len);
        let mut out = vec![C64::new(0.0, 0.0); n * m];
        for (ni, snap) in self.snapshots.iter().enumerate() {
            for (mi, v) in snap.iter().enumerate() {
                out[mi * n + ni] = *v;
            }
        }
        out
    }
}

pub fn extract_snapshots_raw(values: &[C64], m: usize, n: usize) -> Result<SnapshotSet> {
    if values.len() != m * n {
        return Err(Error::Dimension(format!(
            "measurement length {} != M·N = {}",
            values.len(),
            m * n
        )));
    }
    let snapshots = (0..n)
        .map(|ni| (0..m).map(|mi| values[mi * n + ni]).collect())
        .collect();
    Ok(SnapshotSet { snapshots })
}

pub fn extract_snapshots(meas: &Measurement, cfg: &QuadCsConfig) -> Result<SnapshotSet> {
    extract_snapshots_raw(&meas.values, cfg.m, cfg.n)
}

/// Factors of the per-snapshot measurement model.
#[derive(Clone, Debug)]
pub struct BeamspaceModel {
    /// M×J partial Toeplitz, P[m, j] = B·ρ̃_{−L0+m+j}.
    pub p: ComplexMatrix,
    /// Diagonal of Ŝ^[n]: Ŝ₀(f_n + (L0 − j)·f_p), j = 0..J.
    pub s_diag: Vec<Vec<C64>>,
    /// B^[n] = P·Ŝ^[n].
    pub b: Vec<ComplexMatrix>,
}

impl BeamspaceModel {
    /// Build from explicit B^[n] matrices (test fixtures).
    pub fn from_matrices(b: Vec<ComplexMatrix>) -> Result<Self> {
        let first = b
            .first()
            .ok_or_else(|| Error::Dimension("no snapshot matrices".into()))?;
        let (m, j) = (first.rows(), first.cols());
        if b.iter().any(|x| x.rows() != m || x.cols() != j) {
            return Err(Error::Dimension("snapshot matrices differ in shape".into()));
        }
        Ok(Self {
            p: ComplexMatrix::zeros(m, j),
            s_diag: Vec::new(),
            b,
        })
    }

    pub fn m(&self) -> usize {
        self.b[0].rows()
    }

    pub fn j(&self) -> usize {
        self.b[0].cols()
    }

    pub fn n(&self) -> usize {
        self.b.len()
    }
}

pub fn assemble_model(sys: &QuadCsSystem) -> BeamspaceModel {
    let cfg = sys.config();
    let (m, j, l0) = (cfg.m, cfg.j, cfg.l0 as i64);
    let p = ComplexMatrix::from_fn(m, j, |mi, ji| {
        sys.code().rho(-l0 + (mi + ji) as i64) * cfg.bandwidth_hz
    });
    let stride = cfg.harmonic_stride();
    let s_diag: Vec<Vec<C64>> = (0..cfg.n)
        .map(|ni| {
            let kn = cfg.row_bin(ni);
            (0..j)
                .map(|ji| {
                    let k = kn + (l0 - ji as i64) * stride;
                    sys.baseband()
                        .at_bin(k)
                        .expect("dense layout covers the beamspace comb")
                })
                .collect()
        })
        .collect();
    let b = s_diag.iter().map(|d| p.scale_columns(d)).collect();
    BeamspaceModel { p, s_diag, b }
}

/// Column k = [1, e^{jθ_k}, …, e^{j(J−1)θ_k}].
pub fn steering_w(thetas: &[f64], j: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(j, thetas.len(), |r, c| cis(r as f64 * thetas[c]))
}

pub fn steering_vector(theta: f64, j: usize) -> Vec<C64> {
    let step = cis(theta);
    let mut out = Vec::with_capacity(j);
    let mut z = C64::new(1.0, 0.0);
    for r in 0..j {
        // Resynchronise to bound the drift of the rotating phasor.
        if r % 32 == 0 {
            z = cis(r as f64 * theta);
        }
        out.push(z);
        z *= step;
    }
    out
}

/// θ = 2π f_p τ, unreduced.
pub fn delay_to_theta(cfg: &QuadCsConfig, tau: f64) -> f64 {
    2.0 * PI * cfg.fp_hz * tau
}

/// Diagonal of D^[n] for snapshot `n` (0-based): e^{−j2π f_p ((L0 − M0) + n/N) τ_k}.
pub fn phase_d(cfg: &QuadCsConfig, n: usize, delays: &[f64]) -> Vec<C64> {
    let offset = (cfg.l0 - cfg.m0()) as f64 + n as f64 / cfg.n as f64;
    delays
        .iter()
        .map(|&t| cis(-2.0 * PI * cfg.fp_hz * offset * t))
        .collect()
}

/// B^[n]·W(θ)·D^[n], the model-side M×K block of Φ̂ for snapshot n.
pub fn snapshot_operator(
    model: &BeamspaceModel,
    cfg: &QuadCsConfig,
    n: usize,
    delays: &[f64],
) -> ComplexMatrix {
    let thetas: Vec<f64> = delays.iter().map(|&t| delay_to_theta(cfg, t)).collect();
    (&model.b[n] * &steering_w(&thetas, cfg.j)).scale_columns(&phase_d(cfg, n, delays))
}
