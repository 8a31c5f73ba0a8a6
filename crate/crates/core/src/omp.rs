//! On-grid orthogonal matching pursuit over the waveform-matched delay dictionary.

use crate::error::{Error, Result};
use crate::numerics::{least_squares, norm2, ComplexMatrix, C64};
use crate::operator::{Measurement, QuadCsSystem};

#[derive(Clone, Debug)]
pub struct GridDictionary {
    pub spacing_s: f64,
    /// τ_g = g·Δτ, g = 1..=G.
    pub delays: Vec<f64>,
    pub columns: ComplexMatrix,
    pub norms: Vec<f64>,
}

impl GridDictionary {
    pub fn len(&self) -> usize {
        self.delays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delays.is_empty()
    }
}

/// G = ⌊τ_max / Δτ⌋ atoms on the delay grid.
pub fn build_grid_dictionary(sys: &QuadCsSystem, spacing_s: f64) -> Result<GridDictionary> {
    if !(spacing_s > 0.0) {
        return Err(Error::InvalidOption(format!("grid spacing {spacing_s}")));
    }
    let tau_max = sys
        .config()
        .tau_max_s
        .ok_or_else(|| Error::InvalidConfig("dictionary needs tau_max".into()))?;
    let g = (tau_max / spacing_s + 1e-9).floor() as usize;
    if g == 0 {
        return Err(Error::InvalidOption("grid spacing exceeds tau_max".into()));
    }
    let delays: Vec<f64> = (1..=g).map(|i| i as f64 * spacing_s).collect();
    let columns = sys.build_phi(&delays);
    let norms = (0..g).map(|c| norm2(&columns.column(c))).collect();
    Ok(GridDictionary {
        spacing_s,
        delays,
        columns,
        norms,
    })
}

#[derive(Clone, Debug)]
pub struct OmpResult {
    /// Selected atom indices, in selection order.
    pub indices: Vec<usize>,
    /// Ascending.
    pub delays: Vec<f64>,
    /// Paired with `delays`.
    pub gains: Vec<C64>,
    /// Residual norm after each iteration.
    pub residual_norms: Vec<f64>,
}

/// Exactly K greedy iterations with a least-squares refit after each selection.
pub fn run_omp(meas: &Measurement, dict: &GridDictionary, k: usize) -> Result<OmpResult> {
    let (l, g) = (dict.columns.rows(), dict.columns.cols());
    if meas.len() != l {
        return Err(Error::Dimension(format!(
            "measurement length {} != {l}",
            meas.len()
        )));
    }
    if k == 0 || k > g {
        return Err(Error::InvalidOption(format!("K = {k} outside 1..={g}")));
    }
    let mut selected: Vec<usize> = Vec::with_capacity(k);
    let mut residual = meas.values.clone();
    let mut gains = Vec::new();
    let mut residual_norms = Vec::with_capacity(k);
    for _ in 0..k {
        let corr = dict.columns.adjoint_matvec(&residual);
        let best = (0..g)
            .filter(|i| !selected.contains(i) && dict.norms[*i] > 0.0)
            .max_by(|&a, &b| {
                (corr[a].norm() / dict.norms[a]).total_cmp(&(corr[b].norm() / dict.norms[b]))
            })
            .ok_or(Error::RankDeficient {
                rank: selected.len(),
                cols: k,
            })?;
        selected.push(best);
        let sub = dict.columns.select_columns(&selected);
        let ls = least_squares(&sub, &meas.values)?;
        let fit = sub.matvec(&ls.x);
        residual = meas.values.iter().zip(&fit).map(|(a, b)| a - b).collect();
        residual_norms.push(norm2(&residual));
        gains = ls.x;
    }
    let mut pairs: Vec<(f64, C64)> = selected
        .iter()
        .map(|&i| dict.delays[i])
        .zip(gains)
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (delays, gains) = pairs.into_iter().unzip();
    Ok(OmpResult {
        indices: selected,
        delays,
        gains,
        residual_norms,
    })
}
