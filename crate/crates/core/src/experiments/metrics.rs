use crate::error::{Error, Result};
use crate::signal_model::DenseSpectrum;

/// Sorted index-wise pairing of true and estimated delays.
#[derive(Clone, Debug, PartialEq)]
pub struct DelayMatch {
    pub truth: Vec<f64>,
    pub estimate: Vec<f64>,
    /// estimate − truth, per pair.
    pub errors: Vec<f64>,
    /// Every |error| ≤ τ₀.
    pub success: bool,
}

pub fn match_delays(truth: &[f64], estimate: &[f64], tau0: f64) -> Result<DelayMatch> {
    if truth.len() != estimate.len() {
        return Err(Error::CountMismatch {
            expected: truth.len(),
            got: estimate.len(),
        });
    }
    let mut t = truth.to_vec();
    let mut e = estimate.to_vec();
    t.sort_by(f64::total_cmp);
    e.sort_by(f64::total_cmp);
    let errors: Vec<f64> = e.iter().zip(&t).map(|(a, b)| a - b).collect();
    let success = errors.iter().all(|x| x.abs() <= tau0);
    Ok(DelayMatch {
        truth: t,
        estimate: e,
        errors,
        success,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Metrics {
    /// sqrt(mean err²) / τ₀.
    pub rrms_tde: f64,
    /// ||Ŝ − Ŝ_rec|| / ||Ŝ|| over the band.
    pub rrms_sr: f64,
    /// Σ|Ŝ|²·Δf over the band.
    pub signal_energy: f64,
    /// Σ|Ŝ − Ŝ_rec|²·Δf over the band.
    pub error_energy: f64,
    /// Input SNR when a noisy spectrum was supplied.
    pub isnr: Option<f64>,
}

impl Metrics {
    /// Per-trial RSNR = signal / error energy = 1 / RRMS-SR².
    pub fn rsnr(&self) -> f64 {
        self.signal_energy / self.error_energy
    }

    pub fn rsnr_db(&self) -> f64 {
        10.0 * self.rsnr().log10()
    }
}

pub fn rrms_tde(errors: &[f64], tau0: f64) -> f64 {
    if errors.is_empty() {
        return f64::NAN;
    }
    (errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64).sqrt() / tau0
}

/// Riemann sums over the in-band bins of `truth`'s grid.
pub fn compute_metrics(
    pairs: Option<&DelayMatch>,
    tau0: f64,
    truth: &DenseSpectrum,
    recon: &DenseSpectrum,
    noisy: Option<&DenseSpectrum>,
    bandwidth_hz: f64,
) -> Result<Metrics> {
    if truth.layout != recon.layout {
        return Err(Error::Dimension(
            "reconstruction grid differs from truth grid".into(),
        ));
    }
    let band = truth.in_band_indices(bandwidth_hz);
    let df = truth.layout.df;
    let signal_energy = band
        .iter()
        .map(|&i| truth.values[i].norm_sqr())
        .sum::<f64>()
        * df;
    if !(signal_energy > 0.0) {
        return Err(Error::ZeroEnergy);
    }
    let error_energy = band
        .iter()
        .map(|&i| (truth.values[i] - recon.values[i]).norm_sqr())
        .sum::<f64>()
        * df;
    let isnr = match noisy {
        Some(n) => {
            if n.layout != truth.layout {
                return Err(Error::Dimension(
                    "noisy grid differs from truth grid".into(),
                ));
            }
            let noise = band
                .iter()
                .map(|&i| (n.values[i] - truth.values[i]).norm_sqr())
                .sum::<f64>()
                * df;
            Some(signal_energy / noise)
        }
        None => None,
    };
    Ok(Metrics {
        rrms_tde: pairs.map_or(f64::NAN, |p| rrms_tde(&p.errors, tau0)),
        rrms_sr: (error_energy / signal_energy).sqrt(),
        signal_energy,
        error_energy,
        isnr,
    })
}
