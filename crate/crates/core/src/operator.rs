//! System constants, spreading codes, spectrum-matched atoms and the frequency-domain
//! QuadCS measurement map.

use crate::error::{Error, Result};
use crate::numerics::{cis, ComplexMatrix, C64};
use crate::signal_model::{BasebandTable, DenseSpectrum, GridLayout, Waveform};
use rand::Rng;
use std::f64::consts::PI;

const ROUND_TOL: f64 = 1e-9;

fn floor_tol(x: f64) -> f64 {
    (x + ROUND_TOL).floor()
}

fn ceil_tol(x: f64) -> f64 {
    (x - ROUND_TOL).ceil()
}

/// Inputs from which every other constant is derived.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemParams {
    pub bandwidth_hz: f64,
    pub cs_bandwidth_hz: f64,
    pub observation_s: f64,
    pub m: usize,
    pub tau_max_s: Option<f64>,
}

impl SystemParams {
    pub fn new(bandwidth_hz: f64, cs_bandwidth_hz: f64, observation_s: f64, m: usize) -> Self {
        Self {
            bandwidth_hz,
            cs_bandwidth_hz,
            observation_s,
            m,
            tau_max_s: None,
        }
    }

    pub fn with_tau_max(mut self, tau_max_s: f64) -> Self {
        self.tau_max_s = Some(tau_max_s);
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuadCsConfig {
    pub bandwidth_hz: f64,
    pub cs_bandwidth_hz: f64,
    pub observation_s: f64,
    /// Measurement length.
    pub l: usize,
    /// Snapshot length (array size), even.
    pub m: usize,
    /// Number of snapshots.
    pub n: usize,
    /// Spreading-code repetition frequency.
    pub fp_hz: f64,
    pub df_hz: f64,
    /// Highest code harmonic that folds into the sampled band.
    pub l0: usize,
    /// Length of the virtual (beamspace) array: 2·L0 + 2 − M.
    pub j: usize,
    pub tau_max_s: Option<f64>,
}

impl QuadCsConfig {
    pub fn derive(p: &SystemParams) -> Result<Self> {
        let (b, bcs, t, m) = (p.bandwidth_hz, p.cs_bandwidth_hz, p.observation_s, p.m);
        if m == 0 || m % 2 != 0 {
            return Err(Error::InvalidConfig(format!(
                "M = {m} must be even and positive"
            )));
        }
        if !(b > 0.0 && bcs > 0.0 && t > 0.0)
            || !(b.is_finite() && bcs.is_finite() && t.is_finite())
        {
            return Err(Error::InvalidConfig(
                "bandwidths and observation length must be positive".into(),
            ));
        }
        if bcs > b {
            return Err(Error::InvalidConfig(format!(
                "B_cs = {bcs} exceeds B = {b}"
            )));
        }
        let l = floor_tol(t * bcs / m as f64) as usize * m;
        if l < m {
            return Err(Error::InvalidConfig(format!(
                "T·B_cs = {} is shorter than M = {m}",
                t * bcs
            )));
        }
        let n = l / m;
        let fp = bcs / m as f64;
        let df = bcs / l as f64;
        let l0 = ceil_tol((b + bcs) / (2.0 * fp)) as usize - 1;
        // Every in-band comb frequency f_n + i·f_p must be a column of the factorization;
        // there are 2·L0 + 2 − M of them per snapshot.
        let j = 2 * l0 + 2 - m;
        if j < m {
            return Err(Error::InvalidConfig(format!(
                "virtual array length J = {j} below M = {m}"
            )));
        }
        let cfg = Self {
            bandwidth_hz: b,
            cs_bandwidth_hz: bcs,
            observation_s: t,
            l,
            m,
            n,
            fp_hz: fp,
            df_hz: df,
            l0,
            j,
            tau_max_s: p.tau_max_s,
        };
        if let Some(tm) = p.tau_max_s {
            if !(tm > 0.0) {
                return Err(Error::InvalidConfig(format!("tau_max = {tm}")));
            }
            let product = fp * tm;
            if product > n as f64 * (1.0 + ROUND_TOL) {
                return Err(Error::Ambiguity { product, n });
            }
        }
        Ok(cfg)
    }

    pub fn m0(&self) -> usize {
        self.m / 2
    }

    /// Nyquist delay resolution 1/B.
    pub fn tau0(&self) -> f64 {
        1.0 / self.bandwidth_hz
    }

    /// B / B_cs.
    pub fn undersampling(&self) -> f64 {
        self.bandwidth_hz / self.cs_bandwidth_hz
    }

    /// True when delays up to τ_max exceed one steering period 1/f_p, so that sector
    /// wrap counts are needed to resolve them.
    pub fn delays_wrap(&self) -> bool {
        self.tau_max_s
            .map_or(false, |tm| self.fp_hz * tm > 1.0 + ROUND_TOL)
    }

    /// Grid bin index of measurement row `l` (0-based): f = k·Δf.
    pub fn row_bin(&self, l: usize) -> i64 {
        l as i64 - (self.l / 2) as i64
    }

    pub fn row_freq(&self, l: usize) -> f64 {
        self.row_bin(l) as f64 * self.df_hz
    }

    pub fn grid_freqs(&self) -> Vec<f64> {
        (0..self.l).map(|l| self.row_freq(l)).collect()
    }

    /// Dense grid covering every frequency the measurement reads.
    pub fn dense_layout(&self) -> GridLayout {
        let reach = (self.l0 * self.n) as i64;
        let k_start = -((self.l / 2) as i64) - reach;
        let k_end = (self.l / 2) as i64 - 1 + reach;
        GridLayout {
            k_start,
            len: (k_end - k_start + 1) as usize,
            df: self.df_hz,
        }
    }

    /// Bins per code harmonic, f_p / Δf.
    pub fn harmonic_stride(&self) -> i64 {
        self.n as i64
    }

    /// Smallest chip count whose harmonics reach B.
    pub fn default_chip_count(&self) -> usize {
        2 * ceil_tol(self.bandwidth_hz / self.fp_hz) as usize
    }
}

/// Periodic ±1 spreading waveform p(t) and its Fourier coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct SpreadingCode {
    pub fp_hz: f64,
    pub chips: Vec<i8>,
    /// ρ̃_l for l = 0..=l_max; negative indices by conjugate symmetry.
    rho: Vec<C64>,
}

impl SpreadingCode {
    /// Rectangular chips with closed-form Fourier coefficients up to `l_max`.
    pub fn from_chips(fp_hz: f64, chips: Vec<i8>, l_max: usize) -> Result<Self> {
        if chips.is_empty() || chips.iter().any(|&c| c != 1 && c != -1) {
            return Err(Error::InvalidConfig(
                "chips must be a nonempty ±1 sequence".into(),
            ));
        }
        let nc = chips.len() as f64;
        let mut rho = Vec::with_capacity(l_max + 1);
        rho.push(C64::new(
            chips.iter().map(|&c| c as f64).sum::<f64>() / nc,
            0.0,
        ));
        for l in 1..=l_max {
            let lf = l as f64;
            let envelope = (PI * lf / nc).sin() / (PI * lf);
            let sum: C64 = chips
                .iter()
                .enumerate()
                .map(|(m, &c)| cis(-2.0 * PI * lf * (m as f64 + 0.5) / nc) * c as f64)
                .sum();
            rho.push(sum * envelope);
        }
        Ok(Self { fp_hz, chips, rho })
    }

    /// Inject coefficients ρ̃_0..ρ̃_lmax directly; ρ̃_0 must be real.
    pub fn from_coefficients(fp_hz: f64, nonnegative: Vec<C64>) -> Result<Self> {
        if nonnegative.is_empty() || nonnegative[0].im != 0.0 {
            return Err(Error::InvalidConfig("rho_0 must exist and be real".into()));
        }
        Ok(Self {
            fp_hz,
            chips: Vec::new(),
            rho: nonnegative,
        })
    }

    pub fn l_max(&self) -> usize {
        self.rho.len() - 1
    }

    /// ρ̃_l, zero beyond ±l_max.
    pub fn rho(&self, l: i64) -> C64 {
        let a = l.unsigned_abs() as usize;
        if a > self.l_max() {
            return C64::new(0.0, 0.0);
        }
        if l >= 0 {
            self.rho[a]
        } else {
            self.rho[a].conj()
        }
    }
}

/// Draw i.i.d. ±1 chips and compute ρ̃_l for |l| ≤ max(L0, ⌈B/f_p⌉).
pub fn gen_spreading_code<R: Rng + ?Sized>(
    cfg: &QuadCsConfig,
    n_chips: usize,
    rng: &mut R,
) -> Result<SpreadingCode> {
    let needed = cfg.default_chip_count();
    if n_chips < needed {
        return Err(Error::InvalidConfig(format!(
            "N_c = {n_chips} below 2·⌈B/f_p⌉ = {needed}"
        )));
    }
    let chips = (0..n_chips)
        .map(|_| if rng.gen::<bool>() { 1 } else { -1 })
        .collect();
    let l_max = cfg.l0.max(ceil_tol(cfg.bandwidth_hz / cfg.fp_hz) as usize);
    SpreadingCode::from_chips(cfg.fp_hz, chips, l_max)
}

/// B·Σ_{l=-L0}^{L0} ρ̃_l Ŝ₀(f − l f_p) e^{−j2π(f − l f_p)τ}, with Ŝ₀ evaluated directly.
pub fn atom_phi(
    cfg: &QuadCsConfig,
    code: &SpreadingCode,
    waveform: &Waveform,
    f: f64,
    tau: f64,
) -> C64 {
    let l0 = cfg.l0 as i64;
    let sum: C64 = (-l0..=l0)
        .map(|l| {
            let fl = f - l as f64 * cfg.fp_hz;
            code.rho(l) * waveform.eval_s0(fl) * cis(-2.0 * PI * fl * tau)
        })
        .sum();
    sum * cfg.bandwidth_hz
}

/// Sub-Nyquist frequency-domain samples ŝ_cs.
#[derive(Clone, Debug, PartialEq)]
pub struct Measurement {
    pub values: Vec<C64>,
}

impl Measurement {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// ŝ_cs[l] = B Σ_{l'} ρ̃_{l'} Ŝ(f_l − l' f_p), by exact grid lookups.
pub fn measure(
    cfg: &QuadCsConfig,
    code: &SpreadingCode,
    spec: &DenseSpectrum,
) -> Result<Measurement> {
    if ((spec.layout.df - cfg.df_hz) / cfg.df_hz).abs() > 1e-12 {
        return Err(Error::Dimension(format!(
            "spectrum spacing {} != Δf {}",
            spec.layout.df, cfg.df_hz
        )));
    }
    let l0 = cfg.l0 as i64;
    let stride = cfg.harmonic_stride();
    let mut values = Vec::with_capacity(cfg.l);
    for l in 0..cfg.l {
        let kl = cfg.row_bin(l);
        let mut acc = C64::new(0.0, 0.0);
        for lp in -l0..=l0 {
            let k = kl - lp * stride;
            let v = spec.value_at_bin(k).ok_or(Error::InsufficientSupport {
                needed: k,
                lo: spec.layout.k_start,
                hi: spec.layout.k_end(),
            })?;
            acc += code.rho(lp) * v;
        }
        values.push(acc * cfg.bandwidth_hz);
    }
    Ok(Measurement { values })
}

/// Configuration, code and waveform bundled with the tables every trial reuses.
#[derive(Clone, Debug)]
pub struct QuadCsSystem {
    cfg: QuadCsConfig,
    code: SpreadingCode,
    waveform: Waveform,
    baseband: BasebandTable,
    /// Per measurement row: (dense-grid index, B·ρ̃·Ŝ₀) for every nonzero term.
    rows: Vec<Vec<(usize, C64)>>,
}

impl QuadCsSystem {
    pub fn new(cfg: QuadCsConfig, code: SpreadingCode, waveform: Waveform) -> Result<Self> {
        if (code.fp_hz - cfg.fp_hz).abs() > 1e-9 * cfg.fp_hz {
            return Err(Error::InvalidConfig("code rate differs from f_p".into()));
        }
        if (waveform.spec().bandwidth_hz - cfg.bandwidth_hz).abs() > 1e-9 * cfg.bandwidth_hz {
            return Err(Error::InvalidConfig(
                "waveform bandwidth differs from B".into(),
            ));
        }
        let layout = cfg.dense_layout();
        let baseband = BasebandTable::new(&waveform, layout);
        let l0 = cfg.l0 as i64;
        let rows = (0..cfg.l)
            .map(|l| {
                let kl = cfg.row_bin(l);
                (-l0..=l0)
                    .filter_map(|lp| {
                        let k = kl - lp * cfg.harmonic_stride();
                        let idx = layout
                            .index_of(k)
                            .expect("dense layout covers all harmonics");
                        let coef = code.rho(lp) * baseband.values()[idx] * cfg.bandwidth_hz;
                        (coef.norm() > 0.0).then_some((idx, coef))
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            cfg,
            code,
            waveform,
            baseband,
            rows,
        })
    }

    pub fn config(&self) -> &QuadCsConfig {
        &self.cfg
    }

    pub fn code(&self) -> &SpreadingCode {
        &self.code
    }

    pub fn waveform(&self) -> &Waveform {
        &self.waveform
    }

    pub fn baseband(&self) -> &BasebandTable {
        &self.baseband
    }

    /// Φ̂(τ): column k is the atom at τ_k over the measurement grid.
    pub fn build_phi(&self, delays: &[f64]) -> ComplexMatrix {
        let layout = self.baseband.layout();
        let mut phi = ComplexMatrix::zeros(self.cfg.l, delays.len());
        let mut ramp = vec![C64::new(0.0, 0.0); layout.len];
        for (c, &tau) in delays.iter().enumerate() {
            for (i, r) in ramp.iter_mut().enumerate() {
                *r = cis(-2.0 * PI * ((layout.k_start + i as i64) as f64 * layout.df * tau));
            }
            for (l, terms) in self.rows.iter().enumerate() {
                phi[(l, c)] = terms.iter().map(|&(i, coef)| coef * ramp[i]).sum();
            }
        }
        phi
    }

    pub fn measure(&self, spec: &DenseSpectrum) -> Result<Measurement> {
        measure(&self.cfg, &self.code, spec)
    }

    /// Noise-free envelope spectrum of a scene on the dense grid.
    pub fn scene_spectrum(&self, delays: &[f64], gains: &[C64]) -> DenseSpectrum {
        self.baseband.synthesize(delays, gains)
    }
}
