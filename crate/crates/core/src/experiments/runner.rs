use super::metrics::{compute_metrics, match_delays};
use crate::beamspace::{assemble_model, BeamspaceModel};
use crate::error::{Error, Result};
use crate::glsr::{run_glsr, GlsrOptions};
use crate::interpolation::{BeamformerSpace, DesignOptions, InterpolationDesign, Sector};
use crate::numerics::C64;
use crate::omp::{build_grid_dictionary, run_omp, GridDictionary};
use crate::operator::{gen_spreading_code, QuadCsConfig, QuadCsSystem, SystemParams};
use crate::signal_model::{
    add_noise, random_scene, GainMode, Isnr, TargetScene, Waveform, WaveformSpec,
    DEFAULT_OVERSAMPLE,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    /// GLSR with sectors of ±τ₀ around the true delays.
    Glsr1,
    /// GLSR with sectors of ±2τ₀ around the OMP-1 estimates.
    Glsr2,
    /// OMP on a τ₀ grid.
    Omp1,
    /// OMP on a τ₀/2 grid.
    Omp2,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Glsr1, Method::Glsr2, Method::Omp1, Method::Omp2];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Glsr1 => "GLSR-1",
            Method::Glsr2 => "GLSR-2",
            Method::Omp1 => "OMP-1",
            Method::Omp2 => "OMP-2",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidOption(format!("unknown method {s:?}")))
    }
}

/// Hardware and waveform constants shared by every cell.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemSetup {
    pub bandwidth_hz: f64,
    pub observation_s: f64,
    pub tau_max_s: f64,
    pub pulse_width_s: f64,
    /// Chips per code period; `None` picks the minimum 2⌈B/f_p⌉.
    pub n_chips: Option<usize>,
    pub oversample: usize,
}

impl Default for SystemSetup {
    fn default() -> Self {
        Self {
            bandwidth_hz: 50e6,
            observation_s: 20.48e-6,
            tau_max_s: 10.24e-6,
            pulse_width_s: 10.24e-6,
            n_chips: None,
            oversample: DEFAULT_OVERSAMPLE,
        }
    }
}

/// How delays are drawn.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Spacing {
    /// Uniform with pairwise gaps ≥ this many τ₀.
    MinSep(f64),
    /// τ₁ uniform, then τ_{i+1} = τ_i + s·τ₀.
    Fixed(f64),
}

impl Spacing {
    pub fn tau0_units(&self) -> f64 {
        match self {
            Spacing::MinSep(s) | Spacing::Fixed(s) => *s,
        }
    }
}

/// One point of a sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cell {
    pub cs_bandwidth_hz: f64,
    pub m: usize,
    pub k: usize,
    pub isnr: Isnr,
    pub spacing: Spacing,
    pub gain_mode: GainMode,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub setup: SystemSetup,
    pub methods: Vec<Method>,
    pub cells: Vec<Cell>,
    pub trials: usize,
    pub seed: u64,
    /// Rayon workers; 0 uses the global pool.
    pub workers: usize,
    /// Record wall-clock time per trial. Off keeps the CSV reproducible byte for byte.
    pub timing: bool,
}

pub const DEFAULT_TRIALS: usize = 200;

pub const PRESETS: [&str; 7] = ["fig3", "fig5", "fig6", "fig7", "fig9", "fig10", "fig11"];

impl ExperimentConfig {
    /// Sweeps mirroring the published figures.
    pub fn preset(name: &str) -> Result<Self> {
        let k_sweep = |gain_mode: GainMode, spacing: Spacing| -> Vec<Cell> {
            let mut cells = Vec::new();
            for (bcs, m, kmax) in [(12.5e6, 16, 15), (10e6, 12, 11)] {
                for k in 1..=kmax {
                    cells.push(Cell {
                        cs_bandwidth_hz: bcs,
                        m,
                        k,
                        isnr: Isnr::Noiseless,
                        spacing,
                        gain_mode,
                    });
                }
            }
            cells
        };
        let cells = match name {
            "fig3" | "fig5" => k_sweep(GainMode::Unit, Spacing::MinSep(3.0)),
            "fig6" => k_sweep(GainMode::Uniform, Spacing::MinSep(0.0)),
            "fig7" => {
                let mut cells = Vec::new();
                for k in [5, 10] {
                    for (bcs, m) in [
                        (10e6, 12),
                        (12.5e6, 16),
                        (15e6, 20),
                        (17.5e6, 22),
                        (20e6, 26),
                    ] {
                        cells.push(Cell {
                            cs_bandwidth_hz: bcs,
                            m,
                            k,
                            isnr: Isnr::Noiseless,
                            spacing: Spacing::MinSep(0.0),
                            gain_mode: GainMode::Uniform,
                        });
                    }
                }
                cells
            }
            "fig9" => {
                let mut cells = Vec::new();
                for k in [5, 10] {
                    for db in [10.0, 15.0, 20.0, 25.0, 30.0] {
                        cells.push(Cell {
                            cs_bandwidth_hz: 12.5e6,
                            m: 16,
                            k,
                            isnr: Isnr::Db(db),
                            spacing: Spacing::MinSep(0.0),
                            gain_mode: GainMode::Uniform,
                        });
                    }
                }
                cells
            }
            "fig10" | "fig11" => [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.8, 1.0, 1.5, 2.0]
                .into_iter()
                .map(|s| Cell {
                    cs_bandwidth_hz: 12.5e6,
                    m: 16,
                    k: 2,
                    isnr: Isnr::Noiseless,
                    spacing: Spacing::Fixed(s),
                    gain_mode: GainMode::Unit,
                })
                .collect(),
            other => {
                return Err(Error::InvalidOption(format!(
                    "unknown preset {other:?}; expected one of {PRESETS:?}"
                )))
            }
        };
        Ok(Self {
            name: name.to_string(),
            setup: SystemSetup::default(),
            methods: Method::ALL.to_vec(),
            cells,
            trials: DEFAULT_TRIALS,
            seed: 0,
            workers: 0,
            timing: false,
        })
    }

    /// Rejects inconsistent settings before any trial runs.
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig("no methods selected".into()));
        }
        if self.cells.is_empty() {
            return Err(Error::InvalidConfig("no sweep cells".into()));
        }
        for c in &self.cells {
            let cfg = QuadCsConfig::derive(&system_params(&self.setup, c))?;
            if c.k == 0 || c.k >= cfg.m || c.k > cfg.n {
                return Err(Error::InvalidConfig(format!(
                    "K = {} needs 0 < K < M = {} and K <= N = {}",
                    c.k, cfg.m, cfg.n
                )));
            }
            let span = (c.k - 1) as f64 * c.spacing.tau0_units() * cfg.tau0();
            if span >= self.setup.tau_max_s {
                return Err(Error::InvalidConfig(format!(
                    "{} delays spaced {:?} exceed tau_max",
                    c.k, c.spacing
                )));
            }
            if let Isnr::Db(d) = c.isnr {
                if !d.is_finite() {
                    return Err(Error::InvalidConfig(format!("ISNR {d} dB")));
                }
            }
        }
        Ok(())
    }
}

fn system_params(setup: &SystemSetup, cell: &Cell) -> SystemParams {
    SystemParams::new(
        setup.bandwidth_hz,
        cell.cs_bandwidth_hz,
        setup.observation_s,
        cell.m,
    )
    .with_tau_max(setup.tau_max_s)
}

/// SplitMix64 finaliser.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `trial` in cell `cell`; independent of scheduling.
pub fn trial_seed(master: u64, cell: usize, trial: usize) -> u64 {
    mix(mix(mix(master) ^ cell as u64) ^ trial as u64)
}

/// Seed of the spreading code of the `system`-th distinct (B_cs, M) pair.
pub fn code_seed(master: u64, system: usize) -> u64 {
    mix(mix(master ^ 0x5EED_C0DE) ^ system as u64)
}

/// Everything a trial reads; built once per distinct (B_cs, M).
pub struct SystemContext {
    pub sys: QuadCsSystem,
    pub model: BeamspaceModel,
    pub grid_tau0: Option<GridDictionary>,
    pub grid_half: Option<GridDictionary>,
}

impl SystemContext {
    pub fn build(
        setup: &SystemSetup,
        cs_bandwidth_hz: f64,
        m: usize,
        seed: u64,
        dictionaries: bool,
    ) -> Result<Self> {
        let probe = Cell {
            cs_bandwidth_hz,
            m,
            k: 1,
            isnr: Isnr::Noiseless,
            spacing: Spacing::MinSep(0.0),
            gain_mode: GainMode::Unit,
        };
        let cfg = QuadCsConfig::derive(&system_params(setup, &probe))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let code = gen_spreading_code(
            &cfg,
            setup.n_chips.unwrap_or(cfg.default_chip_count()),
            &mut rng,
        )?;
        let mut spec = WaveformSpec::lfm(setup.bandwidth_hz, setup.pulse_width_s)?;
        spec.oversample = setup.oversample;
        let sys = QuadCsSystem::new(cfg, code, Waveform::new(spec)?)?;
        let model = assemble_model(&sys);
        let tau0 = sys.config().tau0();
        let (grid_tau0, grid_half) = if dictionaries {
            (
                Some(build_grid_dictionary(&sys, tau0)?),
                Some(build_grid_dictionary(&sys, 0.5 * tau0)?),
            )
        } else {
            (None, None)
        };
        Ok(Self {
            sys,
            model,
            grid_tau0,
            grid_half,
        })
    }
}

/// One method applied to one scene.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub cell: usize,
    pub seed: u64,
    pub method: Method,
    pub k: usize,
    pub cs_bandwidth_hz: f64,
    pub isnr_db: f64,
    pub sep_tau0: f64,
    pub truth: TargetScene,
    pub delays: Vec<f64>,
    pub gains: Vec<C64>,
    pub success: bool,
    pub rrms_tde: f64,
    pub rrms_sr: f64,
    pub signal_energy: f64,
    pub error_energy: f64,
    pub wall_ms: f64,
    pub failure: Option<String>,
}

impl TrialRecord {
    pub fn rsnr_db(&self) -> f64 {
        10.0 * (self.signal_energy / self.error_energy).log10()
    }

    pub fn outlier(&self) -> bool {
        self.rrms_sr > 1.0
    }
}

pub fn generate_scene<R: Rng + ?Sized>(
    cell: &Cell,
    tau_max: f64,
    tau0: f64,
    rng: &mut R,
) -> Result<TargetScene> {
    match cell.spacing {
        Spacing::MinSep(s) => random_scene(cell.k, tau_max, s * tau0, cell.gain_mode, rng),
        Spacing::Fixed(s) => {
            let span = (cell.k - 1) as f64 * s * tau0;
            let first = (tau_max - span) * (1.0 - rng.gen::<f64>());
            let delays = (0..cell.k).map(|i| first + i as f64 * s * tau0).collect();
            let gains = (0..cell.k)
                .map(|_| {
                    let mag = match cell.gain_mode {
                        GainMode::Unit => 1.0,
                        GainMode::Uniform => 1.0 - rng.gen::<f64>(),
                    };
                    C64::from_polar(mag, 2.0 * std::f64::consts::PI * (1.0 - rng.gen::<f64>()))
                })
                .collect();
            TargetScene::new(delays, gains)
        }
    }
}

/// Unresolved neighbours come back merged, as in the published protocol, so a
/// trial still yields a reconstruction.
fn glsr_options(sector: Sector, k: usize) -> GlsrOptions {
    let mut opts = GlsrOptions::new(sector, k);
    opts.search.merge_unresolved = true;
    opts
}

/// Run every requested method on one freshly drawn scene.
pub fn run_trial(
    ctx: &SystemContext,
    cell: &Cell,
    cell_index: usize,
    trial: usize,
    seed: u64,
    methods: &[Method],
    timing: bool,
) -> Result<Vec<TrialRecord>> {
    let cfg = ctx.sys.config();
    let tau0 = cfg.tau0();
    let tau_max = cfg.tau_max_s.expect("experiment configs carry tau_max");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scene = generate_scene(cell, tau_max, tau0, &mut rng)?;
    let clean = ctx.sys.scene_spectrum(scene.delays(), scene.gains());
    let noisy = add_noise(&clean, cfg.bandwidth_hz, cell.isnr, &mut rng)?;
    let meas = ctx.sys.measure(&noisy)?;

    let mut omp1_delays: Option<Vec<f64>> = None;
    let mut out = Vec::with_capacity(methods.len());
    for &method in methods {
        let start = Instant::now();
        let missing = || Error::InvalidConfig("dictionary not built".into());
        let estimate = (|| -> Result<(Vec<f64>, Vec<C64>)> {
            match method {
                Method::Omp1 | Method::Omp2 => {
                    let dict = if method == Method::Omp1 {
                        &ctx.grid_tau0
                    } else {
                        &ctx.grid_half
                    };
                    let r = run_omp(&meas, dict.as_ref().ok_or_else(missing)?, cell.k)?;
                    if method == Method::Omp1 {
                        omp1_delays = Some(r.delays.clone());
                    }
                    Ok((r.delays, r.gains))
                }
                Method::Glsr1 => {
                    let sector = Sector::around_delays(cfg.fp_hz, scene.delays(), tau0)?;
                    let r = run_glsr(&ctx.sys, &ctx.model, &meas, &glsr_options(sector, cell.k))?;
                    Ok((r.delays, r.gains))
                }
                Method::Glsr2 => {
                    let prior = match &omp1_delays {
                        Some(d) => d.clone(),
                        None => {
                            run_omp(&meas, ctx.grid_tau0.as_ref().ok_or_else(missing)?, cell.k)?
                                .delays
                        }
                    };
                    let sector = Sector::around_delays(cfg.fp_hz, &prior, 2.0 * tau0)?;
                    let r = run_glsr(&ctx.sys, &ctx.model, &meas, &glsr_options(sector, cell.k))?;
                    Ok((r.delays, r.gains))
                }
            }
        })();
        let wall_ms = if timing {
            start.elapsed().as_secs_f64() * 1e3
        } else {
            0.0
        };
        let (delays, gains, failure) = match estimate {
            Ok((d, g)) => (d, g, None),
            Err(e) => (Vec::new(), Vec::new(), Some(e.to_string())),
        };
        let recon = ctx.sys.scene_spectrum(&delays, &gains);
        let pairs = match_delays(scene.delays(), &delays, tau0).ok();
        let metrics =
            compute_metrics(pairs.as_ref(), tau0, &clean, &recon, None, cfg.bandwidth_hz)?;
        out.push(TrialRecord {
            trial,
            cell: cell_index,
            seed,
            method,
            k: cell.k,
            cs_bandwidth_hz: cell.cs_bandwidth_hz,
            isnr_db: cell.isnr.db(),
            sep_tau0: cell.spacing.tau0_units(),
            truth: scene.clone(),
            success: pairs.as_ref().map_or(false, |p| p.success),
            delays,
            gains,
            rrms_tde: metrics.rrms_tde,
            rrms_sr: metrics.rrms_sr,
            signal_energy: metrics.signal_energy,
            error_energy: metrics.error_energy,
            wall_ms,
            failure,
        });
    }
    Ok(out)
}

/// All trials of all cells, ordered by (cell, trial, method) whatever the worker count.
pub fn run_monte_carlo(exp: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    exp.validate()?;
    let needs_dict = exp.methods.iter().any(|m| *m != Method::Glsr1);
    let mut systems: Vec<(f64, usize)> = Vec::new();
    let mut cell_system = Vec::with_capacity(exp.cells.len());
    for c in &exp.cells {
        let idx = match systems
            .iter()
            .position(|&(b, m)| b == c.cs_bandwidth_hz && m == c.m)
        {
            Some(i) => i,
            None => {
                systems.push((c.cs_bandwidth_hz, c.m));
                systems.len() - 1
            }
        };
        cell_system.push(idx);
    }
    let run = || -> Result<Vec<TrialRecord>> {
        let contexts: Vec<SystemContext> = systems
            .par_iter()
            .enumerate()
            .map(|(i, &(b, m))| {
                SystemContext::build(&exp.setup, b, m, code_seed(exp.seed, i), needs_dict)
            })
            .collect::<Result<_>>()?;
        let jobs: Vec<(usize, usize)> = (0..exp.cells.len())
            .flat_map(|c| (0..exp.trials).map(move |t| (c, t)))
            .collect();
        let nested: Vec<Vec<TrialRecord>> = jobs
            .par_iter()
            .map(|&(c, t)| {
                let ctx = &contexts[cell_system[c]];
                run_trial(
                    ctx,
                    &exp.cells[c],
                    c,
                    t,
                    trial_seed(exp.seed, c, t),
                    &exp.methods,
                    exp.timing,
                )
            })
            .collect::<Result<_>>()?;
        Ok(nested.into_iter().flatten().collect())
    };
    if exp.workers == 0 {
        run()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(exp.workers)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?
            .install(run)
    }
}

/// Mean relative interpolation error for sectors of ±τ₀ around random delays, for each K.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorSurveyRow {
    pub k: usize,
    pub principal: f64,
    pub full: f64,
}

pub fn interpolation_error_survey(
    setup: &SystemSetup,
    cs_bandwidth_hz: f64,
    m: usize,
    ks: &[usize],
    scenes: usize,
    seed: u64,
) -> Result<Vec<ErrorSurveyRow>> {
    let ctx = SystemContext::build(setup, cs_bandwidth_hz, m, code_seed(seed, 0), false)?;
    let cfg = ctx.sys.config();
    ks.iter()
        .map(|&k| {
            let mut principal = 0.0;
            let mut full = 0.0;
            for s in 0..scenes {
                let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(seed, k, s));
                let scene = random_scene(
                    k,
                    setup.tau_max_s,
                    3.0 * cfg.tau0(),
                    GainMode::Unit,
                    &mut rng,
                )?;
                let sector = Sector::around_delays(cfg.fp_hz, scene.delays(), cfg.tau0())?;
                for (space, acc) in [
                    (BeamformerSpace::Principal, &mut principal),
                    (BeamformerSpace::Full, &mut full),
                ] {
                    let opts = DesignOptions {
                        space,
                        ..DesignOptions::default()
                    };
                    *acc += InterpolationDesign::build(&ctx.model, &sector, opts)?.relative_error();
                }
            }
            Ok(ErrorSurveyRow {
                k,
                principal: principal / scenes as f64,
                full: full / scenes as f64,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for name in PRESETS {
            let exp = ExperimentConfig::preset(name).unwrap();
            exp.validate().unwrap();
            assert_eq!(exp.trials, DEFAULT_TRIALS);
        }
        assert_eq!(
            ExperimentConfig::preset("fig5").unwrap().cells.len(),
            15 + 11
        );
        assert!(ExperimentConfig::preset("fig4").is_err());
    }

    #[test]
    fn inconsistent_configs_rejected() {
        let mut exp = ExperimentConfig::preset("fig10").unwrap();
        exp.trials = 0;
        assert!(exp.validate().is_err());
        let mut exp = ExperimentConfig::preset("fig10").unwrap();
        exp.methods.clear();
        assert!(exp.validate().is_err());
        let mut exp = ExperimentConfig::preset("fig10").unwrap();
        exp.cells[0].k = 16;
        assert!(exp.validate().is_err());
        let mut exp = ExperimentConfig::preset("fig10").unwrap();
        exp.cells[0].spacing = Spacing::Fixed(600.0);
        assert!(exp.validate().is_err());
    }

    #[test]
    fn trial_seeds_are_distinct() {
        let mut seeds: Vec<u64> = (0..20)
            .flat_map(|c| (0..50).map(move |t| trial_seed(3, c, t)))
            .collect();
        seeds.sort();
        seeds.dedup();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(trial_seed(3, 0, 0), trial_seed(4, 0, 0));
    }

    #[test]
    fn fixed_spacing_scene() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cell = Cell {
            cs_bandwidth_hz: 12.5e6,
            m: 16,
            k: 3,
            isnr: Isnr::Noiseless,
            spacing: Spacing::Fixed(0.5),
            gain_mode: GainMode::Unit,
        };
        for _ in 0..50 {
            let s = generate_scene(&cell, 10.24e-6, 20e-9, &mut rng).unwrap();
            assert!(s.delays()[0] > 0.0 && s.delays()[2] <= 10.24e-6);
            assert!(s
                .delays()
                .windows(2)
                .all(|w| (w[1] - w[0] - 10e-9).abs() < 1e-15));
            assert!(s.gains().iter().all(|g| (g.norm() - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn failed_method_is_recorded_not_raised() {
        let setup = SystemSetup::default();
        let ctx = SystemContext::build(&setup, 12.5e6, 16, 1, false).unwrap();
        let cell = Cell {
            cs_bandwidth_hz: 12.5e6,
            m: 16,
            k: 2,
            isnr: Isnr::Noiseless,
            spacing: Spacing::MinSep(3.0),
            gain_mode: GainMode::Unit,
        };
        // No dictionaries were built, so OMP cannot run.
        let recs = run_trial(&ctx, &cell, 0, 0, 9, &[Method::Omp1, Method::Glsr1], false).unwrap();
        assert!(!recs[0].success && recs[0].failure.is_some() && recs[0].rrms_sr == 1.0);
        assert!(recs[0].rrms_tde.is_nan());
        assert!(recs[1].success && recs[1].failure.is_none());
        assert!((recs[1].rsnr_db() + 20.0 * recs[1].rrms_sr.log10()).abs() < 1e-9);
    }
}
