//! Flat `key = value` configuration files.
//!
//! ```text
//! # system
//! B_hz = 50e6
//! Bcs_hz = 12.5e6
//! T_s = 20.48e-6
//! M = 16
//! tau_max_s = 10.24e-6
//! Nc = 128
//! seed = 7
//! # experiment
//! methods = GLSR-1, OMP-1
//! trials = 50
//! k_list = 3, 5
//! isnr_list_db = inf, 20
//! sep_list = 3
//! ```

use super::runner::{Cell, ExperimentConfig, Method, Spacing, SystemSetup, DEFAULT_TRIALS};
use crate::error::{Error, Result};
use crate::operator::SystemParams;
use crate::signal_model::{GainMode, Isnr, DEFAULT_OVERSAMPLE};

const KEYS: [&str; 16] = [
    "B_hz",
    "Bcs_hz",
    "T_s",
    "M",
    "tau_max_s",
    "Nc",
    "seed",
    "methods",
    "trials",
    "isnr_list_db",
    "k_list",
    "sep_list",
    "Tpw_s",
    "oversample",
    "gain_mode",
    "spacing",
];

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub setup: SystemSetup,
    pub cs_bandwidth_hz: f64,
    pub m: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub trials: usize,
    pub isnr_db: Vec<f64>,
    /// Empty when the file has no `k_list`.
    pub k_list: Vec<usize>,
    /// Separations in units of τ₀.
    pub sep_list: Vec<f64>,
    pub gain_mode: GainMode,
    /// `sep_list` read as minimum gaps (true) or exact gaps (false).
    pub min_separation: bool,
}

fn num<T: std::str::FromStr>(key: &str, v: &str, line: usize) -> Result<T> {
    v.trim().parse().map_err(|_| Error::Parse {
        line,
        msg: format!("{key}: cannot parse {v:?}"),
    })
}

fn float(key: &str, v: &str, line: usize) -> Result<f64> {
    match v.trim() {
        "inf" => Ok(f64::INFINITY),
        s => num(key, s, line),
    }
}

fn list<T>(v: &str, mut item: impl FnMut(&str) -> Result<T>) -> Result<Vec<T>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(&mut item)
        .collect()
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut seen: Vec<(&str, &str, usize)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                msg: format!("expected key=value, got {line:?}"),
            })?;
            let k = k.trim();
            if !KEYS.contains(&k) {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("unknown key {k:?}"),
                });
            }
            if seen.iter().any(|s| s.0 == k) {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("duplicate key {k:?}"),
                });
            }
            seen.push((k, v.trim(), i + 1));
        }
        let get = |k: &str| seen.iter().find(|s| s.0 == k).map(|s| (s.1, s.2));
        let need = |k: &str| get(k).ok_or_else(|| Error::InvalidConfig(format!("missing key {k}")));

        let (v, l) = need("B_hz")?;
        let bandwidth_hz = float("B_hz", v, l)?;
        let (v, l) = need("Bcs_hz")?;
        let cs_bandwidth_hz = float("Bcs_hz", v, l)?;
        let (v, l) = need("T_s")?;
        let observation_s = float("T_s", v, l)?;
        let (v, l) = need("M")?;
        let m = num("M", v, l)?;
        let tau_max_s = get("tau_max_s")
            .map(|(v, l)| float("tau_max_s", v, l))
            .transpose()?
            .unwrap_or(observation_s / 2.0);
        let pulse_width_s = get("Tpw_s")
            .map(|(v, l)| float("Tpw_s", v, l))
            .transpose()?
            .unwrap_or(observation_s / 2.0);
        let n_chips = get("Nc").map(|(v, l)| num("Nc", v, l)).transpose()?;
        let oversample = get("oversample")
            .map(|(v, l)| num("oversample", v, l))
            .transpose()?
            .unwrap_or(DEFAULT_OVERSAMPLE);
        let seed = get("seed")
            .map(|(v, l)| num("seed", v, l))
            .transpose()?
            .unwrap_or(0);
        let methods = match get("methods") {
            Some((v, l)) => list(v, |s| {
                s.parse::<Method>().map_err(|e| Error::Parse {
                    line: l,
                    msg: e.to_string(),
                })
            })?,
            None => Method::ALL.to_vec(),
        };
        let trials = get("trials")
            .map(|(v, l)| num("trials", v, l))
            .transpose()?
            .unwrap_or(DEFAULT_TRIALS);
        let isnr_db = match get("isnr_list_db") {
            Some((v, l)) => list(v, |s| float("isnr_list_db", s, l))?,
            None => vec![f64::INFINITY],
        };
        let k_list = match get("k_list") {
            Some((v, l)) => list(v, |s| num("k_list", s, l))?,
            None => Vec::new(),
        };
        let sep_list = match get("sep_list") {
            Some((v, l)) => list(v, |s| float("sep_list", s, l))?,
            None => vec![0.0],
        };
        let gain_mode = match get("gain_mode") {
            None | Some(("unit", _)) => GainMode::Unit,
            Some(("uniform", _)) => GainMode::Uniform,
            Some((v, l)) => {
                return Err(Error::Parse {
                    line: l,
                    msg: format!("gain_mode must be unit or uniform, got {v:?}"),
                })
            }
        };
        let min_separation = match get("spacing") {
            None | Some(("min", _)) => true,
            Some(("fixed", _)) => false,
            Some((v, l)) => {
                return Err(Error::Parse {
                    line: l,
                    msg: format!("spacing must be min or fixed, got {v:?}"),
                })
            }
        };
        Ok(Self {
            setup: SystemSetup {
                bandwidth_hz,
                observation_s,
                tau_max_s,
                pulse_width_s,
                n_chips,
                oversample,
            },
            cs_bandwidth_hz,
            m,
            seed,
            methods,
            trials,
            isnr_db,
            k_list,
            sep_list,
            gain_mode,
            min_separation,
        })
    }

    pub fn system_params(&self) -> SystemParams {
        SystemParams::new(
            self.setup.bandwidth_hz,
            self.cs_bandwidth_hz,
            self.setup.observation_s,
            self.m,
        )
        .with_tau_max(self.setup.tau_max_s)
    }

    /// Cartesian product of K, ISNR and separation lists.
    pub fn to_experiment(&self, name: &str) -> Result<ExperimentConfig> {
        if self.k_list.is_empty() {
            return Err(Error::InvalidConfig("missing key k_list".into()));
        }
        let mut cells = Vec::new();
        for &k in &self.k_list {
            for &db in &self.isnr_db {
                for &s in &self.sep_list {
                    cells.push(Cell {
                        cs_bandwidth_hz: self.cs_bandwidth_hz,
                        m: self.m,
                        k,
                        isnr: Isnr::from_db(db),
                        spacing: if self.min_separation {
                            Spacing::MinSep(s)
                        } else {
                            Spacing::Fixed(s)
                        },
                        gain_mode: self.gain_mode,
                    });
                }
            }
        }
        let exp = ExperimentConfig {
            name: name.to_string(),
            setup: self.setup.clone(),
            methods: self.methods.clone(),
            cells,
            trials: self.trials,
            seed: self.seed,
            workers: 0,
            timing: false,
        };
        exp.validate()?;
        Ok(exp)
    }
}
