//! Gridless delay estimation: interpolated beamspace MUSIC over a sector, delay
//! unwrapping, least-squares gains and spectrum reconstruction.

use crate::beamspace::{extract_snapshots, steering_vector, BeamspaceModel};
use crate::error::{Error, Result};
use crate::interpolation::{DesignOptions, InterpolationDesign, Sector};
use crate::numerics::{eig_hermitian, least_squares, ComplexMatrix, LeastSquares, C64};
use crate::operator::{Measurement, QuadCsSystem};
use crate::signal_model::{BasebandTable, DenseSpectrum};
use std::f64::consts::PI;
use std::io::Write;

const TWO_PI: f64 = 2.0 * PI;

/// R̄ = (1/N) Σ s̄ s̄^H.
pub fn correlation(snaps: &[Vec<C64>]) -> Result<ComplexMatrix> {
    let m = snaps
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::Dimension("no snapshots".into()))?;
    if snaps.iter().any(|s| s.len() != m) {
        return Err(Error::Dimension("snapshots differ in length".into()));
    }
    let mut r = ComplexMatrix::zeros(m, m);
    for s in snaps {
        for i in 0..m {
            for j in 0..m {
                r[(i, j)] += s[i] * s[j].conj();
            }
        }
    }
    Ok(r.scale_real(1.0 / snaps.len() as f64))
}

/// P(θ) = 1 / (a^H G G^H a) with a = B0 w(θ) and G the M − K smallest eigenvectors of R̄.
#[derive(Clone, Debug)]
pub struct MusicSpectrum {
    /// G^H B0, (M−K)×J.
    projector: ComplexMatrix,
    /// Eigenvalues of R̄, descending.
    pub eigenvalues: Vec<f64>,
    /// Signal subspace E, M×K.
    pub signal: ComplexMatrix,
    /// Noise subspace G, M×(M−K).
    pub noise: ComplexMatrix,
}

impl MusicSpectrum {
    pub fn new(r: &ComplexMatrix, b0: &ComplexMatrix, k: usize) -> Result<Self> {
        let m = r.rows();
        if k == 0 || k >= m {
            return Err(Error::InvalidOption(format!(
                "K = {k} must satisfy 0 < K < M = {m}"
            )));
        }
        if b0.rows() != m {
            return Err(Error::Dimension(format!(
                "B0 has {} rows, R̄ is {m}x{m}",
                b0.rows()
            )));
        }
        let e = eig_hermitian(r)?;
        let noise = e.trailing(m - k);
        let signal = e.leading(k);
        Ok(Self {
            projector: &noise.adjoint() * b0,
            eigenvalues: e.values,
            signal,
            noise,
        })
    }

    pub fn j(&self) -> usize {
        self.projector.cols()
    }

    /// a^H G G^H a.
    pub fn denominator(&self, theta: f64) -> f64 {
        let w = steering_vector(theta, self.j());
        self.projector.matvec(&w).iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn value(&self, theta: f64) -> f64 {
        1.0 / self.denominator(theta)
    }
}

pub fn music_spectrum(r: &ComplexMatrix, b0: &ComplexMatrix, k: usize, theta: f64) -> Result<f64> {
    Ok(MusicSpectrum::new(r, b0, k)?.value(theta))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchOptions {
    /// Coarse grid step in radians; defaults to the narrowest window / 200.
    pub step: Option<f64>,
    pub refine: bool,
    /// Return fewer than K peaks instead of failing when some windows hold no
    /// distinct maximum; unresolved neighbours then come back as one component.
    pub merge_unresolved: bool,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            step: None,
            refine: true,
            merge_unresolved: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Peak {
    /// Reduced to [0, 2π).
    pub theta: f64,
    pub wrap: i64,
    /// θ + 2π·wrap.
    pub unwrapped: f64,
    pub value: f64,
    /// Sub-sector the peak was assigned to.
    pub subsector: usize,
}

/// Peaks of `p` over the sector plus the sampled trace.
#[derive(Clone, Debug)]
pub struct PeakSearch {
    pub peaks: Vec<Peak>,
    /// (θ reduced to [0, 2π), P(θ)) on the coarse grid.
    pub trace: Vec<(f64, f64)>,
}

/// K largest local maxima of `p` on a grid over the sector, refined parabolically.
///
/// When the sector has exactly K windows the peaks are allotted per cluster of
/// overlapping windows, one per window, so each inherits the wrap of its window.
/// A maximum of the 2π-periodic spectrum recurs in every wrap frame, so windows
/// of one cluster with different wraps may share it.
pub fn search_peaks(
    p: &dyn Fn(f64) -> f64,
    sector: &Sector,
    k: usize,
    opts: SearchOptions,
) -> Result<PeakSearch> {
    if k == 0 {
        return Err(Error::InvalidOption("K must be positive".into()));
    }
    let step = opts.step.unwrap_or(sector.min_window_width() / 200.0);
    if !(step > 0.0) || sector.measure() / step < 10.0 * k as f64 {
        return Err(Error::InvalidOption(format!(
            "grid step {step} too coarse for the sector and K = {k}"
        )));
    }
    let per_window = sector.subsectors().len() == k;
    let mut trace = Vec::new();
    let mut candidates: Vec<(usize, f64, f64)> = Vec::new(); // (cluster, frame θ, value)
    let mut per_cluster: Vec<Vec<(f64, f64)>> = Vec::new();
    for (ci, cl) in sector.clusters().iter().enumerate() {
        let periodic = sector.covers_period();
        let n = (cl.width() / step).ceil().max(2.0) as usize;
        let h = cl.width() / n as f64;
        let count = if periodic { n } else { n + 1 };
        let thetas: Vec<f64> = (0..count).map(|i| cl.start + i as f64 * h).collect();
        let vals: Vec<f64> = thetas.iter().map(|&t| p(t)).collect();
        trace.extend(
            thetas
                .iter()
                .zip(&vals)
                .map(|(&t, &v)| (t.rem_euclid(TWO_PI), v)),
        );
        let mut maxima = Vec::new();
        for i in 0..count {
            let (prev, next) = if periodic {
                ((i + count - 1) % count, (i + 1) % count)
            } else if i == 0 || i + 1 == count {
                continue;
            } else {
                (i - 1, i + 1)
            };
            if vals[i] > vals[prev] && vals[i] >= vals[next] {
                let t = if opts.refine {
                    refine(p, thetas[i], h, [vals[prev], vals[i], vals[next]])
                } else {
                    thetas[i]
                };
                maxima.push((t, p(t).max(vals[i])));
            }
        }
        maxima.sort_by(|a, b| b.1.total_cmp(&a.1));
        candidates.extend(maxima.iter().map(|&(t, v)| (ci, t, v)));
        per_cluster.push(maxima);
    }
    trace.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut peaks = Vec::with_capacity(k);
    if per_window {
        for (cl, maxima) in sector.clusters().iter().zip(&per_cluster) {
            let need = cl.members.len();
            if maxima.is_empty() {
                if opts.merge_unresolved {
                    continue;
                }
                return Err(Error::TooFewPeaks {
                    found: 0,
                    needed: need,
                });
            }
            if maxima.len() < need {
                // Targets a whole number of code periods apart share one peak; each
                // window takes the maximum nearest to it and keeps its own wrap.
                let mut shared: Vec<(f64, Peak)> = cl
                    .members
                    .iter()
                    .map(|member| {
                        let &(t, v) = maxima
                            .iter()
                            .min_by(|a, b| {
                                window_distance(sector, member, a.0)
                                    .total_cmp(&window_distance(sector, member, b.0))
                                    .then(b.1.total_cmp(&a.1))
                            })
                            .unwrap();
                        (
                            window_distance(sector, member, t),
                            make_peak(sector, member, t, v),
                        )
                    })
                    .collect();
                shared.sort_by(|a, b| {
                    a.1.unwrapped
                        .total_cmp(&b.1.unwrapped)
                        .then(a.0.total_cmp(&b.0))
                });
                shared.dedup_by(|b, a| b.1.unwrapped - a.1.unwrapped <= 1e-9 * TWO_PI);
                if shared.len() < need && !opts.merge_unresolved {
                    return Err(Error::TooFewPeaks {
                        found: maxima.len(),
                        needed: need,
                    });
                }
                peaks.extend(shared.into_iter().map(|(_, p)| p));
                continue;
            }
            let mut chosen: Vec<(f64, f64)> = maxima[..need].to_vec();
            chosen.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut members: Vec<(usize, f64)> = cl
                .members
                .iter()
                .map(|&(i, shift)| {
                    (
                        i,
                        sector.subsectors()[i].start + shift + 0.5 * sector.subsectors()[i].width,
                    )
                })
                .collect();
            members.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            for ((t, v), (i, _)) in chosen.into_iter().zip(members) {
                peaks.push(make_peak(
                    sector,
                    cl.members.iter().find(|m| m.0 == i).unwrap(),
                    t,
                    v,
                ));
            }
        }
    } else {
        if candidates.len() < k && !opts.merge_unresolved {
            return Err(Error::TooFewPeaks {
                found: candidates.len(),
                needed: k,
            });
        }
        candidates.sort_by(|a, b| b.2.total_cmp(&a.2));
        for &(ci, t, v) in candidates.iter().take(k) {
            let cl = &sector.clusters()[ci];
            // The window whose frame interval is closest to the peak.
            let member = cl
                .members
                .iter()
                .min_by(|a, b| {
                    window_distance(sector, a, t)
                        .total_cmp(&window_distance(sector, b, t))
                        .then(a.0.cmp(&b.0))
                })
                .unwrap();
            peaks.push(make_peak(sector, member, t, v));
        }
    }
    if peaks.is_empty() {
        return Err(Error::TooFewPeaks {
            found: 0,
            needed: k,
        });
    }
    peaks.sort_by(|a, b| a.unwrapped.total_cmp(&b.unwrapped));
    Ok(PeakSearch { peaks, trace })
}

fn window_distance(sector: &Sector, member: &(usize, f64), t: f64) -> f64 {
    let s = sector.subsectors()[member.0];
    let lo = s.start + member.1;
    let hi = lo + s.width;
    if t < lo {
        lo - t
    } else if t > hi {
        t - hi
    } else {
        0.0
    }
}

fn make_peak(sector: &Sector, member: &(usize, f64), frame_theta: f64, value: f64) -> Peak {
    let s = sector.subsectors()[member.0];
    let unwrapped = s.unwrapped_lo() + (frame_theta - (s.start + member.1));
    let theta = unwrapped.rem_euclid(TWO_PI);
    let wrap = ((unwrapped - theta) / TWO_PI).round() as i64;
    Peak {
        theta,
        wrap,
        unwrapped,
        value,
        subsector: member.0,
    }
}

/// Two rounds of three-point parabolic interpolation on 1/P, which is locally
/// quadratic at a MUSIC null.
fn refine(p: &dyn Fn(f64) -> f64, t0: f64, h: f64, vals: [f64; 3]) -> f64 {
    let vertex = |q: [f64; 3]| {
        let den = q[0] - 2.0 * q[1] + q[2];
        if den > 0.0 {
            (0.5 * (q[0] - q[2]) / den).clamp(-1.0, 1.0)
        } else {
            0.0
        }
    };
    let q = vals.map(|v| 1.0 / v);
    let t1 = t0 + vertex(q) * h;
    let h2 = h / 8.0;
    let q2 = [1.0 / p(t1 - h2), 1.0 / p(t1), 1.0 / p(t1 + h2)];
    t1 + vertex(q2) * h2
}

/// τ̄ = (θ̄ + 2π·w) / (2π f_p), sorted.
pub fn unwrap_delays(thetas_and_wraps: &[(f64, i64)], fp_hz: f64) -> Vec<f64> {
    let mut out: Vec<f64> = thetas_and_wraps
        .iter()
        .map(|&(t, w)| (t + TWO_PI * w as f64) / (TWO_PI * fp_hz))
        .collect();
    out.sort_by(f64::total_cmp);
    out
}

/// Least-squares gains on the atoms at the estimated delays.
pub fn estimate_gains(
    sys: &QuadCsSystem,
    meas: &Measurement,
    delays: &[f64],
) -> Result<LeastSquares> {
    least_squares(&sys.build_phi(delays), &meas.values)
}

/// Σ_k v̄_k Ŝ₀(f) e^{−j2πfτ̄_k}; the same formula that synthesises scenes.
pub fn reconstruct_spectrum(
    baseband: &BasebandTable,
    delays: &[f64],
    gains: &[C64],
) -> DenseSpectrum {
    baseband.synthesize(delays, gains)
}

#[derive(Clone, Debug)]
pub struct GlsrOptions {
    pub sector: Sector,
    pub k: usize,
    pub search: SearchOptions,
    pub design: DesignOptions,
}

impl GlsrOptions {
    pub fn new(sector: Sector, k: usize) -> Self {
        Self {
            sector,
            k,
            search: SearchOptions::default(),
            design: DesignOptions::default(),
        }
    }
}

/// Delays from the MUSIC search, before gains.
#[derive(Clone, Debug)]
pub struct DelayEstimate {
    pub peaks: Vec<Peak>,
    pub delays: Vec<f64>,
    pub trace: Vec<(f64, f64)>,
    pub eigenvalues: Vec<f64>,
}

/// Steps from interpolated snapshots to delays: correlation, subspace split, search, unwrap.
pub fn estimate_delays(
    interpolated: &[Vec<C64>],
    b0: &ComplexMatrix,
    sector: &Sector,
    k: usize,
    fp_hz: f64,
    search: SearchOptions,
) -> Result<DelayEstimate> {
    let r = correlation(interpolated).map_err(Error::at("correlation"))?;
    let music = MusicSpectrum::new(&r, b0, k).map_err(Error::at("subspace split"))?;
    let found =
        search_peaks(&|t| music.value(t), sector, k, search).map_err(Error::at("peak search"))?;
    let delays = found
        .peaks
        .iter()
        .map(|p| p.unwrapped / (TWO_PI * fp_hz))
        .collect();
    Ok(DelayEstimate {
        peaks: found.peaks,
        delays,
        trace: found.trace,
        eigenvalues: music.eigenvalues,
    })
}

#[derive(Clone, Debug)]
pub struct EstimationResult {
    /// Reduced to [0, 2π), ordered like `delays`.
    pub thetas: Vec<f64>,
    pub wraps: Vec<i64>,
    /// Ascending.
    pub delays: Vec<f64>,
    pub gains: Vec<C64>,
    pub trace: Vec<(f64, f64)>,
    /// Eigenvalues of R̄, descending; the first K span the signal subspace.
    pub eigenvalues: Vec<f64>,
    pub interpolation_error: f64,
    pub residual_norm: f64,
}

/// Snapshots → interpolation → MUSIC → delays → gains.
pub fn run_glsr(
    sys: &QuadCsSystem,
    model: &BeamspaceModel,
    meas: &Measurement,
    opts: &GlsrOptions,
) -> Result<EstimationResult> {
    let cfg = sys.config();
    if opts.k == 0 || opts.k >= cfg.m {
        return Err(Error::InvalidOption(format!(
            "K = {} must satisfy 0 < K < M = {}",
            opts.k, cfg.m
        )));
    }
    if cfg.n < opts.k {
        return Err(Error::InvalidOption(format!(
            "N = {} snapshots fewer than K = {}",
            cfg.n, opts.k
        )));
    }
    let snaps = extract_snapshots(meas, cfg).map_err(Error::at("snapshots"))?;
    let design = InterpolationDesign::build(model, &opts.sector, opts.design)
        .map_err(Error::at("interpolation design"))?;
    run_with_design(sys, &design, &snaps.snapshots, meas, opts)
}

/// As [`run_glsr`] with a precomputed design for the same sector.
pub fn run_with_design(
    sys: &QuadCsSystem,
    design: &InterpolationDesign,
    snapshots: &[Vec<C64>],
    meas: &Measurement,
    opts: &GlsrOptions,
) -> Result<EstimationResult> {
    let cfg = sys.config();
    let interpolated: Vec<Vec<C64>> = design
        .t
        .iter()
        .zip(snapshots)
        .map(|(t, s)| t.matvec(s))
        .collect();
    let est = estimate_delays(
        &interpolated,
        &design.b0,
        &opts.sector,
        opts.k,
        cfg.fp_hz,
        opts.search,
    )?;
    let ls = estimate_gains(sys, meas, &est.delays).map_err(Error::at("gains"))?;
    Ok(EstimationResult {
        thetas: est.peaks.iter().map(|p| p.theta).collect(),
        wraps: est.peaks.iter().map(|p| p.wrap).collect(),
        delays: est.delays,
        gains: ls.x,
        trace: est.trace,
        eigenvalues: est.eigenvalues,
        interpolation_error: design.error,
        residual_norm: ls.residual_norm,
    })
}

/// Two-column CSV of the pseudospectrum.
pub fn write_trace_csv<W: Write>(trace: &[(f64, f64)], mut out: W) -> Result<()> {
    writeln!(out, "theta_rad,P")?;
    for (t, p) in trace {
        writeln!(out, "{t},{p}")?;
    }
    Ok(())
}
