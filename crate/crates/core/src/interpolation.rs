//! Sectors, the manifold correlation C_ww, the design cost C_N, the time-invariant
//! beamformer B0 and the per-snapshot interpolators T^[n].

use crate::beamspace::{BeamspaceModel, SnapshotSet};
use crate::error::{Error, Result};
use crate::numerics::{cis, eig_hermitian, solve_hermitian_pd, ComplexMatrix, C64};
use std::f64::consts::PI;

const TWO_PI: f64 = 2.0 * PI;

/// One window of the sector: θ ∈ [start, start + width] plus 2π·wrap when unwrapped.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SubSector {
    /// In [0, 2π).
    pub start: f64,
    pub width: f64,
    pub wrap: i64,
}

impl SubSector {
    pub fn unwrapped_lo(&self) -> f64 {
        self.start + TWO_PI * self.wrap as f64
    }

    pub fn unwrapped_center(&self) -> f64 {
        self.unwrapped_lo() + 0.5 * self.width
    }
}

/// Windows that overlap modulo 2π, merged. Coordinates are in a frame where
/// member `i` starts at `subs[i].start + shift_i` (shift is 0 or 2π).
#[derive(Clone, Debug, PartialEq)]
pub struct Cluster {
    pub start: f64,
    pub end: f64,
    pub members: Vec<(usize, f64)>,
}

impl Cluster {
    pub fn width(&self) -> f64 {
        self.end - self.start
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sector {
    subs: Vec<SubSector>,
    clusters: Vec<Cluster>,
}

impl Sector {
    /// Windows given as unwrapped θ intervals [lo, hi].
    pub fn from_unwrapped(windows: &[(f64, f64)]) -> Result<Self> {
        let mut subs = Vec::with_capacity(windows.len());
        for &(lo, hi) in windows {
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(Error::InvalidOption(format!("sector window [{lo}, {hi}]")));
            }
            let wrap = (lo / TWO_PI).floor();
            let start = (lo - wrap * TWO_PI).clamp(0.0, TWO_PI.next_down_f64());
            subs.push(SubSector {
                start,
                width: (hi - lo).min(TWO_PI),
                wrap: wrap as i64,
            });
        }
        Self::from_subsectors(subs)
    }

    pub fn from_subsectors(subs: Vec<SubSector>) -> Result<Self> {
        if subs.is_empty() {
            return Err(Error::EmptySector);
        }
        for s in &subs {
            if !(s.start >= 0.0 && s.start < TWO_PI && s.width > 0.0 && s.width.is_finite()) {
                return Err(Error::InvalidOption(format!("sub-sector {s:?}")));
            }
        }
        let clusters = cluster(&subs);
        Ok(Self { subs, clusters })
    }

    /// One window [2πf_p(τ − h), 2πf_p(τ + h)] per delay.
    pub fn around_delays(fp_hz: f64, delays: &[f64], half_width_s: f64) -> Result<Self> {
        let windows: Vec<(f64, f64)> = delays
            .iter()
            .map(|&t| {
                (
                    TWO_PI * fp_hz * (t - half_width_s),
                    TWO_PI * fp_hz * (t + half_width_s),
                )
            })
            .collect();
        Self::from_unwrapped(&windows)
    }

    pub fn full_period() -> Self {
        Self::from_subsectors(vec![SubSector {
            start: 0.0,
            width: TWO_PI,
            wrap: 0,
        }])
        .expect("valid")
    }

    pub fn subsectors(&self) -> &[SubSector] {
        &self.subs
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    /// Measure of the union, at most 2π.
    pub fn measure(&self) -> f64 {
        self.clusters
            .iter()
            .map(Cluster::width)
            .sum::<f64>()
            .min(TWO_PI)
    }

    pub fn min_window_width(&self) -> f64 {
        self.subs
            .iter()
            .map(|s| s.width)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn covers_period(&self) -> bool {
        self.clusters.len() == 1 && self.clusters[0].width() >= TWO_PI
    }
}

trait NextDown {
    fn next_down_f64(self) -> f64;
}

impl NextDown for f64 {
    fn next_down_f64(self) -> f64 {
        f64::from_bits(self.to_bits() - 1)
    }
}

fn cluster(subs: &[SubSector]) -> Vec<Cluster> {
    let mut order: Vec<usize> = (0..subs.len()).collect();
    order.sort_by(|&a, &b| subs[a].start.total_cmp(&subs[b].start).then(a.cmp(&b)));
    let mut out: Vec<Cluster> = Vec::new();
    for i in order {
        let s = subs[i];
        let end = s.start + s.width;
        match out.last_mut() {
            Some(c) if s.start <= c.end => {
                c.end = c.end.max(end);
                c.members.push((i, 0.0));
            }
            _ => out.push(Cluster {
                start: s.start,
                end,
                members: vec![(i, 0.0)],
            }),
        }
    }
    // Clusters that run past 2π swallow those they reach at the start of the period.
    while out.len() > 1 {
        let last_end = out.last().unwrap().end;
        if last_end - TWO_PI < out[0].start {
            break;
        }
        let first = out.remove(0);
        let last = out.last_mut().unwrap();
        last.end = last.end.max(first.end + TWO_PI);
        last.members
            .extend(first.members.into_iter().map(|(i, sh)| (i, sh + TWO_PI)));
    }
    if out.len() == 1 && out[0].width() >= TWO_PI {
        out[0].end = out[0].start + TWO_PI;
    }
    out
}

/// C_ww[p, q] = ∫_Θ e^{j(p−q)θ} dθ, in closed form.
pub fn sector_cww(sector: &Sector, j: usize) -> Result<ComplexMatrix> {
    if sector.measure() <= 0.0 {
        return Err(Error::EmptySector);
    }
    // Toeplitz: entry depends on d = p − q only.
    let diag_val: Vec<C64> = (0..j as i64)
        .map(|d| {
            sector
                .clusters()
                .iter()
                .map(|c| {
                    if d == 0 {
                        C64::new(c.width(), 0.0)
                    } else {
                        let df = d as f64;
                        (cis(df * c.end) - cis(df * c.start)) / C64::new(0.0, df)
                    }
                })
                .sum()
        })
        .collect();
    Ok(ComplexMatrix::from_fn(j, j, |p, q| {
        if p >= q {
            diag_val[p - q]
        } else {
            diag_val[q - p].conj()
        }
    }))
}

/// How to regularise the inner matrices B^[n] C_ww B^[n]^H before inversion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Ridge {
    /// Add `scale`·tr/M when the condition number exceeds `threshold`.
    Auto {
        threshold: f64,
        scale: f64,
    },
    Fixed(f64),
    None,
}

impl Default for Ridge {
    fn default() -> Self {
        Ridge::Auto {
            threshold: 1e10,
            scale: 1e-10,
        }
    }
}

/// C_N and the per-snapshot solves that produced it.
#[derive(Clone, Debug)]
pub struct CostMatrix {
    pub c_n: ComplexMatrix,
    /// (B^[n] C B^[n]^H + ridge)^{-1} B^[n] C, M×J.
    pub gains: Vec<ComplexMatrix>,
    pub ridges: Vec<f64>,
}

fn inner_solve(
    b: &ComplexMatrix,
    cww: &ComplexMatrix,
    ridge: Ridge,
    n: usize,
) -> Result<(ComplexMatrix, f64)> {
    let bc = b * cww;
    let g = (&bc * &b.adjoint()).hermitian_part();
    let m = g.rows();
    let r = match ridge {
        Ridge::None => 0.0,
        Ridge::Fixed(r) => r,
        Ridge::Auto { threshold, scale } => {
            let e = eig_hermitian(&g).map_err(Error::at("inner matrix eigendecomposition"))?;
            let hi = e.values[0];
            let lo = *e.values.last().unwrap();
            if lo <= 0.0 || hi / lo > threshold {
                scale * g.trace().re / m as f64
            } else {
                0.0
            }
        }
    };
    let x =
        solve_hermitian_pd(&g, &bc, r).map_err(|_| Error::SingularInterpolation { snapshot: n })?;
    Ok((x, r))
}

/// C_N = Σ_n [C − C B^H (B C B^H)^{-1} B C].
pub fn compute_cn(model: &BeamspaceModel, cww: &ComplexMatrix, ridge: Ridge) -> Result<CostMatrix> {
    let j = model.j();
    if cww.rows() != j || cww.cols() != j {
        return Err(Error::Dimension(format!(
            "C_ww is {}x{}, model J = {j}",
            cww.rows(),
            cww.cols()
        )));
    }
    let mut c_n = ComplexMatrix::zeros(j, j);
    let mut gains = Vec::with_capacity(model.n());
    let mut ridges = Vec::with_capacity(model.n());
    for (n, b) in model.b.iter().enumerate() {
        let (x, r) = inner_solve(b, cww, ridge, n)?;
        // C B^H = (B C)^H since C is Hermitian.
        let bc = b * cww;
        let term = &bc.adjoint() * &x;
        c_n = &c_n + &(cww - &term);
        gains.push(x);
        ridges.push(r);
    }
    Ok(CostMatrix {
        c_n: c_n.hermitian_part(),
        gains,
        ridges,
    })
}

#[derive(Clone, Debug)]
pub struct Beamformer {
    /// M×J with orthonormal rows.
    pub b0: ComplexMatrix,
    pub error: f64,
    /// The M-cut falls inside a repeated eigenvalue, so B0 is not unique.
    pub degenerate: bool,
}

/// Rows of B0 = eigenvectors of the M smallest eigenvalues of C_N.
pub fn design_beamformer(c_n: &ComplexMatrix, m: usize) -> Result<Beamformer> {
    let j = c_n.rows();
    if m == 0 || m > j {
        return Err(Error::Dimension(format!(
            "cannot pick {m} of {j} eigenvectors"
        )));
    }
    let e = eig_hermitian(c_n)?;
    let b0 = e.trailing(m).adjoint();
    let error = e.values[j - m..].iter().sum();
    let scale = e
        .values
        .iter()
        .fold(0.0f64, |a, v| a.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let degenerate = m < j && (e.values[j - m - 1] - e.values[j - m]).abs() <= 1e-10 * scale;
    Ok(Beamformer {
        b0,
        error,
        degenerate,
    })
}

/// T^[n] = B0 C B^H (B C B^H)^{-1}.
pub fn design_interpolators(
    model: &BeamspaceModel,
    cww: &ComplexMatrix,
    b0: &ComplexMatrix,
    ridge: Ridge,
) -> Result<Vec<ComplexMatrix>> {
    model
        .b
        .iter()
        .enumerate()
        .map(|(n, b)| inner_solve(b, cww, ridge, n).map(|(x, _)| interpolator(&x, b0)))
        .collect()
}

fn interpolator(gain: &ComplexMatrix, b0: &ComplexMatrix) -> ComplexMatrix {
    // T = B0 (B C)^H G^{-1} = (G^{-1} B C B0^H)^H
    (gain * &b0.adjoint()).adjoint()
}

/// Where B0 may live.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BeamformerSpace {
    /// All of C^J.
    Full,
    /// The span of the M leading eigenvectors of C_ww. Directions the sector barely
    /// excites are excluded, so the interpolators never amplify them.
    Principal,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DesignOptions {
    pub ridge: Ridge,
    pub space: BeamformerSpace,
}

impl Default for DesignOptions {
    fn default() -> Self {
        Self {
            ridge: Ridge::default(),
            space: BeamformerSpace::Principal,
        }
    }
}

#[derive(Clone, Debug)]
pub struct InterpolationDesign {
    pub cww: ComplexMatrix,
    pub c_n: ComplexMatrix,
    pub b0: ComplexMatrix,
    pub t: Vec<ComplexMatrix>,
    /// tr(B0 C_N B0^H).
    pub error: f64,
    pub degenerate: bool,
    pub ridges: Vec<f64>,
}

impl InterpolationDesign {
    pub fn build(model: &BeamspaceModel, sector: &Sector, opts: DesignOptions) -> Result<Self> {
        let m = model.m();
        let cww = sector_cww(sector, model.j()).map_err(Error::at("sector correlation"))?;
        let cost = compute_cn(model, &cww, opts.ridge).map_err(Error::at("design cost"))?;
        let (b0, degenerate) = match opts.space {
            BeamformerSpace::Full => {
                let bf = design_beamformer(&cost.c_n, m).map_err(Error::at("beamformer"))?;
                (bf.b0, bf.degenerate)
            }
            BeamformerSpace::Principal => {
                let u = eig_hermitian(&cww)
                    .map_err(Error::at("sector correlation eigendecomposition"))?
                    .leading(m);
                let reduced = (&(&u.adjoint() * &cost.c_n) * &u).hermitian_part();
                let bf = design_beamformer(&reduced, m).map_err(Error::at("beamformer"))?;
                (&bf.b0 * &u.adjoint(), bf.degenerate)
            }
        };
        let error = (&(&b0 * &cost.c_n) * &b0.adjoint()).trace().re;
        let t = cost.gains.iter().map(|g| interpolator(g, &b0)).collect();
        Ok(Self {
            cww,
            c_n: cost.c_n,
            b0,
            t,
            error,
            degenerate,
            ridges: cost.ridges,
        })
    }

    /// s̄^[n] = T^[n] s^[n].
    pub fn interpolate(&self, snaps: &SnapshotSet) -> Result<Vec<Vec<C64>>> {
        if snaps.count() != self.t.len() {
            return Err(Error::CountMismatch {
                expected: self.t.len(),
                got: snaps.count(),
            });
        }
        Ok(self
            .t
            .iter()
            .zip(&snaps.snapshots)
            .map(|(t, s)| t.matvec(s))
            .collect())
    }

    /// `error` over the energy of the desired response, N·tr(B0 C_ww B0^H).
    pub fn relative_error(&self) -> f64 {
        let target =
            (&(&self.b0 * &self.cww) * &self.b0.adjoint()).trace().re * self.t.len() as f64;
        self.error / target
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beamspace::steering_vector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, rng: &mut impl Rng) -> ComplexMatrix {
        ComplexMatrix::from_fn(rows, cols, |_, _| {
            C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        })
    }

    fn adaptive_simpson(f: &dyn Fn(f64) -> C64, a: f64, b: f64, tol: f64) -> C64 {
        fn rec(
            f: &dyn Fn(f64) -> C64,
            a: f64,
            b: f64,
            fa: C64,
            fm: C64,
            fb: C64,
            whole: C64,
            tol: f64,
            depth: u32,
        ) -> C64 {
            let m = 0.5 * (a + b);
            let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
            let (flm, frm) = (f(lm), f(rm));
            let left = (fa + flm * 4.0 + fm) * ((m - a) / 6.0);
            let right = (fm + frm * 4.0 + fb) * ((b - m) / 6.0);
            if depth == 0 || (left + right - whole).norm() <= 15.0 * tol {
                return left + right + (left + right - whole) / 15.0;
            }
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
        let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
        let whole = (fa + fm * 4.0 + fb) * ((b - a) / 6.0);
        rec(f, a, b, fa, fm, fb, whole, tol, 40)
    }

    fn small_model(rng: &mut impl Rng) -> BeamspaceModel {
        BeamspaceModel::from_matrices(vec![random(2, 3, rng), random(2, 3, rng)]).unwrap()
    }

    #[test]
    fn full_period_is_scaled_identity() {
        let c = sector_cww(&Sector::full_period(), 5).unwrap();
        assert!((&c - &ComplexMatrix::identity(5).scale_real(TWO_PI)).max_abs() < 1e-12);
    }

    #[test]
    fn half_period_by_hand() {
        let c = sector_cww(&Sector::from_unwrapped(&[(0.0, PI)]).unwrap(), 2).unwrap();
        assert!((c[(0, 0)] - C64::new(PI, 0.0)).norm() < 1e-15);
        assert!((c[(0, 1)] - C64::new(0.0, -2.0)).norm() < 1e-15);
        assert!((c[(1, 0)] - C64::new(0.0, 2.0)).norm() < 1e-15);
    }

    #[test]
    fn cww_matches_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let windows: Vec<(f64, f64)> = (0..3)
            .map(|_| {
                let lo = rng.gen_range(-3.0..15.0);
                (lo, lo + rng.gen_range(0.05..1.5))
            })
            .collect();
        let sector = Sector::from_unwrapped(&windows).unwrap();
        let j = 12;
        let c = sector_cww(&sector, j).unwrap();
        // Integrate the raw windows over the union: mark each θ once.
        for p in 0..j {
            for q in 0..j {
                let d = p as f64 - q as f64;
                let mut acc = C64::new(0.0, 0.0);
                for cl in sector.clusters() {
                    acc += adaptive_simpson(&|t| cis(d * t), cl.start, cl.end, 1e-13);
                }
                assert!((c[(p, q)] - acc).norm() < 1e-10, "({p},{q})");
            }
        }
    }

    #[test]
    fn overlapping_windows_merge_across_the_period_boundary() {
        let s = Sector::from_unwrapped(&[(TWO_PI - 0.2, TWO_PI + 0.1), (0.05, 0.3), (2.0, 2.5)])
            .unwrap();
        assert_eq!(s.clusters().len(), 2);
        assert!((s.measure() - (0.5 + 0.5)).abs() < 1e-12);
        assert_eq!(s.subsectors()[0].wrap, 0);
        assert_eq!(s.subsectors()[1].wrap, 0);
        let shifted = Sector::from_unwrapped(&[(3.0 * TWO_PI + 1.0, 3.0 * TWO_PI + 1.5)]).unwrap();
        assert_eq!(shifted.subsectors()[0].wrap, 3);
    }

    #[test]
    fn empty_sector_rejected() {
        assert!(matches!(
            Sector::from_unwrapped(&[]),
            Err(Error::EmptySector)
        ));
    }

    #[test]
    fn square_single_snapshot_has_zero_cost() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let model = BeamspaceModel::from_matrices(vec![random(3, 3, &mut rng)]).unwrap();
        let cww = sector_cww(&Sector::from_unwrapped(&[(0.2, 1.9)]).unwrap(), 3).unwrap();
        let cost = compute_cn(&model, &cww, Ridge::None).unwrap();
        assert!(cost.c_n.max_abs() < 1e-10 * cww.max_abs());
    }

    #[test]
    fn diagonal_cost_picks_smallest() {
        let c = ComplexMatrix::diag(&[4.0, 3.0, 2.0, 1.0].map(|x| C64::new(x, 0.0)));
        let bf = design_beamformer(&c, 2).unwrap();
        assert!((bf.error - 3.0).abs() < 1e-14);
        assert!(!bf.degenerate);
        for r in 0..2 {
            assert!(bf.b0[(r, 0)].norm() < 1e-15 && bf.b0[(r, 1)].norm() < 1e-15);
        }
        let gram = &bf.b0 * &bf.b0.adjoint();
        assert!((&gram - &ComplexMatrix::identity(2)).max_abs() < 1e-10);
    }

    #[test]
    fn interpolators_are_identity_when_model_is_already_time_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cn = {
            let a = random(5, 5, &mut rng);
            &a * &a.adjoint()
        };
        let b0 = design_beamformer(&cn, 2).unwrap().b0;
        let model = BeamspaceModel::from_matrices(vec![b0.clone(), b0.clone()]).unwrap();
        let cww = sector_cww(&Sector::from_unwrapped(&[(0.0, 2.0)]).unwrap(), 5).unwrap();
        for t in design_interpolators(&model, &cww, &b0, Ridge::None).unwrap() {
            assert!((&t - &ComplexMatrix::identity(2)).max_abs() < 1e-10);
        }
    }

    #[test]
    fn stationarity_and_objective_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let model = small_model(&mut rng);
        let sector = Sector::from_unwrapped(&[(0.3, 1.4), (3.0, 4.1)]).unwrap();
        let opts = DesignOptions {
            ridge: Ridge::None,
            space: BeamformerSpace::Full,
        };
        let d = InterpolationDesign::build(&model, &sector, opts).unwrap();
        let gram = &d.b0 * &d.b0.adjoint();
        assert!((&gram - &ComplexMatrix::identity(2)).max_abs() < 1e-10);
        for (t, b) in d.t.iter().zip(&model.b) {
            let resid = &(&(&(&(t * b) - &d.b0) * &d.cww) * &b.adjoint());
            assert!(resid.max_abs() <= 1e-8 * (&(&d.b0 * &d.cww) * &b.adjoint()).max_abs());
        }
        // Σ_n ∫ ||T B w − B0 w||² dθ by quadrature.
        let mut total = 0.0;
        for (t, b) in d.t.iter().zip(&model.b) {
            let diff = &(t * b) - &d.b0;
            for cl in sector.clusters() {
                total += adaptive_simpson(
                    &|th| {
                        let v = diff.matvec(&steering_vector(th, 3));
                        C64::new(v.iter().map(|z| z.norm_sqr()).sum(), 0.0)
                    },
                    cl.start,
                    cl.end,
                    1e-12,
                )
                .re;
            }
        }
        assert!(
            (total - d.error).abs() <= 1e-6 * d.error,
            "{total} vs {}",
            d.error
        );

        // No randomly perturbed interpolator does better.
        for _ in 0..200 {
            let mut obj = 0.0;
            for (t, b) in d.t.iter().zip(&model.b) {
                let tp = &t.clone() + &random(2, 2, &mut rng).scale_real(0.05);
                let diff = &(&tp * b) - &d.b0;
                obj += (&(&diff * &d.cww) * &diff.adjoint()).trace().re;
            }
            assert!(obj >= d.error * (1.0 - 1e-12));
        }
    }

    #[test]
    fn cost_is_positive_semidefinite() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let model = BeamspaceModel::from_matrices((0..4).map(|_| random(3, 7, &mut rng)).collect())
            .unwrap();
        let cww = sector_cww(&Sector::from_unwrapped(&[(1.0, 2.5)]).unwrap(), 7).unwrap();
        let cost = compute_cn(&model, &cww, Ridge::default()).unwrap();
        let e = eig_hermitian(&cost.c_n).unwrap();
        let tr = cost.c_n.trace().re;
        assert!(e.values.iter().all(|&v| v >= -1e-10 * tr));
    }
}
