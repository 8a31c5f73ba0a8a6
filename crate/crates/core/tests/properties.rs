use proptest::prelude::*;
use quadcs::beamspace::extract_snapshots_raw;
use quadcs::experiments::{compute_metrics, match_delays};
use quadcs::glsr::unwrap_delays;
use quadcs::interpolation::{sector_cww, Sector};
use quadcs::numerics::{eig_hermitian, least_squares};
use quadcs::operator::{gen_spreading_code, QuadCsConfig, QuadCsSystem, SystemParams};
use quadcs::signal_model::{Waveform, WaveformSpec};
use quadcs::{ComplexMatrix, C64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::sync::OnceLock;

fn system() -> &'static QuadCsSystem {
    static SYS: OnceLock<QuadCsSystem> = OnceLock::new();
    SYS.get_or_init(|| {
        let cfg = QuadCsConfig::derive(
            &SystemParams::new(50e6, 12.5e6, 20.48e-6, 16).with_tau_max(10.24e-6),
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let code = gen_spreading_code(&cfg, 128, &mut rng).unwrap();
        QuadCsSystem::new(
            cfg,
            code,
            Waveform::new(WaveformSpec::lfm(50e6, 10.24e-6).unwrap()).unwrap(),
        )
        .unwrap()
    })
}

fn c64() -> impl Strategy<Value = C64> {
    (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(re, im)| C64::new(re, im))
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = ComplexMatrix> {
    prop::collection::vec(c64(), rows * cols)
        .prop_map(move |v| ComplexMatrix::from_row_major(rows, cols, v))
}

fn delays(max_k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1e-9..10.24e-6f64, 1..=max_k)
}

fn rel(a: &[C64], b: &[C64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (num / den).sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn eigenvalues_sum_to_trace(g in (2usize..24).prop_flat_map(|n| matrix(n, n))) {
        let a = (&g + &g.adjoint()).scale_real(0.5);
        let e = eig_hermitian(&a).unwrap();
        let sum: f64 = e.values.iter().sum();
        prop_assert!((sum - a.trace().re).abs() <= 1e-10 * a.frobenius_norm());
        prop_assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn least_squares_recovers_consistent_solution(
        (a, x) in (1usize..12).prop_flat_map(|c| (matrix(c + 8, c), prop::collection::vec(c64(), c)))
    ) {
        let ls = least_squares(&a, &a.matvec(&x)).unwrap();
        prop_assume!(ls.condition < 1e6);
        prop_assert!(rel(&ls.x, &x) <= 1e-8 * ls.condition.max(1.0));
    }

    #[test]
    fn scene_spectrum_is_linear_in_gains(
        (d, g1, g2) in delays(5).prop_flat_map(|d| {
            let k = d.len();
            (Just(d), prop::collection::vec(c64(), k), prop::collection::vec(c64(), k))
        }),
        alpha in c64(),
    ) {
        let sys = system();
        let mix: Vec<C64> = g1.iter().zip(&g2).map(|(a, b)| alpha * a + b).collect();
        let lhs = sys.scene_spectrum(&d, &mix);
        let s1 = sys.scene_spectrum(&d, &g1);
        let s2 = sys.scene_spectrum(&d, &g2);
        let rhs: Vec<C64> = s1.values.iter().zip(&s2.values).map(|(a, b)| alpha * a + b).collect();
        prop_assume!(rhs.iter().any(|z| z.norm() > 0.0));
        prop_assert!(rel(&lhs.values, &rhs) < 1e-12);
    }

    #[test]
    fn measurement_is_linear(
        (d1, d2) in (delays(4), delays(4)),
        alpha in c64(),
    ) {
        let sys = system();
        let ones = |n: usize| vec![C64::new(1.0, 0.0); n];
        let s1 = sys.scene_spectrum(&d1, &ones(d1.len()));
        let s2 = sys.scene_spectrum(&d2, &ones(d2.len()));
        let mut sum = s1.clone();
        for (z, (a, b)) in sum.values.iter_mut().zip(s1.values.iter().zip(&s2.values)) {
            *z = alpha * a + b;
        }
        let lhs = sys.measure(&sum).unwrap().values;
        let m1 = sys.measure(&s1).unwrap().values;
        let m2 = sys.measure(&s2).unwrap().values;
        let rhs: Vec<C64> = m1.iter().zip(&m2).map(|(a, b)| alpha * a + b).collect();
        prop_assert!(rel(&lhs, &rhs) < 1e-12);
    }

    #[test]
    fn dictionary_columns_follow_delay_order(d in delays(6), shift in 0usize..6) {
        let sys = system();
        let mut rotated = d.clone();
        let s = shift % d.len();
        rotated.rotate_left(s);
        let a = sys.build_phi(&d);
        let b = sys.build_phi(&rotated);
        for c in 0..d.len() {
            prop_assert_eq!(b.column(c), a.column((c + s) % d.len()));
        }
    }

    #[test]
    fn sector_correlation_is_hermitian_toeplitz(
        windows in prop::collection::vec((-10.0..20.0f64, 0.01..2.0f64), 1..5),
        j in 2usize..20,
    ) {
        let w: Vec<(f64, f64)> = windows.iter().map(|&(lo, width)| (lo, lo + width)).collect();
        let c = sector_cww(&Sector::from_unwrapped(&w).unwrap(), j).unwrap();
        for p in 0..j {
            for q in 0..j {
                prop_assert!((c[(p, q)] - c[(q, p)].conj()).norm() < 1e-12);
                if p + 1 < j && q + 1 < j {
                    prop_assert!((c[(p, q)] - c[(p + 1, q + 1)]).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn delay_unwrap_round_trip(tau in 1e-9..10.24e-6f64) {
        let fp = system().config().fp_hz;
        let x = 2.0 * PI * fp * tau;
        let theta = x.rem_euclid(2.0 * PI);
        let wrap = (fp * tau).floor() as i64;
        let back = unwrap_delays(&[(theta, wrap)], fp)[0];
        prop_assert!((back - tau).abs() <= 1e-12 * tau.max(1e-6));
    }

    #[test]
    fn snapshots_interleave_back_to_measurement(v in prop::collection::vec(c64(), 48)) {
        let snaps = extract_snapshots_raw(&v, 6, 8).unwrap();
        prop_assert_eq!(snaps.interleave(), v);
    }

    #[test]
    fn delay_matching_ignores_input_order(
        truth in prop::collection::vec(0.0..1e-5f64, 1..8),
        noise in prop::collection::vec(-3e-8..3e-8f64, 8),
        shift in 0usize..8,
    ) {
        let est: Vec<f64> = truth.iter().zip(&noise).map(|(t, n)| t + n).collect();
        let mut shuffled = est.clone();
        shuffled.rotate_left(shift % est.len());
        let a = match_delays(&truth, &est, 20e-9).unwrap();
        let b = match_delays(&truth, &shuffled, 20e-9).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn rsnr_is_inverse_square_of_rrms_sr(d in delays(4), jitter in 1e-11..1e-8f64) {
        let sys = system();
        let gains = vec![C64::new(0.6, 0.3); d.len()];
        let truth = sys.scene_spectrum(&d, &gains);
        let moved: Vec<f64> = d.iter().map(|t| t + jitter).collect();
        let recon = sys.scene_spectrum(&moved, &gains);
        let m = compute_metrics(None, 20e-9, &truth, &recon, None, 50e6).unwrap();
        prop_assert!(m.rrms_sr >= 0.0);
        prop_assert!((m.rsnr() * m.rrms_sr * m.rrms_sr - 1.0).abs() < 1e-9);
    }
}
