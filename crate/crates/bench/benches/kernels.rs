use criterion::{black_box, criterion_group, criterion_main, Criterion};
use quadcs::beamspace::assemble_model;
use quadcs::glsr::{run_glsr, GlsrOptions};
use quadcs::interpolation::Sector;
use quadcs::numerics::eig_hermitian;
use quadcs::omp::{build_grid_dictionary, run_omp};
use quadcs::operator::{gen_spreading_code, QuadCsConfig, QuadCsSystem, SystemParams};
use quadcs::signal_model::{Waveform, WaveformSpec};
use quadcs::{ComplexMatrix, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn system() -> QuadCsSystem {
    let cfg =
        QuadCsConfig::derive(&SystemParams::new(50e6, 12.5e6, 20.48e-6, 16).with_tau_max(10.24e-6))
            .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let code = gen_spreading_code(&cfg, 128, &mut rng).unwrap();
    QuadCsSystem::new(
        cfg,
        code,
        Waveform::new(WaveformSpec::lfm(50e6, 10.24e-6).unwrap()).unwrap(),
    )
    .unwrap()
}

fn eig(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 64;
    let v: Vec<C64> = (0..n * n)
        .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let g = ComplexMatrix::from_row_major(n, n, v);
    let a = (&g + &g.adjoint()).scale_real(0.5);
    c.bench_function("eig_hermitian_64", |b| {
        b.iter(|| eig_hermitian(black_box(&a)).unwrap())
    });
}

fn estimators(c: &mut Criterion) {
    let sys = system();
    let cfg = sys.config();
    let model = assemble_model(&sys);
    let delays = [1.3e-6, 3.7e-6, 5.2e-6, 7.9e-6, 9.4e-6];
    let gains = vec![C64::new(1.0, 0.0); delays.len()];
    let meas = sys.measure(&sys.scene_spectrum(&delays, &gains)).unwrap();
    let sector = Sector::around_delays(cfg.fp_hz, &delays, cfg.tau0()).unwrap();
    let opts = GlsrOptions::new(sector, delays.len());
    c.bench_function("glsr_k5", |b| {
        b.iter(|| run_glsr(&sys, &model, black_box(&meas), &opts).unwrap())
    });
    let dict = build_grid_dictionary(&sys, cfg.tau0()).unwrap();
    c.bench_function("omp_k5", |b| {
        b.iter(|| run_omp(black_box(&meas), &dict, delays.len()).unwrap())
    });
}

criterion_group!(benches, eig, estimators);
criterion_main!(benches);
