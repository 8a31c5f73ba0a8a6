use clap::{Parser, Subcommand};
use quadcs::experiments::{
    code_seed, generate_scene, interpolation_error_survey, run_monte_carlo, summarize, trial_seed,
    write_summary_csv, write_trials_csv, ExperimentConfig, RunConfig, SystemContext, TrialRow,
};
use quadcs::glsr::{run_glsr, write_trace_csv, GlsrOptions};
use quadcs::interpolation::Sector;
use quadcs::operator::QuadCsConfig;
use quadcs::signal_model::add_noise;
use quadcs::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "quadcs",
    version,
    about = "Gridless delay estimation from QuadCS measurements"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a figure preset and write per-trial and per-cell CSV files.
    Experiment {
        #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(quadcs::experiments::PRESETS))]
        preset: String,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        workers: usize,
        /// Record per-trial wall time (the CSV is then no longer reproducible).
        #[arg(long)]
        timing: bool,
    },
    /// Run the sweep described by a config file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the file's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Also write the GLSR-1 pseudospectrum of the first trial.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        workers: usize,
    },
    /// Print derived constants and the mean relative interpolation error per K.
    Design {
        #[arg(long)]
        config: PathBuf,
        /// Random scenes averaged per K.
        #[arg(long, default_value_t = 10)]
        scenes: usize,
    },
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn write_results(exp: &ExperimentConfig, trials_path: &Path, summary_path: &Path) -> Result<usize> {
    let rows: Vec<TrialRow> = run_monte_carlo(exp)?.iter().map(TrialRow::from).collect();
    let mut w = create(trials_path)?;
    write_trials_csv(&rows, &mut w)?;
    w.flush()?;
    let mut w = create(summary_path)?;
    write_summary_csv(&summarize(&rows), &mut w)?;
    w.flush()?;
    Ok(rows.len())
}

fn summary_path_for(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "trials".into());
    out.with_file_name(format!("{stem}_summary.csv"))
}

fn load_config(path: &Path) -> Result<RunConfig> {
    RunConfig::parse(&fs::read_to_string(path)?)
}

fn write_trace(rc: &RunConfig, seed: u64, path: &Path) -> Result<()> {
    let exp = rc.to_experiment("trace")?;
    let cell = exp.cells[0];
    // Same code as the first system of the sweep, same scene as its first trial.
    let ctx = SystemContext::build(
        &rc.setup,
        rc.cs_bandwidth_hz,
        rc.m,
        code_seed(seed, 0),
        false,
    )?;
    let cfg = ctx.sys.config();
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(seed, 0, 0));
    let scene = generate_scene(&cell, rc.setup.tau_max_s, cfg.tau0(), &mut rng)?;
    let clean = ctx.sys.scene_spectrum(scene.delays(), scene.gains());
    let meas = ctx
        .sys
        .measure(&add_noise(&clean, cfg.bandwidth_hz, cell.isnr, &mut rng)?)?;
    let sector = Sector::around_delays(cfg.fp_hz, scene.delays(), cfg.tau0())?;
    let r = run_glsr(
        &ctx.sys,
        &ctx.model,
        &meas,
        &GlsrOptions::new(sector, cell.k),
    )?;
    let mut w = create(path)?;
    write_trace_csv(&r.trace, &mut w)?;
    w.flush()?;
    Ok(())
}

fn print_design(rc: &RunConfig, scenes: usize) -> Result<()> {
    let cfg = QuadCsConfig::derive(&rc.system_params())?;
    println!(
        "L = {}  M = {}  N = {}  L0 = {}  J = {}",
        cfg.l, cfg.m, cfg.n, cfg.l0, cfg.j
    );
    println!(
        "f_p = {} Hz  df = {} Hz  tau0 = {} s",
        cfg.fp_hz,
        cfg.df_hz,
        cfg.tau0()
    );
    let ks: Vec<usize> = if rc.k_list.is_empty() {
        (1..cfg.m).collect()
    } else {
        rc.k_list.clone()
    };
    if let Some(&bad) = ks.iter().find(|&&k| k == 0 || k >= cfg.m) {
        return Err(Error::InvalidConfig(format!(
            "K = {bad} outside 1..{}",
            cfg.m
        )));
    }
    let rows = interpolation_error_survey(
        &rc.setup,
        rc.cs_bandwidth_hz,
        rc.m,
        &ks,
        scenes.max(1),
        rc.seed,
    )?;
    println!("K,rel_interp_error_principal,rel_interp_error_full");
    for r in rows {
        println!("{},{:.6e},{:.6e}", r.k, r.principal, r.full);
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Experiment {
            preset,
            trials,
            seed,
            out,
            workers,
            timing,
        } => {
            let mut exp = ExperimentConfig::preset(&preset)?;
            if let Some(t) = trials {
                exp.trials = t;
            }
            exp.seed = seed;
            exp.workers = workers;
            exp.timing = timing;
            fs::create_dir_all(&out)?;
            let trials_path = out.join(format!("{preset}_trials.csv"));
            let n = write_results(
                &exp,
                &trials_path,
                &out.join(format!("{preset}_summary.csv")),
            )?;
            eprintln!("{n} records -> {}", trials_path.display());
        }
        Command::Simulate {
            config,
            seed,
            out,
            trace,
            workers,
        } => {
            let mut rc = load_config(&config)?;
            if let Some(s) = seed {
                rc.seed = s;
            }
            let mut exp = rc.to_experiment("simulate")?;
            exp.workers = workers;
            let n = write_results(&exp, &out, &summary_path_for(&out))?;
            eprintln!("{n} records -> {}", out.display());
            if let Some(path) = trace {
                write_trace(&rc, rc.seed, &path)?;
            }
        }
        Command::Design { config, scenes } => print_design(&load_config(&config)?, scenes)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
