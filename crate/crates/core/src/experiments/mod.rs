//! Metrics, Monte Carlo runner, figure presets and CSV persistence.

mod config;
mod metrics;
mod report;
mod runner;

pub use config::RunConfig;
pub use metrics::{compute_metrics, match_delays, rrms_tde, DelayMatch, Metrics};
pub use report::{
    read_trials_csv, summarize, write_summary_csv, write_trials_csv, SummaryRow, TrialRow,
    SUMMARY_HEADER, TRIALS_HEADER,
};
pub use runner::{
    code_seed, generate_scene, interpolation_error_survey, run_monte_carlo, run_trial, trial_seed,
    Cell, ErrorSurveyRow, ExperimentConfig, Method, Spacing, SystemContext, SystemSetup,
    TrialRecord, DEFAULT_TRIALS, PRESETS,
};
