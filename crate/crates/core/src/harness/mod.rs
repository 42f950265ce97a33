//! Experiment configuration, trial orchestration and CSV / SVG output.

mod config;
mod plot;
mod run;
mod sweep;

pub use config::{AlphaSource, AlphaSpec, CumulantSource, ExperimentConfig, ModelKind, SpectrumSpec, SweepSpec};
pub use plot::emit_plot;
pub use run::{
    build_instance, limit_cumulants, mean_std, prepare_trial, run_experiment, run_trial, run_trials_at,
    state_evolution_curve, write_experiment, write_long_csv, write_summary_csv, write_trace_csv, write_trials_csv,
    ExperimentFiles, ExperimentResult, Prepared, SeCurve, SummaryRow, TrialOutcome, TrialStatus, INSTANCE_MEMORY_BUDGET,
    SUMMARY_HEADER,
};
pub use sweep::{run_sweep, sweep_alpha, write_sweep_csv, SweepPoint, SweepResult, SWEEP_HEADER, SWEEP_STOP_TOL, TRANSITION_MARGIN};

/// Seed of trial `trial` under `seed_base`.
pub fn trial_seed(seed_base: u64, trial: usize) -> u64 {
    run::trial_seed(seed_base, trial)
}
