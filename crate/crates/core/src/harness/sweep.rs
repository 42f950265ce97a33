//! Alpha sweeps: PCA against converged AMP as a function of the SNR.

use super::config::{ExperimentConfig, ModelKind};
use super::run::{mean_std, run_trials_at, ExperimentResult, TrialStatus};
use crate::error::Result;
use crate::random_matrix::derive_seed;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

/// Stopping tolerance on successive PCA overlaps used when a sweep sets none.
pub const SWEEP_STOP_TOL: f64 = 1e-5;
/// AMP counts as improving on PCA once its mean overlap exceeds PCA's by this much.
pub const TRANSITION_MARGIN: f64 = 0.02;

#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub alpha: f64,
    /// alpha over the reference threshold (alpha_tilde units for rectangular models).
    pub alpha_relative: f64,
    pub trials: usize,
    pub pca_formula: f64,
    pub pca_mean: f64,
    pub pca_std: f64,
    /// Overlap of the last AMP iterate, over trials that did not blow up.
    pub amp_mean: f64,
    pub amp_std: f64,
    /// SE prediction at the last iteration.
    pub se_overlap: f64,
    pub alpha_hat_mean: Option<f64>,
    pub no_gap: usize,
    pub blowups: usize,
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub name: String,
    pub points: Vec<SweepPoint>,
    /// Index of the first point where AMP beats PCA by [`TRANSITION_MARGIN`].
    pub transition: Option<usize>,
}

impl SweepResult {
    pub fn transition_alpha(&self) -> Option<f64> {
        self.transition.map(|i| self.points[i].alpha)
    }
}

fn point(cfg: &ExperimentConfig, threshold: f64, r: &ExperimentResult) -> SweepPoint {
    let pcas: Vec<f64> = r.trials.iter().map(|t| t.pca_overlap_u).collect();
    let amps: Vec<f64> = r.trials.iter().filter_map(|t| t.final_overlap()).collect();
    let hats: Vec<f64> = r.trials.iter().filter_map(|t| t.alpha_hat).collect();
    let (pca_mean, pca_std, _) = mean_std(&pcas);
    let (amp_mean, amp_std, _) = mean_std(&amps);
    let scale = match cfg.model {
        ModelKind::Square => 1.0,
        ModelKind::Rectangular => cfg.gamma().unwrap_or(1.0).sqrt(),
    };
    SweepPoint {
        alpha: r.alpha,
        alpha_relative: if threshold > 0.0 { r.alpha / scale / threshold } else { f64::NAN },
        trials: r.trials.len(),
        pca_formula: r.pca_formula,
        pca_mean,
        pca_std,
        amp_mean,
        amp_std,
        se_overlap: r.se.rows.last().map(|s| s.overlap_pred_u).unwrap_or(f64::NAN),
        alpha_hat_mean: (!hats.is_empty()).then(|| mean_std(&hats).0),
        no_gap: r.trials.iter().filter(|t| t.status == TrialStatus::NoSpectralGap).count(),
        blowups: r.blowups(),
    }
}

/// Runs every alpha of the sweep; trial seeds differ between points.
pub fn sweep_alpha(cfg: &ExperimentConfig) -> Result<SweepResult> {
    let alphas = cfg.sweep_alphas()?;
    let mut run_cfg = cfg.clone();
    run_cfg.stop_tol = Some(cfg.stop_tol.unwrap_or(SWEEP_STOP_TOL));
    let threshold = cfg.spectrum_model()?.reference_threshold()?;
    let mut points = Vec::with_capacity(alphas.len());
    for (k, &alpha) in alphas.iter().enumerate() {
        let r = run_trials_at(&run_cfg, alpha, derive_seed(cfg.seed, 1 << 32 | k as u64))?;
        points.push(point(cfg, threshold, &r));
    }
    let transition = points.iter().position(|p| p.amp_mean >= p.pca_mean + TRANSITION_MARGIN);
    Ok(SweepResult { name: cfg.name.clone(), points, transition })
}

pub const SWEEP_HEADER: &str =
    "alpha,alpha_relative,trials,pca_formula,pca_mean,pca_std,amp_mean,amp_std,se_overlap,alpha_hat_mean,no_gap,blowups,transition";

pub fn write_sweep_csv<W: Write>(out: &mut W, result: &SweepResult) -> Result<()> {
    writeln!(out, "# schema=1")?;
    writeln!(out, "{SWEEP_HEADER}")?;
    for (i, p) in result.points.iter().enumerate() {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            p.alpha,
            p.alpha_relative,
            p.trials,
            p.pca_formula,
            p.pca_mean,
            p.pca_std,
            p.amp_mean,
            p.amp_std,
            p.se_overlap,
            p.alpha_hat_mean.map(|a| a.to_string()).unwrap_or_default(),
            p.no_gap,
            p.blowups,
            u8::from(result.transition == Some(i))
        )?;
    }
    Ok(())
}

/// Runs the sweep and writes `<name>_sweep.csv` to `cfg.out`.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<(SweepResult, PathBuf)> {
    let result = sweep_alpha(cfg)?;
    std::fs::create_dir_all(&cfg.out)?;
    let path = cfg.out.join(format!("{}_sweep.csv", cfg.name));
    let mut w = BufWriter::new(File::create(&path)?);
    write_sweep_csv(&mut w, &result)?;
    w.flush()?;
    Ok((result, path))
}
