//! Trial orchestration for a single alpha.

use super::config::{AlphaSource, CumulantSource, ExperimentConfig, ModelKind, SpectrumSpec};
use crate::amp_rect::{amp_rect_run, AmpRectConfig};
use crate::amp_square::{amp_square_run, AmpSquareConfig, IterRecord};
use crate::denoisers::Denoiser;
use crate::error::{Error, Result};
use crate::free_probability::{moments_to_free_cumulants, moments_to_rect_cumulants, CumulantSeries, Kind};
use crate::random_matrix::{
    build_rect_instance, build_square_instance, build_wishart_instance, derive_seed, dump_instance, ModelInstance,
};
use crate::spectral::{estimate_alpha, spectral_summary, SpectralSummary};
use crate::state_evolution::{
    se_rect_run, se_rows_rect, se_rows_square, se_square_run, write_se_csv, SeRectConfig, SeRow, SeSquareConfig,
};
use rayon::prelude::*;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

/// Instances are kept between the alpha-estimation pass and the AMP pass while
/// their matrices fit in this many bytes; beyond it they are rebuilt from their seeds.
pub const INSTANCE_MEMORY_BUDGET: usize = 1 << 30;

#[derive(Clone, Debug, PartialEq)]
pub enum TrialStatus {
    Ok,
    /// No isolated top value: alpha_hat is unavailable and AMP ran with the true alpha.
    NoSpectralGap,
    /// AMP diverged; no iterates are reported.
    Blowup { iteration: usize },
}

impl TrialStatus {
    pub fn label(&self) -> &'static str {
        match self {
            TrialStatus::Ok => "ok",
            TrialStatus::NoSpectralGap => "no_spectral_gap",
            TrialStatus::Blowup { .. } => "blowup",
        }
    }
}

/// Everything one trial reports back to the orchestrator.
#[derive(Clone, Debug)]
pub struct TrialOutcome {
    pub trial: usize,
    pub seed: u64,
    pub status: TrialStatus,
    pub alpha_hat: Option<f64>,
    pub top_value: f64,
    /// <u_PCA, u*>^2 / ||u*||^2.
    pub pca_overlap_u: f64,
    pub pca_overlap_v: Option<f64>,
    pub u: Vec<IterRecord>,
    pub v: Option<Vec<IterRecord>>,
}

impl TrialOutcome {
    /// Overlap of the last u iterate with the signal (None after a blowup).
    pub fn final_overlap(&self) -> Option<f64> {
        self.u.last().map(|r| r.overlap_signal)
    }
}

/// SE curve shared by all trials of a configuration.
#[derive(Clone, Debug)]
pub struct SeCurve {
    pub alpha: f64,
    pub rows: Vec<SeRow>,
    pub u_denoisers: Vec<Denoiser>,
    pub v_denoisers: Vec<Denoiser>,
}

impl SeCurve {
    pub fn overlap_u(&self, t: usize) -> Option<f64> {
        self.rows.get(t.checked_sub(1)?).map(|r| r.overlap_pred_u)
    }

    pub fn overlap_v(&self, t: usize) -> Option<f64> {
        self.rows.get(t.checked_sub(1)?).and_then(|r| r.overlap_pred_v)
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub name: String,
    pub alpha: f64,
    /// Limiting PCA overlap at the true alpha (left side).
    pub pca_formula: f64,
    pub se: SeCurve,
    pub trials: Vec<TrialOutcome>,
}

impl ExperimentResult {
    pub fn blowups(&self) -> usize {
        self.trials.iter().filter(|t| matches!(t.status, TrialStatus::Blowup { .. })).count()
    }

    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut rows = summarize(&self.trials, "u", |o| Some(&o.u), |t| self.se.overlap_u(t), self.pca_formula);
        if self.trials.iter().any(|o| o.v.is_some()) {
            rows.extend(summarize(&self.trials, "v", |o| o.v.as_ref(), |t| self.se.overlap_v(t), f64::NAN));
        }
        rows
    }
}

/// Mean, standard deviation (n - 1 denominator) and standard error.
pub fn mean_std(values: &[f64]) -> (f64, f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    (mean, sd, sd / (n as f64).sqrt())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub side: &'static str,
    pub t: usize,
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    pub stderr: f64,
    pub mean_pca: f64,
    pub se_overlap: Option<f64>,
    pub pca_overlap: f64,
}

fn summarize<'a>(
    trials: &'a [TrialOutcome],
    side: &'static str,
    records: impl Fn(&'a TrialOutcome) -> Option<&'a Vec<IterRecord>>,
    se: impl Fn(usize) -> Option<f64>,
    pca: f64,
) -> Vec<SummaryRow> {
    let horizon = trials.iter().filter_map(&records).map(|r| r.len()).max().unwrap_or(0);
    (1..=horizon)
        .map(|t| {
            let mut sig = Vec::new();
            let mut pc = Vec::new();
            for r in trials.iter().filter_map(&records) {
                if let Some(rec) = r.get(t - 1) {
                    sig.push(rec.overlap_signal);
                    pc.push(rec.overlap_pca);
                }
            }
            let (mean, std, stderr) = mean_std(&sig);
            SummaryRow { side, t, count: sig.len(), mean, std, stderr, mean_pca: mean_std(&pc).0, se_overlap: se(t), pca_overlap: pca }
        })
        .collect()
}

/// A built instance with its spectral summary.
pub struct Prepared {
    pub instance: ModelInstance,
    pub pca: SpectralSummary,
    pub alpha_hat: Option<f64>,
}

pub(crate) fn trial_seed(base: u64, trial: usize) -> u64 {
    derive_seed(base, trial as u64)
}

pub fn build_instance(cfg: &ExperimentConfig, alpha: f64, seed: u64) -> Result<ModelInstance> {
    let model = cfg.spectrum_model()?;
    match (cfg.model, cfg.spectrum) {
        (ModelKind::Square, SpectrumSpec::Wishart { c }) => build_wishart_instance(cfg.n, c, alpha, cfg.prior_u, seed),
        (ModelKind::Square, _) => build_square_instance(cfg.n, alpha, &model, cfg.prior_u, seed),
        (ModelKind::Rectangular, _) => build_rect_instance(cfg.m, cfg.n, alpha, &model, cfg.prior_u, cfg.prior_v, seed),
    }
}

/// Builds the instance, its spectral summary and (when a gap exists) alpha_hat.
pub fn prepare_trial(cfg: &ExperimentConfig, alpha: f64, seed: u64) -> Result<Prepared> {
    let instance = build_instance(cfg, alpha, seed)?;
    let pca = spectral_summary(&instance.x, instance.kind)?;
    let alpha_hat = match estimate_alpha(&pca) {
        Ok(a) => Some(a),
        Err(Error::NoSpectralGap { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(Prepared { instance, pca, alpha_hat })
}

/// Cumulants of the limiting noise law.
pub fn limit_cumulants(cfg: &ExperimentConfig) -> Result<CumulantSeries> {
    cfg.spectrum_model()?.cumulants(cfg.cumulant_order)
}

/// One SE run at `alpha_se`, with the PCA overlap of the named law as its initialization.
pub fn state_evolution_curve(cfg: &ExperimentConfig, alpha_se: f64, cumulants: &CumulantSeries) -> Result<SeCurve> {
    let model = cfg.spectrum_model()?;
    let overlap = model.pca_overlap(alpha_se)?.left();
    match cfg.model {
        ModelKind::Square => {
            let se = se_square_run(&SeSquareConfig {
                alpha: alpha_se,
                cumulants: cumulants.clone(),
                prior: cfg.prior_u,
                rule: cfg.denoiser_u.clone(),
                iterations: cfg.iterations,
                engine: cfg.engine,
                rho_sq: Some(overlap),
            })?;
            Ok(SeCurve { alpha: alpha_se, rows: se_rows_square(&se), u_denoisers: se.denoisers, v_denoisers: Vec::new() })
        }
        ModelKind::Rectangular => {
            let se = se_rect_run(&SeRectConfig {
                alpha: alpha_se,
                cumulants: cumulants.clone(),
                prior_u: cfg.prior_u,
                prior_v: cfg.prior_v,
                u_rule: cfg.denoiser_u.clone(),
                v_rule: cfg.denoiser_v.clone(),
                iterations: cfg.iterations,
                engine: cfg.engine,
                delta_pca: overlap,
            })?;
            Ok(SeCurve { alpha: alpha_se, rows: se_rows_rect(&se), u_denoisers: se.u_denoisers, v_denoisers: se.v_denoisers })
        }
    }
}

fn overlap_with(a: &[f64], b: &[f64]) -> f64 {
    crate::amp_square::overlap(a, b)
}

/// Runs AMP on a prepared trial. Blowups become a status, other errors propagate.
pub fn run_trial(
    cfg: &ExperimentConfig,
    alpha: f64,
    trial: usize,
    seed: u64,
    prep: &Prepared,
    se: &SeCurve,
    limit: &CumulantSeries,
) -> Result<TrialOutcome> {
    let inst = &prep.instance;
    let pca = &prep.pca;
    let amp_alpha = match cfg.alpha_source {
        AlphaSource::Estimated => prep.alpha_hat.unwrap_or(alpha),
        AlphaSource::Oracle => alpha,
    };
    let cumulants = match cfg.cumulant_source {
        CumulantSource::Limit => limit.clone(),
        CumulantSource::Empirical => {
            let m = pca.bulk_moments(cfg.cumulant_order)?;
            match inst.kind {
                Kind::Square => moments_to_free_cumulants(&m)?,
                Kind::Rectangular { .. } => moments_to_rect_cumulants(&m)?,
            }
        }
    };
    let pca_overlap_u = overlap_with(&pca.top_left, &inst.u_star);
    let pca_overlap_v = match (&pca.top_right, &inst.v_star) {
        (Some(v), Some(s)) => Some(overlap_with(v, s)),
        _ => None,
    };
    let mut out = TrialOutcome {
        trial,
        seed,
        status: if prep.alpha_hat.is_some() { TrialStatus::Ok } else { TrialStatus::NoSpectralGap },
        alpha_hat: prep.alpha_hat,
        top_value: pca.top_value,
        pca_overlap_u,
        pca_overlap_v,
        u: Vec::new(),
        v: None,
    };
    let ran = match inst.kind {
        Kind::Square => amp_square_run(
            inst,
            pca,
            &AmpSquareConfig {
                iterations: cfg.iterations,
                cumulants,
                alpha: amp_alpha,
                denoisers: se.u_denoisers.clone(),
                stop_tol: cfg.stop_tol,
            },
        )
        .map(|tr| (tr.records, None)),
        Kind::Rectangular { .. } => amp_rect_run(
            inst,
            pca,
            &AmpRectConfig {
                iterations: cfg.iterations,
                cumulants,
                alpha: amp_alpha,
                u_denoisers: se.u_denoisers.clone(),
                v_denoisers: se.v_denoisers.clone(),
                stop_tol: cfg.stop_tol,
            },
        )
        .map(|tr| (tr.u.records, Some(tr.v.records))),
    };
    match ran {
        Ok((u, v)) => {
            out.u = u;
            out.v = v;
        }
        Err(Error::NumericalBlowup { iteration, .. }) => out.status = TrialStatus::Blowup { iteration },
        Err(e) => return Err(e),
    }
    Ok(out)
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Param(format!("cannot start worker pool: {e}")))
}

fn instance_bytes(cfg: &ExperimentConfig) -> usize {
    let rows = match cfg.model {
        ModelKind::Square => cfg.n,
        ModelKind::Rectangular => cfg.m,
    };
    rows.saturating_mul(cfg.n).saturating_mul(std::mem::size_of::<f64>())
}

/// Runs all trials at one alpha with seeds derived from `seed_base`.
pub fn run_trials_at(cfg: &ExperimentConfig, alpha: f64, seed_base: u64) -> Result<ExperimentResult> {
    cfg.validate()?;
    let limit = limit_cumulants(cfg)?;
    let seeds: Vec<u64> = (0..cfg.trials).map(|i| trial_seed(seed_base, i)).collect();
    let pool = pool(cfg.jobs)?;
    let pca_formula = cfg.spectrum_model()?.pca_overlap(alpha)?.left();

    let (se, trials) = match cfg.alpha_source {
        AlphaSource::Oracle => {
            let se = state_evolution_curve(cfg, alpha, &limit)?;
            let trials = pool.install(|| {
                (0..cfg.trials)
                    .into_par_iter()
                    .map(|i| {
                        let prep = prepare_trial(cfg, alpha, seeds[i])?;
                        run_trial(cfg, alpha, i, seeds[i], &prep, &se, &limit)
                    })
                    .collect::<Result<Vec<_>>>()
            })?;
            (se, trials)
        }
        AlphaSource::Estimated => {
            let keep = instance_bytes(cfg).saturating_mul(cfg.trials) <= INSTANCE_MEMORY_BUDGET;
            // First pass: alpha_hat per trial (the prepared instances are kept when they fit).
            let first: Vec<(Option<f64>, Option<Prepared>)> = pool.install(|| {
                (0..cfg.trials)
                    .into_par_iter()
                    .map(|i| {
                        let p = prepare_trial(cfg, alpha, seeds[i])?;
                        Ok((p.alpha_hat, keep.then_some(p)))
                    })
                    .collect::<Result<Vec<_>>>()
            })?;
            let hats: Vec<f64> = first.iter().filter_map(|(a, _)| *a).collect();
            let alpha_se = if hats.is_empty() { alpha } else { hats.iter().sum::<f64>() / hats.len() as f64 };
            let se = state_evolution_curve(cfg, alpha_se, &limit)?;
            let trials = pool.install(|| {
                first
                    .into_par_iter()
                    .enumerate()
                    .map(|(i, (_, kept))| {
                        let prep = match kept {
                            Some(p) => p,
                            None => prepare_trial(cfg, alpha, seeds[i])?,
                        };
                        run_trial(cfg, alpha, i, seeds[i], &prep, &se, &limit)
                    })
                    .collect::<Result<Vec<_>>>()
            })?;
            (se, trials)
        }
    };
    Ok(ExperimentResult { name: cfg.name.clone(), alpha, pca_formula, se, trials })
}

/// Paths of the files written by [`run_experiment`].
#[derive(Clone, Debug)]
pub struct ExperimentFiles {
    pub long: PathBuf,
    pub summary: PathBuf,
    pub trials: PathBuf,
    pub se: PathBuf,
    pub trace: PathBuf,
    pub instance: Option<PathBuf>,
}

/// Runs the configured single-alpha experiment and writes its CSVs to `cfg.out`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<(ExperimentResult, ExperimentFiles)> {
    let alpha = cfg.alpha_value()?;
    let result = run_trials_at(cfg, alpha, cfg.seed)?;
    let files = write_experiment(cfg, &result)?;
    Ok((result, files))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

pub fn write_experiment(cfg: &ExperimentConfig, result: &ExperimentResult) -> Result<ExperimentFiles> {
    let dir = &cfg.out;
    let path = |suffix: &str| dir.join(format!("{}_{suffix}", cfg.name));
    let files = ExperimentFiles {
        long: path("long.csv"),
        summary: path("summary.csv"),
        trials: path("trials.csv"),
        se: path("se.csv"),
        trace: path("trace.csv"),
        instance: cfg.dump_instance.then(|| path("instance.txt")),
    };
    let mut w = create(&files.long)?;
    write_long_csv(&mut w, result)?;
    w.flush()?;
    let mut w = create(&files.summary)?;
    write_summary_csv(&mut w, &result.summary())?;
    w.flush()?;
    let mut w = create(&files.trials)?;
    write_trials_csv(&mut w, &result.trials)?;
    w.flush()?;
    let mut w = create(&files.se)?;
    write_se_csv(&mut w, &result.se.rows)?;
    w.flush()?;
    let mut w = create(&files.trace)?;
    let first = result.trials.first().map(|t| t.u.as_slice()).unwrap_or(&[]);
    write_trace_csv(&mut w, first)?;
    w.flush()?;
    if let Some(p) = &files.instance {
        let inst = build_instance(cfg, result.alpha, trial_seed(cfg.seed, 0))?;
        dump_instance(&inst, p)?;
    }
    Ok(files)
}

/// `experiment,trial,side,t,overlap_signal,overlap_pca,se_overlap,alpha_hat`.
pub fn write_long_csv<W: Write>(out: &mut W, result: &ExperimentResult) -> Result<()> {
    writeln!(out, "# schema=1")?;
    writeln!(out, "experiment,trial,side,t,overlap_signal,overlap_pca,se_overlap,alpha_hat")?;
    for o in &result.trials {
        let sides: [(&str, Option<&Vec<IterRecord>>); 2] = [("u", Some(&o.u)), ("v", o.v.as_ref())];
        for (side, recs) in sides {
            for r in recs.into_iter().flatten() {
                let se = if side == "u" { result.se.overlap_u(r.t) } else { result.se.overlap_v(r.t) };
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    result.name,
                    o.trial,
                    side,
                    r.t,
                    r.overlap_signal,
                    r.overlap_pca,
                    opt(se),
                    opt(o.alpha_hat)
                )?;
            }
        }
    }
    Ok(())
}

pub const SUMMARY_HEADER: &str = "side,t,count,mean,std,stderr,mean_pca,se_overlap,pca_overlap";

pub fn write_summary_csv<W: Write>(out: &mut W, rows: &[SummaryRow]) -> Result<()> {
    writeln!(out, "# schema=1")?;
    writeln!(out, "{SUMMARY_HEADER}")?;
    for r in rows {
        let pca = if r.pca_overlap.is_nan() { String::new() } else { format!("{}", r.pca_overlap) };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.side,
            r.t,
            r.count,
            r.mean,
            r.std,
            r.stderr,
            r.mean_pca,
            opt(r.se_overlap),
            pca
        )?;
    }
    Ok(())
}

pub fn write_trials_csv<W: Write>(out: &mut W, trials: &[TrialOutcome]) -> Result<()> {
    writeln!(out, "# schema=1")?;
    writeln!(out, "trial,seed,status,alpha_hat,top_value,pca_overlap_u,pca_overlap_v,iterations,blowup_iteration")?;
    for o in trials {
        let blow = match o.status {
            TrialStatus::Blowup { iteration } => iteration.to_string(),
            _ => String::new(),
        };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            o.trial,
            o.seed,
            o.status.label(),
            opt(o.alpha_hat),
            o.top_value,
            o.pca_overlap_u,
            opt(o.pca_overlap_v),
            o.u.len(),
            blow
        )?;
    }
    Ok(())
}

/// `t,overlap_signal,overlap_pca,norm_u,norm_f,mean_uprime` for one trial.
pub fn write_trace_csv<W: Write>(out: &mut W, records: &[IterRecord]) -> Result<()> {
    writeln!(out, "# schema=1")?;
    writeln!(out, "t,overlap_signal,overlap_pca,norm_u,norm_f,mean_uprime")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.t,
            r.overlap_signal,
            r.overlap_pca,
            r.norm_u,
            r.norm_f,
            opt(r.mean_deriv)
        )?;
    }
    Ok(())
}
