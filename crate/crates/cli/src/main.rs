//! `spikamp`: simulations, sweeps and checks for AMP on spiked rotationally invariant models.

use clap::{Args, Parser, Subcommand};
use spikamp::free_probability::{Kind, SpectrumModel};
use spikamp::harness::{
    emit_plot, limit_cumulants, prepare_trial, run_experiment, run_sweep, state_evolution_curve, trial_seed, ExperimentConfig,
};
use spikamp::random_matrix::DENSE_CAP_ENV;
use spikamp::state_evolution::{omega11_closed_form, omega11_self_consistent, write_se_csv};
use spikamp::verification::{
    artificial_amp_phase1_run, phase1_alpha, phase1_se_fixed_point, write_phase1_csv, Phase1AmpConfig, Phase1Mode, Phase1SeConfig,
};
use spikamp::{Error, Result};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Gap at which the phase-1 recursion counts as converged.
const PHASE1_TOL: f64 = 1e-6;

#[derive(Parser)]
#[command(name = "spikamp", version, about = "AMP for spiked rotationally invariant matrices")]
#[command(after_help = format!("Environment:\n  {DENSE_CAP_ENV}  largest dense dimension allowed (default 10000)"))]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Experiment config (INI-style sections); defaults are used when absent.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Base seed, overrides `run.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, overrides `run.out`.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Number of trials, overrides `run.trials`.
    #[arg(long)]
    trials: Option<usize>,
    /// Worker threads, overrides `run.jobs`.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the trials of one configuration and write long, summary, trial, SE and trace CSVs.
    Simulate(Common),
    /// Compare PCA and converged AMP over the `[sweep]` alpha grid.
    Sweep(Common),
    /// Write the state-evolution prediction alone.
    StateEvolution(Common),
    /// Write the free cumulants and moments of the noise law, and report its thresholds.
    Cumulants(Common),
    /// Phase-1 fixed-point and artificial-AMP checks.
    Verify(Common),
    /// Render a summary or sweep CSV as SVG.
    Plot {
        /// Summary (`*_summary.csv`) or sweep (`*_sweep.csv`) file.
        input: PathBuf,
        /// Directory for the SVG (defaults to the input's directory).
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::from_path(p).map_err(|e| match e {
            Error::Io(io) => Error::Io(std::io::Error::new(io.kind(), format!("{}: {io}", p.display()))),
            other => other,
        })?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &common.out {
        cfg.out = o.clone();
    }
    if let Some(t) = common.trials {
        cfg.trials = t;
    }
    if let Some(j) = common.jobs {
        cfg.jobs = j;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create(dir: &Path, name: &str) -> Result<(PathBuf, BufWriter<File>)> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let file = File::create(&path)?;
    Ok((path, BufWriter::new(file)))
}

fn simulate(cfg: &ExperimentConfig) -> Result<()> {
    let (res, files) = run_experiment(cfg)?;
    let gaps = res.trials.iter().filter(|t| t.alpha_hat.is_none()).count();
    println!("{}: alpha {:.6}, {} trials, PCA limit {:.4}", res.name, res.alpha, res.trials.len(), res.pca_formula);
    if let Some(last) = res.summary().iter().rfind(|r| r.side == "u") {
        println!(
            "  t = {}: mean overlap {:.4} (sd {:.4}), SE {}",
            last.t,
            last.mean,
            last.std,
            last.se_overlap.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into())
        );
    }
    if gaps > 0 {
        println!("  {gaps} trial(s) without a spectral gap ran with the true alpha");
    }
    if res.blowups() > 0 {
        println!("  {} trial(s) blew up", res.blowups());
    }
    for p in [Some(&files.long), Some(&files.summary), Some(&files.trials), Some(&files.se), Some(&files.trace), files.instance.as_ref()]
        .into_iter()
        .flatten()
    {
        println!("  wrote {}", p.display());
    }
    Ok(())
}

fn sweep(cfg: &ExperimentConfig) -> Result<()> {
    if cfg.sweep.is_none() {
        return Err(Error::Config { line: 0, message: "no [sweep] section".into() });
    }
    let (res, path) = run_sweep(cfg)?;
    for p in &res.points {
        println!("alpha {:.5}: PCA {:.4}, AMP {:.4}, SE {:.4}", p.alpha, p.pca_mean, p.amp_mean, p.se_overlap);
    }
    match res.transition_alpha() {
        Some(a) => println!("AMP first beats PCA at alpha {a:.5}"),
        None => println!("AMP never beats PCA on this grid"),
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn state_evolution(cfg: &ExperimentConfig) -> Result<()> {
    let alpha = cfg.alpha_value()?;
    let se = state_evolution_curve(cfg, alpha, &limit_cumulants(cfg)?)?;
    let (path, mut w) = create(&cfg.out, &format!("{}_se.csv", cfg.name))?;
    write_se_csv(&mut w, &se.rows)?;
    w.flush()?;
    if let Some(r) = se.rows.last() {
        println!("alpha {alpha:.6}: predicted overlap at t = {}: {:.4}", r.t, r.overlap_pred_u);
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn cumulants(cfg: &ExperimentConfig) -> Result<()> {
    let model = cfg.spectrum_model()?;
    let k = model.cumulants(cfg.cumulant_order)?;
    let m = model.moments(cfg.cumulant_order)?;
    let step = if model.kind.is_square() { 1 } else { 2 };
    let (path, mut w) = create(&cfg.out, &format!("{}_cumulants.csv", cfg.name))?;
    writeln!(w, "# schema=1")?;
    writeln!(w, "index,order,kappa,moment")?;
    for (i, (kv, mv)) in k.values().iter().zip(m.values()).enumerate() {
        writeln!(w, "{},{},{kv},{mv}", i + 1, step * (i + 1))?;
    }
    w.flush()?;
    let th = model.spectral_threshold();
    if th.divergent {
        println!("spectral threshold: 0 (G diverges at the edge)");
    } else {
        println!("spectral threshold: {}", th.value);
    }
    println!("reference threshold: {}", model.reference_threshold()?);
    println!("wrote {}", path.display());
    Ok(())
}

fn verify(cfg: &ExperimentConfig) -> Result<()> {
    let alpha = cfg.alpha_value()?;
    let model = cfg.spectrum_model()?;
    let kappa = limit_cumulants(cfg)?;
    let overlap = model.pca_overlap(alpha)?.left();
    let mut full = None;
    for mode in [Phase1Mode::Full, Phase1Mode::ScalarDiagonal] {
        let rep = phase1_se_fixed_point(&Phase1SeConfig {
            alpha,
            cumulants: kappa.clone(),
            overlap,
            iterations: cfg.phase1_iterations,
            mode,
            tol: PHASE1_TOL,
        })?;
        println!(
            "phase-1 {mode:?}: final gap {:.3e}, converged {}, contraction {}, nonnegative cumulants {}",
            rep.final_gap(),
            rep.converged,
            rep.contraction_ok,
            rep.nonnegative_cumulants
        );
        if mode == Phase1Mode::Full {
            full = Some(rep);
        }
    }
    let (path, mut w) = create(&cfg.out, &format!("{}_phase1.csv", cfg.name))?;
    write_phase1_csv(&mut w, full.as_ref().expect("full mode ran"))?;
    w.flush()?;
    println!("wrote {}", path.display());

    match model.kind {
        Kind::Rectangular { .. } => {
            let a = omega11_closed_form(alpha, overlap, &kappa)?;
            let b = omega11_self_consistent(alpha, overlap, &kappa, 1e-14, 10_000)?;
            println!("omega_11: closed form {a}, fixed point {b}, difference {:.2e}", (a - b).abs());
        }
        Kind::Square => artificial(cfg, alpha, &model)?,
    }
    Ok(())
}

fn artificial(cfg: &ExperimentConfig, alpha: f64, model: &SpectrumModel) -> Result<()> {
    let prep = prepare_trial(cfg, alpha, trial_seed(cfg.seed, 0))?;
    let a = phase1_alpha(model, prep.pca.top_value)?;
    let tr = artificial_amp_phase1_run(
        &prep.instance,
        &prep.pca,
        &Phase1AmpConfig {
            iterations: cfg.artificial_iterations,
            cumulants: limit_cumulants(cfg)?,
            alpha: a,
            rho_sq: model.pca_overlap(a)?.left(),
            seed: trial_seed(cfg.seed, 1),
        },
    )?;
    let (path, mut w) = create(&cfg.out, &format!("{}_artificial.csv", cfg.name))?;
    writeln!(w, "# schema=1")?;
    writeln!(w, "t,distance,norm")?;
    for (i, (d, n)) in tr.distances.iter().zip(&tr.norms).enumerate() {
        writeln!(w, "{},{d},{n}", i + 1)?;
    }
    w.flush()?;
    println!(
        "artificial AMP: distance to sqrt(n) u_PCA {:.4} -> {:.4} after {} steps",
        tr.distances[0],
        tr.final_distance(),
        cfg.artificial_iterations
    );
    println!("wrote {}", path.display());
    Ok(())
}

fn plot(input: &Path, out: Option<&Path>) -> Result<()> {
    let text = std::fs::read_to_string(input).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", input.display()))))?;
    let svg = emit_plot(&text)?;
    let dir = out.map(Path::to_path_buf).unwrap_or_else(|| input.parent().map(Path::to_path_buf).unwrap_or_default());
    let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("plot");
    let (path, mut w) = create(&dir, &format!("{stem}.svg"))?;
    w.write_all(svg.as_bytes())?;
    w.flush()?;
    println!("wrote {}", path.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(c) => simulate(&load(&c)?),
        Command::Sweep(c) => sweep(&load(&c)?),
        Command::StateEvolution(c) => state_evolution(&load(&c)?),
        Command::Cumulants(c) => cumulants(&load(&c)?),
        Command::Verify(c) => verify(&load(&c)?),
        Command::Plot { input, out } => plot(&input, out.as_deref()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config { .. } => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
