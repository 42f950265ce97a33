use spikamp::harness::*;
use spikamp::Error;

fn small(out: &std::path::Path) -> ExperimentConfig {
    let text = format!(
        "[run]\nname = small\ntrials = 3\nseed = 11\nout = {}\n\n[model]\nkind = square\nn = 200\n\n[noise]\nspectrum = marcenko_pastur\nc = 2\n\n[signal]\nalpha_relative = 2.5\n\n[amp]\niterations = 6\ndenoiser = tanh\n\n[state_evolution]\nengine = quadrature\npoints = 24\n",
        out.display()
    );
    ExperimentConfig::parse(&text).unwrap()
}

fn config_line(text: &str) -> usize {
    match ExperimentConfig::parse(text) {
        Err(Error::Config { line, .. }) => line,
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn parses_sections_and_defaults() {
    let c = ExperimentConfig::parse(
        "# comment\n[model]\nkind = rectangular\nn = 400\n\n[signal]\nalpha = 3 # trailing\nprior = gaussian\n[amp]\ndenoiser_v = identity\nalpha_source = oracle\n",
    )
    .unwrap();
    assert_eq!(c.model, ModelKind::Rectangular);
    assert_eq!((c.m, c.n), (200, 400));
    assert_eq!(c.spectrum, SpectrumSpec::UniformSquaredSingular);
    assert_eq!(c.alpha, Some(AlphaSpec::Absolute(3.0)));
    assert_eq!(c.alpha_source, AlphaSource::Oracle);
    assert!((c.gamma().unwrap() - 0.5).abs() < 1e-15);
}

#[test]
fn config_errors_carry_line_numbers() {
    assert_eq!(config_line("[run]\ntrials = 2\n[model]\nbogus = 1\n"), 4);
    assert_eq!(config_line("[nowhere]\n"), 1);
    assert_eq!(config_line("trials = 2\n"), 1);
    assert_eq!(config_line("[run]\n\ntrials = two\n"), 3);
    assert_eq!(config_line("[run]\ntrials = 2\ntrials = 3\n"), 3);
    assert_eq!(config_line("[run]\njust text\n"), 2);
    assert_eq!(config_line("[amp]\ndenoiser = cubic\n"), 2);
    assert_eq!(config_line("[run]\ntrials = 0\n"), 2);
    assert_eq!(config_line("[sweep]\nmin = 2\nmax = 1\n"), 3);
    assert_eq!(config_line("[signal]\nalpha = 1\nalpha_relative = 2\n"), 3);
    assert_eq!(config_line("[model]\nkind = square\n[noise]\nspectrum = uss\n"), 4);
}

#[test]
fn relative_alpha_uses_the_reference_threshold() {
    let c = ExperimentConfig::parse("[signal]\nalpha_relative = 2\n").unwrap();
    let th = c.spectrum_model().unwrap().reference_threshold().unwrap();
    assert!((c.alpha_value().unwrap() - 2.0 * th).abs() < 1e-12);

    let r = ExperimentConfig::parse("[model]\nkind = rectangular\nm = 500\nn = 1000\n[signal]\nalpha_relative = 2\n").unwrap();
    let th = r.spectrum_model().unwrap().reference_threshold().unwrap();
    assert!((r.alpha_value().unwrap() - 2.0 * th * 0.5f64.sqrt()).abs() < 1e-12);
}

#[test]
fn sweep_grid_includes_endpoints() {
    let c = ExperimentConfig::parse("[sweep]\nmin = 1\nmax = 2\nsteps = 5\nrelative = false\n").unwrap();
    let a = c.sweep_alphas().unwrap();
    assert_eq!(a, vec![1.0, 1.25, 1.5, 1.75, 2.0]);
}

#[test]
fn experiment_writes_schema_versioned_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    let (res, files) = run_experiment(&cfg).unwrap();
    assert_eq!(res.trials.len(), 3);
    assert_eq!(res.se.rows.len(), 6);
    for p in [&files.long, &files.summary, &files.trials, &files.se, &files.trace] {
        let text = std::fs::read_to_string(p).unwrap();
        assert!(text.starts_with("# schema=1\n"), "{}", p.display());
    }
    let long = std::fs::read_to_string(&files.long).unwrap();
    assert_eq!(long.lines().nth(1).unwrap(), "experiment,trial,side,t,overlap_signal,overlap_pca,se_overlap,alpha_hat");
    assert_eq!(long.lines().count(), 2 + 3 * 6);
    let summary = res.summary();
    assert_eq!(summary.len(), 6);
    assert!(summary.iter().all(|r| r.count == 3 && (0.0..=1.0).contains(&r.mean)));
    let trace = std::fs::read_to_string(&files.trace).unwrap();
    assert_eq!(trace.lines().nth(1).unwrap(), "t,overlap_signal,overlap_pca,norm_u,norm_f,mean_uprime");
}

#[test]
fn reruns_and_worker_counts_give_identical_bytes() {
    let read = |cfg: &ExperimentConfig| {
        let (_, f) = run_experiment(cfg).unwrap();
        [f.long, f.summary, f.trials, f.se].map(|p| std::fs::read(p).unwrap())
    };
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    let mut a = small(d1.path());
    let mut b = small(d2.path());
    a.jobs = 1;
    b.jobs = 3;
    assert_eq!(read(&a), read(&b));
    assert_eq!(read(&a), read(&a));
}

#[test]
fn rectangular_experiment_reports_both_sides() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "[run]\nname = rect\ntrials = 2\nout = {}\n[model]\nkind = rectangular\nm = 150\nn = 300\n[signal]\nalpha_relative = 2\n[amp]\niterations = 4\ndenoiser = tanh\ndenoiser_v = identity\n[state_evolution]\nengine = quadrature\npoints = 20\n",
        dir.path().display()
    );
    let cfg = ExperimentConfig::parse(&text).unwrap();
    let (res, files) = run_experiment(&cfg).unwrap();
    let summary = res.summary();
    assert_eq!(summary.iter().filter(|r| r.side == "v").count(), 4);
    let long = std::fs::read_to_string(files.long).unwrap();
    assert!(long.lines().any(|l| l.starts_with("rect,1,v,4,")));
    let se = std::fs::read_to_string(files.se).unwrap();
    assert!(se.lines().nth(2).unwrap().split(',').all(|f| !f.is_empty()));
}

#[test]
fn instance_dump_reloads() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path());
    cfg.trials = 1;
    cfg.dump_instance = true;
    let (_, files) = run_experiment(&cfg).unwrap();
    let inst = spikamp::random_matrix::load_instance(files.instance.as_ref().unwrap()).unwrap();
    let again = build_instance(&cfg, cfg.alpha_value().unwrap(), trial_seed(cfg.seed, 0)).unwrap();
    assert_eq!(inst.u_star, again.u_star);
    assert_eq!(inst.x.nrows(), 200);
}

#[test]
fn sweep_marks_at_most_one_transition() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path());
    cfg.trials = 2;
    cfg.sweep = Some(SweepSpec { min: 0.5, max: 3.0, steps: 3, relative: true });
    let (res, path) = run_sweep(&cfg).unwrap();
    assert_eq!(res.points.len(), 3);
    assert_eq!(res.points[0].pca_formula, 0.0);
    assert!(res.points[2].pca_formula > 0.5);
    let text = std::fs::read_to_string(path).unwrap();
    assert_eq!(text.lines().nth(1).unwrap(), SWEEP_HEADER);
    let marks = text.lines().skip(2).filter(|l| l.ends_with(",1")).count();
    assert!(marks <= 1);
    let svg = emit_plot(&text).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 2);
    assert_eq!(svg.matches(r#"class="errorbar""#).count(), 6);
}

#[test]
fn plot_rejects_missing_rows_and_bad_schema() {
    let header = format!("# schema=1\n{SUMMARY_HEADER}\n");
    assert!(matches!(emit_plot(&header), Err(Error::Schema(_))));
    assert!(matches!(emit_plot("side,t\nu,1\n"), Err(Error::Schema(_))));
    assert!(matches!(emit_plot("# schema=1\na,b\n1,2\n"), Err(Error::Schema(_))));
    let bad = format!("{header}u,one,1,0.5,0.1,0.05,0.5,,0.4\n");
    assert!(matches!(emit_plot(&bad), Err(Error::Schema(_))));
}

#[test]
fn single_series_plot_structure() {
    let text = format!(
        "# schema=1\n{SUMMARY_HEADER}\nu,1,5,0.4,0.05,0.02,0.9,0.41,0.4\nu,2,5,0.6,0.04,0.02,0.8,0.59,0.4\nu,3,5,0.7,0.03,0.01,0.7,0.7,0.4\n"
    );
    let svg = emit_plot(&text).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 1);
    assert_eq!(svg.matches(r#"<g class="errorbar""#).count(), 3);
    assert_eq!(svg.matches(r#"class="marker""#).count(), 3);
    assert_eq!(svg.matches(r#"class="pca-ref""#).count(), 1);
    assert_eq!(svg.matches(r#"class="curve""#).count(), 1);
    assert_eq!(svg, emit_plot(&text).unwrap());
}
