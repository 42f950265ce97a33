//! Acceptance suite: prints one PASS/FAIL line per criterion, then fails if any did.
//!
//! Desk-scale settings (n = 2000, 20 trials) follow the tolerances listed with each check.
//! Runs as a single test so the report comes out in order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spikamp::denoisers::{Denoiser, DenoiserRule};
use spikamp::free_probability::*;
use spikamp::harness::*;
use spikamp::random_matrix::Prior;
use spikamp::state_evolution::*;
use spikamp::verification::*;
use std::time::{Duration, Instant};

mod common;
use common::*;

struct Report {
    lines: Vec<String>,
    failed: Vec<usize>,
}

impl Report {
    fn record(&mut self, id: usize, pass: bool, detail: String, elapsed: Duration) {
        let line = format!("criterion {id:>2}: {} ({detail}; {:.1} s)", if pass { "PASS" } else { "FAIL" }, elapsed.as_secs_f64());
        println!("{line}");
        self.lines.push(line);
        if !pass {
            self.failed.push(id);
        }
    }
}

fn cfg(text: &str) -> ExperimentConfig {
    ExperimentConfig::parse(text).unwrap()
}

const SQUARE_FIG1: &str = "[run]\nname = square\ntrials = 20\nseed = 2024\n[model]\nkind = square\nn = 2000\n[noise]\nspectrum = marcenko_pastur\nc = 2\n[signal]\nalpha_relative = 2\n[amp]\niterations = 8\ndenoiser = tanh\n[state_evolution]\nengine = quadrature\n";
const RECT_FIG1: &str = "[run]\nname = rect\ntrials = 20\nseed = 2025\n[model]\nkind = rectangular\nm = 1000\nn = 2000\n[noise]\nspectrum = uniform_squared_singular\n[signal]\nalpha_relative = 2\n[amp]\niterations = 8\ndenoiser = tanh\ndenoiser_v = identity\n[state_evolution]\nengine = quadrature\n";

fn criterion_1() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for i in 0..200 {
        let len = rng.random_range(1..=10);
        let kappa: Vec<f64> = (0..len).map(|_| rng.random_range(-2.0..=2.0)).collect();
        let (m, back) = if i % 2 == 0 {
            let m = free_cumulants_to_moments(&CumulantSeries::square(kappa.clone()).unwrap()).unwrap();
            let b = moments_to_free_cumulants(&m).unwrap();
            (m, b)
        } else {
            let gamma = rng.random_range(0.05..=1.0);
            let m = rect_cumulants_to_moments(&CumulantSeries::rectangular(kappa.clone(), gamma).unwrap()).unwrap();
            let b = moments_to_rect_cumulants(&m).unwrap();
            (m, b)
        };
        for ((a, b), mk) in kappa.iter().zip(back.values()).zip(m.values()) {
            worst = worst.max((a - b).abs() / mk.abs().max(1.0));
        }
    }
    let mut oracle: f64 = 0.0;
    let kappa = [0.3, -1.1, 0.7, 1.9, -0.4, 0.25];
    let m = free_cumulants_to_moments(&CumulantSeries::square(kappa.to_vec()).unwrap()).unwrap();
    for k in 1..=6 {
        let o = square_moment_oracle(&kappa, k);
        oracle = oracle.max((m.values()[k - 1] - o).abs() / o.abs().max(1.0));
    }
    for gamma in [0.3, 0.5, 1.0] {
        let kappa = [0.8, -0.6, 1.3];
        let m = rect_cumulants_to_moments(&CumulantSeries::rectangular(kappa.to_vec(), gamma).unwrap()).unwrap();
        for k in 1..=3 {
            let o = rect_moment_oracle(&kappa, gamma, k);
            oracle = oracle.max((m.values()[k - 1] - o).abs() / o.abs().max(1.0));
        }
    }
    (
        worst <= 1e-10 && oracle <= 1e-12,
        format!("round trip error {worst:.1e} relative to max(1, |m_k|), partition oracle {oracle:.1e}"),
    )
}

fn criterion_2() -> (bool, String) {
    let mp = square_identity_error(&SpectrumModel::marcenko_pastur(2.0).unwrap());
    let uni = square_identity_error(&SpectrumModel::uniform_symmetric(0.5).unwrap());
    let uss = rect_identity_error(0.5);
    (mp.max(uni).max(uss) <= 1e-6, format!("MP {mp:.1e}, uniform {uni:.1e}, squared-uniform singular {uss:.1e}"))
}

fn criterion_3() -> (bool, String) {
    let k = SpectrumModel::uniform_symmetric(0.5).unwrap().cumulants(12).unwrap();
    let e2 = (k.kappa(2) - 1.0 / 12.0).abs();
    let e4 = (k.kappa(4) + 1.0 / 720.0).abs();
    let odd = [1, 3, 5, 7, 9, 11].iter().map(|&j| k.kappa(j).abs()).fold(0.0, f64::max);
    (e2.max(e4).max(odd) <= 1e-12, format!("|dk2| {e2:.1e}, |dk4| {e4:.1e}, max |k_odd| {odd:.1e}"))
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = v.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn criterion_4(sq_cfg: &ExperimentConfig, sq: &ExperimentResult, rect_cfg: &ExperimentConfig, rect: &ExperimentResult) -> (bool, String) {
    let mp = sq_cfg.spectrum_model().unwrap();
    let alpha = sq.alpha;
    let rho = mp.pca_overlap(alpha).unwrap().left();
    let d_overlap = (mean(sq.trials.iter().map(|t| t.pca_overlap_u)) - rho).abs();
    let lambda = mp.invert(Inverse::Ginv, 1.0 / alpha).unwrap();
    let d_lambda = (mean(sq.trials.iter().map(|t| t.top_value)) - lambda).abs();
    let delta = rect_cfg.spectrum_model().unwrap().pca_overlap(rect.alpha).unwrap().left();
    let d_rect = (mean(rect.trials.iter().map(|t| t.pca_overlap_u)) - delta).abs();
    (
        d_overlap <= 0.03 && d_lambda <= 0.05 && d_rect <= 0.03,
        format!("square |overlap - rho^2| {d_overlap:.4}, |lambda_1 - G^-1(1/alpha)| {d_lambda:.4}; rectangular |overlap - Delta| {d_rect:.4}"),
    )
}

fn criterion_5(result: &ExperimentResult, elapsed: Duration) -> (bool, f64) {
    let worst = result
        .summary()
        .iter()
        .filter(|r| r.t <= 8)
        .map(|r| r.se_overlap.map_or(f64::INFINITY, |s| (r.mean - s).abs()))
        .fold(0.0, f64::max);
    (worst <= 0.05 && elapsed < Duration::from_secs(300) && result.blowups() == 0, worst)
}

fn criterion_6() -> (bool, String) {
    let mut c = cfg(SQUARE_FIG1);
    c.name = "linear".into();
    c.trials = 10;
    c.iterations = 10;
    c.denoiser_u = DenoiserRule::Linear;
    c.alpha_source = AlphaSource::Oracle;
    let r = run_trials_at(&c, c.alpha_value().unwrap(), c.seed).unwrap();
    let worst = r.trials.iter().flat_map(|t| t.u.iter().map(|x| x.overlap_pca)).fold(1.0, f64::min);
    let complete = r.trials.iter().all(|t| t.u.len() == 10);
    (worst >= 0.99 && complete, format!("min overlap with u_PCA over 10 trials and t <= 10: {worst:.5}"))
}

fn criterion_7() -> (bool, String) {
    let mp = SpectrumModel::marcenko_pastur(2.0).unwrap();
    let alpha = 2.0 * mp.spectral_threshold().value;
    let sq = phase1_se_fixed_point(&Phase1SeConfig {
        alpha,
        cumulants: mp.cumulants(DEFAULT_CUMULANT_ORDER).unwrap(),
        overlap: mp.pca_overlap(alpha).unwrap().left(),
        iterations: 200,
        mode: Phase1Mode::Full,
        tol: 1e-6,
    })
    .unwrap();
    let uss = SpectrumModel::uniform_squared_singular(0.5).unwrap();
    let ra = 2.0 * uss.reference_threshold().unwrap() * 0.5f64.sqrt();
    let delta = uss.pca_overlap(ra).unwrap().left();
    let k = uss.cumulants(DEFAULT_CUMULANT_ORDER).unwrap();
    let rect = phase1_se_fixed_point(&Phase1SeConfig {
        alpha: ra,
        cumulants: k.clone(),
        overlap: delta,
        iterations: 200,
        mode: Phase1Mode::Full,
        tol: 1e-6,
    })
    .unwrap();
    let closed = omega11_closed_form(ra, delta, &k).unwrap();
    let fixed = omega11_self_consistent(ra, delta, &k, 1e-14, 10_000).unwrap();
    let d_omega = (closed - fixed).abs();
    (
        sq.final_gap() <= 1e-6 && rect.final_gap() <= 1e-6 && d_omega <= 1e-8,
        format!(
            "square gap {:.1e} (reached 1e-6 at t = {:?}), rectangular gap {:.1e}, omega_11 difference {d_omega:.1e}",
            sq.final_gap(),
            sq.iterations_to(1e-6),
            rect.final_gap()
        ),
    )
}

fn criterion_8(sq_cfg: &ExperimentConfig) -> (bool, String) {
    let mp = sq_cfg.spectrum_model().unwrap();
    let prep = prepare_trial(sq_cfg, sq_cfg.alpha_value().unwrap(), trial_seed(sq_cfg.seed, 0)).unwrap();
    let a = phase1_alpha(&mp, prep.pca.top_value).unwrap();
    let tr = artificial_amp_phase1_run(
        &prep.instance,
        &prep.pca,
        &Phase1AmpConfig {
            iterations: 50,
            cumulants: mp.cumulants(DEFAULT_CUMULANT_ORDER).unwrap(),
            alpha: a,
            rho_sq: mp.pca_overlap(a).unwrap().left(),
            seed: 8,
        },
    )
    .unwrap();
    let tail = &tr.distances[tr.distances.len() - 21..];
    let trend = tail.windows(2).all(|w| w[1] <= w[0] + 0.01) && tail[20] <= tail[0] + 0.01;
    let d = tr.final_distance();
    (d <= 0.1 && trend, format!("d_0 {:.3}, d_50 {d:.4}, last-20 trend non-increasing: {trend}", tr.distances[0]))
}

fn criterion_9(sq: &ExperimentResult, sq_cfg: &ExperimentConfig) -> (bool, String) {
    let alpha = sq.alpha;
    let errs: Vec<f64> = sq.trials.iter().map(|t| t.alpha_hat.map_or(f64::INFINITY, |a| (a - alpha).abs() / alpha)).collect();
    let worst = errs.iter().cloned().fold(0.0, f64::max);
    let mut below = sq_cfg.clone();
    below.alpha = Some(AlphaSpec::Relative(0.5));
    let a = below.alpha_value().unwrap();
    let gaps = (0..20)
        .filter(|&i| prepare_trial(&below, a, trial_seed(9_000, i)).unwrap().alpha_hat.is_none())
        .count();
    (worst <= 0.05 && gaps >= 18, format!("max |alpha_hat - alpha| / alpha {worst:.4} above; no gap in {gaps}/20 at 0.5x threshold"))
}

fn criterion_10() -> (bool, String) {
    let c = cfg(
        "[run]\nname = transition\ntrials = 3\nseed = 10\n[model]\nkind = square\nn = 2000\n[noise]\nspectrum = uniform_symmetric\nhalfwidth = 0.5\n[sweep]\nmin = 1.02\nmax = 2.5\nsteps = 8\nrelative = true\n[amp]\niterations = 100\ndenoiser = tanh\nalpha_source = oracle\nstop_tol = 1e-5\n[state_evolution]\nengine = quadrature\n",
    );
    let r = sweep_alpha(&c).unwrap();
    let trivial = r.points.iter().filter(|p| p.pca_mean > 0.1 && p.amp_mean < 0.05).count();
    let top = r.points.last().unwrap();
    let pass = trivial >= 1 && top.amp_mean >= top.pca_mean - 0.02;
    let grid: Vec<String> =
        r.points.iter().map(|p| format!("{:.2}: pca {:.3} amp {:.3}", p.alpha_relative, p.pca_mean, p.amp_mean)).collect();
    (pass, format!("{trivial} points with PCA > 0.1 and AMP < 0.05; [{}]", grid.join(", ")))
}

fn criterion_11(sq_cfg: &ExperimentConfig) -> (bool, String) {
    // PSD along the SE of both figure configurations, with both expectation engines.
    let mut min_eig = f64::INFINITY;
    for engine in [ExpectationEngine::default(), ExpectationEngine::Quadrature { points: 64 }] {
        let mp = sq_cfg.spectrum_model().unwrap();
        let alpha = sq_cfg.alpha_value().unwrap();
        let se = se_square_run(&SeSquareConfig {
            alpha,
            cumulants: mp.cumulants(DEFAULT_CUMULANT_ORDER).unwrap(),
            prior: Prior::Rademacher,
            rule: DenoiserRule::PosteriorMean(Prior::Rademacher),
            iterations: 20,
            engine,
            rho_sq: None,
        })
        .unwrap();
        min_eig = se.min_eigenvalues.iter().cloned().fold(min_eig, f64::min);
        let rc = cfg(RECT_FIG1);
        let uss = rc.spectrum_model().unwrap();
        let ra = rc.alpha_value().unwrap();
        let rs = se_rect_run(&SeRectConfig {
            alpha: ra,
            cumulants: uss.cumulants(DEFAULT_CUMULANT_ORDER).unwrap(),
            prior_u: Prior::Rademacher,
            prior_v: Prior::GaussianSphere,
            u_rule: DenoiserRule::PosteriorMean(Prior::Rademacher),
            v_rule: DenoiserRule::Identity,
            iterations: 20,
            engine,
            delta_pca: uss.pca_overlap(ra).unwrap().left(),
        })
        .unwrap();
        min_eig = rs.min_eigenvalues_sigma.iter().chain(&rs.min_eigenvalues_omega).cloned().fold(min_eig, f64::min);
    }

    let mut deriv_err: f64 = 0.0;
    for d in [
        Denoiser::linear(0.4).unwrap(),
        Denoiser::Identity,
        Denoiser::rademacher_posterior_mean(2.0, 1.0).unwrap(),
        Denoiser::rademacher_posterior_mean(4.8, 7.5).unwrap(),
    ] {
        for i in -40..=40 {
            let x = i as f64 * 0.25;
            let h = 1e-5;
            let fd = (d.eval(x + h) - d.eval(x - h)) / (2.0 * h);
            deriv_err = deriv_err.max((d.deriv(x) - fd).abs());
        }
    }

    let bytes = |text: &str, jobs: usize| {
        let dir = tempfile::tempdir().unwrap();
        let mut c = cfg(text);
        c.out = dir.path().to_path_buf();
        c.jobs = jobs;
        let (_, f) = run_experiment(&c).unwrap();
        [f.long, f.summary, f.trials, f.se, f.trace].map(|p| std::fs::read(p).unwrap())
    };
    let small_sq = "[run]\nname = a\ntrials = 3\nseed = 5\n[model]\nn = 300\n[signal]\nalpha_relative = 2\n[amp]\niterations = 6\n";
    let small_rect = "[run]\nname = b\ntrials = 2\nseed = 6\n[model]\nkind = rectangular\nm = 150\nn = 300\n[signal]\nalpha_relative = 2\n[amp]\niterations = 6\n";
    let identical = bytes(small_sq, 1) == bytes(small_sq, 2) && bytes(small_rect, 1) == bytes(small_rect, 1);
    (
        min_eig >= -1e-8 && deriv_err <= 1e-6 && identical,
        format!("min SE eigenvalue {min_eig:.2e}, derivative error {deriv_err:.1e}, reruns identical: {identical}"),
    )
}

#[test]
fn acceptance() {
    let mut rep = Report { lines: Vec::new(), failed: Vec::new() };
    let timed = |f: &dyn Fn() -> (bool, String)| {
        let t = Instant::now();
        let (p, d) = f();
        (p, d, t.elapsed())
    };

    let (p, d, e) = timed(&criterion_1);
    rep.record(1, p && e < Duration::from_secs(10), d, e);
    let (p, d, e) = timed(&criterion_2);
    rep.record(2, p && e < Duration::from_secs(5), d, e);
    let (p, d, e) = timed(&criterion_3);
    rep.record(3, p, d, e);

    // One run per figure configuration feeds criteria 4, 5 and 9.
    let sq_cfg = cfg(SQUARE_FIG1);
    let t = Instant::now();
    let sq = run_trials_at(&sq_cfg, sq_cfg.alpha_value().unwrap(), sq_cfg.seed).unwrap();
    let sq_time = t.elapsed();
    let rect_cfg = cfg(RECT_FIG1);
    let t = Instant::now();
    let rect = run_trials_at(&rect_cfg, rect_cfg.alpha_value().unwrap(), rect_cfg.seed).unwrap();
    let rect_time = t.elapsed();

    let (p, d) = criterion_4(&sq_cfg, &sq, &rect_cfg, &rect);
    rep.record(4, p && sq_time + rect_time < Duration::from_secs(180), d, sq_time + rect_time);

    let (p_sq, w_sq) = criterion_5(&sq, sq_time);
    let (p_rect, w_rect) = criterion_5(&rect, rect_time);
    rep.record(
        5,
        p_sq && p_rect,
        format!(
            "max |mean AMP - SE| for t <= 8: square {w_sq:.4} ({:.0} s), rectangular u and v {w_rect:.4} ({:.0} s)",
            sq_time.as_secs_f64(),
            rect_time.as_secs_f64()
        ),
        sq_time + rect_time,
    );

    let (p, d, e) = timed(&criterion_6);
    rep.record(6, p, d, e);
    let (p, d, e) = timed(&criterion_7);
    rep.record(7, p && e < Duration::from_secs(10), d, e);
    let (p, d, e) = timed(&|| criterion_8(&sq_cfg));
    rep.record(8, p, d, e);
    let (p, d, e) = timed(&|| criterion_9(&sq, &sq_cfg));
    rep.record(9, p, d, e);
    let (p, d, e) = timed(&criterion_10);
    rep.record(10, p, d, e);
    let (p, d, e) = timed(&|| criterion_11(&sq_cfg));
    rep.record(11, p, d, e);

    assert!(rep.failed.is_empty(), "failed criteria: {:?}\n{}", rep.failed, rep.lines.join("\n"));
}
