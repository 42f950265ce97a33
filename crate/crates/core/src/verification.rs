//! Numerical checks of the first-phase "artificial" AMP: its state evolution
//! fixed points and its convergence to the PCA estimator.

use crate::error::{param, Error, Result};
use crate::free_probability::{CumulantSeries, Kind, SpectrumModel, Transform};
use crate::linalg::{dot, matvec, norm};
use crate::random_matrix::{rng_from_seed, ModelInstance};
use crate::spectral::SpectralSummary;
use crate::state_evolution::omega11_closed_form;
use rand_distr::{Distribution, StandardNormal};
use std::io::Write;

/// Relative size below which a term of the double series is dropped.
const SERIES_EPS: f64 = 1e-18;
/// Gaps below this are at the floating-point floor and excluded from the contraction check.
const GAP_FLOOR: f64 = 1e-12;
const CONTRACTION_WINDOW: usize = 50;
const CONTRACTION_RATIO: f64 = 0.99;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase1Mode {
    /// The (T+1) x (T+1) recursion with finite sums, as it unfolds in time.
    Full,
    /// The limit map acting on a single value per covariance block.
    ScalarDiagonal,
}

#[derive(Clone, Debug)]
pub struct Phase1SeConfig {
    pub alpha: f64,
    /// Free cumulants (square) or rectangular cumulants.
    pub cumulants: CumulantSeries,
    /// rho_alpha^2 (square) or Delta_PCA (rectangular).
    pub overlap: f64,
    pub iterations: usize,
    pub mode: Phase1Mode,
    /// Gap at which the run counts as converged.
    pub tol: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Phase1Row {
    pub iteration: usize,
    pub sigma: f64,
    pub omega: Option<f64>,
    pub gap: f64,
}

#[derive(Clone, Debug)]
pub struct Phase1Report {
    pub rows: Vec<Phase1Row>,
    pub sigma_target: f64,
    pub omega_target: Option<f64>,
    /// kappa_k >= 0 for k >= 2 over the orders used (the uniqueness hypothesis).
    pub nonnegative_cumulants: bool,
    pub converged: bool,
    /// Gap ratios <= 0.99 over the final 50 steps still above the floating-point floor.
    pub contraction_ok: bool,
}

impl Phase1Report {
    pub fn final_gap(&self) -> f64 {
        self.rows.last().map(|r| r.gap).unwrap_or(f64::INFINITY)
    }

    /// First iteration at which the gap reached `tol`.
    pub fn iterations_to(&self, tol: f64) -> Option<usize> {
        self.rows.iter().find(|r| r.gap <= tol).map(|r| r.iteration)
    }

    /// Turns a non-converged report into an error.
    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NoConvergence {
                what: format!("phase-1 recursion (last gap {:e})", self.final_gap()),
                iterations: self.rows.len(),
            })
        }
    }
}

/// Coefficients c_0..c_{len-1} of a double series in j + k, and how many are worth summing.
fn coefficients(len: usize, f: impl Fn(usize) -> f64) -> (Vec<f64>, usize) {
    let c: Vec<f64> = (0..len).map(&f).collect();
    let scale: f64 = c.iter().map(|v| v.abs()).sum::<f64>().max(f64::MIN_POSITIVE);
    let last = c.iter().enumerate().rev().find(|(m, v)| v.abs() * (*m as f64 + 1.0) > SERIES_EPS * scale).map(|(m, _)| m);
    (c, last.map(|m| m + 1).unwrap_or(0))
}

fn contraction_ok(rows: &[Phase1Row], target_scale: f64) -> bool {
    let start = rows.len().saturating_sub(CONTRACTION_WINDOW + 1);
    rows[start..].windows(2).all(|w| {
        let (a, b) = (w[0].gap, w[1].gap);
        a <= GAP_FLOOR || b <= GAP_FLOOR || a > 0.1 * target_scale || b <= CONTRACTION_RATIO * a
    })
}

pub fn phase1_se_fixed_point(cfg: &Phase1SeConfig) -> Result<Phase1Report> {
    if !(cfg.alpha > 0.0) {
        return Err(param("alpha must be positive"));
    }
    if cfg.iterations == 0 {
        return Err(param("need at least one iteration"));
    }
    let report = match cfg.cumulants.kind {
        Kind::Square => square(cfg)?,
        Kind::Rectangular { gamma } => rect(cfg, gamma)?,
    };
    Ok(report)
}

fn square(cfg: &Phase1SeConfig) -> Result<Phase1Report> {
    let (a, rho2, tt) = (cfg.alpha, cfg.overlap.clamp(0.0, 1.0), cfg.iterations);
    let target = a * a * (1.0 - rho2);
    let w = 1.0 / a;
    let kap = &cfg.cumulants;
    // c_m = kappa_{m+2} alpha^{-(m+2)}
    let (c, used) = coefficients(2 * tt + 64, |m| kap.kappa(m + 2) * w.powi(m as i32 + 2));
    let nonneg = (2..used + 2).all(|k| kap.kappa(k) >= 0.0);
    let m2 = a * a * rho2;
    let mut rows = Vec::with_capacity(tt);
    match cfg.mode {
        Phase1Mode::ScalarDiagonal => {
            let rp = kap.r_transform_prime(w)?.value;
            let mut s = 0.0;
            for it in 1..=tt {
                s = (rho2 + s / (a * a)) * rp;
                rows.push(Phase1Row { iteration: it, sigma: s, omega: None, gap: (s - target).abs() });
            }
        }
        Phase1Mode::Full => {
            let mut sig = vec![vec![0.0; tt + 1]; tt + 1];
            sig[0][0] = target;
            for t in 1..=tt {
                for s in 1..=t {
                    let mut acc = 0.0;
                    for j in 0..s.min(used) {
                        for k in 0..t.min(used - j) {
                            acc += c[j + k] * (m2 + sig[s - j - 1][t - k - 1]);
                        }
                    }
                    sig[s][t] = acc;
                    sig[t][s] = acc;
                }
                rows.push(Phase1Row { iteration: t, sigma: sig[t][t], omega: None, gap: (sig[t][t] - target).abs() });
            }
        }
    }
    let converged = rows.last().is_some_and(|r| r.gap <= cfg.tol);
    let contraction_ok = contraction_ok(&rows, target.abs().max(1e-300));
    Ok(Phase1Report { rows, sigma_target: target, omega_target: None, nonnegative_cumulants: nonneg, converged, contraction_ok })
}

fn rect(cfg: &Phase1SeConfig, gamma: f64) -> Result<Phase1Report> {
    let (a, delta, tt) = (cfg.alpha, cfg.overlap.clamp(0.0, 1.0), cfg.iterations);
    let kap = &cfg.cumulants;
    let w = gamma / (a * a);
    let a_star = a * a * (1.0 - delta);
    let b_star = omega11_closed_form(a, delta, kap)?;
    let ad = a * a * delta;
    // kappa_{2(m+1)} w^m and kappa_{2(m+2)} w^m
    let (c1, u1) = coefficients(2 * tt + 64, |m| kap.kappa(m + 1) * w.powi(m as i32));
    let (c2, u2) = coefficients(2 * tt + 64, |m| kap.kappa(m + 2) * w.powi(m as i32));
    let used = u1.max(u2);
    let nonneg = (2..used + 2).all(|k| kap.kappa(k) >= 0.0);
    let (ga2, gaa2) = ((gamma / a).powi(2), (gamma / (a * a)).powi(2));
    let mut rows = Vec::with_capacity(tt);
    match cfg.mode {
        Phase1Mode::ScalarDiagonal => {
            let r = kap.r_transform(w)?.value;
            let rp = kap.r_transform_prime(w)?.value;
            let h = w * rp - r;
            let (mut s, mut o) = (0.0, 0.0);
            for it in 1..=tt {
                let o_next = gamma * ((delta + s / (a * a)) * rp + (ad + o) * h);
                let s_next = (gamma * gamma * delta + gamma * gamma * o_next / (a * a)) * rp + (ad + s) * h;
                s = s_next;
                o = o_next;
                let gap = (s - a_star).abs().max((o - b_star).abs());
                rows.push(Phase1Row { iteration: it, sigma: s, omega: Some(o), gap });
            }
        }
        Phase1Mode::Full => {
            let mut sig = vec![vec![0.0; tt + 1]; tt + 1];
            let mut om = vec![vec![0.0; tt + 1]; tt + 1];
            sig[0][0] = a_star;
            for t in 1..=tt {
                for s in 1..=t {
                    let mut acc = 0.0;
                    for j in 0..s.min(used) {
                        for k in 0..t.min(used - j) {
                            let (p, q) = (s - j - 1, t - k - 1);
                            acc += c1[j + k] / (a * a) * (ad + sig[p][q]);
                            if p >= 1 && q >= 1 {
                                acc += c2[j + k] * gaa2 * (ad + om[p][q]);
                            }
                        }
                    }
                    om[s][t] = gamma * acc;
                    om[t][s] = gamma * acc;
                }
                for s in 1..=t {
                    let mut acc = 0.0;
                    for j in 0..s.min(used) {
                        for k in 0..t.min(used - j) {
                            acc += c1[j + k] * ga2 * (ad + om[s - j][t - k]);
                            acc += c2[j + k] * gaa2 * (ad + sig[s - j - 1][t - k - 1]);
                        }
                    }
                    sig[s][t] = acc;
                    sig[t][s] = acc;
                }
                let gap = (sig[t][t] - a_star).abs().max((om[t][t] - b_star).abs());
                rows.push(Phase1Row { iteration: t, sigma: sig[t][t], omega: Some(om[t][t]), gap });
            }
        }
    }
    let converged = rows.last().is_some_and(|r| r.gap <= cfg.tol);
    let contraction_ok = contraction_ok(&rows, a_star.abs().max(b_star.abs()).max(1e-300));
    Ok(Phase1Report { rows, sigma_target: a_star, omega_target: Some(b_star), nonnegative_cumulants: nonneg, converged, contraction_ok })
}

/// Report CSV `iteration,sigma,omega,gap` (omega empty for square runs).
pub fn write_phase1_csv<W: Write>(out: &mut W, report: &Phase1Report) -> Result<()> {
    writeln!(out, "# schema=1")?;
    writeln!(out, "iteration,sigma,omega,gap")?;
    for r in &report.rows {
        let o = r.omega.map(|v| v.to_string()).unwrap_or_default();
        writeln!(out, "{},{},{},{}", r.iteration, r.sigma, o, r.gap)?;
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct Phase1AmpConfig {
    /// Phase length T; iterates u~^1..u~^{T+1} are formed.
    pub iterations: usize,
    pub cumulants: CumulantSeries,
    pub alpha: f64,
    /// rho_alpha^2 used to mix u* with fresh noise.
    pub rho_sq: f64,
    /// Seed for the noise vector n.
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct Phase1AmpTrace {
    /// distances[t - 1] = || u~^t - s sqrt(n) u_PCA || / sqrt(n), t = 1..=T+1,
    /// with s the sign of <u~^t, u_PCA>.
    pub distances: Vec<f64>,
    /// ||u~^t|| / sqrt(n), t = 1..=T+1.
    pub norms: Vec<f64>,
    pub matvecs: usize,
}

impl Phase1AmpTrace {
    /// d_T, the distance of u~^{T+1}.
    pub fn final_distance(&self) -> f64 {
        *self.distances.last().unwrap_or(&f64::NAN)
    }
}

/// alpha = 1 / G(lambda_1) under `model`, the law whose cumulants drive the artificial AMP.
///
/// With this alpha the memory term makes sqrt(n) u_PCA an exact fixed point (gain 1);
/// the plug-in estimate from the bulk is off by O(n^-1/2) and the iterates drift in norm.
pub fn phase1_alpha(model: &SpectrumModel, top_value: f64) -> Result<f64> {
    let g = model.transform(Transform::G, top_value)?;
    if !(g > 0.0) {
        return Err(Error::Domain(format!("G({top_value}) = {g} is not positive")));
    }
    Ok(1.0 / g)
}

/// Artificial AMP started from u~^1 = rho u* + sqrt(1 - rho^2) n (test-only: it needs u*):
/// f~^t = X u~^t - sum_j kappa_{j+1} alpha^{-j} u~^{t-j}, u~^{t+1} = f~^t / alpha.
pub fn artificial_amp_phase1_run(inst: &ModelInstance, pca: &SpectralSummary, cfg: &Phase1AmpConfig) -> Result<Phase1AmpTrace> {
    if !inst.kind.is_square() || !cfg.cumulants.kind.is_square() {
        return Err(param("the artificial AMP check is implemented for square models only"));
    }
    let n = inst.rows();
    if pca.top_left.len() != n {
        return Err(param("PCA vector does not match the instance"));
    }
    if cfg.iterations == 0 || cfg.iterations > crate::amp_square::MAX_ITERATIONS {
        return Err(param("phase length out of range"));
    }
    if !(cfg.alpha > 0.0) || !(0.0..=1.0).contains(&cfg.rho_sq) {
        return Err(param("need alpha > 0 and rho^2 in [0, 1]"));
    }
    let sn = (n as f64).sqrt();
    let (rho, rest) = (cfg.rho_sq.sqrt(), (1.0 - cfg.rho_sq).sqrt());
    let mut rng = rng_from_seed(cfg.seed);
    let u1: Vec<f64> = inst.u_star.iter().map(|u| rho * u + rest * Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect();
    let dist = |u: &[f64]| -> f64 {
        let s = if dot(u, &pca.top_left) >= 0.0 { 1.0 } else { -1.0 };
        u.iter().zip(&pca.top_left).map(|(a, b)| (a - s * sn * b).powi(2)).sum::<f64>().sqrt() / sn
    };
    let coeff: Vec<f64> = (0..cfg.iterations).map(|j| cfg.cumulants.kappa(j + 1) * cfg.alpha.powi(-(j as i32))).collect();
    let mut us = vec![u1];
    let mut distances = vec![dist(&us[0])];
    let mut norms = vec![norm(&us[0]) / sn];
    let mut f = vec![0.0; n];
    for t in 1..=cfg.iterations {
        matvec(&inst.x, &us[t - 1], &mut f);
        for (j, c) in coeff.iter().take(t).enumerate() {
            if *c != 0.0 {
                for (fk, uk) in f.iter_mut().zip(&us[t - 1 - j]) {
                    *fk -= c * uk;
                }
            }
        }
        let nf = norm(&f) / sn;
        if !(nf <= crate::amp_square::BLOWUP_NORM) {
            return Err(Error::NumericalBlowup { iteration: t, norm: nf });
        }
        let next: Vec<f64> = f.iter().map(|v| v / cfg.alpha).collect();
        distances.push(dist(&next));
        norms.push(norm(&next) / sn);
        us.push(next);
    }
    Ok(Phase1AmpTrace { distances, norms, matvecs: cfg.iterations })
}
