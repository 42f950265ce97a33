use super::engine::{ExpectationEngine, Family};
use super::{min_eigenvalue, ratio, Tails};
use crate::denoisers::{Denoiser, DenoiserRule};
use crate::error::{param, Error, Result};
use crate::free_probability::CumulantSeries;
use crate::random_matrix::Prior;

#[derive(Clone, Debug)]
pub struct SeRectConfig {
    pub alpha: f64,
    /// Rectangular free cumulants kappa_2, kappa_4, ... (gamma is read from their kind).
    pub cumulants: CumulantSeries,
    pub prior_u: Prior,
    pub prior_v: Prior,
    /// Linear scale 1/alpha.
    pub u_rule: DenoiserRule,
    /// Linear scale gamma/alpha.
    pub v_rule: DenoiserRule,
    /// Number of iterates U_1..U_T (and V_1..V_T).
    pub iterations: usize,
    pub engine: ExpectationEngine,
    /// Left PCA overlap Delta (<= 0 means below threshold).
    pub delta_pca: f64,
}

/// State evolution for rectangular AMP.
///
/// U side: fields F_s = mu_s U* + N, s >= 0, covariance sigma[s][t]. V side: fields
/// G_t = nu_t V* + N, t >= 1, covariance omega[s][t]. U_1 = F_0 / alpha,
/// U_{t+1} = u_{t+1}(F_t), V_1 = gamma G_1 / alpha, V_t = v_t(G_t).
#[derive(Clone, Debug)]
pub struct SeRectState {
    pub alpha: f64,
    pub gamma: f64,
    pub delta_pca: f64,
    pub below_threshold: bool,
    pub mu: Vec<f64>,
    pub sigma: Vec<Vec<f64>>,
    /// nu[t], t >= 1 (entry 0 unused).
    pub nu: Vec<f64>,
    /// omega[s][t], s, t >= 1.
    pub omega: Vec<Vec<f64>>,
    /// x[t] = E{u_t'}, with x[0] = x[1] = 1/alpha.
    pub x: Vec<f64>,
    /// y[t] = E{v_t'}, with y[0] = y[1] = gamma/alpha.
    pub y: Vec<f64>,
    pub e_signal_u: Vec<f64>,
    pub e_square_u: Vec<f64>,
    pub e_signal_v: Vec<f64>,
    pub e_square_v: Vec<f64>,
    pub u_denoisers: Vec<Denoiser>,
    pub v_denoisers: Vec<Denoiser>,
    /// Smallest eigenvalues of the sigma block (from index 0) and of the omega block after each step.
    pub min_eigenvalues_sigma: Vec<f64>,
    pub min_eigenvalues_omega: Vec<f64>,
    pub truncated: bool,
}

impl SeRectState {
    pub fn iterations(&self) -> usize {
        self.nu.len() - 1
    }

    fn check(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.iterations() {
            return Err(param(format!("t = {t} outside the trajectory")));
        }
        Ok(())
    }

    /// E{U_t U*}^2 / E{U_t^2}.
    pub fn predicted_overlap_u(&self, t: usize) -> Result<f64> {
        self.check(t)?;
        Ok(ratio(self.e_signal_u[t].powi(2), self.e_square_u[t]))
    }

    /// E{V_t V*}^2 / E{V_t^2}.
    pub fn predicted_overlap_v(&self, t: usize) -> Result<f64> {
        self.check(t)?;
        Ok(ratio(self.e_signal_v[t].powi(2), self.e_square_v[t]))
    }
}

/// omega_11 = [gamma R' + gamma alpha^2 Delta (w R' - R)] / [1 - gamma (w R' - R)], w = gamma / alpha^2.
pub fn omega11_closed_form(alpha: f64, delta: f64, cumulants: &CumulantSeries) -> Result<f64> {
    let gamma = cumulants.kind.gamma().ok_or_else(|| param("omega_11 needs rectangular cumulants"))?;
    let w = gamma / (alpha * alpha);
    let r = cumulants.r_transform(w)?.value;
    let rp = cumulants.r_transform_prime(w)?.value;
    let h = w * rp - r;
    let den = 1.0 - gamma * h;
    if !(den > 0.0) {
        return Err(Error::Domain(format!("omega_11 denominator {den} is not positive")));
    }
    Ok((gamma * rp + gamma * alpha * alpha * delta * h) / den)
}

/// Solves omega = gamma [RTW(1) + E{V_1^2} RTW(2) / alpha^2] with E{V_1^2} = (gamma/alpha)^2 (alpha^2 Delta + omega)
/// by fixed-point iteration.
pub fn omega11_self_consistent(alpha: f64, delta: f64, cumulants: &CumulantSeries, tol: f64, max_iter: usize) -> Result<f64> {
    let gamma = cumulants.kind.gamma().ok_or_else(|| param("omega_11 needs rectangular cumulants"))?;
    let w = gamma / (alpha * alpha);
    let t1 = cumulants.tail_weighted(1, w)?.value;
    let t2 = cumulants.tail_weighted(2, w)?.value;
    let g = gamma / alpha;
    let mut omega = gamma * t1;
    for _ in 0..max_iter {
        let cv = g * g * (alpha * alpha * delta + omega);
        let next = gamma * (t1 + cv * t2 / (alpha * alpha));
        if !next.is_finite() {
            break;
        }
        if (next - omega).abs() <= tol * next.abs().max(1.0) {
            return Ok(next);
        }
        omega = next;
    }
    Err(Error::NoConvergence { what: "omega_11 fixed point".into(), iterations: max_iter })
}

struct Hist<'a> {
    x: &'a [f64],
    y: &'a [f64],
    cu: &'a [Vec<f64>],
    cv: &'a [Vec<f64>],
    kap: &'a CumulantSeries,
    alpha: f64,
    gamma: f64,
}

impl Hist<'_> {
    fn k2(&self, order: usize) -> f64 {
        self.kap.kappa(order)
    }

    /// prod_{i=s+1-j}^s x_i y_i
    fn p(&self, s: usize, j: usize) -> f64 {
        (s + 1 - j..=s).map(|i| self.x[i] * self.y[i]).product()
    }

    /// prod_{i=2}^s x_i y_i
    fn pp(&self, s: usize) -> f64 {
        (2..=s).map(|i| self.x[i] * self.y[i]).product()
    }

    /// prod_{i=s+2-j}^{s+1} x_i y_{i-1}
    fn q(&self, s: usize, j: usize) -> f64 {
        (s + 2 - j..=s + 1).map(|i| self.x[i] * self.y[i - 1]).product()
    }

    /// prod_{i=2}^{s+1} x_i y_{i-1}
    fn qq(&self, s: usize) -> f64 {
        (2..=s + 1).map(|i| self.x[i] * self.y[i - 1]).product()
    }

    /// Covariance of G_{s+1}, G_{t+1} (s, t >= 0).
    fn omega(&self, s: usize, t: usize, tails: &mut Tails) -> Result<f64> {
        let (x, cu, cv, a) = (self.x, self.cu, self.cv, self.alpha);
        let mut acc = 0.0;
        for j in 0..s {
            for k in 0..t {
                let pre = self.q(s, j) * self.q(t, k);
                acc += pre
                    * (self.k2(j + k + 1) * cu[s + 1 - j][t + 1 - k]
                        + self.k2(j + k + 2) * cv[s - j][t - k] * x[s + 1 - j] * x[t + 1 - k]);
            }
        }
        for j in 0..s {
            let pre = self.q(s, j) * self.qq(t);
            acc += pre * (cu[s + 1 - j][1] * tails.t(j + t + 1)? + cv[s - j][1] * x[s + 1 - j] / a * tails.t(j + t + 2)?);
        }
        for k in 0..t {
            let pre = self.q(t, k) * self.qq(s);
            acc += pre * (cu[1][t + 1 - k] * tails.t(k + s + 1)? + cv[1][t - k] * x[t + 1 - k] / a * tails.t(k + s + 2)?);
        }
        acc += self.qq(s) * self.qq(t) * (cu[1][1] * tails.tw(s + t + 1)? + cv[1][1] / (a * a) * tails.tw(s + t + 2)?);
        Ok(self.gamma * acc)
    }

    /// Covariance of F_s, F_t (s, t >= 0). F_0 and F_1 share their noise, so row 0 equals row 1.
    fn sigma(&self, s: usize, t: usize, tails: &mut Tails) -> Result<f64> {
        let (y, cu, cv) = (self.y, self.cu, self.cv);
        let ga = self.gamma / self.alpha;
        let start = |s: usize| s.saturating_sub(1);
        let mut acc = 0.0;
        for j in 0..s.saturating_sub(1) {
            for k in 0..t.saturating_sub(1) {
                let pre = self.p(s, j) * self.p(t, k);
                acc += pre
                    * (self.k2(j + k + 1) * cv[s - j][t - k]
                        + self.k2(j + k + 2) * cu[s - j][t - k] * y[s - j] * y[t - k]);
            }
        }
        for j in 0..s.saturating_sub(1) {
            let pre = self.p(s, j) * self.pp(t);
            let n = j + start(t);
            acc += pre * (cv[s - j][1] * tails.t(n + 1)? + cu[s - j][1] * y[s - j] * ga * tails.t(n + 2)?);
        }
        for k in 0..t.saturating_sub(1) {
            let pre = self.p(t, k) * self.pp(s);
            let n = k + start(s);
            acc += pre * (cv[1][t - k] * tails.t(n + 1)? + cu[1][t - k] * y[t - k] * ga * tails.t(n + 2)?);
        }
        let n = start(s) + start(t);
        acc += self.pp(s) * self.pp(t) * (cv[1][1] * tails.tw(n + 1)? + cu[1][1] * ga * ga * tails.tw(n + 2)?);
        Ok(acc)
    }
}

pub fn se_rect_run(cfg: &SeRectConfig) -> Result<SeRectState> {
    let alpha = cfg.alpha;
    let gamma = cfg.cumulants.kind.gamma().ok_or_else(|| param("rectangular state evolution needs rectangular cumulants"))?;
    if !(alpha > 0.0) {
        return Err(param(format!("alpha must be positive, got {alpha}")));
    }
    let tt = cfg.iterations;
    if tt == 0 {
        return Err(param("need at least one iteration"));
    }
    let w = gamma / (alpha * alpha);
    let ga = gamma / alpha;
    let below = !(cfg.delta_pca > 0.0);
    let delta = cfg.delta_pca.clamp(0.0, 1.0);
    let mut tails = Tails::new(&cfg.cumulants, w);

    let n = tt + 2;
    let mut mu = vec![0.0; tt + 1];
    let mut sigma = vec![vec![0.0; tt + 1]; tt + 1];
    let mut nu = vec![0.0; tt + 1];
    let mut omega = vec![vec![0.0; tt + 1]; tt + 1];
    let mut x = vec![1.0 / alpha; n];
    let mut y = vec![ga; n];
    let mut cu = vec![vec![0.0; n]; n];
    let mut cv = vec![vec![0.0; n]; n];
    let mut esu = vec![0.0; tt + 1];
    let mut e2u = vec![0.0; tt + 1];
    let mut esv = vec![0.0; tt + 1];
    let mut e2v = vec![0.0; tt + 1];
    let mut u_den = Vec::new();
    let mut v_den = Vec::new();
    let mut eig_s = Vec::new();
    let mut eig_o = Vec::new();

    let mut fu = Family::new(cfg.engine, cfg.prior_u, 0)?;
    let mut fv = Family::new(cfg.engine, cfg.prior_v, 1)?;

    // F_0 and U_1 = F_0 / alpha.
    mu[0] = alpha * delta.sqrt();
    sigma[0][0] = alpha * alpha * (1.0 - delta);
    fu.add_field(mu[0], &[sigma[0][0]])?;
    fu.add_var(0, Denoiser::Linear { scale: 1.0 / alpha })?;
    cu[1][1] = 1.0;
    esu[1] = delta.sqrt();
    e2u[1] = 1.0;
    eig_s.push(sigma[0][0]);

    // G_1 and V_1 = gamma G_1 / alpha.
    nu[1] = alpha * esu[1];
    omega[1][1] = omega11_closed_form(alpha, delta, &cfg.cumulants)?;
    fv.add_field(nu[1], &[omega[1][1]])?;
    fv.add_var(0, Denoiser::Linear { scale: ga })?;
    cv[1][1] = ga * ga * (nu[1] * nu[1] + omega[1][1]);
    esv[1] = ga * nu[1];
    e2v[1] = cv[1][1];
    eig_o.push(omega[1][1]);

    // F_1.
    mu[1] = esv[1] / ga;
    {
        let h = Hist { x: &x, y: &y, cu: &cu, cv: &cv, kap: &cfg.cumulants, alpha, gamma };
        for s in 0..=1 {
            let v = h.sigma(s, 1, &mut tails)?;
            sigma[s][1] = v;
            sigma[1][s] = v;
        }
    }
    fu.add_field(mu[1], &[sigma[0][1], sigma[1][1]])?;
    eig_s.push(min_eigenvalue(&sigma, 0, 1));

    for k in 1..tt {
        let t = k + 1;
        // U_{t} = u_t(F_k)
        let d = cfg.u_rule.make(mu[k], sigma[k][k], 1.0 / alpha)?;
        u_den.push(d);
        let (var, dx) = fu.add_var(k, d)?;
        x[t] = dx;
        esu[t] = fu.e_signal(var)?;
        for b in 1..=t {
            let v = fu.e_pair(var, b - 1)?;
            cu[t][b] = v;
            cu[b][t] = v;
        }
        cu[1][1] = 1.0;
        e2u[t] = cu[t][t];
        nu[t] = alpha * esu[t];
        {
            let h = Hist { x: &x, y: &y, cu: &cu, cv: &cv, kap: &cfg.cumulants, alpha, gamma };
            for s in 0..t {
                let v = h.omega(s, k, &mut tails)?;
                omega[s + 1][t] = v;
                omega[t][s + 1] = v;
            }
        }
        let row: Vec<f64> = (1..=t).map(|s| omega[s][t]).collect();
        fv.add_field(nu[t], &row)?;
        eig_o.push(min_eigenvalue(&omega, 1, t));

        // V_t = v_t(G_t)
        let d = cfg.v_rule.make(nu[t], omega[t][t], ga)?;
        v_den.push(d);
        let (var, dy) = fv.add_var(t - 1, d)?;
        y[t] = dy;
        esv[t] = fv.e_signal(var)?;
        for b in 1..=t {
            let v = fv.e_pair(var, b - 1)?;
            cv[t][b] = v;
            cv[b][t] = v;
        }
        cv[1][1] = ga * ga * (nu[1] * nu[1] + omega[1][1]);
        e2v[t] = cv[t][t];
        mu[t] = esv[t] / ga;
        {
            let h = Hist { x: &x, y: &y, cu: &cu, cv: &cv, kap: &cfg.cumulants, alpha, gamma };
            for s in 0..=t {
                let v = h.sigma(s, t, &mut tails)?;
                sigma[s][t] = v;
                sigma[t][s] = v;
            }
        }
        let row: Vec<f64> = (0..=t).map(|s| sigma[s][t]).collect();
        fu.add_field(mu[t], &row)?;
        eig_s.push(min_eigenvalue(&sigma, 0, t));
    }

    Ok(SeRectState {
        alpha,
        gamma,
        delta_pca: delta,
        below_threshold: below,
        mu,
        sigma,
        nu,
        omega,
        x,
        y,
        e_signal_u: esu,
        e_square_u: e2u,
        e_signal_v: esv,
        e_square_v: e2v,
        u_denoisers: u_den,
        v_denoisers: v_den,
        min_eigenvalues_sigma: eig_s,
        min_eigenvalues_omega: eig_o,
        truncated: tails.truncated,
    })
}
