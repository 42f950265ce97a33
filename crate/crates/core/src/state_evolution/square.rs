use super::engine::{ExpectationEngine, Family};
use super::{min_eigenvalue, OverlapSpace, Tails};
use crate::denoisers::{Denoiser, DenoiserRule};
use crate::error::{param, Result};
use crate::free_probability::CumulantSeries;
use crate::random_matrix::Prior;

#[derive(Clone, Debug)]
pub struct SeSquareConfig {
    pub alpha: f64,
    /// Free cumulants of the noise.
    pub cumulants: CumulantSeries,
    pub prior: Prior,
    pub rule: DenoiserRule,
    /// Number of iterates U_1..U_T.
    pub iterations: usize,
    pub engine: ExpectationEngine,
    /// PCA overlap rho_alpha^2; `None` derives it from the cumulants,
    /// rho^2 = 1 - R'(1/alpha) / alpha^2.
    pub rho_sq: Option<f64>,
}

/// State evolution for square AMP. Vectors are indexed by iteration t >= 1
/// (entry 0 is unused).
#[derive(Clone, Debug)]
pub struct SeSquareState {
    pub alpha: f64,
    pub rho_sq: f64,
    /// alpha is at or below the spectral threshold (rho = 0).
    pub below_threshold: bool,
    pub mu: Vec<f64>,
    /// sigma[s][t], s, t >= 1.
    pub sigma: Vec<Vec<f64>>,
    /// x[t] = E{u_t'(F_{t-1})}, t >= 2.
    pub x: Vec<f64>,
    /// E{U_t U*}.
    pub e_signal: Vec<f64>,
    /// E{U_t^2}.
    pub e_square: Vec<f64>,
    /// u_t for t = 2..=T (index t - 2).
    pub denoisers: Vec<Denoiser>,
    /// Smallest eigenvalue of Sigma_t after each step t.
    pub min_eigenvalues: Vec<f64>,
    pub truncated: bool,
}

impl SeSquareState {
    pub fn iterations(&self) -> usize {
        self.mu.len() - 1
    }

    /// Iterate: E{U_t U*}^2 / E{U_t^2}. Linearized: mu_t^2 / (mu_t^2 + sigma_tt).
    pub fn predicted_overlap(&self, t: usize, space: OverlapSpace) -> Result<f64> {
        if t == 0 || t > self.iterations() {
            return Err(param(format!("t = {t} outside the trajectory")));
        }
        Ok(match space {
            OverlapSpace::Iterate => super::ratio(self.e_signal[t].powi(2), self.e_square[t]),
            OverlapSpace::Linearized => super::linearized(self.mu[t], self.sigma[t][t]),
        })
    }
}

/// rho_alpha^2 from the cumulants alone: R'(1/alpha) = alpha^2 (1 - rho^2).
pub fn rho_sq_from_cumulants(alpha: f64, cumulants: &CumulantSeries) -> Result<f64> {
    let rp = cumulants.r_transform_prime(1.0 / alpha)?;
    Ok(1.0 - rp.value / (alpha * alpha))
}

pub fn se_square_run(cfg: &SeSquareConfig) -> Result<SeSquareState> {
    let alpha = cfg.alpha;
    if !(alpha > 0.0) {
        return Err(param(format!("alpha must be positive, got {alpha}")));
    }
    if !cfg.cumulants.kind.is_square() {
        return Err(param("square state evolution needs free cumulants"));
    }
    let tt = cfg.iterations;
    if tt == 0 {
        return Err(param("need at least one iteration"));
    }
    let w = 1.0 / alpha;
    let mut tails = Tails::new(&cfg.cumulants, w);
    let raw_rho = match cfg.rho_sq {
        Some(r) => r,
        None => rho_sq_from_cumulants(alpha, &cfg.cumulants)?,
    };
    let below = !(raw_rho > 0.0);
    let rho_sq = raw_rho.clamp(0.0, 1.0);

    let mut fam = Family::new(cfg.engine, cfg.prior, 0)?;
    let mut mu = vec![0.0; tt + 1];
    let mut sigma = vec![vec![0.0; tt + 1]; tt + 1];
    let mut x = vec![w; tt + 1];
    // cu[a][b] = E{U_a U_b}
    let mut cu = vec![vec![0.0; tt + 1]; tt + 1];
    let mut e_signal = vec![0.0; tt + 1];
    let mut e_square = vec![0.0; tt + 1];
    let mut denoisers = Vec::new();
    let mut min_eigs = Vec::new();

    mu[1] = alpha * rho_sq.sqrt();
    sigma[1][1] = alpha * alpha * (1.0 - rho_sq);
    fam.add_field(mu[1], &[sigma[1][1]])?;
    fam.add_var(0, Denoiser::Linear { scale: w })?;
    // U_1 = F_1 / alpha: E{U_1^2} = 1 and E{U_1 U*} = rho exactly.
    cu[1][1] = 1.0;
    e_signal[1] = mu[1] / alpha;
    e_square[1] = 1.0;
    min_eigs.push(sigma[1][1]);

    for k in 1..tt {
        let t = k + 1;
        let d = cfg.rule.make(mu[k], sigma[k][k], w)?;
        denoisers.push(d);
        let (var, deriv) = fam.add_var(k - 1, d)?;
        x[t] = deriv;
        e_signal[t] = fam.e_signal(var)?;
        for b in 1..=t {
            let v = fam.e_pair(var, b - 1)?;
            cu[t][b] = v;
            cu[b][t] = v;
        }
        cu[1][1] = 1.0;
        e_square[t] = cu[t][t];
        mu[t] = alpha * e_signal[t];
        for s in 1..=t {
            let v = sigma_entry(s, t, &cfg.cumulants, &mut tails, &cu, &x)?;
            sigma[s][t] = v;
            sigma[t][s] = v;
        }
        let row: Vec<f64> = (1..=t).map(|s| sigma[s][t]).collect();
        fam.add_field(mu[t], &row)?;
        min_eigs.push(min_eigenvalue(&sigma, 1, t));
    }
    Ok(SeSquareState {
        alpha,
        rho_sq,
        below_threshold: below,
        mu,
        sigma,
        x,
        e_signal,
        e_square,
        denoisers,
        min_eigenvalues: min_eigs,
        truncated: tails.truncated,
    })
}

/// sigma_{s,t}: explicit block over U_2.., tails over U_1 summed in closed form.
///
/// With P_s(j) = prod_{i=s+1-j}^s x_i, Pi_s = prod_{i=2}^s x_i, T(N) = sum_i kappa_{N+i} w^i,
/// TW(N) = sum_i (i+1) kappa_{N+i} w^i:
///
/// sigma_st = sum_{j<=s-2, k<=t-2} kappa_{j+k+2} C[s-j][t-k] P_s(j) P_t(k)
///          + sum_{j<=s-2} P_s(j) C[s-j][1] Pi_t T(j+t+1) + (s <-> t)
///          + Pi_s Pi_t C[1][1] TW(s+t).
fn sigma_entry(
    s: usize,
    t: usize,
    kap: &CumulantSeries,
    tails: &mut Tails,
    c: &[Vec<f64>],
    x: &[f64],
) -> Result<f64> {
    let p = |s: usize, j: usize| -> f64 { (s + 1 - j..=s).map(|i| x[i]).product() };
    let pi = |s: usize| -> f64 { (2..=s).map(|i| x[i]).product() };
    let mut acc = 0.0;
    for j in 0..s.saturating_sub(1) {
        for k in 0..t.saturating_sub(1) {
            let kv = kap.kappa(j + k + 2);
            if kv != 0.0 {
                acc += kv * c[s - j][t - k] * p(s, j) * p(t, k);
            }
        }
    }
    for j in 0..s.saturating_sub(1) {
        acc += p(s, j) * c[s - j][1] * pi(t) * tails.t(j + t + 1)?;
    }
    for k in 0..t.saturating_sub(1) {
        acc += p(t, k) * c[1][t - k] * pi(s) * tails.t(s + k + 1)?;
    }
    acc += pi(s) * pi(t) * c[1][1] * tails.tw(s + t)?;
    Ok(acc)
}
