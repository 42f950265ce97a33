//! PCA-initialized AMP for symmetric square models.

use crate::denoisers::Denoiser;
use crate::error::{param, Error, Result};
use crate::free_probability::{CumulantSeries, Kind};
use crate::linalg::{dot, matvec, norm};
use crate::random_matrix::ModelInstance;
use crate::spectral::SpectralSummary;

/// Hard cap on the number of iterations (every past iterate is kept in memory).
pub const MAX_ITERATIONS: usize = 200;
/// ||f^t|| / sqrt(n) above this aborts the run.
pub const BLOWUP_NORM: f64 = 1e6;

#[derive(Clone, Debug)]
pub struct AmpSquareConfig {
    /// Number of iterates u^1..u^T.
    pub iterations: usize,
    pub cumulants: CumulantSeries,
    /// SNR used by the memory coefficients (estimated or oracle).
    pub alpha: f64,
    /// u_t for t = 2..=T (index t - 2); the last entry is reused if the list is short.
    pub denoisers: Vec<Denoiser>,
    /// Stop once the overlap with the PCA vector changes by less than this.
    pub stop_tol: Option<f64>,
}

/// One AMP iterate.
#[derive(Clone, Debug, PartialEq)]
pub struct IterRecord {
    pub t: usize,
    /// <u^t, u*>^2 / (||u^t||^2 ||u*||^2), evaluation only.
    pub overlap_signal: f64,
    /// <u^t, u_PCA>^2 / ||u^t||^2 with u_PCA a unit vector.
    pub overlap_pca: f64,
    /// ||u^t|| / sqrt(dim).
    pub norm_u: f64,
    /// Norm of the iterate this one produced (f^t, or g^t on the v side) over sqrt(dim).
    pub norm_f: f64,
    /// Empirical mean derivative of the denoiser that produced this iterate (none at t = 1).
    pub mean_deriv: Option<f64>,
    /// Memory coefficients used to form f^t (b_{t,1..t}, or a_{t,1..t} / b_{t,1..t-1}).
    pub coeffs: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct AmpTrace {
    pub records: Vec<IterRecord>,
    /// Matrix-vector products performed.
    pub matvecs: usize,
    /// Some cumulant tail sum was cut short of its tolerance.
    pub truncated: bool,
    /// Last iterate u^T.
    pub last_iterate: Vec<f64>,
}

impl AmpTrace {
    pub fn final_overlap(&self) -> f64 {
        self.records.last().map(|r| r.overlap_signal).unwrap_or(0.0)
    }
}

/// b_{t,1..t} (index i - 1). `derivs[l]` holds <u'_l> for l in 2..=t (entries 0 and 1 unused).
///
/// b_{1,1} = sum_i kappa_{i+1} alpha^-i; for t >= 2, b_{t,t} = kappa_1,
/// b_{t,t-j} = kappa_{j+1} prod_{i=t-j+1}^t <u'_i> (t - j in [2, t-1]),
/// b_{t,1} = prod_{l=2}^t <u'_l> sum_i kappa_{i+t} alpha^-i.
pub fn memory_coeffs_square(t: usize, cumulants: &CumulantSeries, alpha: f64, derivs: &[f64]) -> Result<(Vec<f64>, bool)> {
    if t == 0 {
        return Err(param("iterations are numbered from 1"));
    }
    if !(alpha > 0.0) {
        return Err(param(format!("alpha must be positive, got {alpha}")));
    }
    if t >= 2 && derivs.len() <= t {
        return Err(param(format!("need derivative means up to index {t}")));
    }
    let w = 1.0 / alpha;
    let mut b = vec![0.0; t];
    let tail = cumulants.tail(t, w)?;
    if t == 1 {
        b[0] = tail.value;
        return Ok((b, tail.truncated));
    }
    b[t - 1] = cumulants.kappa(1);
    let mut prod = 1.0;
    for j in 1..=t - 2 {
        prod *= derivs[t - j + 1];
        b[t - j - 1] = cumulants.kappa(j + 1) * prod;
    }
    let full: f64 = (2..=t).map(|l| derivs[l]).product();
    b[0] = full * tail.value;
    Ok((b, tail.truncated))
}

pub(crate) fn overlap(a: &[f64], b: &[f64]) -> f64 {
    let na = dot(a, a);
    let nb = dot(b, b);
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let d = dot(a, b);
    (d * d / (na * nb)).clamp(0.0, 1.0)
}

/// u^1 = sqrt(n) u_PCA, f^1 = X u^1 - b_{1,1} u^1, then u^t = u_t(f^{t-1}),
/// f^t = X u^t - sum_i b_{t,i} u^i.
pub fn amp_square_run(inst: &ModelInstance, pca: &SpectralSummary, cfg: &AmpSquareConfig) -> Result<AmpTrace> {
    if !inst.kind.is_square() || !pca.kind.is_square() || cfg.cumulants.kind != Kind::Square {
        return Err(param("square AMP needs a square instance, summary and cumulants"));
    }
    let n = inst.rows();
    if pca.top_left.len() != n {
        return Err(param("PCA vector does not match the instance"));
    }
    if cfg.iterations == 0 || cfg.iterations > MAX_ITERATIONS {
        return Err(param(format!("iterations must lie in 1..={MAX_ITERATIONS}")));
    }
    if cfg.iterations > 1 && cfg.denoisers.is_empty() {
        return Err(param("no denoisers given for t >= 2"));
    }
    let sqrt_n = (n as f64).sqrt();
    let mut us: Vec<Vec<f64>> = Vec::with_capacity(cfg.iterations);
    us.push(pca.top_left.iter().map(|x| x * sqrt_n).collect());
    let mut derivs = vec![0.0; cfg.iterations + 1];
    let mut records: Vec<IterRecord> = Vec::with_capacity(cfg.iterations);
    let mut matvecs = 0;
    let mut truncated = false;
    let mut f = vec![0.0; n];
    for t in 1..=cfg.iterations {
        let mut mean_deriv = None;
        if t >= 2 {
            let d = cfg.denoisers[(t - 2).min(cfg.denoisers.len() - 1)];
            let mut u = vec![0.0; n];
            let md = d.apply(&f, &mut u);
            derivs[t] = md;
            mean_deriv = Some(md);
            us.push(u);
        }
        let u = &us[t - 1];
        let (b, tr) = memory_coeffs_square(t, &cfg.cumulants, cfg.alpha, &derivs)?;
        truncated |= tr;
        matvec(&inst.x, u, &mut f);
        matvecs += 1;
        for (bi, ui) in b.iter().zip(&us) {
            if *bi != 0.0 {
                for (fk, uk) in f.iter_mut().zip(ui) {
                    *fk -= bi * uk;
                }
            }
        }
        let norm_f = norm(&f) / sqrt_n;
        let rec = IterRecord {
            t,
            overlap_signal: overlap(u, &inst.u_star),
            overlap_pca: overlap(u, &pca.top_left),
            norm_u: norm(u) / sqrt_n,
            norm_f,
            mean_deriv,
            coeffs: b,
        };
        let stop = match (cfg.stop_tol, records.last()) {
            (Some(tol), Some(prev)) => (rec.overlap_pca - prev.overlap_pca).abs() < tol,
            _ => false,
        };
        records.push(rec);
        if !(norm_f <= BLOWUP_NORM) {
            return Err(Error::NumericalBlowup { iteration: t, norm: norm_f });
        }
        if stop {
            break;
        }
    }
    let last_iterate = us.pop().unwrap_or_default();
    Ok(AmpTrace { records, matvecs, truncated, last_iterate })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coefficient_examples() {
        let k = CumulantSeries::square(vec![1.0; 20]).unwrap().with_law(crate::free_probability::CumulantLaw::Constant(1.0));
        let (b, _) = memory_coeffs_square(3, &k, 2.0, &[0.0, 0.0, 1.0, 1.0]).unwrap();
        assert!((b[2] - 1.0).abs() < 1e-15 && (b[1] - 1.0).abs() < 1e-15 && (b[0] - 2.0).abs() < 1e-12);
        let (b1, _) = memory_coeffs_square(1, &k, 2.0, &[]).unwrap();
        assert!((b1[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn single_cumulant() {
        let k = CumulantSeries::square(vec![0.7, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let (b, _) = memory_coeffs_square(4, &k, 3.0, &[0.0, 0.0, 0.5, 0.5, 0.5]).unwrap();
        assert_eq!(b, vec![0.0, 0.0, 0.0, 0.7]);
    }
}
