//! PCA-initialized AMP for rectangular models (interleaved u / v updates).

use crate::amp_square::{overlap, AmpTrace, IterRecord, BLOWUP_NORM, MAX_ITERATIONS};
use crate::denoisers::Denoiser;
use crate::error::{param, Error, Result};
use crate::free_probability::CumulantSeries;
use crate::linalg::{matvec, matvec_t, norm};
use crate::random_matrix::ModelInstance;
use crate::spectral::SpectralSummary;

#[derive(Clone, Debug)]
pub struct AmpRectConfig {
    pub iterations: usize,
    /// Rectangular cumulants kappa_2, kappa_4, ...
    pub cumulants: CumulantSeries,
    pub alpha: f64,
    /// u_t for t = 2..=T (index t - 2).
    pub u_denoisers: Vec<Denoiser>,
    /// v_t for t = 2..=T (index t - 2). v_1 is always x -> gamma x / alpha.
    pub v_denoisers: Vec<Denoiser>,
    pub stop_tol: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RectCoeff {
    /// a_{t, 1..t}, subtracted from X v^t.
    A,
    /// b_{t+1, 1..t}, subtracted from X^T u^{t+1}.
    B,
}

/// Memory coefficients with w = gamma / alpha^2.
///
/// `x[i]` = <u'_i> (i >= 2), `y[i]` = <v'_i> (i >= 1, y[1] = gamma / alpha).
///
/// A: a_{1,1} = alpha R(w); a_{t,1} = y_t prod_{i=2}^t x_i y_{i-1} RT(t);
///    a_{t,t-j} = y_t prod_{i=t-j+1}^t x_i y_{i-1} kappa_{2(j+1)}, j in [0, t-2].
/// B: b_{t+1,1} = gamma x_{t+1} prod_{i=2}^t y_i x_i RT(t);
///    b_{t+1,t+1-j} = gamma x_{t+1} prod_{i=t+2-j}^t y_i x_i kappa_{2j}, j in [1, t-1].
/// RT(N) = sum_i kappa_{2(N+i)} w^i.
pub fn memory_coeffs_rect(
    t: usize,
    which: RectCoeff,
    cumulants: &CumulantSeries,
    alpha: f64,
    gamma: f64,
    x: &[f64],
    y: &[f64],
) -> Result<(Vec<f64>, bool)> {
    if t == 0 {
        return Err(param("iterations are numbered from 1"));
    }
    if !(alpha > 0.0 && gamma > 0.0) {
        return Err(param("alpha and gamma must be positive"));
    }
    let need_x = if which == RectCoeff::A { t } else { t + 1 };
    if (need_x >= 2 && x.len() <= need_x) || y.len() <= t {
        return Err(param("derivative histories are too short"));
    }
    let w = gamma / (alpha * alpha);
    let tail = cumulants.tail(t, w)?;
    let mut c = vec![0.0; t];
    match which {
        RectCoeff::A => {
            if t == 1 {
                c[0] = alpha * w * tail.value;
                return Ok((c, tail.truncated));
            }
            let mut prod = y[t];
            c[t - 1] = prod * cumulants.kappa(1);
            for j in 1..=t - 2 {
                let i = t - j + 1;
                prod *= x[i] * y[i - 1];
                c[t - j - 1] = prod * cumulants.kappa(j + 1);
            }
            let full: f64 = y[t] * (2..=t).map(|i| x[i] * y[i - 1]).product::<f64>();
            c[0] = full * tail.value;
        }
        RectCoeff::B => {
            let mut prod = gamma * x[t + 1];
            for j in 1..t {
                if j >= 2 {
                    let i = t + 2 - j;
                    prod *= y[i] * x[i];
                }
                c[t - j] = prod * cumulants.kappa(j);
            }
            let full: f64 = gamma * x[t + 1] * (2..=t).map(|i| y[i] * x[i]).product::<f64>();
            c[0] = full * tail.value;
        }
    }
    Ok((c, tail.truncated))
}

/// Traces for the two sides of a rectangular run.
#[derive(Clone, Debug)]
pub struct AmpRectTrace {
    pub u: AmpTrace,
    pub v: AmpTrace,
}

/// u^1 = sqrt(m) u_PCA, g^1 = X^T u^1 / (1 + gamma R(w)), v^1 = (gamma/alpha) g^1, then
/// f^t = X v^t - sum a_{t,i} u^i, u^{t+1} = u_{t+1}(f^t),
/// g^{t+1} = X^T u^{t+1} - sum b_{t+1,i} v^i, v^{t+1} = v_{t+1}(g^{t+1}).
pub fn amp_rect_run(inst: &ModelInstance, pca: &SpectralSummary, cfg: &AmpRectConfig) -> Result<AmpRectTrace> {
    let gamma = inst.kind.gamma().ok_or_else(|| param("rectangular AMP needs a rectangular instance"))?;
    if cfg.cumulants.kind.is_square() {
        return Err(param("rectangular AMP needs rectangular cumulants"));
    }
    let (m, n) = (inst.rows(), inst.cols());
    if m > n {
        return Err(param("rectangular AMP expects m <= n; transpose the instance and swap the roles of u and v"));
    }
    let v_star = inst.v_star.as_ref().ok_or_else(|| param("instance has no right signal"))?;
    let v_pca = pca.top_right.as_ref().ok_or_else(|| param("summary has no right singular vector"))?;
    if pca.top_left.len() != m || v_pca.len() != n {
        return Err(param("PCA vectors do not match the instance"));
    }
    let iters = cfg.iterations;
    if iters == 0 || iters > MAX_ITERATIONS {
        return Err(param(format!("iterations must lie in 1..={MAX_ITERATIONS}")));
    }
    if iters > 1 && (cfg.u_denoisers.is_empty() || cfg.v_denoisers.is_empty()) {
        return Err(param("no denoisers given for t >= 2"));
    }
    let alpha = cfg.alpha;
    let w = gamma / (alpha * alpha);
    let (sm, sn) = ((m as f64).sqrt(), (n as f64).sqrt());
    let mut truncated = false;
    let mut matvecs = 0;

    let mut us: Vec<Vec<f64>> = vec![pca.top_left.iter().map(|x| x * sm).collect()];
    let mut g = vec![0.0; n];
    matvec_t(&inst.x, &us[0], &mut g);
    matvecs += 1;
    let r = cfg.cumulants.r_transform(w)?;
    truncated |= r.truncated;
    let scale = 1.0 / (1.0 + gamma * r.value);
    g.iter_mut().for_each(|v| *v *= scale);
    let v1 = Denoiser::Linear { scale: gamma / alpha };
    let mut vs: Vec<Vec<f64>> = vec![vec![0.0; n]];
    v1.apply(&g, &mut vs[0]);

    let mut x = vec![1.0 / alpha; iters + 2];
    let mut y = vec![gamma / alpha; iters + 2];
    let mut u_rec = Vec::with_capacity(iters);
    let mut v_rec = Vec::with_capacity(iters);
    let mut f = vec![0.0; m];
    let mut v_norm_g = norm(&g) / sn;
    let mut u_deriv: Option<f64> = None;
    let mut v_deriv: Option<f64> = None;
    let mut last_coeff_b: Vec<f64> = Vec::new();
    for t in 1..=iters {
        // f^t
        let (a, tr) = memory_coeffs_rect(t, RectCoeff::A, &cfg.cumulants, alpha, gamma, &x, &y)?;
        truncated |= tr;
        matvec(&inst.x, &vs[t - 1], &mut f);
        matvecs += 1;
        for (ai, ui) in a.iter().zip(&us) {
            if *ai != 0.0 {
                for (fk, uk) in f.iter_mut().zip(ui) {
                    *fk -= ai * uk;
                }
            }
        }
        let norm_f = norm(&f) / sm;
        let u = &us[t - 1];
        let v = &vs[t - 1];
        u_rec.push(IterRecord {
            t,
            overlap_signal: overlap(u, &inst.u_star),
            overlap_pca: overlap(u, &pca.top_left),
            norm_u: norm(u) / sm,
            norm_f,
            mean_deriv: u_deriv,
            coeffs: a,
        });
        v_rec.push(IterRecord {
            t,
            overlap_signal: overlap(v, v_star),
            overlap_pca: overlap(v, v_pca),
            norm_u: norm(v) / sn,
            norm_f: v_norm_g,
            mean_deriv: v_deriv,
            coeffs: std::mem::take(&mut last_coeff_b),
        });
        if !(norm_f <= BLOWUP_NORM) {
            return Err(Error::NumericalBlowup { iteration: t, norm: norm_f });
        }
        let stop = match (cfg.stop_tol, u_rec.len()) {
            (Some(tol), k) if k >= 2 => (u_rec[k - 1].overlap_pca - u_rec[k - 2].overlap_pca).abs() < tol,
            _ => false,
        };
        if t == iters || stop {
            break;
        }
        // u^{t+1}
        let du = cfg.u_denoisers[(t - 1).min(cfg.u_denoisers.len() - 1)];
        let mut un = vec![0.0; m];
        x[t + 1] = du.apply(&f, &mut un);
        u_deriv = Some(x[t + 1]);
        us.push(un);
        // g^{t+1}
        let (b, tr) = memory_coeffs_rect(t, RectCoeff::B, &cfg.cumulants, alpha, gamma, &x, &y)?;
        truncated |= tr;
        matvec_t(&inst.x, &us[t], &mut g);
        matvecs += 1;
        for (bi, vi) in b.iter().zip(&vs) {
            if *bi != 0.0 {
                for (gk, vk) in g.iter_mut().zip(vi) {
                    *gk -= bi * vk;
                }
            }
        }
        v_norm_g = norm(&g) / sn;
        if !(v_norm_g <= BLOWUP_NORM) {
            return Err(Error::NumericalBlowup { iteration: t + 1, norm: v_norm_g });
        }
        last_coeff_b = b;
        // v^{t+1}
        let dv = cfg.v_denoisers[(t - 1).min(cfg.v_denoisers.len() - 1)];
        let mut vn = vec![0.0; n];
        y[t + 1] = dv.apply(&g, &mut vn);
        v_deriv = Some(y[t + 1]);
        vs.push(vn);
    }
    let u_last = us.pop().unwrap_or_default();
    let v_last = vs.pop().unwrap_or_default();
    Ok(AmpRectTrace {
        u: AmpTrace { records: u_rec, matvecs, truncated, last_iterate: u_last },
        v: AmpTrace { records: v_rec, matvecs, truncated, last_iterate: v_last },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cumulant_coefficients() {
        let k = CumulantSeries::rectangular(vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0], 0.5).unwrap();
        let (alpha, gamma) = (2.0, 0.5);
        let x = vec![0.5, 0.5, 0.3, 0.4, 0.6];
        let y = vec![0.25, 0.25, 0.7, 0.8, 0.9];
        let (a1, _) = memory_coeffs_rect(1, RectCoeff::A, &k, alpha, gamma, &x, &y).unwrap();
        assert!((a1[0] - gamma / alpha).abs() < 1e-15);
        let (a3, _) = memory_coeffs_rect(3, RectCoeff::A, &k, alpha, gamma, &x, &y).unwrap();
        assert_eq!(a3[2], y[3]);
        assert_eq!(a3[1], 0.0);
        assert_eq!(a3[0], 0.0);
        let (b3, _) = memory_coeffs_rect(3, RectCoeff::B, &k, alpha, gamma, &x, &y).unwrap();
        assert!((b3[2] - gamma * x[4]).abs() < 1e-15);
        assert_eq!(b3[1], 0.0);
    }

    #[test]
    fn zero_cumulants() {
        let k = CumulantSeries::rectangular(vec![0.0; 6], 0.5).unwrap();
        let x = vec![1.0; 6];
        let y = vec![1.0; 6];
        for t in 1..4 {
            for which in [RectCoeff::A, RectCoeff::B] {
                let (c, _) = memory_coeffs_rect(t, which, &k, 1.5, 0.5, &x, &y).unwrap();
                assert!(c.iter().all(|v| *v == 0.0));
            }
        }
    }
}
