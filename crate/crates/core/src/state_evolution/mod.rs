//! State evolution: the scalar Gaussian recursion tracking AMP.

mod engine;
mod rect;
mod square;

pub use engine::{expect_signal_1d, gauss_hermite, ExpectationEngine, DEFAULT_MC_SAMPLES, DEFAULT_QUADRATURE_POINTS, PSD_TOL};
pub use rect::{omega11_closed_form, omega11_self_consistent, se_rect_run, SeRectConfig, SeRectState};
pub use square::{rho_sq_from_cumulants, se_square_run, SeSquareConfig, SeSquareState};

use crate::error::Result;
use crate::free_probability::CumulantSeries;
use faer::{Mat, Side};
use std::collections::HashMap;
use std::io::Write;

/// Which overlap a prediction refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OverlapSpace {
    /// Overlap of the iterate u^t itself.
    Iterate,
    /// Overlap of the field before denoising, mu^2 / (mu^2 + sigma).
    Linearized,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        (num / den).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

fn linearized(mu: f64, sigma: f64) -> f64 {
    ratio(mu * mu, mu * mu + sigma)
}

/// Memoized tail sums T(N, w), TW(N, w) at a fixed argument.
struct Tails<'a> {
    series: &'a CumulantSeries,
    w: f64,
    plain: HashMap<usize, f64>,
    weighted: HashMap<usize, f64>,
    truncated: bool,
}

impl<'a> Tails<'a> {
    fn new(series: &'a CumulantSeries, w: f64) -> Self {
        Tails { series, w, plain: HashMap::new(), weighted: HashMap::new(), truncated: false }
    }

    fn t(&mut self, n: usize) -> Result<f64> {
        if let Some(v) = self.plain.get(&n) {
            return Ok(*v);
        }
        let s = self.series.tail(n, self.w)?;
        self.truncated |= s.truncated;
        self.plain.insert(n, s.value);
        Ok(s.value)
    }

    fn tw(&mut self, n: usize) -> Result<f64> {
        if let Some(v) = self.weighted.get(&n) {
            return Ok(*v);
        }
        let s = self.series.tail_weighted(n, self.w)?;
        self.truncated |= s.truncated;
        self.weighted.insert(n, s.value);
        Ok(s.value)
    }
}

/// Smallest eigenvalue of the principal block m[lo..=hi][lo..=hi].
pub(crate) fn min_eigenvalue(m: &[Vec<f64>], lo: usize, hi: usize) -> f64 {
    let d = hi + 1 - lo;
    let a = Mat::from_fn(d, d, |i, j| m[lo + i][lo + j]);
    match a.self_adjoint_eigenvalues(Side::Lower) {
        Ok(ev) => ev.into_iter().fold(f64::INFINITY, f64::min),
        Err(_) => f64::NAN,
    }
}

/// One SE row: `t,mu,sigma_tt,nu,omega_tt,overlap_pred_u,overlap_pred_v`.
#[derive(Clone, Debug, PartialEq)]
pub struct SeRow {
    pub t: usize,
    pub mu: f64,
    pub sigma_tt: f64,
    pub nu: Option<f64>,
    pub omega_tt: Option<f64>,
    pub overlap_pred_u: f64,
    pub overlap_pred_v: Option<f64>,
}

pub fn se_rows_square(se: &SeSquareState) -> Vec<SeRow> {
    (1..=se.iterations())
        .map(|t| SeRow {
            t,
            mu: se.mu[t],
            sigma_tt: se.sigma[t][t],
            nu: None,
            omega_tt: None,
            overlap_pred_u: se.predicted_overlap(t, OverlapSpace::Iterate).unwrap_or(0.0),
            overlap_pred_v: None,
        })
        .collect()
}

pub fn se_rows_rect(se: &SeRectState) -> Vec<SeRow> {
    (1..=se.iterations())
        .map(|t| SeRow {
            t,
            mu: se.mu[t],
            sigma_tt: se.sigma[t][t],
            nu: Some(se.nu[t]),
            omega_tt: Some(se.omega[t][t]),
            overlap_pred_u: se.predicted_overlap_u(t).unwrap_or(0.0),
            overlap_pred_v: Some(se.predicted_overlap_v(t).unwrap_or(0.0)),
        })
        .collect()
}

/// Writes SE rows as CSV; absent rectangular columns are left empty.
pub fn write_se_csv<W: Write>(out: &mut W, rows: &[SeRow]) -> Result<()> {
    writeln!(out, "# schema=1")?;
    writeln!(out, "t,mu,sigma_tt,nu,omega_tt,overlap_pred_u,overlap_pred_v")?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.t,
            r.mu,
            r.sigma_tt,
            opt(r.nu),
            opt(r.omega_tt),
            r.overlap_pred_u,
            opt(r.overlap_pred_v)
        )?;
    }
    Ok(())
}
