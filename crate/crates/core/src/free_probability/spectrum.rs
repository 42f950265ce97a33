use super::cumulants::{
    free_cumulants_to_moments, moments_to_free_cumulants, scaled_bernoulli_table, CumulantLaw, CumulantSeries,
    Kind, MomentSequence,
};
use crate::error::{domain, param, Error, Result};
use crate::fixed::Fixed;
use rand::Rng;
use std::f64::consts::PI;

/// Where a spectrum comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum Source {
    /// Eigenvalues of A A^T / n, A of size n x p, c = p / n.
    MarcenkoPastur { c: f64 },
    /// Eigenvalues uniform on [-h, h].
    UniformSymmetric { halfwidth: f64 },
    /// Singular values whose squares are uniform on [0, 1].
    UniformSquaredSingular,
    /// Sorted (ascending) eigenvalues, or singular values for rectangular models.
    Empirical { values: Vec<f64> },
}

/// A noise spectrum: a named law or an empirical sample.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumModel {
    pub source: Source,
    /// Supremum of the support.
    pub support_sup: f64,
    pub kind: Kind,
}

/// Transforms that [`SpectrumModel::transform`] evaluates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Transform {
    G,
    Gprime,
    Phi,
    PhiPrime,
    PhiBar,
    D,
    Dprime,
}

/// Inverse transforms.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Inverse {
    Ginv,
    Dinv,
}

/// Spectral threshold alpha_s (square) or alpha_tilde_s (rectangular).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Threshold {
    pub value: f64,
    /// G(b+) or D(b+) diverges; the threshold is reported as 0.
    pub divergent: bool,
}

/// PCA overlap prediction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OverlapReport {
    Square { rho_sq: f64, below_threshold: bool },
    Rectangular { delta_pca: f64, gamma_pca: f64, below_threshold: bool },
}

impl OverlapReport {
    /// Overlap of the left (u) PCA vector with the signal.
    pub fn left(&self) -> f64 {
        match *self {
            OverlapReport::Square { rho_sq, .. } => rho_sq,
            OverlapReport::Rectangular { delta_pca, .. } => delta_pca,
        }
    }

    pub fn below_threshold(&self) -> bool {
        match *self {
            OverlapReport::Square { below_threshold, .. } | OverlapReport::Rectangular { below_threshold, .. } => {
                below_threshold
            }
        }
    }
}

/// Number of cumulants computed for series work when none is specified.
pub const DEFAULT_CUMULANT_ORDER: usize = 64;

impl SpectrumModel {
    pub fn marcenko_pastur(c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(param(format!("Marcenko-Pastur ratio must be positive, got {c}")));
        }
        Ok(SpectrumModel {
            source: Source::MarcenkoPastur { c },
            support_sup: (1.0 + c.sqrt()).powi(2),
            kind: Kind::Square,
        })
    }

    pub fn uniform_symmetric(halfwidth: f64) -> Result<Self> {
        if !(halfwidth > 0.0 && halfwidth.is_finite()) {
            return Err(param(format!("half-width must be positive, got {halfwidth}")));
        }
        Ok(SpectrumModel { source: Source::UniformSymmetric { halfwidth }, support_sup: halfwidth, kind: Kind::Square })
    }

    pub fn uniform_squared_singular(gamma: f64) -> Result<Self> {
        let kind = Kind::Rectangular { gamma };
        check_gamma(gamma)?;
        Ok(SpectrumModel { source: Source::UniformSquaredSingular, support_sup: 1.0, kind })
    }

    /// Empirical eigenvalue sample (square) or singular value sample (rectangular).
    pub fn empirical(kind: Kind, mut values: Vec<f64>) -> Result<Self> {
        if let Some(g) = kind.gamma() {
            check_gamma(g)?;
        }
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(param("empirical spectrum needs finite values"));
        }
        values.sort_by(f64::total_cmp);
        let sup = match kind {
            Kind::Square => *values.last().unwrap(),
            Kind::Rectangular { .. } => values.iter().fold(0.0f64, |a, v| a.max(v.abs())),
        };
        Ok(SpectrumModel { source: Source::Empirical { values }, support_sup: sup, kind })
    }

    pub fn is_named(&self) -> bool {
        !matches!(self.source, Source::Empirical { .. })
    }

    /// Moments m_1..m_K (square) or m_2..m_2K (rectangular).
    pub fn moments(&self, k: usize) -> Result<MomentSequence> {
        if k == 0 {
            return Err(param("need at least one moment"));
        }
        let values: Vec<f64> = match &self.source {
            Source::MarcenkoPastur { c } => {
                let cum = CumulantSeries::square(vec![*c; k])?;
                return free_cumulants_to_moments(&cum);
            }
            Source::UniformSymmetric { halfwidth } => (1..=k)
                .map(|i| if i % 2 == 1 { 0.0 } else { halfwidth.powi(i as i32) / (i + 1) as f64 })
                .collect(),
            Source::UniformSquaredSingular => (1..=k).map(|i| 1.0 / (i + 1) as f64).collect(),
            Source::Empirical { values } => {
                let n = values.len() as f64;
                let base: Vec<f64> = match self.kind {
                    Kind::Square => values.clone(),
                    Kind::Rectangular { .. } => values.iter().map(|v| v * v).collect(),
                };
                (1..=k).map(|i| base.iter().map(|x| x.powi(i as i32)).sum::<f64>() / n).collect()
            }
        };
        MomentSequence::new(self.kind, values)
    }

    /// Free (or rectangular free) cumulants of order 1..K; named laws attach
    /// their closed form so tails can be summed beyond K.
    pub fn cumulants(&self, k: usize) -> Result<CumulantSeries> {
        named_spectrum_cumulants_impl(self, k)
    }

    /// Draw `count` i.i.d. values from the law (resampling for empirical spectra).
    pub fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<f64> {
        match &self.source {
            Source::MarcenkoPastur { c } => {
                let table = MpTable::new(*c);
                (0..count).map(|_| table.draw(rng)).collect()
            }
            Source::UniformSymmetric { halfwidth } => {
                (0..count).map(|_| rng.random_range(-*halfwidth..=*halfwidth)).collect()
            }
            Source::UniformSquaredSingular => (0..count).map(|_| rng.random::<f64>().sqrt()).collect(),
            Source::Empirical { values } => (0..count).map(|_| values[rng.random_range(0..values.len())]).collect(),
        }
    }

    /// Evaluate a Cauchy-type transform at real `z > b`.
    pub fn transform(&self, which: Transform, z: f64) -> Result<f64> {
        if !(z > self.support_sup) || !z.is_finite() {
            return Err(domain(format!("transform argument {z} must exceed the support edge {}", self.support_sup)));
        }
        match which {
            Transform::G | Transform::Gprime => {
                if !self.kind.is_square() {
                    return Err(domain("G is defined for square spectra; use Phi/D for rectangular ones"));
                }
                let (g, gp) = self.g_and_prime(z);
                Ok(if which == Transform::G { g } else { gp })
            }
            _ => {
                let gamma = self
                    .kind
                    .gamma()
                    .ok_or_else(|| domain("Phi/D transforms are defined for rectangular spectra"))?;
                let (phi, phip) = self.phi_and_prime(z);
                let bar = gamma * phi + (1.0 - gamma) / z;
                let barp = gamma * phip - (1.0 - gamma) / (z * z);
                Ok(match which {
                    Transform::Phi => phi,
                    Transform::PhiPrime => phip,
                    Transform::PhiBar => bar,
                    Transform::D => phi * bar,
                    Transform::Dprime => phip * bar + phi * barp,
                    _ => unreachable!(),
                })
            }
        }
    }

    fn g_and_prime(&self, z: f64) -> (f64, f64) {
        match &self.source {
            Source::MarcenkoPastur { c } => {
                let c = *c;
                let s = ((z - 1.0 - c).powi(2) - 4.0 * c).max(0.0).sqrt();
                let den = z + 1.0 - c + s;
                let ds = if s > 0.0 { (z - 1.0 - c) / s } else { f64::INFINITY };
                (2.0 / den, -2.0 * (1.0 + ds) / (den * den))
            }
            Source::UniformSymmetric { halfwidth: h } => {
                let h = *h;
                (((z + h) / (z - h)).ln() / (2.0 * h), -1.0 / ((z - h) * (z + h)))
            }
            Source::Empirical { values } => {
                let n = values.len() as f64;
                let mut g = 0.0;
                let mut gp = 0.0;
                for &l in values {
                    let r = 1.0 / (z - l);
                    g += r;
                    gp -= r * r;
                }
                (g / n, gp / n)
            }
            Source::UniformSquaredSingular => unreachable!("rectangular law"),
        }
    }

    fn phi_and_prime(&self, z: f64) -> (f64, f64) {
        match &self.source {
            Source::UniformSquaredSingular => {
                let z2 = z * z;
                let l = (z2 / (z2 - 1.0)).ln();
                (z * l, l - 2.0 / (z2 - 1.0))
            }
            Source::Empirical { values } => {
                let n = values.len() as f64;
                let z2 = z * z;
                let mut phi = 0.0;
                let mut phip = 0.0;
                for &s in values {
                    let d = z2 - s * s;
                    phi += z / d;
                    phip -= (z2 + s * s) / (d * d);
                }
                (phi / n, phip / n)
            }
            _ => unreachable!("square law"),
        }
    }

    /// Limit of G (square) or D (rectangular) at the support edge from above.
    /// Returns infinity when the limit diverges.
    pub fn edge_value(&self) -> f64 {
        match &self.source {
            Source::MarcenkoPastur { c } => 1.0 / (1.0 + c.sqrt()),
            Source::UniformSymmetric { .. } | Source::UniformSquaredSingular => f64::INFINITY,
            Source::Empirical { .. } => {
                let which = if self.kind.is_square() { Transform::G } else { Transform::D };
                let b = self.support_sup;
                let mut prev: Option<f64> = None;
                for p in 3..=8 {
                    let delta = 10f64.powi(-p);
                    let Ok(v) = self.transform(which, b * (1.0 + delta) + delta) else {
                        return f64::INFINITY;
                    };
                    if let Some(pv) = prev {
                        if (v - pv).abs() < 1e-6 * v.abs() {
                            return v;
                        }
                    }
                    prev = Some(v);
                }
                f64::INFINITY
            }
        }
    }

    /// alpha_s = 1/G(b+) (square) or alpha_tilde_s = 1/sqrt(D(b+)) (rectangular).
    pub fn spectral_threshold(&self) -> Threshold {
        let e = self.edge_value();
        if !e.is_finite() {
            return Threshold { value: 0.0, divergent: true };
        }
        let value = if self.kind.is_square() { 1.0 / e } else { 1.0 / e.sqrt() };
        Threshold { value, divergent: false }
    }

    /// Threshold below which the cumulant series in the AMP coefficients
    /// diverge: 1/r (square, w = 1/alpha) or 1/sqrt(r) (rectangular, w = 1/alpha_tilde^2),
    /// with r the radius of convergence of the cumulant series.
    pub fn series_threshold(&self) -> Result<f64> {
        let k = match self.source {
            Source::UniformSquaredSingular => 96,
            _ => DEFAULT_CUMULANT_ORDER,
        };
        let r = self.cumulants(k)?.radius();
        Ok(if self.kind.is_square() { 1.0 / r } else { 1.0 / r.sqrt() })
    }

    /// max(spectral threshold, series threshold): the smallest (tilde) alpha for
    /// which both the PCA overlap and the AMP coefficients are defined.
    pub fn reference_threshold(&self) -> Result<f64> {
        Ok(self.spectral_threshold().value.max(self.series_threshold()?))
    }

    /// Solve transform(z) = y for z > b by bracketed bisection.
    pub fn invert(&self, which: Inverse, y: f64) -> Result<f64> {
        let t = match which {
            Inverse::Ginv => Transform::G,
            Inverse::Dinv => Transform::D,
        };
        let edge = self.edge_value();
        if !(y > 0.0 && y < edge) {
            return Err(domain(format!("inverse argument {y} outside (0, {edge})")));
        }
        let b = self.support_sup;
        let f = |z: f64| self.transform(t, z);
        // Lower bracket: move toward the edge until f(lo) > y.
        let mut delta = 1e-3 * b.abs().max(1.0);
        let mut lo = b + delta;
        let mut shrinks = 0;
        while f(lo)? <= y {
            delta *= 0.1;
            lo = b + delta;
            shrinks += 1;
            if shrinks > 300 || lo <= b {
                return Err(Error::NoConvergence { what: "lower bracket for inversion".into(), iterations: shrinks });
            }
        }
        let mut hi = b + 1.0 + b.abs();
        let mut grows = 0;
        while f(hi)? >= y {
            hi = b + 2.0 * (hi - b);
            grows += 1;
            if grows > 2000 {
                return Err(Error::NoConvergence { what: "upper bracket for inversion".into(), iterations: grows });
            }
        }
        for _ in 0..400 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                return Ok(mid);
            }
            if f(mid)? > y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// PCA overlap: rho_alpha^2 (square) or (Delta_PCA, Gamma_PCA) (rectangular).
    /// Rectangular models compare alpha_tilde = alpha / sqrt(gamma) with the threshold.
    pub fn pca_overlap(&self, alpha: f64) -> Result<OverlapReport> {
        if !(alpha > 0.0) {
            return Err(param(format!("alpha must be positive, got {alpha}")));
        }
        let th = self.spectral_threshold().value;
        match self.kind {
            Kind::Square => {
                if alpha <= th {
                    return Ok(OverlapReport::Square { rho_sq: 0.0, below_threshold: true });
                }
                let z = self.invert(Inverse::Ginv, 1.0 / alpha)?;
                let gp = self.transform(Transform::Gprime, z)?;
                let rho_sq = (-1.0 / (alpha * alpha * gp)).clamp(0.0, 1.0);
                Ok(OverlapReport::Square { rho_sq, below_threshold: false })
            }
            Kind::Rectangular { gamma } => {
                let at = alpha / gamma.sqrt();
                if at <= th {
                    return Ok(OverlapReport::Rectangular { delta_pca: 0.0, gamma_pca: 0.0, below_threshold: true });
                }
                let z = self.invert(Inverse::Dinv, 1.0 / (at * at))?;
                let phi = self.transform(Transform::Phi, z)?;
                let bar = self.transform(Transform::PhiBar, z)?;
                let dp = self.transform(Transform::Dprime, z)?;
                let delta_pca = (-2.0 * phi / (at * at * dp)).clamp(0.0, 1.0);
                let gamma_pca = (-2.0 * bar / (at * at * dp)).clamp(0.0, 1.0);
                Ok(OverlapReport::Rectangular { delta_pca, gamma_pca, below_threshold: false })
            }
        }
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(param(format!("aspect ratio gamma must lie in (0, 1], got {gamma}")));
    }
    Ok(())
}

/// Free cumulants of a named law (or of an empirical spectrum's moments).
///
/// Marcenko-Pastur: all equal to c. UniformSymmetric(h): odd orders vanish,
/// kappa_2n = (2h)^2n B_2n / (2n)!. UniformSquaredSingular: m_2k = 1/(k+1)
/// fed through the rectangular recursion.
pub fn named_spectrum_cumulants(model: &SpectrumModel, k: usize) -> Result<CumulantSeries> {
    named_spectrum_cumulants_impl(model, k)
}

fn named_spectrum_cumulants_impl(model: &SpectrumModel, k: usize) -> Result<CumulantSeries> {
    if k == 0 {
        return Err(param("need at least one cumulant"));
    }
    match &model.source {
        Source::MarcenkoPastur { c } => Ok(CumulantSeries::square(vec![*c; k])?.with_law(CumulantLaw::Constant(*c))),
        Source::UniformSymmetric { halfwidth } => {
            let beta = scaled_bernoulli_table(k.min(64));
            let h = *halfwidth;
            let law = CumulantLaw::UniformSymmetric { halfwidth: h };
            let values = (1..=k)
                .map(|i| if i == 1 || i % 2 == 1 { 0.0 } else if i <= 64 { beta[i] * (2.0 * h).powi(i as i32) } else { law.kappa(i) })
                .collect();
            Ok(CumulantSeries::square(values)?.with_law(law))
        }
        Source::UniformSquaredSingular => {
            let gamma = model.kind.gamma().expect("rectangular law");
            // Moments 1/(k+1) are not dyadic; build them at full fixed-point precision.
            let moments: Vec<Fixed> = (1..=k).map(|i| Fixed::ratio(1, i as i64 + 1)).collect();
            let values = super::cumulants::rect_cumulants_from_fixed_moments(&moments, gamma);
            CumulantSeries::rectangular(values, gamma)
        }
        Source::Empirical { .. } => {
            let m = model.moments(k)?;
            match model.kind {
                Kind::Square => moments_to_free_cumulants(&m),
                Kind::Rectangular { .. } => super::cumulants::moments_to_rect_cumulants(&m),
            }
        }
    }
}

/// Inverse-CDF table for the Marcenko-Pastur law, tabulated in the angle
/// variable x = a + (b-a)(1-cos t)/2 that removes the square-root edges.
struct MpTable {
    c: f64,
    a: f64,
    b: f64,
    cdf: Vec<f64>,
}

impl MpTable {
    const POINTS: usize = 4096;

    fn new(c: f64) -> Self {
        let a = (1.0 - c.sqrt()).powi(2);
        let b = (1.0 + c.sqrt()).powi(2);
        let half = 0.5 * (b - a);
        let dt = PI / Self::POINTS as f64;
        let integrand = |t: f64| {
            let x = a + half * (1.0 - t.cos());
            let s = t.sin();
            if x <= 0.0 {
                // c = 1, t -> 0: sin^2 t / x -> 4 / b.
                half * half * 4.0 / b / (2.0 * PI)
            } else {
                half * half * s * s / (2.0 * PI * x)
            }
        };
        let mut cdf = vec![0.0; Self::POINTS + 1];
        for i in 1..=Self::POINTS {
            let t0 = (i - 1) as f64 * dt;
            let t1 = i as f64 * dt;
            // Simpson on each cell.
            let v = (integrand(t0) + 4.0 * integrand(0.5 * (t0 + t1)) + integrand(t1)) * dt / 6.0;
            cdf[i] = cdf[i - 1] + v;
        }
        let total = cdf[Self::POINTS];
        for v in &mut cdf {
            *v /= total;
        }
        MpTable { c, a, b, cdf }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let mut u: f64 = rng.random();
        if self.c < 1.0 {
            if u < 1.0 - self.c {
                return 0.0;
            }
            u = (u - (1.0 - self.c)) / self.c;
        }
        let i = self.cdf.partition_point(|&v| v < u).clamp(1, Self::POINTS);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let frac = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
        let t = ((i - 1) as f64 + frac) * PI / Self::POINTS as f64;
        self.a + 0.5 * (self.b - self.a) * (1.0 - t.cos())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_g_closed_form() {
        let m = SpectrumModel::uniform_symmetric(0.5).unwrap();
        assert!((m.transform(Transform::G, 1.0).unwrap() - 3f64.ln()).abs() < 1e-15);
        let z = m.invert(Inverse::Ginv, 3f64.ln()).unwrap();
        assert!((z - 1.0).abs() < 1e-12);
    }

    #[test]
    fn point_mass_g() {
        let m = SpectrumModel::empirical(Kind::Square, vec![0.0; 10]).unwrap();
        assert_eq!(m.transform(Transform::G, 2.0).unwrap(), 0.5);
        let z = m.invert(Inverse::Ginv, 0.25).unwrap();
        assert!((z - 4.0).abs() < 1e-12);
        let th = m.spectral_threshold();
        assert!(th.divergent && th.value == 0.0);
    }

    #[test]
    fn mp_threshold() {
        let m = SpectrumModel::marcenko_pastur(2.0).unwrap();
        let th = m.spectral_threshold();
        assert!(!th.divergent);
        assert!((th.value - (1.0 + 2f64.sqrt())).abs() < 1e-14);
        // Closed-form rho^2 = 1 - c/(alpha-1)^2.
        let alpha = 2.0 * th.value;
        let r = m.pca_overlap(alpha).unwrap().left();
        assert!((r - (1.0 - 2.0 / (alpha - 1.0).powi(2))).abs() < 1e-9, "{r}");
    }

    #[test]
    fn mp_sampler_mean() {
        let m = SpectrumModel::marcenko_pastur(2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = m.sample(200_000, &mut rng);
        let mean = s.iter().sum::<f64>() / s.len() as f64;
        let m2 = s.iter().map(|x| x * x).sum::<f64>() / s.len() as f64;
        assert!((mean - 2.0).abs() < 0.02, "{mean}");
        assert!((m2 - 6.0).abs() < 0.1, "{m2}");
        assert!(s.iter().all(|&x| (0.17..=5.83).contains(&x)));
    }

    #[test]
    fn below_threshold_flag() {
        let m = SpectrumModel::marcenko_pastur(2.0).unwrap();
        let r = m.pca_overlap(2.0).unwrap();
        assert!(r.below_threshold() && r.left() == 0.0);
    }

    #[test]
    fn uniform_squared_divergent_threshold() {
        let m = SpectrumModel::uniform_squared_singular(0.5).unwrap();
        assert!(m.spectral_threshold().divergent);
        let st = m.series_threshold().unwrap();
        assert!(st > 0.5 && st < 1.0, "{st}");
    }
}
