use crate::error::{domain, param, Result};
use crate::fixed::Fixed;
use std::f64::consts::PI;
use std::sync::OnceLock;

/// Square (symmetric eigenvalue) or rectangular (singular value) setting.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Kind {
    Square,
    /// `gamma = m / n` in (0, 1].
    Rectangular { gamma: f64 },
}

impl Kind {
    pub fn gamma(&self) -> Option<f64> {
        match self {
            Kind::Square => None,
            Kind::Rectangular { gamma } => Some(*gamma),
        }
    }

    pub fn is_square(&self) -> bool {
        matches!(self, Kind::Square)
    }

    fn validate(&self) -> Result<()> {
        if let Kind::Rectangular { gamma } = self {
            if !(*gamma > 0.0 && *gamma <= 1.0) {
                return Err(param(format!("aspect ratio gamma must lie in (0, 1], got {gamma}")));
            }
        }
        Ok(())
    }
}

/// Moments m_1..m_K (square) or even moments m_2, m_4, .., m_2K (rectangular).
#[derive(Clone, Debug, PartialEq)]
pub struct MomentSequence {
    pub kind: Kind,
    values: Vec<f64>,
}

impl MomentSequence {
    pub fn new(kind: Kind, values: Vec<f64>) -> Result<Self> {
        kind.validate()?;
        if values.is_empty() {
            return Err(param("moment sequence needs at least one value"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(param("moment sequence contains a non-finite value"));
        }
        match kind {
            Kind::Square => {
                if values.len() >= 2 && values[1] < 0.0 {
                    return Err(param("second moment must be nonnegative"));
                }
            }
            Kind::Rectangular { .. } => {
                if values.iter().any(|&v| v < 0.0) {
                    return Err(param("rectangular (even) moments must be nonnegative"));
                }
            }
        }
        Ok(MomentSequence { kind, values })
    }

    pub fn square(values: Vec<f64>) -> Result<Self> {
        Self::new(Kind::Square, values)
    }

    pub fn rectangular(values: Vec<f64>, gamma: f64) -> Result<Self> {
        Self::new(Kind::Rectangular { gamma }, values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Advisory Hankel check on the first two square moments
    /// (m2 >= m1^2). Always true for rectangular sequences.
    pub fn hankel_ok(&self) -> bool {
        match self.kind {
            Kind::Square if self.values.len() >= 2 => {
                self.values[1] - self.values[0] * self.values[0] >= -1e-12 * self.values[1].abs().max(1.0)
            }
            _ => true,
        }
    }
}

/// Closed-form cumulant generating functions, used to sum tails exactly.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CumulantLaw {
    /// All free cumulants equal (Marcenko-Pastur with ratio c).
    Constant(f64),
    /// Uniform eigenvalues on [-h, h].
    UniformSymmetric { halfwidth: f64 },
}

impl CumulantLaw {
    pub fn kappa(&self, k: usize) -> f64 {
        match *self {
            CumulantLaw::Constant(c) => c,
            CumulantLaw::UniformSymmetric { halfwidth } => uniform_kappa(k, halfwidth),
        }
    }

    /// Radius of convergence of sum_i kappa_{i+1} w^i.
    pub fn radius(&self) -> f64 {
        match *self {
            CumulantLaw::Constant(0.0) => f64::INFINITY,
            CumulantLaw::Constant(_) => 1.0,
            CumulantLaw::UniformSymmetric { halfwidth } => PI / halfwidth,
        }
    }

    /// R(w) = sum_{i>=0} kappa_{i+1} w^i and its derivative, in closed form.
    fn r_and_prime(&self, w: f64) -> (f64, f64) {
        match *self {
            CumulantLaw::Constant(c) => (c / (1.0 - w), c / ((1.0 - w) * (1.0 - w))),
            CumulantLaw::UniformSymmetric { halfwidth: h } => {
                // R(w) = 2h r(2hw), r(z) = coth(z/2)/2 - 1/z.
                let z = 2.0 * h * w;
                let half = 0.5 * z;
                let coth = 1.0 / half.tanh();
                let csch2 = 1.0 / (half.sinh() * half.sinh());
                let r = 0.5 * coth - 1.0 / z;
                let rp = -0.25 * csch2 + 1.0 / (z * z);
                (2.0 * h * r, 4.0 * h * h * rp)
            }
        }
    }
}

fn scaled_bernoulli() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| scaled_bernoulli_table(64))
}

/// beta_m = B_m / m! from sum_{j<=m} beta_j / (m+1-j)! = 0 (m >= 1), beta_0 = 1.
pub(crate) fn scaled_bernoulli_table(k: usize) -> Vec<f64> {
    let mut inv_fact = vec![1.0f64; k + 3];
    for i in 1..k + 3 {
        inv_fact[i] = inv_fact[i - 1] / i as f64;
    }
    let mut beta = vec![0.0f64; k + 1];
    beta[0] = 1.0;
    for m in 1..=k {
        let s: f64 = (0..m).map(|j| beta[j] * inv_fact[m + 1 - j]).sum();
        beta[m] = -s;
    }
    beta
}

/// Direct summation for Uniform[-h, h], with cumulants normalized by
/// (h/pi)^k so no intermediate power over- or underflows.
fn uniform_direct_sum(h: f64, start: usize, w: f64, weighted: bool) -> f64 {
    let c = h / PI;
    let q = c * w;
    let ratio = q.abs();
    let n_terms = if ratio == 0.0 { 1 } else { (-50.0 / ratio.ln()).ceil() as usize + 8 };
    let table = scaled_bernoulli();
    let normalized = |k: usize| -> f64 {
        if k < 2 || k % 2 == 1 {
            0.0
        } else if k < table.len() {
            table[k] * (2.0 * PI).powi(k as i32)
        } else {
            let sign = if (k / 2) % 2 == 1 { 1.0 } else { -1.0 };
            sign * 2.0 * zeta_even(k)
        }
    };
    let mut sum = 0.0;
    let mut qi = 1.0;
    for i in 0..n_terms {
        let weight = if weighted { (i + 1) as f64 } else { 1.0 };
        sum += normalized(start + i) * qi * weight;
        qi *= q;
    }
    sum * c.powi(start as i32)
}

fn zeta_even(k: usize) -> f64 {
    (1..=6).map(|j| (j as f64).powi(-(k as i32))).sum()
}

/// Free cumulant of order k of Uniform[-h, h].
fn uniform_kappa(k: usize, h: f64) -> f64 {
    if k < 2 || k % 2 == 1 {
        return 0.0;
    }
    let table = scaled_bernoulli();
    if k < table.len() {
        table[k] * (2.0 * h).powi(k as i32)
    } else {
        let sign = if (k / 2) % 2 == 1 { 1.0 } else { -1.0 };
        sign * 2.0 * zeta_even(k) * (h / PI).powi(k as i32)
    }
}

/// Value of a (possibly truncated) infinite series.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeriesSum {
    pub value: f64,
    /// Set when the estimated tail exceeds 1e-8 of the partial sum.
    pub truncated: bool,
}

pub const TAIL_TOL: f64 = 1e-8;

/// Free cumulants kappa_1..kappa_K (square) or kappa_2, kappa_4, .., kappa_2K
/// (rectangular). Indices passed to accessors are "orders" k = 1..K, meaning
/// kappa_k or kappa_2k respectively.
#[derive(Clone, Debug, PartialEq)]
pub struct CumulantSeries {
    pub kind: Kind,
    values: Vec<f64>,
    law: Option<CumulantLaw>,
}

impl CumulantSeries {
    pub fn new(kind: Kind, values: Vec<f64>) -> Result<Self> {
        kind.validate()?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(param("cumulant sequence contains a non-finite value"));
        }
        if values.is_empty() {
            return Err(param("cumulant sequence needs at least one value"));
        }
        Ok(CumulantSeries { kind, values, law: None })
    }

    pub fn square(values: Vec<f64>) -> Result<Self> {
        Self::new(Kind::Square, values)
    }

    pub fn rectangular(values: Vec<f64>, gamma: f64) -> Result<Self> {
        Self::new(Kind::Rectangular { gamma }, values)
    }

    /// Attach a closed form, used for orders beyond K and for tail sums.
    pub fn with_law(mut self, law: CumulantLaw) -> Self {
        self.law = Some(law);
        self
    }

    pub fn law(&self) -> Option<CumulantLaw> {
        self.law
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Same series truncated (or extended through the closed form) to `k` orders.
    pub fn with_order(&self, k: usize) -> CumulantSeries {
        let values = (1..=k).map(|i| self.kappa(i)).collect();
        CumulantSeries { kind: self.kind, values, law: self.law }
    }

    /// kappa at order `k >= 1`; zero beyond K when no closed form is known.
    pub fn kappa(&self, k: usize) -> f64 {
        assert!(k >= 1, "cumulant orders start at 1");
        if k <= self.values.len() {
            self.values[k - 1]
        } else if let Some(law) = self.law {
            law.kappa(k)
        } else {
            0.0
        }
    }

    /// Radius of convergence of sum_i kappa_{k+i} w^i: exact with a closed
    /// form, otherwise a root-test estimate over the upper half of the
    /// retained orders (infinite when only finitely many are nonzero).
    pub fn radius(&self) -> f64 {
        if let Some(law) = self.law {
            return law.radius();
        }
        let k = self.values.len();
        let lo = (k / 2).max(1);
        let mut worst = 0.0f64;
        for i in lo..=k {
            let v = self.values[i - 1].abs();
            if v > 0.0 {
                worst = worst.max(v.powf(1.0 / i as f64));
            }
        }
        if worst == 0.0 {
            f64::INFINITY
        } else {
            1.0 / worst
        }
    }

    /// T(N, w) = sum_{i>=0} kappa_{N+i} w^i.
    pub fn tail(&self, start: usize, w: f64) -> Result<SeriesSum> {
        self.tail_impl(start, w, false)
    }

    /// TW(N, w) = sum_{i>=0} (i+1) kappa_{N+i} w^i.
    pub fn tail_weighted(&self, start: usize, w: f64) -> Result<SeriesSum> {
        self.tail_impl(start, w, true)
    }

    /// R-transform. Square: R(w) = sum_{i>=0} kappa_{i+1} w^i.
    /// Rectangular: R(w) = sum_{i>=1} kappa_2i w^i.
    pub fn r_transform(&self, w: f64) -> Result<SeriesSum> {
        let t = self.tail(1, w)?;
        Ok(match self.kind {
            Kind::Square => t,
            Kind::Rectangular { .. } => SeriesSum { value: w * t.value, truncated: t.truncated },
        })
    }

    /// Derivative of [`Self::r_transform`].
    pub fn r_transform_prime(&self, w: f64) -> Result<SeriesSum> {
        match self.kind {
            Kind::Square => self.tail_weighted(2, w),
            Kind::Rectangular { .. } => self.tail_weighted(1, w),
        }
    }

    fn tail_impl(&self, start: usize, w: f64, weighted: bool) -> Result<SeriesSum> {
        if start == 0 {
            return Err(domain("tail sums start at order 1"));
        }
        if !w.is_finite() {
            return Err(domain(format!("series argument {w} is not finite")));
        }
        if let Some(law) = self.law {
            let r = law.radius();
            if w.abs() >= r {
                return Err(domain(format!("|w| = {} outside the convergence radius {r}", w.abs())));
            }
            return Ok(SeriesSum { value: self.law_tail(law, start, w, weighted), truncated: false });
        }
        Ok(self.finite_tail(start, w, weighted))
    }

    fn law_tail(&self, law: CumulantLaw, start: usize, w: f64, weighted: bool) -> f64 {
        match law {
            CumulantLaw::Constant(c) => {
                if weighted {
                    c / ((1.0 - w) * (1.0 - w))
                } else {
                    c / (1.0 - w)
                }
            }
            CumulantLaw::UniformSymmetric { halfwidth } => {
                if w.abs() / law.radius() < 0.9 {
                    uniform_direct_sum(halfwidth, start, w, weighted)
                } else {
                    self.subtracted_law_sum(law, start, w, weighted)
                }
            }
        }
    }

    /// (R(w) - sum_{i<N-1} kappa_{i+1} w^i) / w^{N-1} and its weighted analogue.
    fn subtracted_law_sum(&self, law: CumulantLaw, start: usize, w: f64, weighted: bool) -> f64 {
        let (r, rp) = law.r_and_prime(w);
        let mut head = 0.0;
        let mut head_p = 0.0;
        let mut pw = 1.0;
        for i in 0..start.saturating_sub(1) {
            let k = self.kappa(i + 1);
            if i >= 1 {
                head_p += i as f64 * k * pw / w;
            }
            head += k * pw;
            pw *= w;
        }
        let n = start as i32;
        let rest = r - head;
        if !weighted {
            return rest / w.powi(n - 1);
        }
        // d/dw [ w T(N, w) ] with w T = (R - H) / w^{N-2}.
        (rp - head_p) / w.powi(n - 2) - (n - 2) as f64 * rest / w.powi(n - 1)
    }

    fn finite_tail(&self, start: usize, w: f64, weighted: bool) -> SeriesSum {
        let k = self.values.len();
        let mut sum = 0.0;
        let mut pw = 1.0;
        for idx in start..=k {
            let i = idx - start;
            let weight = if weighted { (i + 1) as f64 } else { 1.0 };
            sum += self.values[idx - 1] * pw * weight;
            pw *= w;
        }
        // Geometric extrapolation from the last two nonzero cumulants.
        let nz: Vec<usize> = (1..=k).filter(|&i| self.values[i - 1] != 0.0).collect();
        let bound = if nz.len() < 2 {
            0.0
        } else {
            let k2 = nz[nz.len() - 1];
            let k1 = nz[nz.len() - 2];
            let step = (self.values[k2 - 1] / self.values[k1 - 1]).abs().powf(1.0 / (k2 - k1) as f64);
            let q = step * w.abs();
            if q >= 1.0 {
                f64::INFINITY
            } else {
                // First omitted term: order K+1, power K+1-start.
                let first_power = (k + 1).saturating_sub(start) as i32;
                let mut next = self.values[k2 - 1].abs() * step.powi((k + 1 - k2) as i32) * w.abs().powi(first_power);
                if weighted {
                    next *= (first_power + 1) as f64 / (1.0 - q);
                }
                next / (1.0 - q)
            }
        };
        let truncated = bound > TAIL_TOL * sum.abs() && bound > 0.0;
        SeriesSum { value: sum, truncated }
    }
}

/// Which conversion the shared recursion performs.
#[derive(Clone, Copy)]
enum Direction {
    MomentsToCumulants,
    CumulantsToMoments,
}

/// Column-by-column evaluation of m_k = sum_{j<=k} kappa_j [z^k] P(z)^j,
/// where the coefficients of P are built from the moments known so far.
/// Square: P = z (1 + M). Rectangular: P = z (1 + (gamma+1) M + gamma M^2),
/// with M the ordinary (even) moment series.
fn convert(kind: Kind, input: &[f64], dir: Direction) -> Vec<f64> {
    let inp: Vec<Fixed> = input.iter().map(|&v| Fixed::from_f64(v)).collect();
    convert_fixed(kind, &inp, dir)
}

/// Rectangular cumulants from even moments given at full fixed-point precision.
pub(crate) fn rect_cumulants_from_fixed_moments(moments: &[Fixed], gamma: f64) -> Vec<f64> {
    convert_fixed(Kind::Rectangular { gamma }, moments, Direction::MomentsToCumulants)
}

fn convert_fixed(kind: Kind, inp: &[Fixed], dir: Direction) -> Vec<f64> {
    let k_max = inp.len();
    let gamma = kind.gamma().map(Fixed::from_f64);
    let one = Fixed::one();
    // m[k], kappa[k] for k = 1..=K (index 0 unused).
    let mut m = vec![Fixed::zero(); k_max + 1];
    let mut kap = vec![Fixed::zero(); k_max + 1];
    // P coefficients p[d], d >= 1.
    let mut p = vec![Fixed::zero(); k_max + 1];
    // pow[j][k] = [z^k] P^j.
    let mut pow = vec![vec![Fixed::zero(); k_max + 1]; k_max + 1];
    pow[0][0] = one.clone();

    for k in 1..=k_max {
        // P[k] depends on moments up to order k-1, all known now.
        let e = k - 1;
        p[k] = if e == 0 {
            one.clone()
        } else {
            match &gamma {
                None => m[e].clone(),
                Some(g) => {
                    let g1 = &one + g;
                    let mut c = &g1 * &m[e];
                    let mut conv = Fixed::zero();
                    for a in 1..e {
                        conv = &conv + &(&m[a] * &m[e - a]);
                    }
                    c = &c + &(g * &conv);
                    c
                }
            }
        };
        for j in 1..=k {
            let mut acc = Fixed::zero();
            for d in 1..=(k - j + 1) {
                let prev = &pow[j - 1][k - d];
                if !prev.is_zero() {
                    acc = &acc + &(&p[d] * prev);
                }
            }
            pow[j][k] = acc;
        }
        let mut lower = Fixed::zero();
        for j in 1..k {
            lower = &lower + &(&kap[j] * &pow[j][k]);
        }
        match dir {
            Direction::MomentsToCumulants => {
                m[k] = inp[k - 1].clone();
                kap[k] = &m[k] - &lower;
            }
            Direction::CumulantsToMoments => {
                kap[k] = inp[k - 1].clone();
                m[k] = &kap[k] + &lower;
            }
        }
    }
    let out = match dir {
        Direction::MomentsToCumulants => kap,
        Direction::CumulantsToMoments => m,
    };
    out[1..].iter().map(Fixed::to_f64).collect()
}

/// Free cumulants from moments m_1..m_K.
pub fn moments_to_free_cumulants(m: &MomentSequence) -> Result<CumulantSeries> {
    if !m.kind.is_square() {
        return Err(param("moments_to_free_cumulants expects a square moment sequence"));
    }
    CumulantSeries::new(m.kind, convert(m.kind, &m.values, Direction::MomentsToCumulants))
}

/// Moments m_1..m_K from free cumulants.
pub fn free_cumulants_to_moments(k: &CumulantSeries) -> Result<MomentSequence> {
    if !k.kind.is_square() {
        return Err(param("free_cumulants_to_moments expects square cumulants"));
    }
    Ok(MomentSequence { kind: k.kind, values: convert(k.kind, &k.values, Direction::CumulantsToMoments) })
}

/// Rectangular free cumulants kappa_2..kappa_2K from even moments.
pub fn moments_to_rect_cumulants(m: &MomentSequence) -> Result<CumulantSeries> {
    if m.kind.is_square() {
        return Err(param("moments_to_rect_cumulants expects a rectangular moment sequence"));
    }
    CumulantSeries::new(m.kind, convert(m.kind, &m.values, Direction::MomentsToCumulants))
}

/// Even moments from rectangular free cumulants.
pub fn rect_cumulants_to_moments(k: &CumulantSeries) -> Result<MomentSequence> {
    if k.kind.is_square() {
        return Err(param("rect_cumulants_to_moments expects rectangular cumulants"));
    }
    // Moments produced from arbitrary cumulants may be negative; skip validation.
    Ok(MomentSequence { kind: k.kind, values: convert(k.kind, &k.values, Direction::CumulantsToMoments) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn semicircle_cumulants() {
        let m = MomentSequence::square(vec![0.0, 1.0, 0.0, 2.0, 0.0, 5.0]).unwrap();
        let k = moments_to_free_cumulants(&m).unwrap();
        let want = [0.0, 1.0, 0.0, 0.0, 0.0, 0.0];
        for (a, b) in k.values().iter().zip(want) {
            assert!(close(*a, b, 1e-14), "{:?}", k.values());
        }
    }

    #[test]
    fn constant_cumulants_give_mp_moments() {
        let k = CumulantSeries::square(vec![2.0; 4]).unwrap();
        let m = free_cumulants_to_moments(&k).unwrap();
        assert_eq!(m.values(), &[2.0, 6.0, 22.0, 90.0]);
    }

    #[test]
    fn uniform_moments_to_cumulants() {
        let m = MomentSequence::square(vec![0.0, 1.0 / 12.0, 0.0, 1.0 / 80.0]).unwrap();
        let k = moments_to_free_cumulants(&m).unwrap();
        assert!(close(k.values()[1], 1.0 / 12.0, 1e-15));
        assert!(k.values()[2].abs() < 1e-16);
        assert!(close(k.values()[3], -1.0 / 720.0, 1e-14));
    }

    #[test]
    fn rect_single_cumulant() {
        let k = CumulantSeries::rectangular(vec![1.0, 0.0], 1.0).unwrap();
        let m = rect_cumulants_to_moments(&k).unwrap();
        assert_eq!(m.values(), &[1.0, 2.0]);
    }

    #[test]
    fn rect_point_mass() {
        let v: f64 = 0.7;
        let m = MomentSequence::rectangular(vec![v, v * v, v * v * v], 1.0).unwrap();
        let k = moments_to_rect_cumulants(&m).unwrap();
        assert!(close(k.values()[0], v, 1e-15));
        let back = rect_cumulants_to_moments(&k).unwrap();
        for (a, b) in back.values().iter().zip(m.values()) {
            assert!(close(*a, *b, 1e-14));
        }
    }

    #[test]
    fn zero_in_zero_out() {
        let m = MomentSequence::square(vec![0.0; 5]).unwrap();
        assert!(moments_to_free_cumulants(&m).unwrap().values().iter().all(|&v| v == 0.0));
        let m = MomentSequence::rectangular(vec![0.0; 5], 0.5).unwrap();
        assert!(moments_to_rect_cumulants(&m).unwrap().values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bernoulli_table() {
        let b = scaled_bernoulli_table(8);
        assert!(close(b[2], 1.0 / 12.0, 1e-15));
        assert!(close(b[4], -1.0 / 720.0, 1e-14));
        assert!(b[3].abs() < 1e-17 && b[5].abs() < 1e-17);
    }

    #[test]
    fn uniform_kappa_switch_is_continuous() {
        // Table and zeta routes agree where both are accurate.
        for k in [20usize, 40, 60] {
            let sign = if (k / 2) % 2 == 1 { 1.0 } else { -1.0 };
            let zeta = sign * 2.0 * zeta_even(k) * (0.5 / PI).powi(k as i32);
            assert!(close(uniform_kappa(k, 0.5), zeta, 1e-12));
        }
    }

    #[test]
    fn geometric_tail_closed_form() {
        let k = CumulantSeries::square(vec![2.0; 8]).unwrap().with_law(CumulantLaw::Constant(2.0));
        let t = k.tail(1, 0.25).unwrap();
        assert!(close(t.value, 2.0 / 0.75, 1e-15) && !t.truncated);
        let tw = k.tail_weighted(3, 0.25).unwrap();
        assert!(close(tw.value, 2.0 / (0.75 * 0.75), 1e-15));
    }

    #[test]
    fn uniform_tail_routes_agree() {
        let law = CumulantLaw::UniformSymmetric { halfwidth: 0.5 };
        let k = CumulantSeries::square(vec![0.0, 1.0 / 12.0]).unwrap().with_law(law);
        // Near 0.9 * radius both routes are valid; compare them.
        let w = 0.88 * 2.0 * PI;
        for start in [1usize, 2, 3, 7] {
            for weighted in [false, true] {
                let a = uniform_direct_sum(0.5, start, w, weighted);
                let b = k.subtracted_law_sum(law, start, w, weighted);
                assert!(close(a, b, 1e-9), "start {start} weighted {weighted}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn finite_tail_flags_truncation() {
        let k = CumulantSeries::square(vec![1.0; 6]).unwrap();
        let t = k.tail(1, 0.5).unwrap();
        assert!(t.truncated);
        let k = CumulantSeries::square(vec![1.0, 0.0, 0.0]).unwrap();
        let t = k.tail(1, 0.5).unwrap();
        assert!(!t.truncated && t.value == 1.0);
    }
}
