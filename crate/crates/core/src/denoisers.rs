//! Scalar denoisers applied entrywise to AMP iterates.

use crate::error::{param, Result};
use crate::random_matrix::Prior;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Denoiser {
    /// x -> scale * x
    Linear { scale: f64 },
    /// x -> tanh(mu x / sigma): posterior mean of a Rademacher signal observed
    /// as mu U + N(0, sigma).
    RademacherPosteriorMean { mu: f64, sigma: f64 },
    Identity,
}

impl Denoiser {
    pub fn linear(scale: f64) -> Result<Self> {
        if !scale.is_finite() {
            return Err(param(format!("linear denoiser scale must be finite, got {scale}")));
        }
        Ok(Denoiser::Linear { scale })
    }

    pub fn rademacher_posterior_mean(mu: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() || !mu.is_finite() {
            return Err(param(format!("tanh denoiser needs finite mu and sigma > 0, got mu = {mu}, sigma = {sigma}")));
        }
        Ok(Denoiser::RademacherPosteriorMean { mu, sigma })
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Denoiser::Linear { scale } => scale * x,
            Denoiser::RademacherPosteriorMean { mu, sigma } => (mu * x / sigma).tanh(),
            Denoiser::Identity => x,
        }
    }

    #[inline]
    pub fn deriv(&self, x: f64) -> f64 {
        match *self {
            Denoiser::Linear { scale } => scale,
            Denoiser::RademacherPosteriorMean { mu, sigma } => {
                let t = (mu * x / sigma).tanh();
                (mu / sigma) * (1.0 - t * t)
            }
            Denoiser::Identity => 1.0,
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match *self {
            Denoiser::Linear { scale } => scale.abs(),
            Denoiser::RademacherPosteriorMean { mu, sigma } => (mu / sigma).abs(),
            Denoiser::Identity => 1.0,
        }
    }

    /// Applies the denoiser to `input`, writing values to `out`; returns the mean derivative.
    pub fn apply(&self, input: &[f64], out: &mut [f64]) -> f64 {
        let mut d = 0.0;
        for (o, &x) in out.iter_mut().zip(input) {
            *o = self.eval(x);
            d += self.deriv(x);
        }
        d / input.len() as f64
    }
}

/// How the denoiser for each iteration is chosen from the current state
/// evolution parameters (mean coefficient, noise variance).
#[derive(Clone, Debug, PartialEq)]
pub enum DenoiserRule {
    /// x -> x / alpha for u, x -> gamma x / alpha for v.
    Linear,
    Identity,
    /// Posterior mean under the given prior: tanh(mu x / sigma) for Rademacher,
    /// mu x / (mu^2 + sigma) for a Gaussian signal.
    PosteriorMean(Prior),
    /// The same denoiser at every iteration.
    Fixed(Denoiser),
}

impl DenoiserRule {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "linear" => Some(DenoiserRule::Linear),
            "identity" => Some(DenoiserRule::Identity),
            "tanh" | "rademacher" => Some(DenoiserRule::PosteriorMean(Prior::Rademacher)),
            "gaussian" => Some(DenoiserRule::PosteriorMean(Prior::GaussianSphere)),
            other => {
                let rest = other.strip_prefix("fixed:")?;
                let (a, b) = rest.split_once(':')?;
                let (mu, sigma) = (a.trim().parse().ok()?, b.trim().parse().ok()?);
                Denoiser::rademacher_posterior_mean(mu, sigma).ok().map(DenoiserRule::Fixed)
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            DenoiserRule::Linear => "linear".into(),
            DenoiserRule::Identity => "identity".into(),
            DenoiserRule::PosteriorMean(Prior::Rademacher) => "tanh".into(),
            DenoiserRule::PosteriorMean(Prior::GaussianSphere) => "gaussian".into(),
            DenoiserRule::Fixed(Denoiser::RademacherPosteriorMean { mu, sigma }) => format!("fixed:{mu}:{sigma}"),
            DenoiserRule::Fixed(d) => format!("{d:?}"),
        }
    }

    /// Denoiser for an input distributed as `mu * signal + N(0, sigma)`.
    /// `linear_scale` is the scale used by [`DenoiserRule::Linear`].
    pub fn make(&self, mu: f64, sigma: f64, linear_scale: f64) -> Result<Denoiser> {
        match self {
            DenoiserRule::Linear => Denoiser::linear(linear_scale),
            DenoiserRule::Identity => Ok(Denoiser::Identity),
            DenoiserRule::PosteriorMean(Prior::Rademacher) => {
                // A vanishing noise variance is capped so the map stays Lipschitz.
                Denoiser::rademacher_posterior_mean(mu, sigma.max(1e-12 * mu * mu).max(1e-300))
            }
            DenoiserRule::PosteriorMean(Prior::GaussianSphere) => {
                let den = mu * mu + sigma;
                Denoiser::linear(if den > 0.0 { mu / den } else { 0.0 })
            }
            DenoiserRule::Fixed(d) => Ok(*d),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tanh_values() {
        let d = Denoiser::rademacher_posterior_mean(2.0, 1.0).unwrap();
        assert!((d.eval(1.0) - 2f64.tanh()).abs() < 1e-15);
        assert!((d.deriv(1.0) - 2.0 * (1.0 - 2f64.tanh().powi(2))).abs() < 1e-15);
        assert!(Denoiser::rademacher_posterior_mean(1.0, 0.0).is_err());
    }

    #[test]
    fn rule_parsing() {
        assert_eq!(DenoiserRule::parse("tanh"), Some(DenoiserRule::PosteriorMean(Prior::Rademacher)));
        assert_eq!(
            DenoiserRule::parse("fixed:2:1"),
            Some(DenoiserRule::Fixed(Denoiser::RademacherPosteriorMean { mu: 2.0, sigma: 1.0 }))
        );
        assert_eq!(DenoiserRule::parse("nope"), None);
    }
}
