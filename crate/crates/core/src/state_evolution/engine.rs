//! Gaussian expectations for state evolution.
//!
//! A [`Family`] holds one signal S (drawn from the prior) and Gaussian fields
//! F_k = mu_k S + Z_k, with (Z_k) jointly normal and independent of S.
//! Variables are denoised fields U = d(F_k); the family answers E{U S},
//! E{U U'} and E{d'(F_k)}.

use crate::denoisers::Denoiser;
use crate::error::{param, Error, Result};
use crate::random_matrix::Prior;
use faer::{Mat, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const DEFAULT_MC_SAMPLES: usize = 200_000;
pub const DEFAULT_QUADRATURE_POINTS: usize = 64;
/// Pivots below -PSD_TOL * max(1, variance) mean the covariance is inconsistent.
pub const PSD_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExpectationEngine {
    /// Common random numbers: every expectation in one run shares the same draws.
    MonteCarlo { samples: usize, seed: u64 },
    /// Product Gauss-Hermite rule over the (at most three) Gaussians each expectation involves.
    Quadrature { points: usize },
}

impl Default for ExpectationEngine {
    fn default() -> Self {
        ExpectationEngine::MonteCarlo { samples: DEFAULT_MC_SAMPLES, seed: 0x5e_5e_5e }
    }
}

/// Nodes and weights for E{f(Z)}, Z ~ N(0, 1) (Golub-Welsch).
pub fn gauss_hermite(points: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if points == 0 {
        return Err(param("quadrature needs at least one point"));
    }
    let j = Mat::from_fn(points, points, |a, b| if a + 1 == b || b + 1 == a { (a.max(b) as f64).sqrt() } else { 0.0 });
    let evd = j
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::NoConvergence { what: format!("Gauss-Hermite nodes ({e:?})"), iterations: 0 })?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let nodes: Vec<f64> = (0..points).map(|i| s[i]).collect();
    let weights: Vec<f64> = (0..points).map(|i| u[(0, i)] * u[(0, i)]).collect();
    let total: f64 = weights.iter().sum();
    Ok((nodes, weights.into_iter().map(|w| w / total).collect()))
}

/// Lower Cholesky factor with nonpositive pivots clipped to zero.
fn clipped_cholesky(cov: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let d = cov.len();
    let mut l = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let p = cov[i][i] - s;
                if p < -PSD_TOL * cov[i][i].abs().max(1.0) {
                    return Err(Error::Factorization { pivot: p, index: i });
                }
                l[i][i] = p.max(0.0).sqrt();
            } else {
                l[i][j] = if l[j][j] > 0.0 { (cov[i][j] - s) / l[j][j] } else { 0.0 };
            }
        }
    }
    Ok(l)
}

struct Field {
    mu: f64,
    /// Covariances with fields 0..=k (last entry is the variance).
    cov: Vec<f64>,
}

struct Var {
    field: usize,
    denoiser: Denoiser,
}

#[allow(clippy::large_enum_variant)] // one per engine run
enum Backend {
    Mc {
        signal: Vec<f64>,
        /// Standard normal columns, one per field.
        xi: Vec<Vec<f64>>,
        /// Rows of the clipped Cholesky factor.
        chol: Vec<Vec<f64>>,
        /// Samples of each variable.
        values: Vec<Vec<f64>>,
        rng: ChaCha8Rng,
    },
    Quad {
        rule: (Vec<f64>, Vec<f64>),
    },
}

pub(crate) struct Family {
    prior: Prior,
    fields: Vec<Field>,
    vars: Vec<Var>,
    backend: Backend,
}

impl Family {
    pub fn new(engine: ExpectationEngine, prior: Prior, stream: u64) -> Result<Self> {
        let backend = match engine {
            ExpectationEngine::MonteCarlo { samples, seed } => {
                if samples < 2 {
                    return Err(param("Monte Carlo needs at least two samples"));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(stream);
                let signal = match prior {
                    Prior::Rademacher => (0..samples).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect(),
                    Prior::GaussianSphere => (0..samples).map(|_| rng.sample(StandardNormal)).collect(),
                };
                Backend::Mc { signal, xi: Vec::new(), chol: Vec::new(), values: Vec::new(), rng }
            }
            ExpectationEngine::Quadrature { points } => Backend::Quad { rule: gauss_hermite(points)? },
        };
        Ok(Family { prior, fields: Vec::new(), vars: Vec::new(), backend })
    }

    /// Adds F_k = mu S + Z_k; `cov` lists Cov(Z_k, Z_j) for j = 0..k-1 followed by Var(Z_k).
    pub fn add_field(&mut self, mu: f64, cov: &[f64]) -> Result<usize> {
        let k = self.fields.len();
        if cov.len() != k + 1 {
            return Err(param("covariance row has the wrong length"));
        }
        if let Backend::Mc { xi, chol, rng, signal, .. } = &mut self.backend {
            let mut row = vec![0.0; k + 1];
            for j in 0..k {
                let s: f64 = (0..j).map(|i| row[i] * chol[j][i]).sum();
                row[j] = if chol[j][j] > 0.0 { (cov[j] - s) / chol[j][j] } else { 0.0 };
            }
            let p = cov[k] - (0..k).map(|i| row[i] * row[i]).sum::<f64>();
            if p < -PSD_TOL * cov[k].abs().max(1.0) {
                return Err(Error::Factorization { pivot: p, index: k });
            }
            row[k] = p.max(0.0).sqrt();
            chol.push(row);
            xi.push((0..signal.len()).map(|_| rng.sample(StandardNormal)).collect());
        }
        self.fields.push(Field { mu, cov: cov.to_vec() });
        Ok(k)
    }

    fn cov(&self, a: usize, b: usize) -> f64 {
        let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
        self.fields[hi].cov[lo]
    }

    /// Adds U = d(F_field); returns (variable index, E{d'(F_field)}).
    pub fn add_var(&mut self, field: usize, denoiser: Denoiser) -> Result<(usize, f64)> {
        if field >= self.fields.len() {
            return Err(param("unknown field"));
        }
        let mu = self.fields[field].mu;
        let deriv = match &mut self.backend {
            Backend::Mc { signal, xi, chol, values, .. } => {
                let row = &chol[field];
                let n = signal.len();
                let mut vals = vec![0.0; n];
                let mut dsum = 0.0;
                for (s, out) in vals.iter_mut().enumerate() {
                    let mut z = 0.0;
                    for (j, c) in row.iter().enumerate() {
                        if *c != 0.0 {
                            z += c * xi[j][s];
                        }
                    }
                    let f = mu * signal[s] + z;
                    *out = denoiser.eval(f);
                    dsum += denoiser.deriv(f);
                }
                values.push(vals);
                dsum / n as f64
            }
            Backend::Quad { .. } => {
                let var = self.fields[field].cov[field];
                self.integrate(&[var], |sig, z| denoiser.deriv(mu * sig + z[0]))?
            }
        };
        self.vars.push(Var { field, denoiser });
        Ok((self.vars.len() - 1, deriv))
    }

    /// E{U_v S}.
    pub fn e_signal(&self, v: usize) -> Result<f64> {
        match &self.backend {
            Backend::Mc { signal, values, .. } => {
                Ok(values[v].iter().zip(signal).map(|(a, b)| a * b).sum::<f64>() / signal.len() as f64)
            }
            Backend::Quad { .. } => {
                let var = &self.vars[v];
                let f = &self.fields[var.field];
                let d = var.denoiser;
                self.integrate(&[f.cov[var.field]], |sig, z| sig * d.eval(f.mu * sig + z[0]))
            }
        }
    }

    /// E{U_a U_b}.
    pub fn e_pair(&self, a: usize, b: usize) -> Result<f64> {
        match &self.backend {
            Backend::Mc { values, signal, .. } => {
                Ok(values[a].iter().zip(&values[b]).map(|(p, q)| p * q).sum::<f64>() / signal.len() as f64)
            }
            Backend::Quad { .. } => {
                let (va, vb) = (&self.vars[a], &self.vars[b]);
                let (fa, fb) = (va.field, vb.field);
                let (ma, mb) = (self.fields[fa].mu, self.fields[fb].mu);
                let (da, db) = (va.denoiser, vb.denoiser);
                if fa == fb {
                    return self.integrate(&[self.cov(fa, fa)], |s, z| {
                        let f = ma * s + z[0];
                        da.eval(f) * db.eval(f)
                    });
                }
                let c = [self.cov(fa, fa), self.cov(fa, fb), self.cov(fb, fb)];
                self.integrate2(c, |s, z| da.eval(ma * s + z[0]) * db.eval(mb * s + z[1]))
            }
        }
    }

    /// E over the signal and one centered Gaussian of variance `var[0]`.
    fn integrate(&self, var: &[f64], f: impl Fn(f64, &[f64]) -> f64) -> Result<f64> {
        let Backend::Quad { rule } = &self.backend else { unreachable!() };
        let (nodes, weights) = (&rule.0, &rule.1);
        let sd = var[0].max(0.0).sqrt();
        let inner = |s: f64| -> f64 { nodes.iter().zip(weights).map(|(x, w)| w * f(s, &[sd * x])).sum() };
        Ok(self.over_signal(inner))
    }

    /// E over the signal and a centered Gaussian pair with covariance (c00, c01, c11).
    fn integrate2(&self, c: [f64; 3], f: impl Fn(f64, &[f64]) -> f64) -> Result<f64> {
        let Backend::Quad { rule } = &self.backend else { unreachable!() };
        let (nodes, weights) = (&rule.0, &rule.1);
        let l = clipped_cholesky(&[vec![c[0], c[1]], vec![c[1], c[2]]])?;
        let inner = |s: f64| -> f64 {
            let mut acc = 0.0;
            for (x1, w1) in nodes.iter().zip(weights) {
                let z0 = l[0][0] * x1;
                let base = l[1][0] * x1;
                for (x2, w2) in nodes.iter().zip(weights) {
                    acc += w1 * w2 * f(s, &[z0, base + l[1][1] * x2]);
                }
            }
            acc
        };
        Ok(self.over_signal(inner))
    }

    fn over_signal(&self, inner: impl Fn(f64) -> f64) -> f64 {
        let Backend::Quad { rule } = &self.backend else { unreachable!() };
        match self.prior {
            Prior::Rademacher => 0.5 * (inner(1.0) + inner(-1.0)),
            Prior::GaussianSphere => rule.0.iter().zip(&rule.1).map(|(x, w)| w * inner(*x)).sum(),
        }
    }
}

/// E{tanh(mu S + sigma Z) S}-type one-dimensional check used by tests:
/// E{g(mu S + sqrt(var) Z) S} under the given prior, by quadrature.
pub fn expect_signal_1d(prior: Prior, mu: f64, var: f64, points: usize, g: impl Fn(f64) -> f64) -> Result<f64> {
    let rule = gauss_hermite(points)?;
    let sd = var.max(0.0).sqrt();
    let inner = |s: f64| -> f64 { rule.0.iter().zip(&rule.1).map(|(x, w)| w * g(mu * s + sd * x)).sum::<f64>() * s };
    Ok(match prior {
        Prior::Rademacher => 0.5 * (inner(1.0) + inner(-1.0)),
        Prior::GaussianSphere => rule.0.iter().zip(&rule.1).map(|(x, w)| w * inner(*x)).sum(),
    })
}
