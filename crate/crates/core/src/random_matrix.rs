//! Signals, Haar rotations and spiked data matrices.

use crate::error::{param, Error, Result};
use crate::free_probability::{Kind, SpectrumModel};
use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

/// Environment variable overriding [`DEFAULT_DENSE_CAP`].
pub const DENSE_CAP_ENV: &str = "SPIKAMP_DENSE_CAP";
pub const DEFAULT_DENSE_CAP: usize = 10_000;

/// Largest matrix dimension that may be materialized densely.
pub fn dense_cap() -> usize {
    std::env::var(DENSE_CAP_ENV).ok().and_then(|v| v.trim().parse().ok()).unwrap_or(DEFAULT_DENSE_CAP)
}

fn check_cap(dim: usize) -> Result<()> {
    let cap = dense_cap();
    if dim > cap {
        return Err(Error::Allocation { requested: dim, cap });
    }
    Ok(())
}

/// Seed for trial `index` of an experiment (SplitMix64 finalizer over both inputs).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Prior {
    /// i.i.d. uniform on {-1, +1}.
    Rademacher,
    /// Uniform on the sphere of radius sqrt(dimension).
    GaussianSphere,
}

impl Prior {
    pub fn name(&self) -> &'static str {
        match self {
            Prior::Rademacher => "rademacher",
            Prior::GaussianSphere => "gaussian",
        }
    }

    pub fn parse(s: &str) -> Option<Prior> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rademacher" => Some(Prior::Rademacher),
            "gaussian" | "gaussian_sphere" | "sphere" => Some(Prior::GaussianSphere),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SignalPrior {
    pub family: Prior,
    pub dimension: usize,
}

/// Signal with squared norm exactly `dimension` (up to rounding for the sphere).
pub fn sample_signal<R: Rng + ?Sized>(prior: SignalPrior, rng: &mut R) -> Result<Vec<f64>> {
    let n = prior.dimension;
    if n == 0 {
        return Err(param("signal dimension must be at least 1"));
    }
    Ok(match prior.family {
        Prior::Rademacher => (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect(),
        Prior::GaussianSphere => loop {
            let g: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                let s = (n as f64).sqrt() / norm;
                break g.into_iter().map(|x| x * s).collect();
            }
        },
    })
}

fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Mat<f64> {
    // Column-major fill keeps the draw order independent of faer internals.
    let mut m = Mat::<f64>::zeros(rows, cols);
    for j in 0..cols {
        for v in m.col_as_slice_mut(j) {
            *v = rng.sample(StandardNormal);
        }
    }
    m
}

/// Q factor of a Gaussian matrix with columns flipped so that diag(R) > 0.
fn haar_columns<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Mat<f64> {
    let g = gaussian_matrix(rows, cols, rng);
    let qr = g.qr();
    let mut q = if rows == cols { qr.compute_Q() } else { qr.compute_thin_Q() };
    let r = qr.thin_R();
    for j in 0..cols {
        if r[(j, j)] < 0.0 {
            for v in q.col_as_slice_mut(j) {
                *v = -*v;
            }
        }
    }
    q
}

/// Haar-distributed n x n orthogonal matrix.
pub fn sample_haar_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Mat<f64>> {
    if n == 0 {
        return Err(param("orthogonal matrix dimension must be at least 1"));
    }
    check_cap(n)?;
    Ok(haar_columns(n, n, rng))
}

/// A generated data matrix with its hidden ground truth.
#[derive(Clone, Debug)]
pub struct ModelInstance {
    pub kind: Kind,
    /// n x n (square) or m x n (rectangular).
    pub x: Mat<f64>,
    /// Length n (square) or m (rectangular).
    pub u_star: Vec<f64>,
    /// Length n, rectangular only.
    pub v_star: Option<Vec<f64>>,
    pub alpha: f64,
    /// Realized noise eigenvalues (square) or singular values (rectangular).
    /// `None` for the direct Wishart construction, whose spectrum is not sampled.
    pub noise_spectrum: Option<Vec<f64>>,
    pub seed: u64,
}

impl ModelInstance {
    pub fn rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn cols(&self) -> usize {
        self.x.ncols()
    }

    pub fn gamma(&self) -> Option<f64> {
        self.kind.gamma()
    }
}

/// X = (alpha/n) u* u*^T + O^T Lambda O with a fresh Haar O.
pub fn build_square_instance(
    n: usize,
    alpha: f64,
    spectrum: &SpectrumModel,
    prior: Prior,
    seed: u64,
) -> Result<ModelInstance> {
    if n < 2 {
        return Err(param("square instances need n >= 2"));
    }
    if !spectrum.kind.is_square() {
        return Err(param("square instance needs a square spectrum"));
    }
    check_alpha(alpha)?;
    check_cap(n)?;
    let mut rng = rng_from_seed(seed);
    let u = sample_signal(SignalPrior { family: prior, dimension: n }, &mut rng)?;
    let lambda = spectrum.sample(n, &mut rng);
    let o = haar_columns(n, n, &mut rng);
    // (Lambda O)[i, j] = lambda_i O[i, j]
    let mut lo = o.clone();
    for j in 0..n {
        for (i, v) in lo.col_as_slice_mut(j).iter_mut().enumerate() {
            *v *= lambda[i];
        }
    }
    let w = o.transpose() * &lo;
    let scale = alpha / n as f64;
    let x = Mat::from_fn(n, n, |i, j| 0.5 * (w[(i, j)] + w[(j, i)]) + scale * u[i] * u[j]);
    Ok(ModelInstance { kind: Kind::Square, x, u_star: u, v_star: None, alpha, noise_spectrum: Some(lambda), seed })
}

/// X = (alpha/n) u* u*^T + A A^T / n with A an n x p standard Gaussian, p = round(c n).
pub fn build_wishart_instance(n: usize, c: f64, alpha: f64, prior: Prior, seed: u64) -> Result<ModelInstance> {
    if n < 2 {
        return Err(param("square instances need n >= 2"));
    }
    if !(c > 0.0) {
        return Err(param(format!("Wishart ratio must be positive, got {c}")));
    }
    check_alpha(alpha)?;
    let p = ((c * n as f64).round() as usize).max(1);
    check_cap(n.max(p))?;
    let mut rng = rng_from_seed(seed);
    let u = sample_signal(SignalPrior { family: prior, dimension: n }, &mut rng)?;
    let a = gaussian_matrix(n, p, &mut rng);
    let w = &a * a.transpose();
    let inv = 1.0 / n as f64;
    let scale = alpha / n as f64;
    let x = Mat::from_fn(n, n, |i, j| 0.5 * inv * (w[(i, j)] + w[(j, i)]) + scale * u[i] * u[j]);
    Ok(ModelInstance { kind: Kind::Square, x, u_star: u, v_star: None, alpha, noise_spectrum: None, seed })
}

/// X = (alpha/m) u* v*^T + O^T Lambda Q, O Haar m x m, Lambda Q the first m rows of
/// a Haar n x n matrix scaled by the singular values.
pub fn build_rect_instance(
    m: usize,
    n: usize,
    alpha: f64,
    spectrum: &SpectrumModel,
    prior_u: Prior,
    prior_v: Prior,
    seed: u64,
) -> Result<ModelInstance> {
    if m < 2 || m > n {
        return Err(param(format!("rectangular instances need 2 <= m <= n, got m = {m}, n = {n}")));
    }
    let gamma = m as f64 / n as f64;
    if spectrum.kind.is_square() {
        return Err(param("rectangular instance needs a rectangular spectrum"));
    }
    check_alpha(alpha)?;
    check_cap(n)?;
    let mut rng = rng_from_seed(seed);
    let u = sample_signal(SignalPrior { family: prior_u, dimension: m }, &mut rng)?;
    let v = sample_signal(SignalPrior { family: prior_v, dimension: n }, &mut rng)?;
    let lambda = spectrum.sample(m, &mut rng);
    let o = haar_columns(m, m, &mut rng);
    // The first m rows of a Haar n x n matrix: transpose of n x m Haar columns.
    let qt = haar_columns(n, m, &mut rng);
    let mut lq = Mat::<f64>::zeros(m, n);
    for j in 0..n {
        for i in 0..m {
            lq[(i, j)] = lambda[i] * qt[(j, i)];
        }
    }
    let w = o.transpose() * &lq;
    let scale = alpha / m as f64;
    let x = Mat::from_fn(m, n, |i, j| w[(i, j)] + scale * u[i] * v[j]);
    Ok(ModelInstance {
        kind: Kind::Rectangular { gamma },
        x,
        u_star: u,
        v_star: Some(v),
        alpha,
        noise_spectrum: Some(lambda),
        seed,
    })
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(param(format!("alpha must be finite and nonnegative, got {alpha}")));
    }
    Ok(())
}

/// Text dump: one header line, then labelled vectors, then X row by row.
///
/// ```text
/// # spikamp-instance kind=square rows=3 cols=3 alpha=5 gamma=1 seed=7
/// u_star 1 -1 1
/// spectrum 0 0 0
/// x 0.1 0.2 0.3
/// x ...
/// ```
pub fn dump_instance(inst: &ModelInstance, path: &Path) -> Result<()> {
    let mut out = String::new();
    let kind = if inst.kind.is_square() { "square" } else { "rectangular" };
    let _ = writeln!(
        out,
        "# spikamp-instance kind={kind} rows={} cols={} alpha={} gamma={} seed={}",
        inst.rows(),
        inst.cols(),
        inst.alpha,
        inst.kind.gamma().unwrap_or(1.0),
        inst.seed
    );
    let line = |out: &mut String, tag: &str, v: &mut dyn Iterator<Item = f64>| {
        out.push_str(tag);
        for x in v {
            let _ = write!(out, " {x}");
        }
        out.push('\n');
    };
    line(&mut out, "u_star", &mut inst.u_star.iter().copied());
    if let Some(v) = &inst.v_star {
        line(&mut out, "v_star", &mut v.iter().copied());
    }
    if let Some(s) = &inst.noise_spectrum {
        line(&mut out, "spectrum", &mut s.iter().copied());
    }
    for i in 0..inst.rows() {
        line(&mut out, "x", &mut (0..inst.cols()).map(|j| inst.x[(i, j)]));
    }
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(out.as_bytes())?;
    f.flush()?;
    Ok(())
}

pub fn load_instance(path: &Path) -> Result<ModelInstance> {
    let f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut lines = f.lines().enumerate();
    let bad = |line: usize, msg: &str| Error::Schema(format!("line {}: {msg}", line + 1));
    let (_, header) = lines.next().ok_or_else(|| bad(0, "empty instance file"))?;
    let header = header?;
    let rest = header.strip_prefix("# spikamp-instance").ok_or_else(|| bad(0, "missing instance header"))?;
    let mut kind = None;
    let (mut rows, mut cols, mut alpha, mut gamma, mut seed) = (0usize, 0usize, 0.0, 1.0, 0u64);
    for kv in rest.split_whitespace() {
        let (k, v) = kv.split_once('=').ok_or_else(|| bad(0, "malformed header field"))?;
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(0, "bad header number"));
        match k {
            "kind" => kind = Some(v.to_string()),
            "rows" => rows = v.parse().map_err(|_| bad(0, "bad rows"))?,
            "cols" => cols = v.parse().map_err(|_| bad(0, "bad cols"))?,
            "alpha" => alpha = num(v)?,
            "gamma" => gamma = num(v)?,
            "seed" => seed = v.parse().map_err(|_| bad(0, "bad seed"))?,
            _ => return Err(bad(0, "unknown header field")),
        }
    }
    let kind = match kind.as_deref() {
        Some("square") => Kind::Square,
        Some("rectangular") => Kind::Rectangular { gamma },
        _ => return Err(bad(0, "unknown kind")),
    };
    let mut u_star = None;
    let mut v_star = None;
    let mut spectrum = None;
    let mut x = Mat::<f64>::zeros(rows, cols);
    let mut row = 0;
    for (ln, l) in lines {
        let l = l?;
        let mut it = l.split_whitespace();
        let Some(tag) = it.next() else { continue };
        let vals: Vec<f64> =
            it.map(|s| s.parse::<f64>()).collect::<std::result::Result<_, _>>().map_err(|_| bad(ln, "bad number"))?;
        match tag {
            "u_star" => u_star = Some(vals),
            "v_star" => v_star = Some(vals),
            "spectrum" => spectrum = Some(vals),
            "x" => {
                if row >= rows || vals.len() != cols {
                    return Err(bad(ln, "matrix row has the wrong shape"));
                }
                for (j, v) in vals.into_iter().enumerate() {
                    x[(row, j)] = v;
                }
                row += 1;
            }
            _ => return Err(bad(ln, "unknown record")),
        }
    }
    if row != rows {
        return Err(Error::Schema(format!("expected {rows} matrix rows, found {row}")));
    }
    let u_star = u_star.ok_or_else(|| Error::Schema("missing u_star".into()))?;
    Ok(ModelInstance { kind, x, u_star, v_star, alpha, noise_spectrum: spectrum, seed })
}
