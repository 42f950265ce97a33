//! Flat `key = value` configuration with `[section]` headers.
//!
//! ```text
//! [run]
//! name = fig1a
//! trials = 20
//! seed = 1
//!
//! [model]
//! kind = square
//! n = 2000
//!
//! [noise]
//! spectrum = marcenko_pastur
//! c = 2
//!
//! [signal]
//! alpha_relative = 2
//! prior = rademacher
//!
//! [amp]
//! iterations = 10
//! denoiser = tanh
//! ```
//!
//! `#` starts a comment. Every key belongs to exactly one section; unknown
//! sections, unknown keys, duplicates and malformed values are errors that
//! carry the offending line number.

use crate::denoisers::DenoiserRule;
use crate::error::{Error, Result};
use crate::free_probability::SpectrumModel;
use crate::random_matrix::Prior;
use crate::state_evolution::{ExpectationEngine, DEFAULT_MC_SAMPLES, DEFAULT_QUADRATURE_POINTS};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Square,
    Rectangular,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SpectrumSpec {
    MarcenkoPastur { c: f64 },
    UniformSymmetric { halfwidth: f64 },
    UniformSquaredSingular,
    /// A A^T / n with A Gaussian n x (c n): Marcenko-Pastur noise without a Haar rotation.
    Wishart { c: f64 },
}

/// How a configured alpha is read.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AlphaSpec {
    Absolute(f64),
    /// Multiple of the reference threshold (alpha_tilde units for rectangular models).
    Relative(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepSpec {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
    pub relative: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AlphaSource {
    Estimated,
    Oracle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CumulantSource {
    /// Cumulants of the limiting noise law.
    Limit,
    /// Cumulants of the empirical bulk spectrum of each instance.
    Empirical,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub trials: usize,
    pub seed: u64,
    /// Worker threads; 0 lets the pool decide.
    pub jobs: usize,
    pub out: PathBuf,
    /// Write the first trial's instance as text.
    pub dump_instance: bool,
    pub model: ModelKind,
    /// Columns (square: dimension).
    pub n: usize,
    /// Rows of a rectangular model.
    pub m: usize,
    pub spectrum: SpectrumSpec,
    pub alpha: Option<AlphaSpec>,
    pub sweep: Option<SweepSpec>,
    pub prior_u: Prior,
    pub prior_v: Prior,
    pub iterations: usize,
    pub denoiser_u: DenoiserRule,
    pub denoiser_v: DenoiserRule,
    pub alpha_source: AlphaSource,
    pub cumulant_source: CumulantSource,
    pub cumulant_order: usize,
    /// Stop AMP once the overlap with the PCA vector moves by less than this.
    pub stop_tol: Option<f64>,
    pub engine: ExpectationEngine,
    pub phase1_iterations: usize,
    pub artificial_iterations: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: "experiment".into(),
            trials: 1,
            seed: 0,
            jobs: 0,
            out: PathBuf::from("out"),
            dump_instance: false,
            model: ModelKind::Square,
            n: 2000,
            m: 1000,
            spectrum: SpectrumSpec::MarcenkoPastur { c: 2.0 },
            alpha: None,
            sweep: None,
            prior_u: Prior::Rademacher,
            prior_v: Prior::Rademacher,
            iterations: 10,
            denoiser_u: DenoiserRule::PosteriorMean(Prior::Rademacher),
            denoiser_v: DenoiserRule::Identity,
            alpha_source: AlphaSource::Estimated,
            cumulant_source: CumulantSource::Limit,
            cumulant_order: 64,
            stop_tol: None,
            engine: ExpectationEngine::default(),
            phase1_iterations: 200,
            artificial_iterations: 50,
        }
    }
}

fn cfg_err(line: usize, message: impl Into<String>) -> Error {
    Error::Config { line, message: message.into() }
}

struct Entry {
    value: String,
    line: usize,
}

const KEYS: &[(&str, &[&str])] = &[
    ("run", &["name", "trials", "seed", "jobs", "out", "dump_instance"]),
    ("model", &["kind", "n", "m"]),
    ("noise", &["spectrum", "c", "halfwidth"]),
    ("signal", &["alpha", "alpha_relative", "prior", "prior_v"]),
    ("sweep", &["min", "max", "steps", "relative"]),
    ("amp", &["iterations", "denoiser", "denoiser_v", "alpha_source", "cumulant_source", "cumulant_order", "stop_tol"]),
    ("state_evolution", &["engine", "samples", "points", "seed"]),
    ("verify", &["phase1_iterations", "artificial_iterations"]),
];

/// Parsed `section.key -> value` map with line numbers.
struct Raw {
    entries: BTreeMap<String, Entry>,
    last_line: usize,
}

impl Raw {
    fn parse(text: &str) -> Result<Raw> {
        let mut entries = BTreeMap::new();
        let mut section: Option<String> = None;
        let mut last_line = 0;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            last_line = line;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| cfg_err(line, "unterminated section header"))?.trim();
                if !KEYS.iter().any(|(s, _)| *s == name) {
                    return Err(cfg_err(line, format!("unknown section [{name}]")));
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| cfg_err(line, format!("expected `key = value`, got `{content}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let sec = section.as_deref().ok_or_else(|| cfg_err(line, format!("key `{key}` appears before any [section]")))?;
            let known = KEYS.iter().find(|(s, _)| *s == sec).map(|(_, k)| *k).unwrap_or(&[]);
            if !known.contains(&key) {
                return Err(cfg_err(line, format!("unknown key `{key}` in [{sec}]")));
            }
            if value.is_empty() {
                return Err(cfg_err(line, format!("key `{key}` has no value")));
            }
            let full = format!("{sec}.{key}");
            if let Some(prev) = entries.get(&full) {
                let prev: &Entry = prev;
                return Err(cfg_err(line, format!("duplicate key `{key}` (first set on line {})", prev.line)));
            }
            entries.insert(full, Entry { value: value.to_string(), line });
        }
        Ok(Raw { entries, last_line })
    }

    fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.get(key)
    }

    fn parse_as<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse::<T>()
                .map(Some)
                .map_err(|_| cfg_err(e.line, format!("cannot parse `{}` for `{key}`", e.value))),
        }
    }

    fn line(&self, key: &str) -> usize {
        self.get(key).map(|e| e.line).unwrap_or(self.last_line)
    }

    fn bool(&self, key: &str) -> Result<Option<bool>> {
        match self.get(key) {
            None => Ok(None),
            Some(e) => match e.value.to_ascii_lowercase().as_str() {
                "true" | "yes" | "1" => Ok(Some(true)),
                "false" | "no" | "0" => Ok(Some(false)),
                _ => Err(cfg_err(e.line, format!("expected true/false for `{key}`, got `{}`", e.value))),
            },
        }
    }
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let raw = Raw::parse(text)?;
        let mut c = ExperimentConfig::default();
        if let Some(e) = raw.get("run.name") {
            c.name = e.value.clone();
        }
        if let Some(v) = raw.parse_as("run.trials")? {
            c.trials = v;
        }
        if let Some(v) = raw.parse_as("run.seed")? {
            c.seed = v;
        }
        if let Some(v) = raw.parse_as("run.jobs")? {
            c.jobs = v;
        }
        if let Some(e) = raw.get("run.out") {
            c.out = PathBuf::from(&e.value);
        }
        if let Some(v) = raw.bool("run.dump_instance")? {
            c.dump_instance = v;
        }
        if let Some(e) = raw.get("model.kind") {
            c.model = match e.value.as_str() {
                "square" => ModelKind::Square,
                "rectangular" | "rect" => ModelKind::Rectangular,
                other => return Err(cfg_err(e.line, format!("unknown model kind `{other}`"))),
            };
        }
        if let Some(v) = raw.parse_as("model.n")? {
            c.n = v;
        }
        if let Some(v) = raw.parse_as("model.m")? {
            c.m = v;
        } else if c.model == ModelKind::Rectangular {
            c.m = c.n / 2;
        }

        let spectrum = raw.get("noise.spectrum").map(|e| (e.value.clone(), e.line));
        let param = |key: &str, default: f64| -> Result<f64> { Ok(raw.parse_as::<f64>(key)?.unwrap_or(default)) };
        c.spectrum = match spectrum {
            None => match c.model {
                ModelKind::Square => SpectrumSpec::MarcenkoPastur { c: param("noise.c", 2.0)? },
                ModelKind::Rectangular => SpectrumSpec::UniformSquaredSingular,
            },
            Some((name, line)) => match name.as_str() {
                "marcenko_pastur" | "mp" => SpectrumSpec::MarcenkoPastur { c: param("noise.c", 2.0)? },
                "wishart" => SpectrumSpec::Wishart { c: param("noise.c", 2.0)? },
                "uniform_symmetric" | "uniform" => SpectrumSpec::UniformSymmetric { halfwidth: param("noise.halfwidth", 0.5)? },
                "uniform_squared_singular" | "uss" => SpectrumSpec::UniformSquaredSingular,
                other => return Err(cfg_err(line, format!("unknown spectrum `{other}`"))),
            },
        };

        let abs = raw.parse_as::<f64>("signal.alpha")?;
        let rel = raw.parse_as::<f64>("signal.alpha_relative")?;
        c.alpha = match (abs, rel) {
            (Some(_), Some(_)) => return Err(cfg_err(raw.line("signal.alpha_relative"), "set either `alpha` or `alpha_relative`, not both")),
            (Some(a), None) => Some(AlphaSpec::Absolute(a)),
            (None, Some(r)) => Some(AlphaSpec::Relative(r)),
            (None, None) => None,
        };
        for key in ["signal.prior", "signal.prior_v"] {
            if let Some(e) = raw.get(key) {
                let p = Prior::parse(&e.value).ok_or_else(|| cfg_err(e.line, format!("unknown prior `{}`", e.value)))?;
                if key == "signal.prior" {
                    c.prior_u = p;
                    if raw.get("signal.prior_v").is_none() {
                        c.prior_v = p;
                    }
                } else {
                    c.prior_v = p;
                }
            }
        }

        let has_sweep = ["sweep.min", "sweep.max", "sweep.steps", "sweep.relative"].iter().any(|k| raw.get(k).is_some());
        if has_sweep {
            let need = |k: &str| -> Result<f64> {
                raw.parse_as::<f64>(k)?.ok_or_else(|| cfg_err(raw.last_line, format!("[sweep] needs `{}`", &k[6..])))
            };
            let s = SweepSpec {
                min: need("sweep.min")?,
                max: need("sweep.max")?,
                steps: raw.parse_as::<usize>("sweep.steps")?.unwrap_or(8),
                relative: raw.bool("sweep.relative")?.unwrap_or(true),
            };
            if !(s.min < s.max) || s.min <= 0.0 {
                return Err(cfg_err(raw.line("sweep.max"), "sweep needs 0 < min < max"));
            }
            if s.steps < 2 {
                return Err(cfg_err(raw.line("sweep.steps"), "sweep needs at least two steps"));
            }
            c.sweep = Some(s);
        }

        if let Some(v) = raw.parse_as("amp.iterations")? {
            c.iterations = v;
        }
        for key in ["amp.denoiser", "amp.denoiser_v"] {
            if let Some(e) = raw.get(key) {
                let d = DenoiserRule::parse(&e.value).ok_or_else(|| cfg_err(e.line, format!("unknown denoiser `{}`", e.value)))?;
                if key == "amp.denoiser" {
                    c.denoiser_u = d;
                } else {
                    c.denoiser_v = d;
                }
            }
        }
        if let Some(e) = raw.get("amp.alpha_source") {
            c.alpha_source = match e.value.as_str() {
                "estimated" => AlphaSource::Estimated,
                "oracle" => AlphaSource::Oracle,
                other => return Err(cfg_err(e.line, format!("unknown alpha_source `{other}`"))),
            };
        }
        if let Some(e) = raw.get("amp.cumulant_source") {
            c.cumulant_source = match e.value.as_str() {
                "limit" => CumulantSource::Limit,
                "empirical" => CumulantSource::Empirical,
                other => return Err(cfg_err(e.line, format!("unknown cumulant_source `{other}`"))),
            };
        }
        if let Some(v) = raw.parse_as("amp.cumulant_order")? {
            c.cumulant_order = v;
        }
        c.stop_tol = raw.parse_as("amp.stop_tol")?;

        let seed = raw.parse_as::<u64>("state_evolution.seed")?;
        c.engine = match raw.get("state_evolution.engine").map(|e| (e.value.as_str(), e.line)) {
            None | Some(("monte_carlo" | "mc", _)) => {
                let samples = raw.parse_as("state_evolution.samples")?.unwrap_or(DEFAULT_MC_SAMPLES);
                let base = ExpectationEngine::default();
                let default_seed = match base {
                    ExpectationEngine::MonteCarlo { seed, .. } => seed,
                    _ => 0,
                };
                ExpectationEngine::MonteCarlo { samples, seed: seed.unwrap_or(default_seed) }
            }
            Some(("quadrature", _)) => ExpectationEngine::Quadrature {
                points: raw.parse_as("state_evolution.points")?.unwrap_or(DEFAULT_QUADRATURE_POINTS),
            },
            Some((other, line)) => return Err(cfg_err(line, format!("unknown engine `{other}`"))),
        };
        if let Some(v) = raw.parse_as("verify.phase1_iterations")? {
            c.phase1_iterations = v;
        }
        if let Some(v) = raw.parse_as("verify.artificial_iterations")? {
            c.artificial_iterations = v;
        }
        c.validate_with(|k| raw.line(k))?;
        Ok(c)
    }

    /// Checks cross-field invariants; errors point at line 0.
    pub fn validate(&self) -> Result<()> {
        self.validate_with(|_| 0)
    }

    fn validate_with(&self, line: impl Fn(&str) -> usize) -> Result<()> {
        if self.trials == 0 {
            return Err(cfg_err(line("run.trials"), "trials must be at least 1"));
        }
        if self.n < 2 {
            return Err(cfg_err(line("model.n"), "n must be at least 2"));
        }
        if self.model == ModelKind::Rectangular && (self.m < 2 || self.m > self.n) {
            return Err(cfg_err(line("model.m"), "rectangular models need 2 <= m <= n"));
        }
        if self.iterations == 0 || self.iterations > crate::amp_square::MAX_ITERATIONS {
            return Err(cfg_err(line("amp.iterations"), format!("iterations must lie in 1..={}", crate::amp_square::MAX_ITERATIONS)));
        }
        if self.cumulant_order == 0 {
            return Err(cfg_err(line("amp.cumulant_order"), "cumulant_order must be positive"));
        }
        match (self.model, self.spectrum) {
            (ModelKind::Square, SpectrumSpec::UniformSquaredSingular) => {
                return Err(cfg_err(line("noise.spectrum"), "uniform_squared_singular is a rectangular spectrum"))
            }
            (ModelKind::Rectangular, s) if s != SpectrumSpec::UniformSquaredSingular => {
                return Err(cfg_err(line("noise.spectrum"), "rectangular models support uniform_squared_singular noise"))
            }
            _ => {}
        }
        match self.spectrum {
            SpectrumSpec::MarcenkoPastur { c } | SpectrumSpec::Wishart { c } if !(c > 0.0) => {
                return Err(cfg_err(line("noise.c"), "c must be positive"))
            }
            SpectrumSpec::UniformSymmetric { halfwidth } if !(halfwidth > 0.0) => {
                return Err(cfg_err(line("noise.halfwidth"), "halfwidth must be positive"))
            }
            _ => {}
        }
        if let Some(AlphaSpec::Absolute(a) | AlphaSpec::Relative(a)) = self.alpha {
            if !(a >= 0.0 && a.is_finite()) {
                return Err(cfg_err(line("signal.alpha"), "alpha must be finite and nonnegative"));
            }
        }
        Ok(())
    }

    pub fn gamma(&self) -> Option<f64> {
        match self.model {
            ModelKind::Square => None,
            ModelKind::Rectangular => Some(self.m as f64 / self.n as f64),
        }
    }

    /// Limiting noise law.
    pub fn spectrum_model(&self) -> Result<SpectrumModel> {
        match self.spectrum {
            SpectrumSpec::MarcenkoPastur { c } | SpectrumSpec::Wishart { c } => SpectrumModel::marcenko_pastur(c),
            SpectrumSpec::UniformSymmetric { halfwidth } => SpectrumModel::uniform_symmetric(halfwidth),
            SpectrumSpec::UniformSquaredSingular => SpectrumModel::uniform_squared_singular(self.gamma().unwrap_or(1.0)),
        }
    }

    /// Model alpha for a spec: relative values multiply the reference threshold,
    /// which is in alpha_tilde = alpha / sqrt(gamma) units for rectangular models.
    pub fn resolve_alpha(&self, spec: AlphaSpec) -> Result<f64> {
        match spec {
            AlphaSpec::Absolute(a) => Ok(a),
            AlphaSpec::Relative(r) => {
                let th = self.spectrum_model()?.reference_threshold()?;
                Ok(r * th * self.gamma().unwrap_or(1.0).sqrt())
            }
        }
    }

    /// The single configured alpha (errors when none is set).
    pub fn alpha_value(&self) -> Result<f64> {
        let spec = self.alpha.ok_or_else(|| cfg_err(0, "no alpha configured (set `alpha` or `alpha_relative` in [signal])"))?;
        self.resolve_alpha(spec)
    }

    /// The alpha grid of a sweep (evenly spaced, endpoints included).
    pub fn sweep_alphas(&self) -> Result<Vec<f64>> {
        let s = self.sweep.ok_or_else(|| cfg_err(0, "no [sweep] section"))?;
        (0..s.steps)
            .map(|i| {
                let v = s.min + (s.max - s.min) * i as f64 / (s.steps - 1) as f64;
                self.resolve_alpha(if s.relative { AlphaSpec::Relative(v) } else { AlphaSpec::Absolute(v) })
            })
            .collect()
    }
}
