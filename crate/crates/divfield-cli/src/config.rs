//! Plain-text `key = value` experiment configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use divfield::domain::DomainSpec;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Pipeline stages in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Rasterize,
    Whitney,
    Paths,
    Weight,
    Solve,
    Sobolev,
    Poincare,
}

impl Stage {
    pub const ALL: [Stage; 7] =
        [Stage::Rasterize, Stage::Whitney, Stage::Paths, Stage::Weight, Stage::Solve, Stage::Sobolev, Stage::Poincare];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Rasterize => "rasterize",
            Stage::Whitney => "whitney",
            Stage::Paths => "paths",
            Stage::Weight => "weight",
            Stage::Solve => "solve",
            Stage::Sobolev => "sobolev",
            Stage::Poincare => "poincare",
        }
    }
}

impl FromStr for Stage {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| CliError::Config(format!("unknown stage {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub domain: DomainSpec,
    /// Strictly increasing cells per unit.
    pub resolutions: Vec<usize>,
    pub y_stride: usize,
    pub x_stride: usize,
    /// Exponents of the Sobolev solve, each in `(1, ∞)`.
    pub p: Vec<f64>,
    /// Poincaré exponents, each at least 1.
    pub q: Vec<f64>,
    /// `default` or `poincare`.
    pub battery: String,
    pub out: PathBuf,
    /// Worker threads; 0 lets rayon decide.
    pub threads: usize,
    pub seed: u64,
    /// Traces sampled by the path checks.
    pub path_samples: usize,
    /// Cells sampled by the kernel bound (0 skips it).
    pub kernel_samples: usize,
    /// Largest atomic mean correction before the Sobolev stage aborts.
    pub atomic_mean_tolerance: f64,
    /// Last stage to run.
    pub stage: Stage,
    /// Geodesic Riemann-sum probe over the resolutions (needs three).
    pub integrability: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            domain: DomainSpec::disk(1.0).expect("valid disk"),
            resolutions: vec![32],
            y_stride: 1,
            x_stride: 1,
            p: vec![2.0],
            q: vec![1.0, 1.5, 2.0, 4.0],
            battery: "poincare".into(),
            out: PathBuf::from("divfield-out"),
            threads: 0,
            seed: 7,
            path_samples: 2000,
            kernel_samples: 100,
            atomic_mean_tolerance: f64::INFINITY,
            stage: Stage::Poincare,
            integrability: false,
        }
    }
}

fn list<T: FromStr>(key: &str, v: &str) -> CliResult<Vec<T>> {
    v.split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|_| CliError::Config(format!("{key}: cannot parse {s:?}"))))
        .collect()
}

fn one<T: FromStr>(key: &str, v: &str) -> CliResult<T> {
    v.trim().parse::<T>().map_err(|_| CliError::Config(format!("{key}: cannot parse {v:?}")))
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut c = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", n + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "domain" => c.domain = value.parse().map_err(|e| CliError::Config(format!("domain: {e}")))?,
                "resolutions" | "resolution" => c.resolutions = list(key, value)?,
                "y_stride" => c.y_stride = one(key, value)?,
                "x_stride" => c.x_stride = one(key, value)?,
                "p" => c.p = list(key, value)?,
                "q" => c.q = list(key, value)?,
                "battery" => c.battery = value.to_string(),
                "out" => c.out = PathBuf::from(value),
                "threads" => c.threads = one(key, value)?,
                "seed" => c.seed = one(key, value)?,
                "path_samples" => c.path_samples = one(key, value)?,
                "kernel_samples" => c.kernel_samples = one(key, value)?,
                "atomic_mean_tolerance" => c.atomic_mean_tolerance = one(key, value)?,
                "stage" => c.stage = one(key, value)?,
                "integrability" => c.integrability = one(key, value)?,
                _ => return Err(CliError::Config(format!("unknown key {key:?}"))),
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.resolutions.is_empty() {
            return Err(CliError::Config("resolutions: need at least one".into()));
        }
        if self.resolutions.windows(2).any(|w| w[1] <= w[0]) || self.resolutions[0] == 0 {
            return Err(CliError::Config(format!("resolutions must be strictly increasing, got {:?}", self.resolutions)));
        }
        if self.y_stride == 0 || self.x_stride == 0 {
            return Err(CliError::Config("strides must be positive".into()));
        }
        if let Some(p) = self.p.iter().find(|&&p| !(p > 1.0 && p.is_finite())) {
            return Err(CliError::Config(format!("p = {p} outside (1, inf)")));
        }
        if let Some(q) = self.q.iter().find(|&&q| !(q >= 1.0 && q.is_finite())) {
            return Err(CliError::Config(format!("q = {q} outside [1, inf)")));
        }
        if !matches!(self.battery.as_str(), "default" | "poincare") {
            return Err(CliError::Config(format!("battery {:?} is not default or poincare", self.battery)));
        }
        if self.integrability && self.resolutions.len() < 3 {
            return Err(CliError::Config("integrability needs three resolutions".into()));
        }
        Ok(())
    }

    /// Canonical text: every key, fixed order, output-independent keys only.
    pub fn canonical(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let mut s = String::new();
        let _ = writeln!(s, "domain = {}", self.domain);
        let res: Vec<String> = self.resolutions.iter().map(|r| r.to_string()).collect();
        let _ = writeln!(s, "resolutions = {}", res.join(","));
        let _ = writeln!(s, "y_stride = {}", self.y_stride);
        let _ = writeln!(s, "x_stride = {}", self.x_stride);
        let _ = writeln!(s, "p = {}", join(&self.p));
        let _ = writeln!(s, "q = {}", join(&self.q));
        let _ = writeln!(s, "battery = {}", self.battery);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "path_samples = {}", self.path_samples);
        let _ = writeln!(s, "kernel_samples = {}", self.kernel_samples);
        let _ = writeln!(s, "atomic_mean_tolerance = {}", self.atomic_mean_tolerance);
        let _ = writeln!(s, "stage = {}", self.stage.name());
        let _ = writeln!(s, "integrability = {}", self.integrability);
        s
    }

    /// SHA-256 of [`canonical`](Self::canonical), hex encoded.
    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_round_trips() {
        let c = ExperimentConfig::parse("domain = disk(1)\nresolutions = 16, 32 # two\np = 2,1.5\n").unwrap();
        assert_eq!(c.resolutions, vec![16, 32]);
        assert_eq!(c.p, vec![2.0, 1.5]);
        let again = ExperimentConfig::parse(&c.canonical()).unwrap();
        assert_eq!(again.canonical(), c.canonical());
        assert_eq!(again.hash(), c.hash());
    }

    #[test]
    fn rejects_decreasing_resolutions() {
        assert!(matches!(ExperimentConfig::parse("resolutions = 128, 64"), Err(CliError::Config(_))));
    }

    #[test]
    fn rejects_unknown_keys_and_bad_exponents() {
        assert!(ExperimentConfig::parse("colour = red").is_err());
        assert!(ExperimentConfig::parse("p = 1").is_err());
        assert!(ExperimentConfig::parse("q = 0.5").is_err());
    }
}
