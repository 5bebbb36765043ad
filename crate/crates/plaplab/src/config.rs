//! Experiment configuration: a flat, line-oriented `key = value` format
//! with `#` comments and dotted keys for nested concerns.
//!
//! Parsing and emission round-trip: `emit(parse(text)) == normalize(text)`,
//! with every float rendered at 17 significant digits, so the canonical
//! emission doubles as the reproducibility key. Run directories are named
//! by the SHA-256 of that emission.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use sha2::{Digest, Sha256};

use crate::eigen::Normalization;
use crate::grid::Grid;
use crate::solver::{Scheme, SolverConfig};
use crate::source::SourceSpec;
use crate::util::fmt17;
use crate::{Error, Result};

/// Condition parameters, fixed by hand or searched after the eigensolve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CondMode {
    Auto,
    Manual { alpha: f64, beta: f64, gamma: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialSpec {
    /// amplitude * first eigenfunction under the given normalization.
    Eigenfunction { amplitude: f64, normalization: Normalization },
    /// amplitude * sin(pi x / L) (times the y factor in 2d).
    Sine { amplitude: f64 },
    /// Field read from a grid CSV; must match the configured grid.
    File { path: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dim: usize,
    pub lengths: [f64; 2],
    pub n: usize,
    pub p: f64,
    pub source: SourceSpec,
    pub cond: CondMode,
    pub initial: InitialSpec,
    pub solver: SolverConfig,
    pub output_dir: Option<String>,
}

/// Splits flat `key = value` text. Blank lines and lines whose first
/// non-space character is `#` are skipped; duplicate keys are rejected.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Config(format!("line {}: expected `key = value`, got {raw:?}", lineno + 1)));
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if key.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", lineno + 1)));
        }
        if map.insert(key.clone(), value).is_some() {
            return Err(Error::Config(format!("duplicate key {key:?}")));
        }
    }
    Ok(map)
}

struct MapReader {
    map: BTreeMap<String, String>,
    used: std::collections::BTreeSet<String>,
}

impl MapReader {
    fn take(&mut self, key: &str) -> Option<String> {
        let v = self.map.get(key).cloned();
        if v.is_some() {
            self.used.insert(key.to_string());
        }
        v
    }

    fn required(&mut self, key: &str) -> Result<String> {
        self.take(key).ok_or_else(|| Error::Config(format!("missing required key {key:?}")))
    }

    fn f64_of(&mut self, key: &str) -> Result<Option<f64>> {
        match self.take(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<f64>()
                .map(Some)
                .map_err(|_| Error::Config(format!("key {key:?}: {v:?} is not a number"))),
        }
    }

    fn f64_required(&mut self, key: &str) -> Result<f64> {
        self.f64_of(key)?.ok_or_else(|| Error::Config(format!("missing required key {key:?}")))
    }

    fn usize_required(&mut self, key: &str) -> Result<usize> {
        let v = self.required(key)?;
        v.parse::<usize>().map_err(|_| Error::Config(format!("key {key:?}: {v:?} is not a nonnegative integer")))
    }

    fn leftovers(&self) -> Vec<String> {
        self.map.keys().filter(|k| !self.used.contains(*k)).cloned().collect()
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Self::from_map(parse_kv(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn from_map(map: BTreeMap<String, String>) -> Result<Self> {
        let mut r = MapReader { map, used: Default::default() };

        let dim = r.usize_required("grid.dim")?;
        let lengths = match dim {
            1 => {
                let l = r.f64_required("grid.l")?;
                if r.take("grid.lx").is_some() || r.take("grid.ly").is_some() {
                    return Err(Error::Config("grid.lx/grid.ly apply only to grid.dim = 2".into()));
                }
                [l, 0.0]
            }
            2 => {
                if r.take("grid.l").is_some() {
                    return Err(Error::Config("use grid.lx and grid.ly for grid.dim = 2".into()));
                }
                [r.f64_required("grid.lx")?, r.f64_required("grid.ly")?]
            }
            other => return Err(Error::Config(format!("grid.dim must be 1 or 2, got {other}"))),
        };
        let n = r.usize_required("grid.n")?;
        let p = r.f64_required("p")?;
        let source = SourceSpec::parse(&r.required("f")?)?;

        let cond = match r.take("cond.mode").as_deref().unwrap_or("auto") {
            "auto" => {
                for k in ["cond.alpha", "cond.beta", "cond.gamma"] {
                    if r.take(k).is_some() {
                        return Err(Error::Config(format!("{k} requires cond.mode = manual")));
                    }
                }
                CondMode::Auto
            }
            "manual" => CondMode::Manual {
                alpha: r.f64_required("cond.alpha")?,
                beta: r.f64_of("cond.beta")?.unwrap_or(0.0),
                gamma: r.f64_of("cond.gamma")?.unwrap_or(0.0),
            },
            other => return Err(Error::Config(format!("cond.mode must be auto or manual, got {other:?}"))),
        };

        let initial = match r.required("initial.kind")?.as_str() {
            "eigenfunction" => InitialSpec::Eigenfunction {
                amplitude: r.f64_of("initial.amplitude")?.unwrap_or(1.0),
                normalization: match r.take("initial.normalization").as_deref().unwrap_or("pmass") {
                    "pmass" => Normalization::PMass,
                    "supone" => Normalization::SupOne,
                    other => {
                        return Err(Error::Config(format!(
                            "initial.normalization must be pmass or supone, got {other:?}"
                        )))
                    }
                },
            },
            "sine" => InitialSpec::Sine { amplitude: r.f64_of("initial.amplitude")?.unwrap_or(1.0) },
            "file" => {
                for k in ["initial.amplitude", "initial.normalization"] {
                    if r.take(k).is_some() {
                        return Err(Error::Config(format!("{k} does not apply to initial.kind = file")));
                    }
                }
                InitialSpec::File { path: r.required("initial.file")? }
            }
            other => {
                return Err(Error::Config(format!(
                    "initial.kind must be eigenfunction, sine, or file, got {other:?}"
                )))
            }
        };
        if !matches!(initial, InitialSpec::File { .. }) && r.take("initial.file").is_some() {
            return Err(Error::Config("initial.file requires initial.kind = file".into()));
        }

        let defaults = SolverConfig::default();
        let solver = SolverConfig {
            scheme: match r.take("solver.scheme") {
                Some(s) => s.parse::<Scheme>()?,
                None => defaults.scheme,
            },
            dt_init: r.f64_of("solver.dt_init")?.unwrap_or(defaults.dt_init),
            dt_min: r.f64_of("solver.dt_min")?.unwrap_or(defaults.dt_min),
            dt_max: r.f64_of("solver.dt_max")?.unwrap_or(defaults.dt_max),
            safety: r.f64_of("solver.safety")?.unwrap_or(defaults.safety),
            u_blow: r.f64_of("solver.u_blow")?.unwrap_or(defaults.u_blow),
            t_max: r.f64_required("solver.t_max")?,
            decay_threshold: r.f64_of("solver.decay_threshold")?.unwrap_or(defaults.decay_threshold),
            sample_interval: r.f64_of("solver.sample_interval")?.unwrap_or(defaults.sample_interval),
        };
        solver.validate().map_err(|e| Error::Config(format!("solver: {e}")))?;

        let output_dir = r.take("output.dir");

        let leftovers = r.leftovers();
        if !leftovers.is_empty() {
            return Err(Error::Config(format!("unknown keys: {}", leftovers.join(", "))));
        }

        let cfg = ExperimentConfig { dim, lengths, n, p, source, cond, initial, solver, output_dir };
        cfg.build_grid()?; // surface grid errors at parse time
        if !(cfg.p >= 2.0 && cfg.p.is_finite()) {
            return Err(Error::Config(format!("p must be finite and >= 2, got {}", cfg.p)));
        }
        Ok(cfg)
    }

    pub fn build_grid(&self) -> Result<Arc<Grid>> {
        match self.dim {
            1 => Grid::line(self.lengths[0], self.n),
            _ => Grid::rectangle(self.lengths[0], self.lengths[1], self.n),
        }
    }

    /// Canonical key map: every effective setting materialized, floats at
    /// 17 significant digits.
    pub fn to_map(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("grid.dim", self.dim.to_string());
        if self.dim == 1 {
            put("grid.l", fmt17(self.lengths[0]));
        } else {
            put("grid.lx", fmt17(self.lengths[0]));
            put("grid.ly", fmt17(self.lengths[1]));
        }
        put("grid.n", self.n.to_string());
        put("p", fmt17(self.p));
        put("f", self.source.to_string());
        match self.cond {
            CondMode::Auto => put("cond.mode", "auto".into()),
            CondMode::Manual { alpha, beta, gamma } => {
                put("cond.mode", "manual".into());
                put("cond.alpha", fmt17(alpha));
                put("cond.beta", fmt17(beta));
                put("cond.gamma", fmt17(gamma));
            }
        }
        match &self.initial {
            InitialSpec::Eigenfunction { amplitude, normalization } => {
                put("initial.kind", "eigenfunction".into());
                put("initial.amplitude", fmt17(*amplitude));
                put(
                    "initial.normalization",
                    match normalization {
                        Normalization::PMass => "pmass".into(),
                        Normalization::SupOne => "supone".into(),
                    },
                );
            }
            InitialSpec::Sine { amplitude } => {
                put("initial.kind", "sine".into());
                put("initial.amplitude", fmt17(*amplitude));
            }
            InitialSpec::File { path } => {
                put("initial.kind", "file".into());
                put("initial.file", path.clone());
            }
        }
        put("solver.scheme", self.solver.scheme.to_string());
        put("solver.dt_init", fmt17(self.solver.dt_init));
        put("solver.dt_min", fmt17(self.solver.dt_min));
        put("solver.dt_max", fmt17(self.solver.dt_max));
        put("solver.safety", fmt17(self.solver.safety));
        put("solver.u_blow", fmt17(self.solver.u_blow));
        put("solver.t_max", fmt17(self.solver.t_max));
        put("solver.decay_threshold", fmt17(self.solver.decay_threshold));
        put("solver.sample_interval", fmt17(self.solver.sample_interval));
        if let Some(d) = &self.output_dir {
            put("output.dir", d.clone());
        }
        m
    }

    pub fn emit(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.to_map() {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }

    /// First 16 hex digits of the SHA-256 of the canonical emission.
    pub fn hash_hex(&self) -> String {
        let digest = Sha256::digest(self.emit().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn run_dir_name(&self) -> String {
        format!("run-{}", self.hash_hex())
    }

    /// Copy of the config with one key overridden, via the same text path
    /// as parsing, so sweeps accept exactly the keys configs accept.
    pub fn with_override(&self, key: &str, value: &str) -> Result<Self> {
        let mut map = self.to_map();
        if !map.contains_key(key) {
            return Err(Error::Config(format!("axis key {key:?} is not set in the base config")));
        }
        map.insert(key.to_string(), value.trim().to_string());
        Self::from_map(map)
    }
}
