//! Flat `key = value` experiment configuration.
//!
//! ```text
//! # comments run to end of line
//! ensemble = sign_perturbation
//! center   = 0.2, 0.0; 0.0, -0.1     # rows split on ';', entries on ',' or space
//! direction = 0, 0.1; 0.1, 0
//! n_grid   = 256, 512, 1024
//! trials   = 200
//! delta    = 0.1
//! seed     = 7
//! ```
//!
//! Recognized keys: `ensemble`, `d`, `radius`, `low`, `high`, `a`, `b`,
//! `center`, `direction`, `n_grid`, `trials`, `delta`, `depth` (alias `K`),
//! `seed`, `threads`. Values resolve with precedence
//! command-line flags > `MATPROD_SEED` > file > defaults.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::ensembles::{EnsembleKind, EnsembleSpec};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::montecarlo::ExperimentConfig;

pub const SEED_ENV: &str = "MATPROD_SEED";

const KEYS: &[&str] = &[
    "ensemble",
    "d",
    "radius",
    "low",
    "high",
    "a",
    "b",
    "center",
    "direction",
    "n_grid",
    "trials",
    "delta",
    "depth",
    "seed",
    "threads",
];

#[derive(Debug, Clone, PartialEq, Eq)]
struct Entry {
    line: usize,
    value: String,
}

/// Parsed but untyped configuration.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RawConfig {
    entries: BTreeMap<String, Entry>,
}

impl RawConfig {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.value.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn typed<T>(
        &self,
        key: &str,
        parse: impl Fn(&str) -> std::result::Result<T, String>,
    ) -> Result<Option<T>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(e) => parse(&e.value).map(Some).map_err(|msg| Error::Parse {
                line: e.line,
                msg: format!("{key}: {msg}"),
            }),
        }
    }
}

pub fn parse_config(text: &str) -> Result<RawConfig> {
    let mut entries = BTreeMap::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw_line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| Error::Parse {
            line,
            msg: "expected `key = value`".into(),
        })?;
        let key = match key.trim() {
            "K" => "depth".to_string(),
            k => k.to_ascii_lowercase(),
        };
        if !KEYS.contains(&key.as_str()) {
            return Err(Error::Parse {
                line,
                msg: format!("unknown key `{key}`"),
            });
        }
        let value = value.trim().to_string();
        if value.is_empty() {
            return Err(Error::Parse {
                line,
                msg: format!("empty value for `{key}`"),
            });
        }
        if entries.insert(key.clone(), Entry { line, value }).is_some() {
            return Err(Error::Parse {
                line,
                msg: format!("duplicate key `{key}`"),
            });
        }
    }
    Ok(RawConfig { entries })
}

fn parse_usize(s: &str) -> std::result::Result<usize, String> {
    s.parse::<usize>().map_err(|e| e.to_string())
}

fn parse_u64(s: &str) -> std::result::Result<u64, String> {
    s.parse::<u64>().map_err(|e| e.to_string())
}

fn parse_f64(s: &str) -> std::result::Result<f64, String> {
    let v = s.parse::<f64>().map_err(|e| e.to_string())?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

fn parse_list(s: &str) -> std::result::Result<Vec<usize>, String> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(parse_usize)
        .collect()
}

/// Parses `r11, r12; r21, r22` into a matrix. Entries may be separated by
/// commas, whitespace, or both.
pub fn parse_matrix_literal(s: &str) -> Result<Matrix> {
    let fail = |msg: String| Error::Parse { line: 0, msg };
    let rows: Vec<Vec<f64>> = s
        .split(';')
        .map(|row| {
            row.split(|c: char| c == ',' || c.is_whitespace())
                .filter(|t| !t.is_empty())
                .map(|t| parse_f64(t).map_err(fail))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    if rows.iter().any(Vec::is_empty) {
        return Err(fail("empty matrix row".into()));
    }
    Matrix::from_rows(&rows)
}

/// Renders a matrix in the literal syntax accepted by [`parse_matrix_literal`].
pub fn format_matrix_literal(m: &Matrix) -> String {
    m.to_rows()
        .iter()
        .map(|r| {
            r.iter()
                .map(|v| format!("{v:?}"))
                .collect::<Vec<_>>()
                .join(", ")
        })
        .collect::<Vec<_>>()
        .join("; ")
}

fn matrix_value(raw: &RawConfig, key: &str) -> Result<Option<Matrix>> {
    match raw.entries.get(key) {
        None => Ok(None),
        Some(e) => parse_matrix_literal(&e.value)
            .map(Some)
            .map_err(|err| Error::Parse {
                line: e.line,
                msg: format!("{key}: {err}"),
            }),
    }
}

/// Values given on the command line, each overriding the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub d: Option<usize>,
    pub n_grid: Option<Vec<usize>>,
    pub trials: Option<usize>,
    pub delta: Option<f64>,
    pub depth: Option<usize>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

/// A fully resolved experiment configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub ensemble: EnsembleKind,
    pub n_grid: Vec<usize>,
    pub trials: usize,
    pub delta: f64,
    pub depth: Option<usize>,
    pub seed: u64,
    /// Worker cap; excluded from the digest since it cannot change results.
    #[serde(skip)]
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            ensemble: EnsembleKind::RankOneSphere { d: 4, radius: 1.0 },
            n_grid: vec![64, 128, 256, 512, 1024],
            trials: 100,
            delta: 0.1,
            depth: None,
            seed: 0,
            threads: None,
        }
    }
}

impl RunConfig {
    /// Merges defaults, an optional file, the environment seed, and flags.
    pub fn resolve(
        file: Option<&RawConfig>,
        env_seed: Option<&str>,
        flags: &Overrides,
    ) -> Result<Self> {
        let empty = RawConfig::default();
        let raw = file.unwrap_or(&empty);
        let mut cfg = Self::default();

        let d_file = raw.typed("d", parse_usize)?;
        let d = flags.d.or(d_file);
        cfg.ensemble = resolve_ensemble(raw, d)?;

        if let Some(v) = raw.typed("n_grid", parse_list)? {
            cfg.n_grid = v;
        }
        if let Some(v) = raw.typed("trials", parse_usize)? {
            cfg.trials = v;
        }
        if let Some(v) = raw.typed("delta", parse_f64)? {
            cfg.delta = v;
        }
        cfg.depth = raw.typed("depth", parse_usize)?;
        if let Some(v) = raw.typed("seed", parse_u64)? {
            cfg.seed = v;
        }
        cfg.threads = raw.typed("threads", parse_usize)?;

        if let Some(s) = env_seed {
            cfg.seed = parse_u64(s.trim())
                .map_err(|e| Error::InvalidConfig(format!("{SEED_ENV}: {e}")))?;
        }

        if let Some(v) = &flags.n_grid {
            cfg.n_grid = v.clone();
        }
        if let Some(v) = flags.trials {
            cfg.trials = v;
        }
        if let Some(v) = flags.delta {
            cfg.delta = v;
        }
        if let Some(v) = flags.depth {
            cfg.depth = Some(v);
        }
        if let Some(v) = flags.seed {
            cfg.seed = v;
        }
        if let Some(v) = flags.threads {
            cfg.threads = Some(v);
        }
        cfg.experiment()?;
        Ok(cfg)
    }

    pub fn ensemble_spec(&self) -> Result<EnsembleSpec> {
        EnsembleSpec::new(self.ensemble.clone(), self.seed)
    }

    pub fn experiment(&self) -> Result<ExperimentConfig> {
        let cfg = ExperimentConfig {
            ensemble: self.ensemble_spec()?,
            n_grid: self.n_grid.clone(),
            trials: self.trials,
            delta: self.delta,
            depth: self.depth,
            master_seed: self.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// SHA-256 of the canonical JSON form; independent of file layout.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&canonical))
    }

    /// Canonical `key = value` rendering that parses back to `self`.
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "ensemble = {}", self.ensemble.name());
        match &self.ensemble {
            EnsembleKind::TwoPoint { a, b } => {
                let _ = writeln!(out, "a = {}", format_matrix_literal(a));
                let _ = writeln!(out, "b = {}", format_matrix_literal(b));
            }
            EnsembleKind::SignPerturbation { center, direction } => {
                let _ = writeln!(out, "center = {}", format_matrix_literal(center));
                let _ = writeln!(out, "direction = {}", format_matrix_literal(direction));
            }
            EnsembleKind::RankOneSphere { d, radius } => {
                let _ = writeln!(out, "d = {d}");
                let _ = writeln!(out, "radius = {radius:?}");
            }
            EnsembleKind::ScalarUniform { low, high } => {
                let _ = writeln!(out, "low = {low:?}");
                let _ = writeln!(out, "high = {high:?}");
            }
        }
        let grid: Vec<String> = self.n_grid.iter().map(usize::to_string).collect();
        let _ = writeln!(out, "n_grid = {}", grid.join(", "));
        let _ = writeln!(out, "trials = {}", self.trials);
        let _ = writeln!(out, "delta = {:?}", self.delta);
        if let Some(k) = self.depth {
            let _ = writeln!(out, "depth = {k}");
        }
        let _ = writeln!(out, "seed = {}", self.seed);
        if let Some(t) = self.threads {
            let _ = writeln!(out, "threads = {t}");
        }
        out
    }
}

fn resolve_ensemble(raw: &RawConfig, d: Option<usize>) -> Result<EnsembleKind> {
    let kind = raw.get("ensemble").unwrap_or("rank_one_sphere");
    let line = raw.entries.get("ensemble").map_or(0, |e| e.line);
    let require = |key: &str| Error::Parse {
        line,
        msg: format!("ensemble `{kind}` requires `{key}`"),
    };
    let check_dim = |m: &Matrix| -> Result<()> {
        match d {
            Some(d) if d != m.rows() => Err(Error::InvalidConfig(format!(
                "d = {d} conflicts with {}x{} matrices",
                m.rows(),
                m.cols()
            ))),
            _ => Ok(()),
        }
    };
    let ensemble = match kind {
        "two_point" => {
            let a = matrix_value(raw, "a")?.ok_or_else(|| require("a"))?;
            let b = matrix_value(raw, "b")?.ok_or_else(|| require("b"))?;
            check_dim(&a)?;
            EnsembleKind::TwoPoint { a, b }
        }
        "sign_perturbation" => {
            let center = matrix_value(raw, "center")?.ok_or_else(|| require("center"))?;
            let direction = matrix_value(raw, "direction")?.ok_or_else(|| require("direction"))?;
            check_dim(&center)?;
            EnsembleKind::SignPerturbation { center, direction }
        }
        "rank_one_sphere" => EnsembleKind::RankOneSphere {
            d: d.unwrap_or(4),
            radius: raw.typed("radius", parse_f64)?.unwrap_or(1.0),
        },
        "scalar_uniform" => {
            if let Some(d) = d.filter(|&d| d != 1) {
                return Err(Error::InvalidConfig(format!(
                    "scalar_uniform has d = 1, got d = {d}"
                )));
            }
            EnsembleKind::ScalarUniform {
                low: raw.typed("low", parse_f64)?.unwrap_or(-1.0),
                high: raw.typed("high", parse_f64)?.unwrap_or(1.0),
            }
        }
        other => {
            return Err(Error::Parse {
                line,
                msg: format!("unknown ensemble `{other}`"),
            })
        }
    };
    EnsembleSpec::new(ensemble.clone(), 0)?;
    Ok(ensemble)
}
