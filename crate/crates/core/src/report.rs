//! Stable output schemas: per-trial CSV, JSON summaries and run manifests.
//!
//! Floating-point values are written with 17 significant digits so they
//! read back bit-for-bit.

use std::io::{self, Write};

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::bounds::{
    expectation_bound, gamma_k, k_condition, lemma_exp_bound, restriction, theorem_bound,
};
use crate::ensembles::{ensemble_bound, ensemble_mean};
use crate::error::Result;
use crate::linalg::spectral_norm;
use crate::montecarlo::{rate_fit, term_exceedance, ExperimentConfig, RateFit, TrialRecord};
use crate::stats::{mean, quantile, wilson_half_width};

/// `v` with 17 significant digits in scientific notation.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Pretty JSON whose numbers use [`fmt17`].
struct Sig17(PrettyFormatter<'static>);

impl Formatter for Sig17 {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(fmt17(value).as_bytes())
    }
    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, f64::from(value))
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Serializes `value` as pretty JSON with 17-digit floats and a trailing
/// newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sig17(PrettyFormatter::new()));
    value.serialize(&mut ser).expect("in-memory serialization");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

pub fn records_header(depth: usize) -> String {
    let mut cols = vec![
        "n".to_string(),
        "trial".into(),
        "err_total".into(),
        "err_mean_part".into(),
        "err_exp_part".into(),
    ];
    cols.extend((1..=depth).map(|k| format!("term_err_{k}")));
    cols.join(",")
}

/// Writes `records.csv`: one header line, then one line per record. Records
/// with fewer than `depth` terms leave the trailing cells empty.
pub fn write_records_csv<W: Write>(
    mut w: W,
    records: &[TrialRecord],
    depth: usize,
) -> io::Result<()> {
    writeln!(w, "{}", records_header(depth))?;
    for r in records {
        write!(
            w,
            "{},{},{},{},{}",
            r.n,
            r.trial_index,
            fmt17(r.err_total),
            fmt17(r.err_mean_part),
            fmt17(r.err_exp_part)
        )?;
        for k in 0..depth {
            match r.term_errs.get(k) {
                Some(&v) => write!(w, ",{}", fmt17(v))?,
                None => write!(w, ",")?,
            }
        }
        writeln!(w)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Quantiles {
    pub mean: f64,
    pub min: f64,
    pub p05: f64,
    pub p50: f64,
    pub p95: f64,
    pub max: f64,
}

impl Quantiles {
    pub fn of(values: &[f64]) -> Option<Self> {
        Some(Self {
            mean: mean(values)?,
            min: quantile(values, 0.0)?,
            p05: quantile(values, 0.05)?,
            p50: quantile(values, 0.5)?,
            p95: quantile(values, 0.95)?,
            max: quantile(values, 1.0)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TermSummary {
    pub k: usize,
    pub k_condition: bool,
    pub gamma: f64,
    /// Fraction of trials with `‖Z_{n,k} - E Z_{n,k}‖ > γ_k`.
    pub exceedance: f64,
    /// The probability allowed by the bound, `δ^k`.
    pub allowed: f64,
    pub wilson_half_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointSummary {
    pub n: usize,
    pub trials: usize,
    pub err_total: Quantiles,
    pub err_mean_part: Quantiles,
    pub err_exp_part: f64,
    /// `σ² e^σ / (2n)` with `σ = ‖X‖`.
    pub lemma_exp_bound: f64,
    pub restriction_ok: bool,
    pub restriction_failure: Option<&'static str>,
    pub theorem_bound: Option<f64>,
    pub theorem_exceedance: Option<f64>,
    /// `2δ`
    pub theorem_allowed: f64,
    pub expectation_bound: Option<f64>,
    pub terms: Vec<TermSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub command: String,
    pub ensemble: crate::ensembles::EnsembleKind,
    #[serde(rename = "L")]
    pub l: f64,
    pub d: usize,
    pub delta: f64,
    pub depth: usize,
    pub trials: usize,
    pub master_seed: u64,
    pub per_n: Vec<PointSummary>,
    pub rate_fit: Option<RateFit>,
}

impl Summary {
    pub fn build(
        command: &str,
        config: &ExperimentConfig,
        records: &[TrialRecord],
    ) -> Result<Self> {
        let l = ensemble_bound(&config.ensemble);
        let d = config.ensemble.dim();
        let delta = config.delta;
        let depth = config.depth();
        let sigma = spectral_norm(&ensemble_mean(&config.ensemble));
        let mut per_n = Vec::with_capacity(config.n_grid.len());
        for &n in &config.n_grid {
            let at_n: Vec<&TrialRecord> = records.iter().filter(|r| r.n == n).collect();
            let total: Vec<f64> = at_n.iter().map(|r| r.err_total).collect();
            let mean_part: Vec<f64> = at_n.iter().map(|r| r.err_mean_part).collect();
            let Some(err_total) = Quantiles::of(&total) else {
                continue;
            };
            let r = restriction(l, n, d, delta)?;
            let tb = theorem_bound(l, n, d, delta).ok();
            let terms = (1..=depth)
                .map(|k| {
                    let gamma = gamma_k(l, n, k, d, delta);
                    let exceedance = term_exceedance(records, n, k, gamma).unwrap_or(0.0);
                    let hits = (exceedance * at_n.len() as f64).round() as usize;
                    TermSummary {
                        k,
                        k_condition: k_condition(k, n, d, delta),
                        gamma,
                        exceedance,
                        allowed: delta.powi(k as i32),
                        wilson_half_width: wilson_half_width(hits, at_n.len()),
                    }
                })
                .collect();
            per_n.push(PointSummary {
                n,
                trials: at_n.len(),
                err_mean_part: Quantiles::of(&mean_part).expect("same length as err_total"),
                err_exp_part: at_n[0].err_exp_part,
                lemma_exp_bound: lemma_exp_bound(sigma, n),
                restriction_ok: r.ok(),
                restriction_failure: r.failure(),
                theorem_bound: tb,
                theorem_exceedance: tb
                    .map(|b| total.iter().filter(|&&e| e > b).count() as f64 / total.len() as f64),
                theorem_allowed: 2.0 * delta,
                expectation_bound: expectation_bound(l, n, d).ok(),
                err_total,
                terms,
            });
        }
        Ok(Self {
            command: command.to_string(),
            ensemble: config.ensemble.kind().clone(),
            l,
            d,
            delta,
            depth,
            trials: config.trials,
            master_seed: config.master_seed,
            per_n,
            rate_fit: rate_fit(records).ok(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_digest: String,
    pub tool_version: String,
    pub timestamp: String,
    pub master_seed: u64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [0.1, 1.0 / 3.0, 6.02214076e23, -2.5e-300, 0.0] {
            let s = fmt17(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits());
            let mantissa = s.split('e').next().unwrap().trim_start_matches('-');
            assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17);
        }
    }

    #[test]
    fn json_floats_and_nulls() {
        #[derive(Serialize)]
        struct T {
            x: f64,
            y: Option<f64>,
            z: f64,
        }
        let s = to_json(&T {
            x: 0.1,
            y: None,
            z: f64::NAN,
        });
        assert!(s.contains("\"x\": 1.0000000000000001e-1"));
        assert!(s.contains("\"y\": null"));
        assert!(s.contains("\"z\": null"));
        let back: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["x"].as_f64(), Some(0.1));
    }

    #[test]
    fn csv_layout() {
        let rec = TrialRecord {
            n: 4,
            trial_index: 1,
            err_total: 0.5,
            err_mean_part: 0.25,
            err_exp_part: 0.125,
            term_errs: vec![1.0],
        };
        let mut out = Vec::new();
        write_records_csv(&mut out, &[rec], 2).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next(),
            Some("n,trial,err_total,err_mean_part,err_exp_part,term_err_1,term_err_2")
        );
        assert_eq!(
            lines.next(),
            Some("4,1,5.0000000000000000e-1,2.5000000000000000e-1,1.2500000000000000e-1,1.0000000000000000e0,")
        );
    }
}
