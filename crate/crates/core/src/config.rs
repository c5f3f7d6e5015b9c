//! Run configuration, read from TOML. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::channel::GlobalParams;
use crate::definetti::GMode;
use crate::error::{Error, Result};
use crate::numerics::LogEps;
use crate::optimizer::{Interval, SearchSpace};
use crate::result::Protocol;
use crate::scs::SourceImperfection;

/// A count written either as an integer or in float notation (`1e12`).
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Count {
    Int(u64),
    Float(f64),
}

impl Count {
    pub fn get(self, key: &str) -> Result<u64> {
        match self {
            Count::Int(0) => Err(Error::config(key, "must be >= 1")),
            Count::Int(n) => Ok(n),
            Count::Float(v) => parse_count_f64(key, v),
        }
    }
}

fn parse_count_f64(key: &str, v: f64) -> Result<u64> {
    if v >= 1.0 && v.fract() == 0.0 && v <= u64::MAX as f64 {
        Ok(v as u64)
    } else {
        Err(Error::config(
            key,
            format!("`{v}` is not a positive integer"),
        ))
    }
}

/// Parses `1e12` or `1000000`.
pub fn parse_count(key: &str, s: &str) -> Result<u64> {
    let s = s.trim();
    if let Ok(n) = s.parse::<u64>() {
        return Count::Int(n).get(key);
    }
    let v: f64 = s
        .parse()
        .map_err(|_| Error::config(key, format!("`{s}` is not a number")))?;
    parse_count_f64(key, v)
}

pub fn parse_counts(key: &str, s: &str) -> Result<Vec<u64>> {
    s.split(',').map(|part| parse_count(key, part)).collect()
}

/// `start:stop:step` (inclusive) or a comma-separated list.
pub fn parse_distances(key: &str, s: &str) -> Result<Vec<f64>> {
    let num = |t: &str| -> Result<f64> {
        t.trim()
            .parse::<f64>()
            .map_err(|_| Error::config(key, format!("`{t}` is not a number")))
    };
    let parts: Vec<&str> = s.split(':').collect();
    let out = match parts.as_slice() {
        [a, b, c] => {
            let (start, stop, step) = (num(a)?, num(b)?, num(c)?);
            if !(step > 0.0) || stop < start {
                return Err(Error::config(key, "need start <= stop and step > 0"));
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize;
            (0..=n).map(|i| start + i as f64 * step).collect()
        }
        [_] => {
            if s.trim().is_empty() {
                Vec::new()
            } else {
                s.split(',').map(num).collect::<Result<Vec<_>>>()?
            }
        }
        _ => return Err(Error::config(key, "expected start:stop:step or a list")),
    };
    for &d in &out {
        if !(d >= 0.0 && d.is_finite()) {
            return Err(Error::config(key, format!("distance {d} must be >= 0")));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Distances {
    Range(String),
    List(Vec<f64>),
}

impl Distances {
    pub fn resolve(&self, key: &str) -> Result<Vec<f64>> {
        match self {
            Distances::Range(s) => parse_distances(key, s),
            Distances::List(v) => parse_distances(
                key,
                &v.iter()
                    .map(|d| d.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
            ),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceConfig {
    pub p_d: Option<f64>,
    pub e_d: Option<f64>,
    pub eta_d: Option<f64>,
    pub f: Option<f64>,
    pub alpha_f: Option<f64>,
    pub eps_tot: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(rename = "N")]
    pub n: Option<Vec<Count>>,
    #[serde(rename = "L")]
    pub l: Option<Distances>,
    pub asymptotic: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    #[serde(rename = "N")]
    pub n: Option<Count>,
    #[serde(rename = "L")]
    pub l: Option<f64>,
    pub mu: Option<f64>,
    pub nu: Option<f64>,
    pub p: Option<f64>,
    pub p0: Option<f64>,
    pub c0: Option<f64>,
    pub asymptotic: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    pub mu: Option<[f64; 2]>,
    pub nu: Option<[f64; 2]>,
    pub p: Option<[f64; 2]>,
    pub p0: Option<[f64; 2]>,
    pub c0: Option<[f64; 2]>,
    pub tune_split: Option<[f64; 2]>,
    pub grid: Option<usize>,
    pub refine_evals: Option<usize>,
}

impl SearchConfig {
    pub fn apply(&self, base: &SearchSpace) -> SearchSpace {
        let iv = |v: Option<[f64; 2]>, d: Interval| v.map_or(d, |[a, b]| Interval::new(a, b));
        SearchSpace {
            mu: iv(self.mu, base.mu),
            nu: iv(self.nu, base.nu),
            p: iv(self.p, base.p),
            p0: iv(self.p0, base.p0),
            c0: self.c0.map(|[a, b]| Interval::new(a, b)).or(base.c0),
            tune_split: self
                .tune_split
                .map(|[a, b]| Interval::new(a, b))
                .or(base.tune_split),
            grid: self.grid.unwrap_or(base.grid),
            refine_evals: self.refine_evals.unwrap_or(base.refine_evals),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub a_v0: Option<f64>,
    pub b_v0: Option<f64>,
    pub a0: Option<f64>,
    pub b0: Option<f64>,
}

impl SourceConfig {
    pub fn resolve(&self) -> Result<SourceImperfection> {
        let s = SourceImperfection {
            a_v0: self.a_v0.unwrap_or(1.0),
            b_v0: self.b_v0.unwrap_or(1.0),
            a0: self.a0,
            b0: self.b0,
        };
        for (key, v) in [("source.a_v0", s.a_v0), ("source.b_v0", s.b_v0)] {
            if !(0.5..=1.0).contains(&v) {
                return Err(Error::config(key, "must lie in [0.5, 1]"));
            }
        }
        for (key, v) in [("source.a0", s.a0), ("source.b0", s.b0)] {
            if let Some(v) = v {
                if !(0.5..=1.0).contains(&v) {
                    return Err(Error::config(key, "must lie in [0.5, 1]"));
                }
            }
        }
        Ok(s)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub rounds: Option<Count>,
    pub seed: Option<u64>,
    pub seeds: Option<u32>,
    pub shards: Option<u32>,
    #[serde(rename = "L")]
    pub l: Option<f64>,
    pub mu: Option<f64>,
    pub nu: Option<f64>,
    pub p: Option<f64>,
    pub p0: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
}

/// Everything a run can be configured with. Every field is optional; the
/// command line fills in or overrides values.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub protocol: Option<Protocol>,
    pub preset: Option<String>,
    pub g_mode: Option<GMode>,
    #[serde(default)]
    pub device: DeviceConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default)]
    pub search: SearchConfig,
    #[serde(default)]
    pub source: SourceConfig,
    #[serde(default)]
    pub mc: McConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let msg = e.message().to_string();
            let key = unknown_field(&msg).unwrap_or_else(|| "config".to_string());
            Error::config(key, msg)
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
        Self::from_toml(&text)
    }

    /// Device parameters: the preset, then any `[device]` overrides. `N`
    /// and `L` are placeholders to be set per evaluation.
    pub fn device(&self) -> Result<GlobalParams> {
        let mut g = match self.preset.as_deref() {
            None | Some("table1") => GlobalParams::table1(1, 0.0),
            Some(other) => {
                return Err(Error::config(
                    "preset",
                    format!("unknown preset `{other}` (known: table1)"),
                ))
            }
        };
        let d = &self.device;
        g.p_d = d.p_d.unwrap_or(g.p_d);
        g.e_d = d.e_d.unwrap_or(g.e_d);
        g.eta_d = d.eta_d.unwrap_or(g.eta_d);
        g.f = d.f.unwrap_or(g.f);
        g.alpha_f = d.alpha_f.unwrap_or(g.alpha_f);
        if let Some(e) = d.eps_tot {
            g.eps_tot = LogEps::from_eps(e)
                .map_err(|_| Error::config("device.eps_tot", "must lie in (0, 1]"))?;
        }
        g.validate().map_err(|e| match e {
            Error::Domain { name, .. } => Error::config(format!("device.{name}"), e.to_string()),
            other => other,
        })?;
        Ok(g)
    }
}

/// Pulls the offending key out of serde's "unknown field `x`" message.
fn unknown_field(msg: &str) -> Option<String> {
    let rest = msg.strip_prefix("unknown field `")?;
    Some(rest[..rest.find('`')?].to_string())
}
