use std::collections::BTreeMap;

use anyhow::{anyhow, bail, Context, Result};
use secrecy_core::classify::DEFAULT_BUDGET;
use secrecy_core::dequantize::SimCaps;
use secrecy_core::entangle::{EofOptions, RelEntOptions};
use secrecy_core::keyrate::{ChainOptions, DEFAULT_CHAIN_TOL};
use serde::Serialize;

pub const CAPS_ENV: &str = "SECRECY_FORGE_CAPS";

/// Tolerance names accepted as `--tol.<name>`, with defaults.
pub const TOLERANCES: [(&str, f64); 5] = [
    ("chain", DEFAULT_CHAIN_TOL),
    ("classify", 1e-9),
    ("eof", 1e-8),
    ("equivalence", 1e-9),
    ("exact", 1e-9),
];

/// Rewrites `--tol.name=v` and `--tol.name v` into `--tol name=v`.
pub fn expand_tol_flags(args: impl IntoIterator<Item = String>) -> Vec<String> {
    let mut out = Vec::new();
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        match a.strip_prefix("--tol.") {
            Some(rest) if rest.contains('=') => {
                out.push("--tol".into());
                out.push(rest.into());
            }
            Some(rest) => {
                out.push("--tol".into());
                match it.next() {
                    Some(v) => out.push(format!("{rest}={v}")),
                    None => out.push(rest.into()),
                }
            }
            None => out.push(a),
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct Caps {
    pub dense: usize,
    pub branches: usize,
    pub budget: usize,
}

impl Default for Caps {
    fn default() -> Self {
        let s = SimCaps::default();
        Self {
            dense: s.dense,
            branches: s.branches,
            budget: DEFAULT_BUDGET,
        }
    }
}

impl Caps {
    /// `dense=N,branches=N,budget=N`, any subset.
    pub fn parse(spec: &str) -> Result<Self> {
        let mut caps = Caps::default();
        for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| anyhow!("{CAPS_ENV}: expected name=value, got {part:?}"))?;
            let v: usize = v
                .trim()
                .parse()
                .with_context(|| format!("{CAPS_ENV}: bad value for {k}"))?;
            if v == 0 {
                bail!("{CAPS_ENV}: {k} must be positive");
            }
            match k.trim() {
                "dense" => caps.dense = v,
                "branches" => caps.branches = v,
                "budget" => caps.budget = v,
                other => bail!("{CAPS_ENV}: unknown cap {other:?}"),
            }
        }
        Ok(caps)
    }

    pub fn from_env() -> Result<Self> {
        match std::env::var(CAPS_ENV) {
            Ok(s) => Self::parse(&s),
            Err(std::env::VarError::NotPresent) => Ok(Self::default()),
            Err(e) => Err(anyhow!("{CAPS_ENV}: {e}")),
        }
    }

    pub fn sim(&self) -> SimCaps {
        SimCaps {
            dense: self.dense,
            branches: self.branches,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: u64,
    pub tolerances: BTreeMap<String, f64>,
    pub caps: Caps,
}

impl RunConfig {
    pub fn new(seed: u64, tol_args: &[String], caps: Caps) -> Result<Self> {
        let mut tolerances: BTreeMap<String, f64> =
            TOLERANCES.iter().map(|&(k, v)| (k.to_string(), v)).collect();
        for t in tol_args {
            let (k, v) = t
                .split_once('=')
                .ok_or_else(|| anyhow!("--tol.{t}: missing value"))?;
            let slot = tolerances.get_mut(k).ok_or_else(|| {
                let known: Vec<_> = TOLERANCES.iter().map(|t| t.0).collect();
                anyhow!("unknown tolerance {k:?}; known: {}", known.join(", "))
            })?;
            let v: f64 = v.parse().with_context(|| format!("--tol.{k}: not a number"))?;
            if !(v.is_finite() && v > 0.0) {
                bail!("--tol.{k} must be positive and finite");
            }
            *slot = v;
        }
        Ok(Self {
            seed,
            tolerances,
            caps,
        })
    }

    pub fn tol(&self, name: &str) -> f64 {
        self.tolerances[name]
    }

    pub fn chain(&self) -> ChainOptions {
        ChainOptions {
            chain_tol: self.tol("chain"),
            tol: self.tol("exact"),
            classify_tol: self.tol("classify"),
            budget: self.caps.budget,
            eof: EofOptions {
                tol: self.tol("eof"),
                ..EofOptions::default()
            },
            relent: RelEntOptions::default(),
        }
        .with_seed(self.seed)
    }
}
