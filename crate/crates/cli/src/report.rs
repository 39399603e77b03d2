use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::{Caps, RunConfig};

const SIG_DIGITS: usize = 12;

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub role: &'static str,
    pub sha256: String,
}

/// A file read from disk together with its digest.
pub struct Input {
    pub text: String,
    pub digest: InputDigest,
}

pub fn read_input(role: &'static str, path: &Path) -> Result<Input> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let sha256 = hex::encode(Sha256::digest(&bytes));
    let text = String::from_utf8(bytes).with_context(|| format!("{} is not UTF-8", path.display()))?;
    Ok(Input {
        text,
        digest: InputDigest { role, sha256 },
    })
}

#[derive(Serialize)]
struct Envelope<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    seed: u64,
    tolerances: &'a std::collections::BTreeMap<String, f64>,
    caps: &'a Caps,
    inputs: &'a [InputDigest],
    pass: bool,
    result: Value,
}

pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { 0.0 } else { x };
    }
    format!("{:.*e}", SIG_DIGITS - 1, x).parse().unwrap_or(x)
}

/// Rounds every float in place; integers are left alone.
pub fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(r) = n.as_f64().map(round_sig).and_then(serde_json::Number::from_f64) {
                *n = r;
            }
        }
        Value::Array(a) => a.iter_mut().for_each(round_value),
        Value::Object(m) => m.values_mut().for_each(round_value),
        _ => {}
    }
}

pub fn render(
    command: &str,
    cfg: &RunConfig,
    inputs: &[InputDigest],
    pass: bool,
    result: Value,
) -> Result<String> {
    let env = Envelope {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command,
        seed: cfg.seed,
        tolerances: &cfg.tolerances,
        caps: &cfg.caps,
        inputs,
        pass,
        result,
    };
    let mut v = serde_json::to_value(&env)?;
    round_value(&mut v);
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_keeps_twelve_digits() {
        assert_eq!(round_sig(0.1 + 0.2), 0.3);
        assert_eq!(round_sig(1.0 / 3.0), 0.333333333333);
        assert_eq!(round_sig(-2.0 / 3.0 * 1e-7), -6.66666666667e-8);
        assert_eq!(round_sig(-0.0).to_bits(), 0.0f64.to_bits());
    }

    #[test]
    fn rounding_walks_nested_values() {
        let mut v = serde_json::json!({"a": [1.0000000000001, {"b": 7}], "c": 2u64});
        round_value(&mut v);
        assert_eq!(v, serde_json::json!({"a": [1.0, {"b": 7}], "c": 2u64}));
    }
}
