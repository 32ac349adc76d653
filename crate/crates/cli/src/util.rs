//! Small shared helpers: sigma-mode syntax, seed and worker resolution.

use anyhow::{bail, Result};
use rand::Rng;
use sbs_core::SigmaMode;

/// `jeffreys` or `known:VALUE`.
pub fn parse_sigma(text: &str) -> Result<SigmaMode> {
    let t = text.trim();
    if t.eq_ignore_ascii_case("jeffreys") {
        return Ok(SigmaMode::Jeffreys);
    }
    if let Some(v) = t.strip_prefix("known:") {
        let s2: f64 = v
            .parse()
            .map_err(|_| anyhow::anyhow!("cannot parse sigma value in '{text}'"))?;
        if s2.is_nan() || s2 <= 0.0 {
            bail!("sigma^2 must be positive, got {s2}");
        }
        return Ok(SigmaMode::Known(s2));
    }
    bail!("sigma must be 'jeffreys' or 'known:VALUE', got '{text}'")
}

pub fn sigma_label(mode: SigmaMode) -> String {
    match mode {
        SigmaMode::Jeffreys => "jeffreys".to_string(),
        SigmaMode::Known(s2) => format!("known:{s2}"),
    }
}

/// Uses the given seed, or draws one from system entropy and announces it on
/// stderr so the run can be reproduced.
pub fn resolve_seed(seed: Option<u64>) -> u64 {
    match seed {
        Some(s) => s,
        None => {
            let s: u64 = rand::rng().random();
            eprintln!("seed: {s} (drawn from system entropy; pass --seed {s} to reproduce)");
            s
        }
    }
}

/// Worker count: flag, then the SBS_WORKERS environment variable, then all
/// available cores (0).
pub fn resolve_workers(flag: Option<usize>) -> Result<usize> {
    if let Some(w) = flag {
        return Ok(w);
    }
    match std::env::var("SBS_WORKERS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(w) => Ok(w),
            Err(_) => bail!("SBS_WORKERS must be a nonnegative integer, got '{v}'"),
        },
        Err(_) => Ok(0),
    }
}
