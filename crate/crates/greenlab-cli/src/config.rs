//! Experiment configuration: TOML file + flag overrides.
//!
//! Precedence, lowest to highest: built-in defaults, then the `--config`
//! file, then the explicit flags `--seed`, `--out`, `--map`. The effective
//! config (after all overrides) is hashed and the hash is stamped into every
//! output file, so two artifacts with the same hash and seed came from the
//! same settings.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

/// Everything a subcommand needs. Serializes losslessly through TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Zoo label (e.g. "power_2") or path to a map JSON file.
    pub map_source: String,
    /// Base seed; per-chain seeds derive as seed XOR chain_index * odd stride.
    pub seed: u64,
    /// Points drawn by `sample`, `exponents` starts, and P^1 dimension runs.
    pub sample_count: usize,
    /// Backward-iteration steps discarded per chain before recording.
    pub burn_in: usize,
    /// Independent backward chains interleaved into one sample.
    pub chains: usize,
    /// Birkhoff steps per orbit in the exponent estimator.
    pub n_steps: usize,
    /// Orbits averaged by the exponent estimator.
    pub n_orbits: usize,
    /// Inclusive depth range [n_min, n_max] for mass curves and decay checks.
    pub n_min: usize,
    pub n_max: usize,
    /// Linearization-domain radius grid.
    pub rho: Vec<f64>,
    /// Derivative-bound grid (tau >= 1).
    pub tau: Vec<f64>,
    /// Uniformity-margin grid (0 < nu < 1/2).
    pub nu: Vec<f64>,
    /// Sample size for mass curves (per-point orbit work is O(n_max)).
    pub mass_sample_count: usize,
    /// Sample size for dimension reports. Unset picks `sample_count` on P^1
    /// and 12000 on P^2, where the estimator needs more points to localize.
    pub dimension_sample_count: Option<usize>,
    /// Start points for the sqrt(d)-linearization verdict.
    pub linearize_points: usize,
    /// Iteration budget per linearization trace.
    pub linearize_max_n: usize,
    pub ball_radius: f64,
    pub recurrence_radius: f64,
    /// Correlation-fit radius window; unset auto-selects from pair distances.
    pub r_min: Option<f64>,
    pub r_max: Option<f64>,
    /// Directory artifacts are written into (created if missing).
    pub output_dir: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            map_source: "power_2".to_string(),
            seed: 1,
            sample_count: 2600,
            burn_in: 30,
            chains: 16,
            n_steps: 200,
            n_orbits: 500,
            n_min: 1,
            n_max: 12,
            rho: vec![0.1],
            tau: vec![10.0],
            nu: vec![0.3],
            mass_sample_count: 600,
            dimension_sample_count: None,
            linearize_points: 25,
            linearize_max_n: 2000,
            ball_radius: 0.01,
            recurrence_radius: 0.3,
            r_min: None,
            r_max: None,
            output_dir: "out".to_string(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("bad config {}: {e}", path.display()))
    }

    /// Apply flag overrides (highest precedence).
    pub fn apply_overrides(
        &mut self,
        seed: Option<u64>,
        out: Option<&str>,
        map: Option<&str>,
    ) {
        if let Some(s) = seed {
            self.seed = s;
        }
        if let Some(o) = out {
            self.output_dir = o.to_string();
        }
        if let Some(m) = map {
            self.map_source = m.to_string();
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.map_source.is_empty() {
            return Err("map_source is empty".into());
        }
        for (name, v) in [
            ("sample_count", self.sample_count),
            ("chains", self.chains),
            ("n_steps", self.n_steps),
            ("n_orbits", self.n_orbits),
            ("n_min", self.n_min),
            ("mass_sample_count", self.mass_sample_count),
            ("linearize_points", self.linearize_points),
            ("linearize_max_n", self.linearize_max_n),
        ] {
            if v == 0 {
                return Err(format!("{name} must be positive"));
            }
        }
        if self.n_max < self.n_min {
            return Err("n_max must be >= n_min".into());
        }
        if self.rho.is_empty() || self.tau.is_empty() || self.nu.is_empty() {
            return Err("rho, tau, nu grids must be non-empty".into());
        }
        if self.rho.iter().any(|&r| !(r > 0.0)) {
            return Err("rho values must be positive".into());
        }
        if self.tau.iter().any(|&t| !(t >= 1.0)) {
            return Err("tau values must be >= 1".into());
        }
        if self.nu.iter().any(|&v| !(v > 0.0 && v < 0.5)) {
            return Err("nu values must lie in (0, 1/2)".into());
        }
        if !(self.ball_radius > 0.0 && self.ball_radius <= 0.1) {
            return Err("ball_radius must lie in (0, 0.1]".into());
        }
        if !(self.recurrence_radius > 0.0) {
            return Err("recurrence_radius must be positive".into());
        }
        if let (Some(lo), Some(hi)) = (self.r_min, self.r_max) {
            if !(lo > 0.0 && lo < hi) {
                return Err("need 0 < r_min < r_max".into());
            }
        }
        Ok(())
    }

    /// Dimension sample size for a map on P^k; see field doc.
    pub fn dimension_count(&self, k: usize) -> usize {
        self.dimension_sample_count
            .unwrap_or(if k >= 2 { 12000 } else { self.sample_count })
    }

    /// 16-hex-digit digest of the effective config. Hashes the canonical
    /// TOML serialization, so field order in the user's file is irrelevant.
    pub fn hash(&self) -> String {
        let canonical = toml::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}
