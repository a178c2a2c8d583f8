//! Experiment configuration: flat TOML with key = value sections.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use fsqg_core::{FourierLattice, MultiplierSpec, Symbol, TimeGrid, Window};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_s")]
    pub s: f64,
    #[serde(default = "default_q")]
    pub q: f64,
    #[serde(default = "default_t_final")]
    pub t_final: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_seed")]
    pub rng_seed: u64,
    #[serde(default = "default_out")]
    pub output_dir: String,
    #[serde(default)]
    pub multiplier: MultiplierConfig,
    #[serde(default)]
    pub window: WindowConfig,
    #[serde(default)]
    pub control: ControlConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub reconstruct: ReconstructConfig,
}

fn default_n() -> usize {
    128
}
fn default_alpha() -> f64 {
    0.75
}
fn default_s() -> f64 {
    1.5
}
fn default_q() -> f64 {
    4.0
}
fn default_t_final() -> f64 {
    0.5
}
fn default_steps() -> usize {
    500
}
fn default_seed() -> u64 {
    42
}
fn default_out() -> String {
    "out".to_string()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiplierConfig {
    /// "riesz" | "perturbed" | "custom"
    pub kind: String,
    #[serde(default = "default_amp")]
    pub amplitude: f64,
    #[serde(default = "default_decay")]
    pub decay: f64,
    /// CSV of k1,k2,eta rows for the custom symbol m(k) = |k|^{-1}(1 + eta(k)).
    #[serde(default)]
    pub table: Option<String>,
    #[serde(default = "default_c_lower")]
    pub c_lower: f64,
    #[serde(default = "default_c_upper")]
    pub c_upper: f64,
}

fn default_amp() -> f64 {
    0.5
}
fn default_decay() -> f64 {
    1.0
}
fn default_c_lower() -> f64 {
    0.5
}
fn default_c_upper() -> f64 {
    1.5
}

impl Default for MultiplierConfig {
    fn default() -> Self {
        Self {
            kind: "perturbed".into(),
            amplitude: default_amp(),
            decay: default_decay(),
            table: None,
            c_lower: default_c_lower(),
            c_upper: default_c_upper(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowConfig {
    pub center: [f64; 2],
    pub radius: f64,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self { center: [0.0, 0.0], radius: 0.1 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlConfig {
    /// Window radius for the control experiments.
    pub radius: f64,
    pub lambdas: Vec<f64>,
    pub maxiter: usize,
    pub planted_lambda: f64,
    pub planted_maxiter: usize,
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self {
            radius: 0.2,
            lambdas: vec![1e-2, 1e-4, 1e-6],
            maxiter: 80,
            planted_lambda: 1e-8,
            planted_maxiter: 50,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub epsilons: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { epsilons: fsqg_core::linearize::DEFAULT_EPSILONS.to_vec() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconstructConfig {
    pub width: f64,
    pub radial: usize,
    pub angular: usize,
    pub offset_min: f64,
    pub offset_max: f64,
}

impl Default for ReconstructConfig {
    fn default() -> Self {
        Self { width: 0.05, radial: 8, angular: 8, offset_min: 0.2, offset_max: 0.4 }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: ExperimentConfig = toml::from_str(&text).context("parsing config")?;
        Ok(cfg)
    }

    pub fn defaults() -> Self {
        toml::from_str("").expect("default config is valid")
    }

    /// Validate the hypotheses of the underlying analysis; each violation is
    /// reported against its field.
    pub fn validate(&self) -> Result<()> {
        if self.n < 16 || self.n % 2 != 0 {
            bail!("n: grid size must be even and >= 16 (got {})", self.n);
        }
        if !(self.alpha > 0.5 && self.alpha < 1.0) {
            bail!("alpha: must lie in (1/2, 1) (got {})", self.alpha);
        }
        if !(self.q > 0.0) || 1.0 / self.q > self.alpha - 0.5 + 1e-12 {
            bail!(
                "q: requires 0 < 1/q <= alpha - 1/2 (got q = {}, alpha = {})",
                self.q,
                self.alpha
            );
        }
        if !(self.s + self.alpha > 2.0) {
            bail!("s: requires s + alpha > 2 (got s = {}, alpha = {})", self.s, self.alpha);
        }
        if !(self.t_final > 0.0) || self.steps == 0 {
            bail!("t_final/steps: need T > 0 and steps >= 1");
        }
        if self.sweep.epsilons.len() < 3 {
            bail!("sweep.epsilons: need at least 3 sweep points");
        }
        for w in self.sweep.epsilons.windows(2) {
            if w[1] >= w[0] {
                bail!("sweep.epsilons: must be strictly decreasing");
            }
        }
        if self.sweep.epsilons.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
            bail!("sweep.epsilons: must lie in (0, 1)");
        }
        if !(self.window.radius > 0.0 && self.window.radius < 0.25) {
            bail!("window.radius: must lie in (0, 1/4) (got {})", self.window.radius);
        }
        if !(self.control.radius > 0.0 && self.control.radius < 0.25) {
            bail!("control.radius: must lie in (0, 1/4) (got {})", self.control.radius);
        }
        match self.multiplier.kind.as_str() {
            "riesz" | "perturbed" | "custom" => {}
            other => bail!("multiplier.kind: unknown kind {other:?}"),
        }
        if self.multiplier.kind == "custom" && self.multiplier.table.is_none() {
            bail!("multiplier.table: custom symbol needs a table path");
        }
        Ok(())
    }

    pub fn lattice(&self) -> Result<Arc<FourierLattice>> {
        Ok(FourierLattice::new(self.n)?)
    }

    pub fn time_grid(&self) -> Result<TimeGrid> {
        Ok(TimeGrid::new(self.t_final, self.steps)?)
    }

    pub fn observation_window(&self, lattice: &Arc<FourierLattice>) -> Result<Window> {
        Ok(Window::new(lattice, (self.window.center[0], self.window.center[1]), self.window.radius)?)
    }

    pub fn control_window(&self, lattice: &Arc<FourierLattice>) -> Result<Window> {
        Ok(Window::new(lattice, (self.window.center[0], self.window.center[1]), self.control.radius)?)
    }

    /// The reference spec (the Riesz potential of the SQG case).
    pub fn riesz_spec(&self, lattice: &FourierLattice) -> MultiplierSpec {
        MultiplierSpec::riesz(lattice)
    }

    /// The configured comparison spec.
    pub fn configured_spec(&self, lattice: &FourierLattice) -> Result<MultiplierSpec> {
        let spec = match self.multiplier.kind.as_str() {
            "riesz" => MultiplierSpec::riesz(lattice),
            "perturbed" => MultiplierSpec::new(
                Symbol::Perturbed {
                    amplitude: self.multiplier.amplitude,
                    decay: self.multiplier.decay,
                },
                self.multiplier.c_lower,
                self.multiplier.c_upper,
                lattice,
            )?,
            "custom" => {
                let path = self.multiplier.table.as_ref().expect("validated");
                let eta = load_eta_table(Path::new(path))?;
                MultiplierSpec::new(
                    Symbol::Table { eta },
                    self.multiplier.c_lower,
                    self.multiplier.c_upper,
                    lattice,
                )?
            }
            _ => unreachable!("validated"),
        };
        Ok(spec)
    }

    pub fn echo_toml(&self) -> String {
        toml::to_string_pretty(self).unwrap_or_default()
    }
}

/// Load a custom symbol perturbation table: CSV with header k1,k2,eta.
/// Unlisted wavevectors carry eta = 0.
fn load_eta_table(path: &Path) -> Result<BTreeMap<(i64, i64), f64>> {
    let mut rdr = csv::Reader::from_path(path)
        .with_context(|| format!("reading symbol table {}", path.display()))?;
    let mut eta = BTreeMap::new();
    for row in rdr.records() {
        let row = row?;
        if row.len() != 3 {
            bail!("symbol table rows must be k1,k2,eta");
        }
        let k1: i64 = row[0].trim().parse()?;
        let k2: i64 = row[1].trim().parse()?;
        let v: f64 = row[2].trim().parse()?;
        eta.insert((k1, k2), v);
    }
    Ok(eta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let cfg = ExperimentConfig::defaults();
        cfg.validate().unwrap();
        assert_eq!(cfg.n, 128);
        assert_eq!(cfg.steps, 500);
        assert_eq!(cfg.rng_seed, 42);
    }

    #[test]
    fn rejects_bad_hypotheses() {
        let mut cfg = ExperimentConfig::defaults();
        cfg.alpha = 0.5;
        assert!(cfg.validate().unwrap_err().to_string().contains("alpha"));

        let mut cfg = ExperimentConfig::defaults();
        cfg.q = 3.0;
        assert!(cfg.validate().unwrap_err().to_string().contains("q:"));

        let mut cfg = ExperimentConfig::defaults();
        cfg.s = 1.0;
        assert!(cfg.validate().unwrap_err().to_string().contains("s:"));

        let mut cfg = ExperimentConfig::defaults();
        cfg.n = 31;
        assert!(cfg.validate().unwrap_err().to_string().contains("n:"));
    }

    #[test]
    fn boundary_q_is_admissible() {
        // q = 4 at alpha = 3/4 sits exactly on 1/q = alpha - 1/2
        let cfg = ExperimentConfig::defaults();
        assert_eq!(cfg.q, 4.0);
        cfg.validate().unwrap();
    }
}
