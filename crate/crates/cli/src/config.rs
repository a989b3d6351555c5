use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Table,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Float equality of coefficients.
    pub float_eq: f64,
    /// Distance to the nearest integer for resonance tests.
    pub integrality: f64,
    /// Per-step tail bound of the transport integrator.
    pub ode: f64,
    /// Least-term target when seeding sector solutions.
    pub matching: f64,
    /// Relative singular-value cutoff for numerical ranks.
    pub rank_threshold: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            float_eq: 1e-9,
            integrality: 1e-9,
            ode: 1e-14,
            matching: 1e-14,
            rank_threshold: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub tolerances: Tolerances,
    pub seed: u64,
    /// Cap on subset choices in the reducibility search.
    pub bound: u128,
    pub format: Format,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            tolerances: Tolerances::default(),
            seed: 0,
            bound: 1_000_000,
            format: Format::Json,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: Self = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.tolerances;
        for (name, v) in [
            ("float_eq", t.float_eq),
            ("integrality", t.integrality),
            ("ode", t.ode),
            ("matching", t.matching),
            ("rank_threshold", t.rank_threshold),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                bail!("tolerance `{name}` must be positive, got {v}");
            }
        }
        Ok(())
    }
}
