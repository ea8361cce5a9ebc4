//! Scenario file for `simulate` (TOML).
//!
//! ```toml
//! schema_version = 1
//! master_seed = 2024
//!
//! [defaults]
//! replicates = 5000
//! alpha = 0.05
//! boundary_policy = "haldane"
//!
//! [[scenario]]
//! pi = [0.05, 0.05, 0.05, 0.30]
//! n = 50            # or one size per group
//! ```

use anyhow::{bail, Context, Result};
use ordprop::{BoundaryPolicy, Scenario};
use serde::Deserialize;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    schema_version: u32,
    master_seed: u64,
    #[serde(default)]
    defaults: Defaults,
    #[serde(default)]
    scenario: Vec<RawScenario>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Defaults {
    replicates: Option<usize>,
    alpha: Option<f64>,
    boundary_policy: Option<BoundaryPolicy>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Sizes {
    Balanced(u64),
    PerGroup(Vec<u64>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    #[serde(default)]
    label: Option<String>,
    pi: Vec<f64>,
    n: Sizes,
    replicates: Option<usize>,
    alpha: Option<f64>,
    seed: Option<u64>,
    boundary_policy: Option<BoundaryPolicy>,
}

#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub master_seed: u64,
    pub labels: Vec<Option<String>>,
    pub scenarios: Vec<Scenario>,
}

pub fn parse_config(text: &str) -> Result<StudyConfig> {
    let raw: RawConfig = toml::from_str(text).context("invalid scenario config")?;
    if raw.schema_version != SCHEMA_VERSION {
        bail!(
            "schema_version: unsupported version {} (expected {SCHEMA_VERSION})",
            raw.schema_version
        );
    }
    let mut labels = Vec::new();
    let mut scenarios = Vec::new();
    for (i, s) in raw.scenario.into_iter().enumerate() {
        let field = |name: &str| format!("scenario[{}].{name}", i + 1);
        let n = match s.n {
            Sizes::Balanced(n) => vec![n; s.pi.len()],
            Sizes::PerGroup(v) => v,
        };
        let replicates = s
            .replicates
            .or(raw.defaults.replicates)
            .unwrap_or(Scenario::DEFAULT_REPLICATES);
        if replicates == 0 {
            bail!("{}: must be at least 1", field("replicates"));
        }
        let alpha = s.alpha.or(raw.defaults.alpha).unwrap_or(Scenario::DEFAULT_ALPHA);
        if !(alpha > 0.0 && alpha < 1.0) {
            bail!("{}: {alpha} is outside (0, 1)", field("alpha"));
        }
        if s.pi.len() < 2 {
            bail!("{}: need a control and at least one dose", field("pi"));
        }
        if let Some(p) = s.pi.iter().find(|&&p| !(p > 0.0 && p < 1.0)) {
            bail!("{}: probability {p} is outside (0, 1)", field("pi"));
        }
        if n.len() != s.pi.len() {
            bail!("{}: {} sizes for {} groups", field("n"), n.len(), s.pi.len());
        }
        if n.contains(&0) {
            bail!("{}: sizes must be positive", field("n"));
        }
        labels.push(s.label);
        scenarios.push(Scenario {
            pi: s.pi,
            n,
            replicates,
            alpha,
            seed: s.seed.unwrap_or(0),
            boundary_policy: s
                .boundary_policy
                .or(raw.defaults.boundary_policy)
                .unwrap_or_default(),
        });
    }
    Ok(StudyConfig {
        master_seed: raw.master_seed,
        labels,
        scenarios,
    })
}
