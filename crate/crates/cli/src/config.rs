//! Scenario files: TOML with `[model]`, `[reward]`, `[run]` and optional
//! `[sweep]`, `[agents]`, `[bifurcation]`, `[region_map]` tables.

use std::path::Path;

use minerdyn_core::controller::{eps_interval, gain_lower_bound};
use minerdyn_core::equilibrium::RegionGrid;
use minerdyn_core::{ControllerSpec, MiningEnvironment, ModelParams, RewardPolicy};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::error::CliError;

pub const DEFAULT_GAIN_MARGIN: f64 = 0.01;
pub const DEFAULT_EPS_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub model: ModelSection,
    pub reward: RewardSection,
    #[serde(default)]
    pub run: RunSection,
    pub sweep: Option<SweepSection>,
    pub agents: Option<AgentsSection>,
    pub bifurcation: Option<BifurcationSection>,
    pub region_map: Option<RegionMapSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub m: u32,
    pub n: u32,
    pub d: Option<f64>,
    pub h: Option<u32>,
    pub c: Option<f64>,
    pub v: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardSection {
    #[serde(rename = "R")]
    pub constant: Option<f64>,
    pub controller: Option<ControllerSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSection {
    #[serde(rename = "R_star")]
    pub r_star: f64,
    pub x_bar: f64,
    #[serde(rename = "K")]
    pub gain: Option<f64>,
    pub eps: Option<f64>,
    pub gain_margin: Option<f64>,
    pub eps_fraction: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub x1_init: f64,
    pub t_end: f64,
    pub dt: f64,
    pub tol: f64,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            x1_init: 0.1,
            t_end: 50.0,
            dt: 1e-3,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
    Both,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(rename = "R_from")]
    pub r_from: f64,
    #[serde(rename = "R_to")]
    pub r_to: f64,
    pub step: f64,
    #[serde(default = "default_direction")]
    pub direction: Direction,
    /// Starting state of the first leg; defaults to 0 going up and 1 going down.
    pub seed: Option<f64>,
    pub leg_horizon: Option<f64>,
}

fn default_direction() -> Direction {
    Direction::Both
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentsSection {
    pub n_strategic: usize,
    pub seeds: usize,
    pub revision_rate: Option<f64>,
    pub horizon: Option<f64>,
    #[serde(default = "default_sample_dt")]
    pub sample_dt: f64,
    pub x1_init: Option<f64>,
}

fn default_sample_dt() -> f64 {
    0.05
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BifurcationSection {
    #[serde(rename = "R_min")]
    pub r_min: f64,
    #[serde(rename = "R_max")]
    pub r_max: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionMapSection {
    pub m_min: u32,
    pub m_max: u32,
    pub rd_min: f64,
    pub rd_max: f64,
    pub rd_samples: usize,
}

/// A parsed, checked scenario plus the digest of its effective contents.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub params: ModelParams,
    pub digest: String,
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn positive(field: &str, x: f64) -> Result<(), CliError> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(bad(format!("{field} must be positive, got {x}")))
    }
}

fn unit(field: &str, x: f64) -> Result<(), CliError> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(bad(format!("{field} must lie in [0, 1], got {x}")))
    }
}

/// Parses `path.to.field=value`; the value is read as a TOML literal and
/// falls back to a bare string.
pub fn parse_override(raw: &str) -> Result<(Vec<String>, Value), CliError> {
    let (path, value) = raw
        .split_once('=')
        .ok_or_else(|| bad(format!("override {raw:?} is not of the form path=value")))?;
    let keys: Vec<String> = path.trim().split('.').map(str::to_string).collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(bad(format!("override {raw:?} has an empty key")));
    }
    let value = value.trim();
    let parsed = toml::from_str::<Table>(&format!("v = {value}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(value.to_string()));
    Ok((keys, parsed))
}

fn apply_override(table: &mut Table, keys: &[String], value: Value) -> Result<(), CliError> {
    let (last, parents) = keys.split_last().expect("override path is nonempty");
    let mut cur = table;
    for k in parents {
        let entry = cur
            .entry(k.clone())
            .or_insert_with(|| Value::Table(Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| {
            bad(format!(
                "override path {} crosses the scalar `{k}`",
                keys.join(".")
            ))
        })?;
    }
    if cur.get(last).is_some_and(Value::is_table) {
        return Err(bad(format!(
            "override {} would replace a table",
            keys.join(".")
        )));
    }
    cur.insert(last.clone(), value);
    Ok(())
}

impl Scenario {
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text, overrides).map_err(|e| match e {
            CliError::Config(msg) => bad(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self, CliError> {
        let mut table: Table = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        // Deserializing the original text keeps line numbers in diagnostics.
        let mut config: Option<ScenarioConfig> = None;
        if overrides.is_empty() {
            config = Some(toml::from_str(text).map_err(|e| bad(e.to_string()))?);
        }
        for raw in overrides {
            let (keys, value) = parse_override(raw)?;
            apply_override(&mut table, &keys, value)?;
        }
        let config = match config {
            Some(c) => c,
            None => ScenarioConfig::deserialize(Value::Table(table.clone()))
                .map_err(|e| bad(format!("after overrides: {e}")))?,
        };
        let canonical = toml::to_string(&table).map_err(|e| bad(e.to_string()))?;
        let digest = hex::encode(Sha256::digest(canonical.as_bytes()));
        let params = config.check()?;
        Ok(Self {
            config,
            params,
            digest,
        })
    }

    /// Reward policy, resolving an incomplete controller block.
    pub fn policy(&self) -> Result<RewardPolicy, CliError> {
        match (&self.config.reward.constant, &self.config.reward.controller) {
            (Some(r), None) => Ok(RewardPolicy::Constant(*r)),
            (None, Some(c)) => Ok(RewardPolicy::Feedback(resolve_controller(&self.params, c)?)),
            _ => unreachable!("checked at load"),
        }
    }

    pub fn controller_section(&self) -> Result<&ControllerSection, CliError> {
        self.config
            .reward
            .controller
            .as_ref()
            .ok_or_else(|| bad("this command needs a [reward.controller] table"))
    }

    pub fn sweep(&self) -> Result<&SweepSection, CliError> {
        self.config
            .sweep
            .as_ref()
            .ok_or_else(|| bad("this command needs a [sweep] table"))
    }

    pub fn agents(&self) -> Result<&AgentsSection, CliError> {
        self.config
            .agents
            .as_ref()
            .ok_or_else(|| bad("this command needs an [agents] table"))
    }

    /// Defaults to `[d/(2(m+n)), 1.5 d/m]` with 241 samples.
    pub fn bifurcation(&self) -> BifurcationSection {
        self.config
            .bifurcation
            .clone()
            .unwrap_or(BifurcationSection {
                r_min: 0.5 * self.params.lower_threshold(),
                r_max: 1.5 * self.params.upper_threshold(),
                samples: 241,
            })
    }

    pub fn region_grid(&self) -> RegionGrid {
        let r = self.config.region_map.clone().unwrap_or(RegionMapSection {
            m_min: 1,
            m_max: 20,
            rd_min: 0.005,
            rd_max: 1.2,
            rd_samples: 240,
        });
        RegionGrid {
            m_min: r.m_min,
            m_max: r.m_max,
            rd_min: r.rd_min,
            rd_max: r.rd_max,
            rd_samples: r.rd_samples,
        }
    }
}

/// Fills a missing `K` from the gain margin and a missing `eps` from the
/// fraction of its admissible interval.
pub fn resolve_controller(
    params: &ModelParams,
    c: &ControllerSection,
) -> Result<ControllerSpec, CliError> {
    let gain = match c.gain {
        Some(k) => k,
        None => {
            gain_lower_bound(params, c.r_star, c.x_bar)?
                * (1.0 + c.gain_margin.unwrap_or(DEFAULT_GAIN_MARGIN))
        }
    };
    let eps = match c.eps {
        Some(e) => e,
        None => {
            let interval = eps_interval(params, c.r_star, c.x_bar, gain)?;
            let top = if interval.upper_closed {
                interval.upper
            } else {
                interval.upper - minerdyn_core::controller::OPEN_ENDPOINT_SHRINK
            };
            c.eps_fraction.unwrap_or(DEFAULT_EPS_FRACTION) * top
        }
    };
    Ok(ControllerSpec::new(*params, c.r_star, c.x_bar, gain, eps)?)
}

impl ScenarioConfig {
    fn check(&self) -> Result<ModelParams, CliError> {
        let m = &self.model;
        let params = match (m.d, m.h, m.c, m.v) {
            (Some(d), None, None, None) => ModelParams::new(m.m, m.n, d),
            (None, Some(h), Some(c), Some(v)) => {
                MiningEnvironment::new(h, c, v).and_then(|e| e.model_params(m.m, m.n))
            }
            _ => {
                return Err(bad(
                    "model: give exactly one of `d` or all of `h`, `c`, `v`",
                ))
            }
        }
        .map_err(|e| bad(format!("model: {e}")))?;

        match (&self.reward.constant, &self.reward.controller) {
            (Some(r), None) => positive("reward.R", *r)?,
            (None, Some(c)) => {
                positive("reward.controller.R_star", c.r_star)?;
                if !c.x_bar.is_finite() {
                    return Err(bad("reward.controller.x_bar must be finite"));
                }
                if let Some(k) = c.gain {
                    positive("reward.controller.K", k)?;
                }
                if let Some(e) = c.eps {
                    positive("reward.controller.eps", e)?;
                }
                if let Some(g) = c.gain_margin {
                    if !(g.is_finite() && g >= 0.0) {
                        return Err(bad(format!(
                            "reward.controller.gain_margin must be nonnegative, got {g}"
                        )));
                    }
                }
                if let Some(f) = c.eps_fraction {
                    if !(f > 0.0 && f <= 1.0) {
                        return Err(bad(format!(
                            "reward.controller.eps_fraction must lie in (0, 1], got {f}"
                        )));
                    }
                }
            }
            _ => {
                return Err(bad(
                    "reward: give exactly one of `R` or a [reward.controller] table",
                ))
            }
        }

        unit("run.x1_init", self.run.x1_init)?;
        positive("run.t_end", self.run.t_end)?;
        positive("run.dt", self.run.dt)?;
        positive("run.tol", self.run.tol)?;

        if let Some(s) = &self.sweep {
            positive("sweep.R_from", s.r_from)?;
            positive("sweep.R_to", s.r_to)?;
            positive("sweep.step", s.step)?;
            if let Some(x) = s.seed {
                unit("sweep.seed", x)?;
            }
            if let Some(h) = s.leg_horizon {
                positive("sweep.leg_horizon", h)?;
            }
        }
        if let Some(a) = &self.agents {
            if a.n_strategic < 2 {
                return Err(bad("agents.n_strategic must be at least 2"));
            }
            if a.seeds == 0 {
                return Err(bad("agents.seeds must be at least 1"));
            }
            if let Some(r) = a.revision_rate {
                positive("agents.revision_rate", r)?;
            }
            if let Some(h) = a.horizon {
                positive("agents.horizon", h)?;
            }
            positive("agents.sample_dt", a.sample_dt)?;
            if let Some(x) = a.x1_init {
                unit("agents.x1_init", x)?;
            }
        }
        if let Some(b) = &self.bifurcation {
            positive("bifurcation.R_min", b.r_min)?;
            if !(b.r_max > b.r_min) {
                return Err(bad("bifurcation.R_max must exceed R_min"));
            }
            if b.samples < 2 {
                return Err(bad("bifurcation.samples must be at least 2"));
            }
        }
        if let Some(g) = &self.region_map {
            if g.m_min < 1 || g.m_max < g.m_min {
                return Err(bad("region_map: need 1 <= m_min <= m_max"));
            }
            positive("region_map.rd_min", g.rd_min)?;
            if !(g.rd_max >= g.rd_min) || g.rd_samples == 0 {
                return Err(bad("region_map: need rd_min <= rd_max and rd_samples >= 1"));
            }
        }
        Ok(params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "[model]\nm = 2\nn = 2\nd = 100.0\n\n[reward]\nR = 40.0\n";

    #[test]
    fn loads_minimal_config() {
        let s = Scenario::from_toml(BASE, &[]).unwrap();
        assert_eq!(s.params, ModelParams::new(2, 2, 100.0).unwrap());
        assert!(matches!(s.policy().unwrap(), RewardPolicy::Constant(r) if r == 40.0));
        assert_eq!(s.digest.len(), 64);
    }

    #[test]
    fn overrides_replace_scalars() {
        let s =
            Scenario::from_toml(BASE, &["reward.R=60".into(), "run.x1_init=0.9".into()]).unwrap();
        assert!(matches!(s.policy().unwrap(), RewardPolicy::Constant(r) if r == 60.0));
        assert_eq!(s.config.run.x1_init, 0.9);
        let base = Scenario::from_toml(BASE, &[]).unwrap();
        assert_ne!(s.digest, base.digest);
    }

    #[test]
    fn digest_ignores_formatting() {
        let a = Scenario::from_toml(BASE, &[]).unwrap();
        let b = Scenario::from_toml(&format!("# comment\n{BASE}"), &[]).unwrap();
        assert_eq!(a.digest, b.digest);
    }

    #[test]
    fn missing_difficulty_is_rejected() {
        let err =
            Scenario::from_toml("[model]\nm = 2\nn = 2\n[reward]\nR = 40.0\n", &[]).unwrap_err();
        assert!(err.to_string().contains("exactly one of `d`"), "{err}");
    }

    #[test]
    fn difficulty_from_hash_exponent() {
        let text = "[model]\nm = 2\nn = 2\nh = 10\nc = 1.0\nv = 10.24\n[reward]\nR = 40.0\n";
        let s = Scenario::from_toml(text, &[]).unwrap();
        assert!((s.params.d() - 100.0).abs() < 1e-12);
    }

    #[test]
    fn unknown_field_reports_line() {
        let err = Scenario::from_toml(
            "[model]\nm = 2\nn = 2\nd = 100.0\nq = 1\n[reward]\nR = 40.0\n",
            &[],
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 5") && msg.contains('q'), "{msg}");
    }

    #[test]
    fn both_reward_variants_rejected() {
        let text = format!("{BASE}[reward.controller]\nR_star = 40.0\nx_bar = 1.0\n");
        assert!(Scenario::from_toml(&text, &[]).is_err());
    }

    #[test]
    fn controller_gaps_are_filled() {
        let text = "[model]\nm = 2\nn = 2\nd = 100.0\n[reward.controller]\nR_star = 40.0\nx_bar = 1.0\nK = 10.1\n";
        let s = Scenario::from_toml(text, &[]).unwrap();
        let RewardPolicy::Feedback(spec) = s.policy().unwrap() else {
            panic!()
        };
        assert!((spec.eps() - 0.375).abs() < 1e-12);
    }

    #[test]
    fn override_parsing() {
        let (k, v) = parse_override("sweep.direction=up").unwrap();
        assert_eq!(k, ["sweep", "direction"]);
        assert_eq!(v, Value::String("up".into()));
        assert_eq!(parse_override("a=1e-3").unwrap().1, Value::Float(1e-3));
        assert!(parse_override("novalue").is_err());
    }
}
