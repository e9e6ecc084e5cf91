//! Campaign configuration files, suite output files, and the per-goal report.
//!
//! A suite file is the machine-readable record of one campaign: per test it
//! keeps the capability history, the origin state it ran from, the causal
//! ledger, and the final sensor snapshot, so tests can be re-pruned and
//! re-checked without re-running the campaign.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::capability::{Capability, History};
use crate::causal::{CausalVerdict, ReplaySpec};
use crate::component::{ActuatorValue, ComponentId, Configurations};
use crate::cond::parse_sensor_condition;
use crate::fuzz::{
    goal_catalogue, Budgets, Campaign, CampaignResult, ClassKind, FuzzError, Goal,
};
use crate::plant::{ControlState, PlantModel};
use crate::strategy::TestTrace;

#[derive(Debug, thiserror::Error)]
pub enum SuiteError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("TOML error: {0}")]
    Toml(String),
    #[error("JSON error: {0}")]
    Json(String),
    #[error("{0}")]
    Invalid(String),
}

/// Campaign file: which plant, which goals, which class, and the budgets.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CampaignConfig {
    /// Path to a plant model file; the built-in reference plant when omitted.
    #[serde(default)]
    pub plant: Option<String>,
    pub seed: u64,
    pub class: ClassKind,
    /// Goal names like `LIT101-High`, or `all` for the plant's catalogue.
    pub goals: Vec<String>,
    #[serde(default)]
    pub walks: Option<usize>,
    #[serde(default)]
    pub walk_len: Option<usize>,
    #[serde(default)]
    pub budget_secs: Option<f64>,
    #[serde(default)]
    pub iterations: Option<usize>,
    /// Path to an initial strategy file; the universal strategy when omitted.
    #[serde(default)]
    pub strategy: Option<String>,
    /// Per-goal dt override in seconds.
    #[serde(default)]
    pub dt_secs: Option<u64>,
}

impl CampaignConfig {
    pub fn parse_toml(text: &str) -> Result<Self, SuiteError> {
        toml::from_str(text).map_err(|e| SuiteError::Toml(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SuiteError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| SuiteError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::parse_toml(&text)
    }

    /// Stable digest of the configuration content.
    pub fn digest(&self) -> String {
        let canonical = toml::to_string(self).expect("config serialises");
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        hex_string(&hasher.finalize())
    }

    /// Resolves the goal names against the model.
    pub fn resolve_goals(&self, model: &PlantModel) -> Result<Vec<Goal>, SuiteError> {
        let mut out = Vec::new();
        for name in &self.goals {
            if name == "all" {
                out.extend(goal_catalogue(model));
                continue;
            }
            out.push(resolve_goal_name(model, name)?);
        }
        if let Some(dt) = self.dt_secs {
            for g in &mut out {
                g.dt_secs = dt;
            }
        }
        if out.is_empty() {
            return Err(SuiteError::Invalid("no goals configured".into()));
        }
        Ok(out)
    }

    /// One campaign per goal, each with a seed derived from the goal name.
    pub fn build_campaigns(
        &self,
        model: &Arc<PlantModel>,
        initial_strategy: Option<crate::strategy::Strategy>,
    ) -> Result<Vec<Campaign>, SuiteError> {
        let goals = self.resolve_goals(model)?;
        let mut out = Vec::new();
        for goal in goals {
            let mut campaign = Campaign::new(
                model.clone(),
                goal.clone(),
                self.class,
                crate::fuzz::derive_seed(self.seed, &goal.name),
            );
            if let Some(s) = &initial_strategy {
                campaign.strategy = s.clone();
            }
            campaign.budgets = Budgets {
                max_iterations: self.iterations,
                wall: self.budget_secs.map(Duration::from_secs_f64),
                walks_per_round: self.walks,
                walk_len: self.walk_len,
            };
            out.push(campaign);
        }
        Ok(out)
    }
}

/// Parses `SENSOR-High` / `SENSOR-Low` into a goal on the model.
pub fn resolve_goal_name(model: &PlantModel, name: &str) -> Result<Goal, SuiteError> {
    let (sensor, direction) = name
        .rsplit_once('-')
        .ok_or_else(|| SuiteError::Invalid(format!("goal `{name}` must look like LIT101-High")))?;
    let id = ComponentId::new(sensor);
    if model.sensor_domain(&id).is_none() {
        return Err(SuiteError::Invalid(format!("goal `{name}` names unknown sensor {sensor}")));
    }
    let dt = match id.kind() {
        Some(crate::component::ComponentKind::LevelSensor) => crate::fuzz::LEVEL_DT_SECS,
        _ => crate::fuzz::FAST_DT_SECS,
    };
    let goal = match direction {
        "High" | "high" => Goal::high(model, sensor, dt),
        "Low" | "low" => Goal::low(model, sensor, dt),
        other => {
            return Err(SuiteError::Invalid(format!(
                "goal `{name}` has unknown direction `{other}` (use High or Low)"
            )))
        }
    };
    goal.map_err(|e: FuzzError| SuiteError::Invalid(e.to_string()))
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// A recorded start point: everything needed to re-run a test.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OriginState {
    pub levels: BTreeMap<String, f64>,
    pub flows: BTreeMap<String, f64>,
    pub clock_secs: u64,
    pub commands: BTreeMap<ComponentId, ActuatorValue>,
}

impl OriginState {
    pub fn capture(model: &PlantModel, q: &ControlState, x: &crate::plant::PhysicalState) -> Self {
        OriginState {
            levels: x.named_levels(model),
            flows: model
                .pipes
                .iter()
                .enumerate()
                .map(|(i, p)| (p.id.clone(), x.flows[i]))
                .collect(),
            clock_secs: x.clock_secs,
            commands: q.commanded.iter().map(|(c, v)| (c.clone(), v)).collect(),
        }
    }

    pub fn restore(&self, model: &PlantModel) -> Result<(ControlState, crate::plant::PhysicalState), SuiteError> {
        let q = ControlState::new(Configurations::from_entries(
            self.commands.iter().map(|(c, v)| (c.clone(), *v)).collect(),
        ));
        for tank in &model.tanks {
            if !self.levels.contains_key(&tank.id) {
                return Err(SuiteError::Invalid(format!(
                    "origin is missing a level for tank `{}`",
                    tank.id
                )));
            }
        }
        let mut x = model.initial_state(&self.levels, &q);
        for (pipe, flow) in &self.flows {
            if let Some(i) = model.pipe_index(pipe) {
                x.flows[i] = *flow;
            }
        }
        x.clock_secs = self.clock_secs;
        Ok((q, x))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub capability: Capability,
    pub k: usize,
    pub l: usize,
    pub verdict: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counterexample_history: Option<History>,
}

/// One suite entry: a successful test with its provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteTest {
    pub iteration: usize,
    pub goal_condition: String,
    pub dt_secs: u64,
    pub origin: OriginState,
    pub history: History,
    pub cumulative_set: Vec<Capability>,
    pub success_step: usize,
    pub final_readings: BTreeMap<ComponentId, f64>,
    #[serde(default)]
    pub causal_ledger: Vec<LedgerEntry>,
}

impl SuiteTest {
    pub fn from_trace(
        model: &PlantModel,
        trace: &TestTrace,
        iteration: usize,
        dt_secs: u64,
        causal: &[crate::causal::CausalRecord],
    ) -> Self {
        let (q0, x0) = trace.origin();
        let final_readings = crate::plant::observe(model, trace.final_physical())
            .iter()
            .map(|(c, v)| (c.clone(), v))
            .collect();
        SuiteTest {
            iteration,
            goal_condition: trace.goal.to_string(),
            dt_secs,
            origin: OriginState::capture(model, q0, x0),
            history: trace.history.clone(),
            cumulative_set: trace.history.cumulative_set().into_iter().collect(),
            success_step: trace.history.len(),
            final_readings,
            causal_ledger: causal
                .iter()
                .map(|r| LedgerEntry {
                    capability: r.capability.clone(),
                    k: r.k,
                    l: r.l,
                    verdict: match r.verdict {
                        CausalVerdict::Causal => "causal".to_string(),
                        CausalVerdict::Pruned => "pruned".to_string(),
                    },
                    counterexample_history: r
                        .counterexample
                        .as_ref()
                        .map(|t| t.history.clone()),
                })
                .collect(),
        }
    }

    /// Rebuilds the replay inputs for this test.
    pub fn to_replay_spec(&self, model: &PlantModel) -> Result<ReplaySpec, SuiteError> {
        let goal = parse_sensor_condition(&self.goal_condition)
            .map_err(|e| SuiteError::Invalid(format!("goal condition: {e}")))?;
        let origin = self.origin.restore(model)?;
        Ok(ReplaySpec { history: self.history.clone(), origin, goal, dt_secs: self.dt_secs })
    }
}

/// The on-disk record of one campaign.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteFile {
    pub goal: String,
    pub class: ClassKind,
    pub seed: u64,
    pub config_digest: String,
    pub wall_secs: f64,
    pub iterations: usize,
    pub successes: usize,
    #[serde(default)]
    pub composition_capped_at: Option<usize>,
    pub pairwise_non_equivalent: bool,
    pub tests: Vec<SuiteTest>,
}

impl SuiteFile {
    pub fn from_result(
        model: &PlantModel,
        result: &CampaignResult,
        config_digest: String,
    ) -> Self {
        SuiteFile {
            goal: result.goal_name.clone(),
            class: result.class_kind,
            seed: result.seed,
            config_digest,
            wall_secs: result.wall.as_secs_f64(),
            iterations: result.iterations,
            successes: result.successes,
            composition_capped_at: result.composition_capped_at,
            pairwise_non_equivalent: result.pairwise_non_equivalent,
            tests: result
                .tests
                .iter()
                .map(|t| {
                    SuiteTest::from_trace(model, &t.trace, t.iteration, result.dt_secs, &t.causal_records)
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("suite serialises")
    }

    pub fn parse_json(text: &str) -> Result<Self, SuiteError> {
        serde_json::from_str(text).map_err(|e| SuiteError::Json(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SuiteError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| SuiteError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::parse_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), SuiteError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| SuiteError::Io {
            path: path.display().to_string(),
            source: e,
        })
    }
}

/// Per-goal summary row for the final report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportRow {
    pub goal: String,
    pub class: ClassKind,
    pub count: usize,
    pub wall_secs: f64,
    pub causal_sets: Vec<Vec<Capability>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub config_digest: String,
    pub rows: Vec<ReportRow>,
}

impl SuiteReport {
    pub fn from_suites(seed: u64, config_digest: String, suites: &[SuiteFile]) -> Self {
        let rows = suites
            .iter()
            .map(|s| ReportRow {
                goal: s.goal.clone(),
                class: s.class,
                count: s.tests.len(),
                wall_secs: s.wall_secs,
                causal_sets: s.tests.iter().map(|t| t.cumulative_set.clone()).collect(),
            })
            .collect();
        SuiteReport { seed, config_digest, rows }
    }

    /// Plain-text table: one row per goal.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{:<16} {:<12} {:>6} {:>10}\n", "goal", "class", "count", "wall(s)"));
        for row in &self.rows {
            out.push_str(&format!(
                "{:<16} {:<12} {:>6} {:>10.2}\n",
                row.goal,
                row.class.to_string(),
                row.count,
                row.wall_secs
            ));
        }
        out
    }
}
