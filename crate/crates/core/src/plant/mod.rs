//! Discrete-time simulator of a multi-stage tank/pipe plant.
//!
//! The plant doubles as the system under test and as the prediction model for
//! walk planning: runs are deterministic, states are cheap to clone, and a
//! capability injector can spoof sensor readings or force actuator states at
//! every control interval. Water moves along pipes at a constant nominal rate
//! whenever the pipe's valve is open and at least one of its pumps is running;
//! tank levels integrate the flow balance at tick granularity, which is exact
//! between switching events because flows are piecewise constant.

mod file;
mod miniswat;

pub use file::{load_plant_file, parse_plant_toml, plant_to_toml, save_plant_file, PlantFileError};
pub use miniswat::miniswat;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::capability::{CapValue, Capability, CapabilitySet};
use crate::component::{
    ActuatorDomain, ActuatorValue, ComponentId, ComponentKind, Configurations, Readings,
    SensorDomain,
};
use crate::cond::{CondError, SensorCondition};

pub const SECS_PER_HOUR: f64 = 3600.0;
pub const MM_PER_M: f64 = 1000.0;

#[derive(Debug, Clone, thiserror::Error)]
pub enum PlantError {
    #[error("model validation failed: {0}")]
    ModelValidation(String),
    #[error("capability {cap} outside component domain: {reason}")]
    CapabilityDomain { cap: Capability, reason: String },
    #[error("unknown component `{0}`")]
    UnknownComponent(ComponentId),
    #[error("time step {dt}s must be a positive multiple of the {tick}s tick")]
    BadTimeStep { dt: u64, tick: u64 },
    #[error(transparent)]
    Cond(#[from] CondError),
}

/// A tank with a constant cross-section and an attached level sensor.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Tank {
    pub id: String,
    pub area_m2: f64,
    pub max_level_mm: f64,
    pub level_sensor: ComponentId,
}

/// Where a pipe draws from or discharges to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Endpoint {
    Source,
    Drain,
    #[serde(untagged)]
    Tank(String),
}

/// A pipe moves water at `nominal_flow_m3h` when enabled: its valve (if any)
/// must be open and at least one of its pumps (if any) must be on.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Pipe {
    pub id: String,
    pub from: Endpoint,
    pub to: Endpoint,
    #[serde(default)]
    pub valve: Option<ComponentId>,
    #[serde(default)]
    pub pumps: Vec<ComponentId>,
    pub nominal_flow_m3h: f64,
    #[serde(default)]
    pub flow_sensor: Option<ComponentId>,
}

/// Differential-pressure sensor reading proportionally to a pipe's flow.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PressureSensor {
    pub id: ComponentId,
    pub pipe: String,
    pub gain_bar_per_m3h: f64,
}

/// One controller rule: when the guard holds, command the listed actuators.
/// Among satisfied rules touching the same actuator the highest priority wins.
#[derive(Debug, Clone)]
pub struct ControlRule {
    pub guard: SensorCondition,
    pub commands: Vec<(ComponentId, ActuatorValue)>,
    pub priority: i32,
}

/// Documented start point baked into a model file.
#[derive(Debug, Clone, Default)]
pub struct NominalState {
    pub levels: BTreeMap<String, f64>,
    pub commands: Vec<(ComponentId, ActuatorValue)>,
}

#[derive(Debug, Clone)]
pub struct PlantModel {
    pub tanks: Vec<Tank>,
    pub pipes: Vec<Pipe>,
    pub sensors: BTreeMap<ComponentId, SensorDomain>,
    pub pressure_sensors: Vec<PressureSensor>,
    pub rules: Vec<ControlRule>,
    pub tick_secs: u64,
    pub nominal: NominalState,
}

impl PlantModel {
    pub fn tank_index(&self, id: &str) -> Option<usize> {
        self.tanks.iter().position(|t| t.id == id)
    }

    pub fn pipe_index(&self, id: &str) -> Option<usize> {
        self.pipes.iter().position(|p| p.id == id)
    }

    /// All actuators referenced by pipes, with their domains.
    pub fn actuators(&self) -> BTreeMap<ComponentId, ActuatorDomain> {
        let mut out = BTreeMap::new();
        for pipe in &self.pipes {
            if let Some(v) = &pipe.valve {
                out.insert(v.clone(), ActuatorDomain::valve());
            }
            for p in &pipe.pumps {
                out.insert(p.clone(), ActuatorDomain::pump());
            }
        }
        out
    }

    /// Every actuator capability of the plant: both states of every valve and
    /// pump. This is the default manipulation universe for fuzzing.
    pub fn actuator_capabilities(&self) -> Vec<Capability> {
        let mut out = Vec::new();
        for (id, dom) in self.actuators() {
            for v in dom.values {
                out.push(Capability { component: id.clone(), value: CapValue::Actuator(v) });
            }
        }
        out
    }

    pub fn sensor_domain(&self, id: &ComponentId) -> Option<&SensorDomain> {
        self.sensors.get(id)
    }

    /// Structural checks; an empty list means the model is usable.
    pub fn validate(&self) -> Vec<ModelViolation> {
        let mut out = Vec::new();
        let mut complain = |what: &str| out.push(ModelViolation(what.to_string()));

        if self.tick_secs == 0 {
            complain("tick must be at least 1 second");
        }
        let mut seen_tanks = BTreeMap::new();
        for t in &self.tanks {
            if seen_tanks.insert(t.id.clone(), ()).is_some() {
                complain(&format!("duplicate tank id `{}`", t.id));
            }
            if t.area_m2 <= 0.0 {
                complain(&format!("tank `{}` needs a positive area", t.id));
            }
            if t.max_level_mm <= 0.0 {
                complain(&format!("tank `{}` needs a positive max level", t.id));
            }
            match self.sensors.get(&t.level_sensor) {
                None => complain(&format!(
                    "tank `{}` level sensor {} has no declared domain",
                    t.id, t.level_sensor
                )),
                Some(dom) => {
                    if t.level_sensor.kind() != Some(ComponentKind::LevelSensor) {
                        complain(&format!("{} is not a level sensor (LIT prefix)", t.level_sensor));
                    }
                    if dom.lo > 0.0 || dom.hi < t.max_level_mm {
                        complain(&format!(
                            "sensor {} domain must cover tank `{}` levels [0, {}]",
                            t.level_sensor, t.id, t.max_level_mm
                        ));
                    }
                }
            }
        }

        let mut attach_counts: BTreeMap<ComponentId, usize> = BTreeMap::new();
        for t in &self.tanks {
            *attach_counts.entry(t.level_sensor.clone()).or_default() += 1;
        }

        let mut seen_pipes = BTreeMap::new();
        for p in &self.pipes {
            if seen_pipes.insert(p.id.clone(), ()).is_some() {
                complain(&format!("duplicate pipe id `{}`", p.id));
            }
            if p.nominal_flow_m3h <= 0.0 {
                complain(&format!("pipe `{}` needs a positive nominal flow", p.id));
            }
            match &p.from {
                Endpoint::Drain => complain(&format!("pipe `{}` cannot draw from the drain", p.id)),
                Endpoint::Tank(t) if self.tank_index(t).is_none() => {
                    complain(&format!("pipe `{}` draws from unknown tank `{t}`", p.id))
                }
                _ => {}
            }
            match &p.to {
                Endpoint::Source => {
                    complain(&format!("pipe `{}` cannot discharge into the source", p.id))
                }
                Endpoint::Tank(t) if self.tank_index(t).is_none() => {
                    complain(&format!("pipe `{}` discharges into unknown tank `{t}`", p.id))
                }
                _ => {}
            }
            if let Some(v) = &p.valve {
                if v.kind() != Some(ComponentKind::Valve) {
                    complain(&format!("{v} on pipe `{}` is not a valve (MV prefix)", p.id));
                }
                *attach_counts.entry(v.clone()).or_default() += 1;
            }
            for pump in &p.pumps {
                if pump.kind() != Some(ComponentKind::Pump) {
                    complain(&format!("{pump} on pipe `{}` is not a pump (P prefix)", p.id));
                }
                *attach_counts.entry(pump.clone()).or_default() += 1;
            }
            if let Some(fs) = &p.flow_sensor {
                if fs.kind() != Some(ComponentKind::FlowSensor) {
                    complain(&format!("{fs} on pipe `{}` is not a flow sensor (FIT prefix)", p.id));
                }
                match self.sensors.get(fs) {
                    None => complain(&format!("flow sensor {fs} has no declared domain")),
                    Some(dom) => {
                        if dom.lo > 0.0 || dom.hi < p.nominal_flow_m3h {
                            complain(&format!(
                                "sensor {fs} domain must cover flows [0, {}]",
                                p.nominal_flow_m3h
                            ));
                        }
                    }
                }
                *attach_counts.entry(fs.clone()).or_default() += 1;
            }
        }

        for ps in &self.pressure_sensors {
            if ps.id.kind() != Some(ComponentKind::PressureSensor) {
                complain(&format!("{} is not a pressure sensor (DPIT prefix)", ps.id));
            }
            if self.pipe_index(&ps.pipe).is_none() {
                complain(&format!("{} references unknown pipe `{}`", ps.id, ps.pipe));
            }
            if self.sensors.get(&ps.id).is_none() {
                complain(&format!("pressure sensor {} has no declared domain", ps.id));
            }
            if ps.gain_bar_per_m3h <= 0.0 {
                complain(&format!("{} needs a positive gain", ps.id));
            }
            *attach_counts.entry(ps.id.clone()).or_default() += 1;
        }

        for (id, n) in &attach_counts {
            if *n > 1 {
                complain(&format!("component {id} is attached {n} times; expected once"));
            }
        }
        for id in self.sensors.keys() {
            if !attach_counts.contains_key(id) {
                complain(&format!("sensor {id} is declared but attached to nothing"));
            }
        }

        let actuators = self.actuators();
        for (i, rule) in self.rules.iter().enumerate() {
            for sensor in rule.guard.sensors() {
                if !self.sensors.contains_key(&sensor) {
                    complain(&format!("rule #{i} guard references unknown sensor {sensor}"));
                }
            }
            for (sensor, value) in rule.guard.comparisons() {
                if let Some(dom) = self.sensors.get(&sensor) {
                    if !dom.contains(value) {
                        complain(&format!(
                            "rule #{i} compares {sensor} against {value}, outside its domain"
                        ));
                    }
                }
            }
            for (act, value) in &rule.commands {
                match actuators.get(act) {
                    None => complain(&format!("rule #{i} commands unknown actuator {act}")),
                    Some(dom) if !dom.contains(*value) => {
                        complain(&format!("rule #{i} commands {act} := {value}, outside its domain"))
                    }
                    _ => {}
                }
            }
        }

        // tank graph must be acyclic from sources to drains
        if self.has_cycle() {
            complain("pipe graph has a cycle between tanks");
        }

        for (tank, level) in &self.nominal.levels {
            match self.tank_index(tank) {
                None => complain(&format!("nominal level names unknown tank `{tank}`")),
                Some(i) => {
                    if *level < 0.0 || *level > self.tanks[i].max_level_mm {
                        complain(&format!("nominal level of `{tank}` outside [0, max]"));
                    }
                }
            }
        }
        for t in &self.tanks {
            if !self.nominal.levels.contains_key(&t.id) {
                complain(&format!("nominal state misses a level for tank `{}`", t.id));
            }
        }
        for (act, value) in &self.nominal.commands {
            match actuators.get(act) {
                None => complain(&format!("nominal command names unknown actuator {act}")),
                Some(dom) if !dom.contains(*value) => {
                    complain(&format!("nominal command {act} := {value} outside its domain"))
                }
                _ => {}
            }
        }
        for act in actuators.keys() {
            if !self.nominal.commands.iter().any(|(a, _)| a == act) {
                complain(&format!("nominal state misses a command for {act}"));
            }
        }

        out
    }

    fn has_cycle(&self) -> bool {
        let n = self.tanks.len();
        let mut adj = vec![Vec::new(); n];
        for p in &self.pipes {
            if let (Endpoint::Tank(a), Endpoint::Tank(b)) = (&p.from, &p.to) {
                if let (Some(i), Some(j)) = (self.tank_index(a), self.tank_index(b)) {
                    adj[i].push(j);
                }
            }
        }
        // colours: 0 unvisited, 1 on stack, 2 done
        fn dfs(v: usize, adj: &[Vec<usize>], colour: &mut [u8]) -> bool {
            colour[v] = 1;
            for &w in &adj[v] {
                if colour[w] == 1 || (colour[w] == 0 && dfs(w, adj, colour)) {
                    return true;
                }
            }
            colour[v] = 2;
            false
        }
        let mut colour = vec![0u8; n];
        (0..n).any(|v| colour[v] == 0 && dfs(v, &adj, &mut colour))
    }

    /// Control state holding the model's documented nominal commands.
    pub fn nominal_control_state(&self) -> ControlState {
        ControlState {
            commanded: Configurations::from_entries(self.nominal.commands.clone()),
        }
    }

    /// Physical state with the given levels and flows consistent with `q`.
    pub fn initial_state(&self, levels: &BTreeMap<String, f64>, q: &ControlState) -> PhysicalState {
        let mut state = PhysicalState {
            levels: self.tanks.iter().map(|t| levels.get(&t.id).copied().unwrap_or(0.0)).collect(),
            flows: vec![0.0; self.pipes.len()],
            clock_secs: 0,
        };
        state.flows = self.compute_flows(&state, &q.commanded);
        state
    }

    /// Nominal (control, physical) start point.
    pub fn nominal_start(&self) -> (ControlState, PhysicalState) {
        let q = self.nominal_control_state();
        let x = self.initial_state(&self.nominal.levels, &q);
        (q, x)
    }

    fn compute_flows(&self, x: &PhysicalState, config: &Configurations) -> Vec<f64> {
        self.compute_flows_resolved(&Resolution::compute(self), x, config)
    }

    fn compute_flows_resolved(
        &self,
        res: &Resolution,
        x: &PhysicalState,
        config: &Configurations,
    ) -> Vec<f64> {
        self.pipes
            .iter()
            .enumerate()
            .map(|(pi, pipe)| {
                let valve_open = pipe
                    .valve
                    .as_ref()
                    .map(|v| config.get(v).map(|s| s.enables_flow()).unwrap_or(false))
                    .unwrap_or(true);
                let pump_running = pipe.pumps.is_empty()
                    || pipe
                        .pumps
                        .iter()
                        .any(|p| config.get(p).map(|s| s.enables_flow()).unwrap_or(false));
                if !(valve_open && pump_running) {
                    return 0.0;
                }
                if let Some(i) = res.from_idx[pi] {
                    if x.levels[i] <= 0.0 {
                        return 0.0;
                    }
                }
                if let Some(i) = res.to_idx[pi] {
                    if x.levels[i] >= self.tanks[i].max_level_mm {
                        return 0.0;
                    }
                }
                pipe.nominal_flow_m3h
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct ModelViolation(pub String);

/// True water levels and pipe flows, indexed in model order.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalState {
    pub levels: Vec<f64>,
    pub flows: Vec<f64>,
    pub clock_secs: u64,
}

impl PhysicalState {
    pub fn level_of(&self, model: &PlantModel, tank: &str) -> Option<f64> {
        model.tank_index(tank).map(|i| self.levels[i])
    }

    pub fn named_levels(&self, model: &PlantModel) -> BTreeMap<String, f64> {
        model
            .tanks
            .iter()
            .enumerate()
            .map(|(i, t)| (t.id.clone(), self.levels[i]))
            .collect()
    }
}

/// Controller memory: the last commanded state of every actuator. Actuators
/// not commanded by any satisfied rule this tick hold their previous value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ControlState {
    pub commanded: Configurations,
}

impl ControlState {
    pub fn new(commanded: Configurations) -> Self {
        ControlState { commanded }
    }
}

/// Extracts sensor readings from the true physical state.
pub fn observe(model: &PlantModel, x: &PhysicalState) -> Readings {
    let mut entries = Vec::with_capacity(model.sensors.len());
    for (i, tank) in model.tanks.iter().enumerate() {
        entries.push((tank.level_sensor.clone(), x.levels[i]));
    }
    for (i, pipe) in model.pipes.iter().enumerate() {
        if let Some(fs) = &pipe.flow_sensor {
            entries.push((fs.clone(), x.flows[i]));
        }
    }
    for ps in &model.pressure_sensors {
        let flow = model.pipe_index(&ps.pipe).map(|i| x.flows[i]).unwrap_or(0.0);
        let raw = ps.gain_bar_per_m3h * flow;
        let dom = model.sensors.get(&ps.id);
        let value = dom.map(|d| d.clamp(raw)).unwrap_or(raw);
        entries.push((ps.id.clone(), value));
    }
    Readings::from_entries(entries)
}

/// Runs the controller for one tick on the (possibly spoofed) readings.
/// Returns the updated control state and the full commanded configuration.
pub fn control_step(
    model: &PlantModel,
    q: &ControlState,
    readings: &Readings,
) -> Result<(ControlState, Configurations), PlantError> {
    let mut winner: BTreeMap<ComponentId, (i32, ActuatorValue, usize)> = BTreeMap::new();
    for (idx, rule) in model.rules.iter().enumerate() {
        if !rule.guard.eval(readings)? {
            continue;
        }
        for (act, value) in &rule.commands {
            match winner.get(act) {
                Some((pri, existing, other_idx)) => {
                    if rule.priority > *pri {
                        winner.insert(act.clone(), (rule.priority, *value, idx));
                    } else if rule.priority == *pri && existing != value {
                        return Err(PlantError::ModelValidation(format!(
                            "rules #{other_idx} and #{idx} both command {act} at priority {} with different values",
                            rule.priority
                        )));
                    }
                }
                None => {
                    winner.insert(act.clone(), (rule.priority, *value, idx));
                }
            }
        }
    }
    let mut commanded = q.commanded.clone();
    for (act, (_, value, _)) in winner {
        commanded.set(&act, value);
    }
    let next = ControlState { commanded: commanded.clone() };
    Ok((next, commanded))
}

/// Pre-resolved lookups for the per-tick hot path: pipe endpoint indices and
/// actuator domains. Derived from a model once per simulator.
#[derive(Debug, Clone)]
pub struct Resolution {
    pub from_idx: Vec<Option<usize>>,
    pub to_idx: Vec<Option<usize>>,
    pub actuators: BTreeMap<ComponentId, ActuatorDomain>,
}

impl Resolution {
    pub fn compute(model: &PlantModel) -> Self {
        let resolve = |e: &Endpoint| match e {
            Endpoint::Tank(t) => model.tank_index(t),
            _ => None,
        };
        Resolution {
            from_idx: model.pipes.iter().map(|p| resolve(&p.from)).collect(),
            to_idx: model.pipes.iter().map(|p| resolve(&p.to)).collect(),
            actuators: model.actuators(),
        }
    }
}

/// A tank hit its physical bound during integration and the excess was cut.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClampEvent {
    pub clock_secs: u64,
    pub tank: String,
    pub attempted_mm: f64,
    pub clamped_mm: f64,
}

/// Advances the physical process by `dt` seconds under a fixed configuration,
/// sub-stepping at tick granularity. Clamp events record where conservation
/// was intentionally broken at a tank bound.
pub fn physics_step_events(
    model: &PlantModel,
    x: &PhysicalState,
    config: &Configurations,
    dt: u64,
) -> Result<(PhysicalState, Vec<ClampEvent>), PlantError> {
    physics_step_resolved(model, &Resolution::compute(model), x, config, dt)
}

fn physics_step_resolved(
    model: &PlantModel,
    res: &Resolution,
    x: &PhysicalState,
    config: &Configurations,
    dt: u64,
) -> Result<(PhysicalState, Vec<ClampEvent>), PlantError> {
    if dt == 0 || dt % model.tick_secs != 0 {
        return Err(PlantError::BadTimeStep { dt, tick: model.tick_secs });
    }
    let mut state = x.clone();
    let mut events = Vec::new();
    let ticks = dt / model.tick_secs;
    let tick_hours = model.tick_secs as f64 / SECS_PER_HOUR;
    let mut deltas = vec![0.0f64; model.tanks.len()];
    for _ in 0..ticks {
        let flows = model.compute_flows_resolved(res, &state, config);
        deltas.iter_mut().for_each(|d| *d = 0.0);
        for (i, _) in model.pipes.iter().enumerate() {
            let vol = flows[i] * tick_hours; // m³ moved this tick
            if let Some(t) = res.from_idx[i] {
                deltas[t] -= vol;
            }
            if let Some(t) = res.to_idx[i] {
                deltas[t] += vol;
            }
        }
        for (i, tank) in model.tanks.iter().enumerate() {
            let dlevel = deltas[i] / tank.area_m2 * MM_PER_M;
            let attempted = state.levels[i] + dlevel;
            let clamped = attempted.clamp(0.0, tank.max_level_mm);
            if clamped != attempted {
                events.push(ClampEvent {
                    clock_secs: state.clock_secs,
                    tank: tank.id.clone(),
                    attempted_mm: attempted,
                    clamped_mm: clamped,
                });
            }
            state.levels[i] = clamped;
        }
        state.flows = flows;
        state.clock_secs += model.tick_secs;
    }
    Ok((state, events))
}

pub fn physics_step(
    model: &PlantModel,
    x: &PhysicalState,
    config: &Configurations,
    dt: u64,
) -> Result<PhysicalState, PlantError> {
    physics_step_events(model, x, config, dt).map(|(s, _)| s)
}

/// Rewrites readings with the sensor capabilities in `caps`.
pub fn apply_sensor_caps(
    model: &PlantModel,
    readings: &Readings,
    caps: &CapabilitySet,
) -> Result<Readings, PlantError> {
    let mut out = readings.clone();
    for cap in caps.iter() {
        if let CapValue::Sensor(v) = cap.value {
            let dom = model
                .sensors
                .get(&cap.component)
                .ok_or_else(|| PlantError::UnknownComponent(cap.component.clone()))?;
            if !dom.contains(v) {
                return Err(PlantError::CapabilityDomain {
                    cap: cap.clone(),
                    reason: format!("spoof value {v} outside [{}, {}]", dom.lo, dom.hi),
                });
            }
            out.set(&cap.component, v);
        }
    }
    Ok(out)
}

/// Rewrites commanded configurations with the actuator capabilities in `caps`.
pub fn apply_actuator_caps(
    model: &PlantModel,
    config: &Configurations,
    caps: &CapabilitySet,
) -> Result<Configurations, PlantError> {
    apply_actuator_caps_resolved(&Resolution::compute(model), config, caps)
}

fn apply_actuator_caps_resolved(
    res: &Resolution,
    config: &Configurations,
    caps: &CapabilitySet,
) -> Result<Configurations, PlantError> {
    let actuators = &res.actuators;
    let mut out = config.clone();
    for cap in caps.iter() {
        if let CapValue::Actuator(v) = cap.value {
            let dom = actuators
                .get(&cap.component)
                .ok_or_else(|| PlantError::UnknownComponent(cap.component.clone()))?;
            if !dom.contains(v) {
                return Err(PlantError::CapabilityDomain {
                    cap: cap.clone(),
                    reason: format!("state {v} not in this actuator's domain"),
                });
            }
            out.set(&cap.component, v);
        }
    }
    Ok(out)
}

/// True testing-goal check: evaluates the goal on un-spoofed readings.
pub fn goal_satisfied(
    model: &PlantModel,
    goal: &SensorCondition,
    x: &PhysicalState,
) -> Result<bool, CondError> {
    goal.eval(&observe(model, x))
}

/// One trajectory-log line: what the plant looked like over one control
/// interval and what was injected into it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub clock_secs: u64,
    pub readings: BTreeMap<ComponentId, f64>,
    pub configurations: BTreeMap<ComponentId, ActuatorValue>,
    pub injected: Vec<Capability>,
}

/// Supplies the capability set to inject at each control interval.
pub trait CapabilityInjector {
    fn capabilities_at(&mut self, interval: u64) -> CapabilitySet;
}

pub struct NullInjector;

impl CapabilityInjector for NullInjector {
    fn capabilities_at(&mut self, _interval: u64) -> CapabilitySet {
        CapabilitySet::empty()
    }
}

pub struct ConstantInjector(pub CapabilitySet);

impl CapabilityInjector for ConstantInjector {
    fn capabilities_at(&mut self, _interval: u64) -> CapabilitySet {
        self.0.clone()
    }
}

/// Injects per-interval sets from `[from, to)` second spans.
pub struct ScriptInjector {
    pub spans: Vec<(u64, u64, CapabilitySet)>,
    pub tick_secs: u64,
}

impl CapabilityInjector for ScriptInjector {
    fn capabilities_at(&mut self, interval: u64) -> CapabilitySet {
        let at = interval * self.tick_secs;
        let mut out = CapabilitySet::empty();
        for (from, to, set) in &self.spans {
            if *from <= at && at < *to {
                for cap in set.iter() {
                    // later spans silently lose conflicting components
                    let _ = out.insert(cap.clone());
                }
            }
        }
        out
    }
}

impl<F: FnMut(u64) -> CapabilitySet> CapabilityInjector for F {
    fn capabilities_at(&mut self, interval: u64) -> CapabilitySet {
        self(interval)
    }
}

/// A live plant: one controller plus one physical process, stepped together.
/// Instances are independent; clone to fan out hypothetical runs.
#[derive(Debug, Clone)]
pub struct Simulator {
    model: Arc<PlantModel>,
    resolution: Arc<Resolution>,
    control: ControlState,
    physical: PhysicalState,
}

impl Simulator {
    pub fn new(model: Arc<PlantModel>, q0: ControlState, x0: PhysicalState) -> Self {
        let resolution = Arc::new(Resolution::compute(&model));
        Simulator { model, resolution, control: q0, physical: x0 }
    }

    pub fn from_nominal(model: Arc<PlantModel>) -> Self {
        let (q0, x0) = model.nominal_start();
        Simulator::new(model, q0, x0)
    }

    pub fn model(&self) -> &Arc<PlantModel> {
        &self.model
    }

    pub fn control_state(&self) -> &ControlState {
        &self.control
    }

    pub fn physical_state(&self) -> &PhysicalState {
        &self.physical
    }

    pub fn clock_secs(&self) -> u64 {
        self.physical.clock_secs
    }

    pub fn observe(&self) -> Readings {
        observe(&self.model, &self.physical)
    }

    /// Advances `secs` of plant time injecting `caps` at every control
    /// interval. The recorder sees one record per interval with true readings
    /// and effective (post-override) configurations.
    pub fn advance_recording(
        &mut self,
        caps: &CapabilitySet,
        secs: u64,
        mut recorder: impl FnMut(TrajectoryRecord, &[ClampEvent]),
    ) -> Result<(), PlantError> {
        if secs == 0 || secs % self.model.tick_secs != 0 {
            return Err(PlantError::BadTimeStep { dt: secs, tick: self.model.tick_secs });
        }
        let intervals = secs / self.model.tick_secs;
        for _ in 0..intervals {
            let true_readings = observe(&self.model, &self.physical);
            let spoofed = apply_sensor_caps(&self.model, &true_readings, caps)?;
            let (q_next, commanded) = control_step(&self.model, &self.control, &spoofed)?;
            let effective = apply_actuator_caps_resolved(&self.resolution, &commanded, caps)?;
            let (x_next, clamps) = physics_step_resolved(
                &self.model,
                &self.resolution,
                &self.physical,
                &effective,
                self.model.tick_secs,
            )?;
            let record = TrajectoryRecord {
                clock_secs: self.physical.clock_secs,
                readings: true_readings.iter().map(|(c, v)| (c.clone(), v)).collect(),
                configurations: effective.iter().map(|(c, v)| (c.clone(), v)).collect(),
                injected: caps.iter().cloned().collect(),
            };
            recorder(record, &clamps);
            self.control = q_next;
            self.physical = x_next;
        }
        Ok(())
    }

    /// Like `advance_recording` without the per-interval record overhead.
    pub fn advance(&mut self, caps: &CapabilitySet, secs: u64) -> Result<(), PlantError> {
        if secs == 0 || secs % self.model.tick_secs != 0 {
            return Err(PlantError::BadTimeStep { dt: secs, tick: self.model.tick_secs });
        }
        let intervals = secs / self.model.tick_secs;
        for _ in 0..intervals {
            let true_readings = observe(&self.model, &self.physical);
            let spoofed = apply_sensor_caps(&self.model, &true_readings, caps)?;
            let (q_next, commanded) = control_step(&self.model, &self.control, &spoofed)?;
            let effective = apply_actuator_caps_resolved(&self.resolution, &commanded, caps)?;
            let (x_next, _) = physics_step_resolved(
                &self.model,
                &self.resolution,
                &self.physical,
                &effective,
                self.model.tick_secs,
            )?;
            self.control = q_next;
            self.physical = x_next;
        }
        Ok(())
    }
}

/// Full synchronized run of the plant under injection.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// `(control, physical)` after every interval, index 0 being the start.
    pub states: Vec<(ControlState, PhysicalState)>,
    pub records: Vec<TrajectoryRecord>,
    pub clamp_events: Vec<ClampEvent>,
}

/// Runs the plant for `horizon_secs`, injecting whatever the injector supplies
/// at each control interval, and collects the whole trajectory. The recorded
/// states are the true ones; spoofed readings only ever pass through the
/// controller.
pub fn run_plant(
    model: &Arc<PlantModel>,
    q0: ControlState,
    x0: PhysicalState,
    horizon_secs: u64,
    injector: &mut dyn CapabilityInjector,
) -> Result<Trajectory, PlantError> {
    let mut sim = Simulator::new(model.clone(), q0, x0);
    let mut traj = Trajectory {
        states: vec![(sim.control.clone(), sim.physical.clone())],
        records: Vec::new(),
        clamp_events: Vec::new(),
    };
    let intervals = horizon_secs / model.tick_secs;
    for i in 0..intervals {
        let caps = injector.capabilities_at(i);
        let events = &mut traj.clamp_events;
        let records = &mut traj.records;
        sim.advance_recording(&caps, model.tick_secs, |rec, clamps| {
            records.push(rec);
            events.extend_from_slice(clamps);
        })?;
        traj.states.push((sim.control.clone(), sim.physical.clone()));
    }
    Ok(traj)
}
