//! The guided fuzzing loop: plan candidate walks through the strategy, score
//! them on a cloned simulator, execute the selected plan live, causally
//! minimise successes, and fold an exclusion strategy into the search so the
//! next test succeeds for different reasons.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::distributions::{Distribution, Uniform};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

use crate::capability::{Capability, CapabilitySet};
use crate::causal::{prune, CausalRecord, ReplaySpec, SimulatorExecutor};
use crate::component::{ComponentId, Readings};
use crate::cond::{Assignment, CondError, SensorCondition};
use crate::equiv::{compose, simplify, EquivError, EquivalenceClass};
use crate::plant::{goal_satisfied, PlantError, PlantModel, Simulator};
use crate::strategy::{Derivation, FireOutcome, Strategy, StrategyViolation, TestTrace};

pub const DEFAULT_WALKS_PER_ROUND: usize = 200;
pub const DEFAULT_WALK_LEN: usize = 3;
pub const DEFAULT_MAX_STRATEGY_STATES: usize = 10_000;
/// A composition is only attempted when the raw transition product stays
/// under this; beyond it the campaign keeps its strategy and relies on the
/// emission filter for class exclusion.
pub const COMPOSE_BUILD_BUDGET: usize = 100_000;
pub const SAMPLE_ATTEMPTS: usize = 1000;
/// Roulette fitness shift so zero-score walks keep a small selection chance.
pub const ROULETTE_EPSILON: f64 = 1e-3;

#[derive(Debug, thiserror::Error)]
pub enum FuzzError {
    #[error("strategy failed validation:\n{}", .0.iter().map(|v| format!("  - {v}")).collect::<Vec<_>>().join("\n"))]
    InvalidStrategy(Vec<StrategyViolation>),
    #[error("no capability set satisfying the condition found in {SAMPLE_ATTEMPTS} samples")]
    UnsatisfiableInBudget,
    #[error("no candidate walk could be generated from the strategy")]
    NoWalksGenerated,
    #[error("goal sensor {0} has no declared domain")]
    UnknownSensor(ComponentId),
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error(transparent)]
    Cond(#[from] CondError),
    #[error(transparent)]
    Equiv(#[from] EquivError),
    #[error(transparent)]
    Causal(#[from] crate::causal::CausalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Maximize,
    Minimize,
}

/// Scores how close readings are to an unsafe threshold crossing: 0 at the
/// harmless end of the safe range, 1 at the threshold, above 1 once the
/// reading is unsafe. Strictly monotone in the goal sensor's reading.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveSpec {
    pub sensor: ComponentId,
    pub direction: Direction,
    pub safe_lo: f64,
    pub safe_hi: f64,
}

impl ObjectiveSpec {
    /// The unsafe bound the objective drives the sensor towards.
    pub fn threshold(&self) -> f64 {
        match self.direction {
            Direction::Maximize => self.safe_hi,
            Direction::Minimize => self.safe_lo,
        }
    }

    pub fn value(&self, readings: &Readings) -> Result<f64, CondError> {
        let reading = readings
            .get(&self.sensor)
            .ok_or_else(|| CondError::UnknownSensor(self.sensor.clone()))?;
        let span = self.safe_hi - self.safe_lo;
        Ok(match self.direction {
            Direction::Maximize => (reading - self.safe_lo) / span,
            Direction::Minimize => (self.safe_hi - reading) / span,
        })
    }
}

/// Convenience free function mirroring `ObjectiveSpec::value`.
pub fn objective_value(spec: &ObjectiveSpec, readings: &Readings) -> Result<f64, CondError> {
    spec.value(readings)
}

/// A testing goal: the unsafe condition to reach, its guidance objective, and
/// the interval length each capability set is held for.
#[derive(Debug, Clone)]
pub struct Goal {
    pub name: String,
    pub condition: SensorCondition,
    pub objective: ObjectiveSpec,
    pub dt_secs: u64,
}

impl Goal {
    /// Goal of driving `sensor` above its safe range.
    pub fn high(model: &PlantModel, sensor: &str, dt_secs: u64) -> Result<Goal, FuzzError> {
        let id = ComponentId::new(sensor);
        let dom = model
            .sensor_domain(&id)
            .ok_or_else(|| FuzzError::UnknownSensor(id.clone()))?;
        Ok(Goal {
            name: format!("{sensor}-High"),
            condition: SensorCondition::cmp(id.clone(), crate::cond::CmpOp::Gt, dom.safe_hi),
            objective: ObjectiveSpec {
                sensor: id,
                direction: Direction::Maximize,
                safe_lo: dom.safe_lo,
                safe_hi: dom.safe_hi,
            },
            dt_secs,
        })
    }

    /// Goal of driving `sensor` below its safe range.
    pub fn low(model: &PlantModel, sensor: &str, dt_secs: u64) -> Result<Goal, FuzzError> {
        let id = ComponentId::new(sensor);
        let dom = model
            .sensor_domain(&id)
            .ok_or_else(|| FuzzError::UnknownSensor(id.clone()))?;
        Ok(Goal {
            name: format!("{sensor}-Low"),
            condition: SensorCondition::cmp(id.clone(), crate::cond::CmpOp::Lt, dom.safe_lo),
            objective: ObjectiveSpec {
                sensor: id,
                direction: Direction::Minimize,
                safe_lo: dom.safe_lo,
                safe_hi: dom.safe_hi,
            },
            dt_secs,
        })
    }
}

/// Interval lengths: tank levels respond slowly, flows and pressures almost
/// immediately.
pub const LEVEL_DT_SECS: u64 = 600;
pub const FAST_DT_SECS: u64 = 15;

/// The plant's goal catalogue: one goal per reachable unsafe threshold.
///
/// Level sensors get both directions when their safe range sits strictly
/// inside the physical range. Flow and pressure sensors only get a low goal,
/// and only when the safe range has room below: pipe flows are two-valued
/// (zero or nominal), so no manipulation can push a flow reading above the
/// nominal rate the safe range must already admit.
pub fn goal_catalogue(model: &PlantModel) -> Vec<Goal> {
    let mut out = Vec::new();
    for (id, dom) in &model.sensors {
        match id.kind() {
            Some(crate::component::ComponentKind::LevelSensor) => {
                if dom.safe_hi < dom.hi {
                    out.push(Goal::high(model, id.as_str(), LEVEL_DT_SECS).expect("declared"));
                }
                if dom.safe_lo > dom.lo {
                    out.push(Goal::low(model, id.as_str(), LEVEL_DT_SECS).expect("declared"));
                }
            }
            Some(crate::component::ComponentKind::FlowSensor)
            | Some(crate::component::ComponentKind::PressureSensor) => {
                if dom.safe_lo > dom.lo {
                    out.push(Goal::low(model, id.as_str(), FAST_DT_SECS).expect("declared"));
                }
            }
            _ => {}
        }
    }
    out
}

/// Which equivalence class a campaign diversifies against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassKind {
    /// Subset equivalence over the pruned causal capability set.
    CausalSet,
    StrongSet,
    StrongOrder,
}

impl std::str::FromStr for ClassKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "causal-set" => Ok(ClassKind::CausalSet),
            "strong-set" => Ok(ClassKind::StrongSet),
            "strong-order" => Ok(ClassKind::StrongOrder),
            other => Err(format!(
                "unknown class `{other}` (expected causal-set, strong-set, or strong-order)"
            )),
        }
    }
}

impl std::fmt::Display for ClassKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ClassKind::CausalSet => "causal-set",
            ClassKind::StrongSet => "strong-set",
            ClassKind::StrongOrder => "strong-order",
        };
        f.write_str(s)
    }
}

/// Stop conditions: the loop ends when any configured budget is exhausted.
#[derive(Debug, Clone, Default)]
pub struct Budgets {
    pub max_iterations: Option<usize>,
    pub wall: Option<Duration>,
    pub walks_per_round: Option<usize>,
    pub walk_len: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct Campaign {
    pub model: Arc<PlantModel>,
    pub goal: Goal,
    pub strategy: Strategy,
    pub class_kind: ClassKind,
    pub budgets: Budgets,
    pub seed: u64,
    /// Capabilities walks may sample from; defaults to every actuator
    /// capability of the plant.
    pub universe: Vec<Capability>,
    /// Per-tank level band that fresh nominal states are drawn from; tanks
    /// not listed use the middle half of their level sensor's safe range.
    pub init_band: BTreeMap<String, (f64, f64)>,
    pub max_strategy_states: usize,
}

impl Campaign {
    pub fn new(model: Arc<PlantModel>, goal: Goal, class_kind: ClassKind, seed: u64) -> Self {
        let universe = model.actuator_capabilities();
        Campaign {
            model,
            goal,
            strategy: Strategy::universal(),
            class_kind,
            budgets: Budgets::default(),
            seed,
            universe,
            init_band: BTreeMap::new(),
            max_strategy_states: DEFAULT_MAX_STRATEGY_STATES,
        }
    }

    fn walks_per_round(&self) -> usize {
        self.budgets.walks_per_round.unwrap_or(DEFAULT_WALKS_PER_ROUND)
    }

    fn walk_len(&self) -> usize {
        self.budgets.walk_len.unwrap_or(DEFAULT_WALK_LEN).max(1)
    }

    fn band_for(&self, tank: &str) -> (f64, f64) {
        if let Some(b) = self.init_band.get(tank) {
            return *b;
        }
        let t = self.model.tanks.iter().find(|t| t.id == tank).expect("tank exists");
        let dom = self.model.sensors[&t.level_sensor];
        let span = dom.safe_hi - dom.safe_lo;
        (dom.safe_lo + 0.25 * span, dom.safe_hi - 0.25 * span)
    }

    /// Fresh nominal start: levels drawn inside each tank's operating band,
    /// the documented nominal commands, and flows consistent with both.
    pub fn draw_start(&self, rng: &mut impl Rng) -> (crate::plant::ControlState, crate::plant::PhysicalState) {
        let q = self.model.nominal_control_state();
        let mut levels = BTreeMap::new();
        for tank in &self.model.tanks {
            let (lo, hi) = self.band_for(&tank.id);
            levels.insert(tank.id.clone(), Uniform::new_inclusive(lo, hi).sample(rng));
        }
        let x = self.model.initial_state(&levels, &q);
        (q, x)
    }
}

/// A concrete plan: transition indices into the strategy paired with the
/// sampled capability set for each step, plus the predicted objective score.
#[derive(Debug, Clone)]
pub struct Walk {
    pub steps: Vec<(usize, CapabilitySet)>,
    pub score: f64,
}

/// Uniformly samples a one-per-component subset of the universe satisfying
/// the capability condition under `alpha` (variables still unbound may freeze
/// to the sampled set). Falls back to a constructive pass for pinned-set and
/// membership conditions before giving up.
pub fn sample_capability_set(
    phi: &crate::cond::CapCondition,
    alpha: &Assignment,
    universe: &[Capability],
    rng: &mut impl Rng,
) -> Result<CapabilitySet, FuzzError> {
    let mut by_component: BTreeMap<&ComponentId, Vec<&Capability>> = BTreeMap::new();
    for cap in universe {
        by_component.entry(&cap.component).or_default().push(cap);
    }

    let satisfied = |set: &CapabilitySet| matches!(phi.eval_binding(set, alpha), Ok((true, _)));

    for _ in 0..SAMPLE_ATTEMPTS {
        let mut set = CapabilitySet::empty();
        for values in by_component.values() {
            // absent or one of the component's values, uniformly
            let choice = rng.gen_range(0..=values.len());
            if choice > 0 {
                set.insert(values[choice - 1].clone()).expect("one per component");
            }
        }
        if satisfied(&set) {
            return Ok(set);
        }
    }

    // constructive fallback: honour a literal pin directly, or force the
    // membership atoms of a conjunction into a random sample
    if let Some(pin) = phi.as_literal_pin() {
        if let Ok(set) = CapabilitySet::new(pin.iter().cloned()) {
            if satisfied(&set) {
                return Ok(set);
            }
        }
        return Err(FuzzError::UnsatisfiableInBudget);
    }
    let mut required: Vec<Capability> = Vec::new();
    let mut forbidden: Vec<Capability> = Vec::new();
    collect_membership_atoms(phi, &mut required, &mut forbidden);
    for _ in 0..8 {
        let mut set = CapabilitySet::empty();
        for values in by_component.values() {
            let choice = rng.gen_range(0..=values.len());
            if choice > 0 {
                set.insert(values[choice - 1].clone()).expect("one per component");
            }
        }
        for cap in &forbidden {
            set.remove(cap);
        }
        let mut ok = true;
        for cap in &required {
            for other in by_component.get(&cap.component).map(|v| v.as_slice()).unwrap_or(&[]) {
                set.remove(other);
            }
            set.remove(cap);
            if set.insert(cap.clone()).is_err() {
                ok = false;
            }
        }
        if ok && satisfied(&set) {
            return Ok(set);
        }
    }
    Err(FuzzError::UnsatisfiableInBudget)
}

fn collect_membership_atoms(
    phi: &crate::cond::CapCondition,
    required: &mut Vec<Capability>,
    forbidden: &mut Vec<Capability>,
) {
    use crate::cond::{CapCondition as C, SetExpr};
    match phi {
        C::And(a, b) => {
            collect_membership_atoms(a, required, forbidden);
            collect_membership_atoms(b, required, forbidden);
        }
        C::Subset(SetExpr::Lit(l), SetExpr::Used) => required.extend(l.iter().cloned()),
        C::Not(inner) => {
            if let C::Subset(SetExpr::Lit(l), SetExpr::Used) = inner.as_ref() {
                if l.len() == 1 {
                    forbidden.extend(l.iter().cloned());
                }
            }
        }
        _ => {}
    }
}

/// Fitness-proportionate choice over shifted scores.
pub fn roulette_index(scores: &[f64], rng: &mut impl Rng) -> usize {
    debug_assert!(!scores.is_empty());
    let min = scores.iter().cloned().fold(f64::INFINITY, f64::min);
    let fitness: Vec<f64> = scores.iter().map(|s| s - min + ROULETTE_EPSILON).collect();
    let total: f64 = fitness.iter().sum();
    let mut pick = rng.gen_range(0.0..total);
    for (i, f) in fitness.iter().enumerate() {
        if pick < *f {
            return i;
        }
        pick -= f;
    }
    fitness.len() - 1
}

/// Plans one walk: generates random candidate walks with concrete capability
/// sets, predicts each one's effect by rolling a cloned simulator forward,
/// and picks a winner by roulette-wheel selection over the objective scores.
/// The live simulator is never touched.
pub fn plan_walk(
    campaign: &Campaign,
    strategy: &Strategy,
    live: &Simulator,
    rng: &mut impl Rng,
) -> Result<Walk, FuzzError> {
    let mut candidates: Vec<Walk> = Vec::with_capacity(campaign.walks_per_round());
    let mut scores: Vec<f64> = Vec::with_capacity(campaign.walks_per_round());

    for _ in 0..campaign.walks_per_round() {
        let len = rng.gen_range(1..=campaign.walk_len());
        let Some(steps) = random_walk(strategy, campaign, len, rng) else {
            continue;
        };
        // predict: roll a clone forward through the walk's capability sets
        let mut sim = live.clone();
        let mut ok = true;
        for (_, set) in &steps {
            if sim.advance(set, campaign.goal.dt_secs).is_err() {
                ok = false;
                break;
            }
        }
        if !ok {
            continue;
        }
        let score = campaign.goal.objective.value(&sim.observe())?;
        candidates.push(Walk { steps, score });
        scores.push(score);
    }

    if candidates.is_empty() {
        return Err(FuzzError::NoWalksGenerated);
    }
    let winner = roulette_index(&scores, rng);
    Ok(candidates.swap_remove(winner))
}

fn random_walk(
    strategy: &Strategy,
    campaign: &Campaign,
    len: usize,
    rng: &mut impl Rng,
) -> Option<Vec<(usize, CapabilitySet)>> {
    let mut state = strategy.initial.as_str();
    let mut alpha = Assignment::new();
    let mut steps = Vec::with_capacity(len);
    for _ in 0..len {
        let outgoing: Vec<(usize, &crate::strategy::Transition)> = strategy.outgoing(state).collect();
        if outgoing.is_empty() {
            return None;
        }
        let (idx, transition) = outgoing[rng.gen_range(0..outgoing.len())];
        let set = sample_capability_set(&transition.caps, &alpha, &campaign.universe, rng).ok()?;
        let (ok, fresh) = transition.caps.eval_binding(&set, &alpha).ok()?;
        if !ok {
            return None;
        }
        for (var, value) in fresh {
            alpha.insert(var, value);
        }
        state = transition.to.as_str();
        steps.push((idx, set));
    }
    Some(steps)
}

/// Fires the planned walk on the live simulator. A sensor-guard refusal ends
/// the test early; the partial trace is still checked against the goal.
pub fn execute_plan(
    campaign: &Campaign,
    strategy: &Arc<Strategy>,
    walk: &Walk,
    live: Simulator,
) -> Result<TestTrace, FuzzError> {
    let mut derivation = Derivation::new(strategy.clone(), live);
    for (idx, set) in &walk.steps {
        let transition = strategy.transitions[*idx].clone();
        match derivation.fire(&transition, set, campaign.goal.dt_secs)? {
            FireOutcome::Fired => {}
            FireOutcome::Refused(_) => break,
        }
    }
    Ok(derivation.finish(&campaign.goal.condition)?)
}

/// One test the campaign emitted: the (possibly pruned) trace, the class it
/// anchors, and the causal ledger when causal mode ran.
#[derive(Debug)]
pub struct EmittedTest {
    pub trace: TestTrace,
    pub class: EquivalenceClass,
    pub causal_records: Vec<CausalRecord>,
    pub causal_probes: usize,
    pub iteration: usize,
}

impl EmittedTest {
    pub fn cumulative_set(&self) -> crate::capability::CumulativeSet {
        self.trace.history.cumulative_set()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IterationOutcome {
    Unsuccessful,
    Emitted,
    SkippedEquivalent,
    SkippedUnsafeStart,
    PlanningFailed(String),
    PruneFailed(String),
}

#[derive(Debug)]
pub struct CampaignResult {
    pub goal_name: String,
    pub dt_secs: u64,
    pub class_kind: ClassKind,
    pub seed: u64,
    pub tests: Vec<EmittedTest>,
    pub iterations: usize,
    pub successes: usize,
    pub outcomes: Vec<IterationOutcome>,
    /// Set once composing the next exclusion would blow the state cap; from
    /// then on class exclusion is enforced by the emission filter alone.
    pub composition_capped_at: Option<usize>,
    pub pairwise_non_equivalent: bool,
    pub wall: Duration,
}

/// Runs the fuzzing loop until a budget is exhausted.
///
/// Each iteration draws a fresh nominal start, plans a walk predicted to
/// approach the goal, executes it, and on success anchors an equivalence
/// class at the (causally pruned, in causal mode) test. The strategy is then
/// composed with the class's exclusion so later derivations cannot repeat the
/// class. A test equivalent to one already emitted is never emitted twice;
/// when exclusion strategies outgrow the state cap the campaign stops
/// composing and relies on that filter.
pub fn run_campaign(campaign: &Campaign) -> Result<CampaignResult, FuzzError> {
    let violations = campaign.strategy.validate(Some(&campaign.model));
    if !violations.is_empty() {
        return Err(FuzzError::InvalidStrategy(violations));
    }

    let start = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(campaign.seed);
    let mut strategy = Arc::new(campaign.strategy.clone());
    let mut tests: Vec<EmittedTest> = Vec::new();
    let mut outcomes = Vec::new();
    let mut successes = 0usize;
    let mut composition_capped_at = None;
    let mut iterations = 0usize;

    loop {
        if let Some(max) = campaign.budgets.max_iterations {
            if iterations >= max {
                break;
            }
        }
        if let Some(wall) = campaign.budgets.wall {
            if start.elapsed() >= wall {
                break;
            }
        }
        if campaign.budgets.max_iterations.is_none() && campaign.budgets.wall.is_none() {
            // refuse to loop forever on an unbudgeted campaign
            if iterations >= DEFAULT_WALKS_PER_ROUND {
                break;
            }
        }
        iterations += 1;

        let (q0, x0) = campaign.draw_start(&mut rng);
        if goal_satisfied(&campaign.model, &campaign.goal.condition, &x0)? {
            outcomes.push(IterationOutcome::SkippedUnsafeStart);
            continue;
        }
        let live = Simulator::new(campaign.model.clone(), q0, x0);

        let walk = match plan_walk(campaign, &strategy, &live, &mut rng) {
            Ok(w) => w,
            Err(FuzzError::NoWalksGenerated) => {
                outcomes.push(IterationOutcome::PlanningFailed("no walks generated".into()));
                continue;
            }
            Err(e) => return Err(e),
        };

        let trace = execute_plan(campaign, &strategy, &walk, live)?;
        if !trace.successful {
            outcomes.push(IterationOutcome::Unsuccessful);
            continue;
        }
        successes += 1;

        // anchor the class, pruning first in causal mode
        let (final_trace, class, causal_records, causal_probes) = match campaign.class_kind {
            ClassKind::CausalSet => {
                let (origin_q, origin_x) = trace.origin();
                let spec = ReplaySpec {
                    history: trace.history.clone(),
                    origin: (origin_q.clone(), origin_x.clone()),
                    goal: campaign.goal.condition.clone(),
                    dt_secs: campaign.goal.dt_secs,
                };
                let mut executor = SimulatorExecutor::new(campaign.model.clone());
                match prune(&spec, &mut executor) {
                    Ok(result) => {
                        let causal_set = result.causal_set();
                        if causal_set.is_empty() {
                            outcomes.push(IterationOutcome::PruneFailed(
                                "empty causal set: success did not depend on any injection".into(),
                            ));
                            continue;
                        }
                        let class = EquivalenceClass::capability_subset(
                            causal_set,
                            result.trace.history.clone(),
                        )
                        .expect("non-empty causal set");
                        (result.trace, class, result.records, result.probes)
                    }
                    Err(crate::causal::CausalError::NotReproducible(msg)) => {
                        outcomes.push(IterationOutcome::PruneFailed(msg));
                        continue;
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            ClassKind::StrongSet => {
                let class = EquivalenceClass::strong_set(trace.history.clone());
                (trace, class, Vec::new(), 0)
            }
            ClassKind::StrongOrder => {
                let class = EquivalenceClass::strong_order(trace.history.clone());
                (trace, class, Vec::new(), 0)
            }
        };

        // never emit a test that falls into a class already covered: each
        // earlier test's class must reject the newcomer. The newcomer's own
        // class places no constraint on earlier tests; a test whose causal
        // set is a strict subset of an earlier test's is a new, simpler cause.
        let duplicate = tests
            .iter()
            .any(|t| t.class.equivalent(&t.trace.history, &final_trace.history));
        if duplicate {
            outcomes.push(IterationOutcome::SkippedEquivalent);
            continue;
        }

        // fold the exclusion into the search space while it stays tractable
        if composition_capped_at.is_none() {
            match class.exclusion() {
                Ok(exclusion) => {
                    let build = strategy
                        .transitions
                        .len()
                        .saturating_mul(exclusion.transitions.len());
                    if build > COMPOSE_BUILD_BUDGET {
                        composition_capped_at = Some(iterations);
                    } else {
                        match compose(&strategy, &exclusion) {
                            Ok(product) => {
                                let slim = simplify(&product);
                                if slim.states.len() <= campaign.max_strategy_states
                                    && slim.transitions.len() <= COMPOSE_BUILD_BUDGET
                                {
                                    strategy = Arc::new(slim);
                                } else {
                                    composition_capped_at = Some(iterations);
                                }
                            }
                            Err(EquivError::ProductTooLarge { .. }) => {
                                composition_capped_at = Some(iterations);
                            }
                            Err(e) => return Err(e.into()),
                        }
                    }
                }
                Err(EquivError::SizeCapExceeded { .. }) => {
                    composition_capped_at = Some(iterations);
                }
                Err(e) => return Err(e.into()),
            }
        }

        tests.push(EmittedTest {
            trace: final_trace,
            class,
            causal_records,
            causal_probes,
            iteration: iterations,
        });
        outcomes.push(IterationOutcome::Emitted);
    }

    let pairwise_non_equivalent = pairwise_check(&tests);
    Ok(CampaignResult {
        goal_name: campaign.goal.name.clone(),
        dt_secs: campaign.goal.dt_secs,
        class_kind: campaign.class_kind,
        seed: campaign.seed,
        tests,
        iterations,
        successes,
        outcomes,
        composition_capped_at,
        pairwise_non_equivalent,
        wall: start.elapsed(),
    })
}

/// Post-hoc self-check in emission order: every test emitted later must fall
/// outside the class of every test emitted before it. This is exactly what
/// folding each exclusion into the strategy promises; the reverse direction
/// is deliberately unchecked because a later, strictly smaller causal set is
/// a legitimately different cause even though its own class would relate the
/// two tests.
pub fn pairwise_check(tests: &[EmittedTest]) -> bool {
    for (i, a) in tests.iter().enumerate() {
        for b in tests.iter().skip(i + 1) {
            if a.class.equivalent(&a.trace.history, &b.trace.history) {
                return false;
            }
        }
    }
    true
}

/// Stable per-goal seed derivation for fanned-out campaigns.
pub fn derive_seed(base: u64, goal_name: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(goal_name.as_bytes());
    let digest = hasher.finalize();
    let mut eight = [0u8; 8];
    eight.copy_from_slice(&digest[..8]);
    base ^ u64::from_le_bytes(eight)
}
