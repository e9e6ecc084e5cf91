//! Counterfactual causality analysis of successful tests.
//!
//! A capability usage is causal when replaying the test without it no longer
//! reaches the goal. Replays run the recorded capability history as a linear
//! chain strategy from the test's recorded origin; pruning walks the maximal
//! equal-set slices of the history, removes one capability at a time, and
//! keeps whatever removal still succeeds. The result is a still-successful
//! test whose cumulative set over-approximates the causal capabilities, with
//! a successful counterexample on file for every removal.

use std::collections::BTreeSet;
use std::sync::Arc;

use crate::capability::{Capability, CapabilitySet, History, IndexError};
use crate::cond::{CapCondition, SensorCondition};
use crate::plant::{ControlState, PhysicalState, PlantError, PlantModel, Simulator};
use crate::strategy::{Derivation, FireOutcome, Strategy, TestTrace, Transition};

/// Extra do-nothing intervals appended to every replay: slow processes may
/// cross the goal threshold just after the last manipulation.
pub const GRACE_INTERVALS: usize = 2;

#[derive(Debug, thiserror::Error)]
pub enum CausalError {
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error("original test does not reproduce from its recorded origin: {0}")]
    NotReproducible(String),
    #[error(transparent)]
    Plant(#[from] PlantError),
}

/// Everything needed to re-execute a recorded test: its capability history,
/// the control/physical origin, the goal, and the interval length it used.
#[derive(Debug, Clone)]
pub struct ReplaySpec {
    pub history: History,
    pub origin: (ControlState, PhysicalState),
    pub goal: SensorCondition,
    pub dt_secs: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CausalVerdict {
    Causal,
    Pruned,
}

/// One counterfactual probe: capability `capability` removed over positions
/// `k..=l`. Pruned verdicts carry the successful counterexample replay.
#[derive(Debug, Clone)]
pub struct CausalRecord {
    pub capability: Capability,
    pub k: usize,
    pub l: usize,
    pub verdict: CausalVerdict,
    pub counterexample: Option<TestTrace>,
}

/// Linear chain that re-executes a fixed history: one literal-set transition
/// per position, then a do-nothing loop at the end.
pub fn replay_strategy(history: &History) -> Strategy {
    let n = history.len();
    let name = |i: usize| format!("r{i}");
    let states: Vec<String> = (0..=n).map(name).collect();
    let mut transitions: Vec<Transition> = history
        .iter()
        .enumerate()
        .map(|(i, set)| {
            Transition::new(
                name(i),
                name(i + 1),
                SensorCondition::True,
                CapCondition::exactly(set.clone()),
            )
        })
        .collect();
    transitions.push(Transition::new(
        name(n),
        name(n),
        SensorCondition::True,
        CapCondition::exactly(CapabilitySet::empty()),
    ));
    Strategy { states, initial: name(0), variables: vec![], transitions }
}

/// Removes `y` from every set across positions `k..=l` (one-based inclusive);
/// everything outside the range is untouched.
pub fn remove_capability(
    history: &History,
    y: &Capability,
    k: usize,
    l: usize,
) -> Result<History, IndexError> {
    if !(1 <= k && k <= l && l <= history.len()) {
        return Err(IndexError { k, l, len: history.len() });
    }
    let mut out = history.clone();
    for i in k - 1..l {
        out.0[i] = out.0[i].without(y);
    }
    Ok(out)
}

/// Run-length decomposition into maximal slices of equal capability sets,
/// one-based inclusive. Concatenating the slices reconstructs the history and
/// adjacent slices always hold different sets.
pub fn maximal_slices(history: &History) -> Vec<(usize, usize, CapabilitySet)> {
    let mut out: Vec<(usize, usize, CapabilitySet)> = Vec::new();
    for (i, set) in history.iter().enumerate() {
        match out.last_mut() {
            Some((_, l, current)) if current == set => *l = i + 1,
            _ => out.push((i + 1, i + 1, set.clone())),
        }
    }
    out
}

/// Result of one replay: the index of the first step after which the goal
/// held (positions beyond the history length fall in the grace horizon), plus
/// the executed trace truncated at that point.
#[derive(Debug, Clone)]
pub struct ReplayOutcome {
    pub success_step: Option<usize>,
    pub trace: TestTrace,
}

/// Re-executes capability histories from a fixed origin. Implementations must
/// be deterministic for the prune guarantees to hold.
pub trait ReplayExecutor {
    fn replay(&mut self, spec: &ReplaySpec, history: &History) -> Result<ReplayOutcome, PlantError>;
}

/// The plant simulator as replay executor.
pub struct SimulatorExecutor {
    pub model: Arc<PlantModel>,
    pub grace_intervals: usize,
}

impl SimulatorExecutor {
    pub fn new(model: Arc<PlantModel>) -> Self {
        SimulatorExecutor { model, grace_intervals: GRACE_INTERVALS }
    }
}

impl ReplayExecutor for SimulatorExecutor {
    fn replay(&mut self, spec: &ReplaySpec, history: &History) -> Result<ReplayOutcome, PlantError> {
        let strategy = Arc::new(replay_strategy(history));
        let sim = Simulator::new(self.model.clone(), spec.origin.0.clone(), spec.origin.1.clone());
        let mut derivation = Derivation::new(strategy.clone(), sim);
        let mut success_step = None;

        let total = history.len() + self.grace_intervals;
        for i in 0..total {
            let (transition, caps) = if i < history.len() {
                (strategy.transitions[i].clone(), history.0[i].clone())
            } else {
                (strategy.transitions[history.len()].clone(), CapabilitySet::empty())
            };
            match derivation.fire(&transition, &caps, spec.dt_secs)? {
                FireOutcome::Fired => {}
                // replay transitions are unconditional; a refusal means the
                // chain was mis-built
                FireOutcome::Refused(r) => unreachable!("replay transition refused: {r:?}"),
            }
            let done = crate::plant::goal_satisfied(
                &self.model,
                &spec.goal,
                derivation.simulator().physical_state(),
            )?;
            if done {
                success_step = Some(i + 1);
                break;
            }
        }

        let trace = derivation.finish(&spec.goal)?;
        Ok(ReplayOutcome { success_step, trace })
    }
}

/// Counterfactual probe: is removing `y` across `k..=l` fatal to the test?
/// Returns `(true, None)` when the modified replay never reaches the goal,
/// otherwise `(false, Some(counterexample))` with the successful replay.
pub fn is_causal(
    spec: &ReplaySpec,
    y: &Capability,
    k: usize,
    l: usize,
    executor: &mut dyn ReplayExecutor,
) -> Result<(bool, Option<TestTrace>), CausalError> {
    let modified = remove_capability(&spec.history, y, k, l)?;
    let outcome = executor.replay(spec, &modified)?;
    match outcome.success_step {
        Some(_) => Ok((false, Some(outcome.trace))),
        None => Ok((true, None)),
    }
}

/// Outcome of pruning: the final still-successful replay, the full probe
/// ledger, and how many replays it took.
#[derive(Debug)]
pub struct PruneResult {
    pub trace: TestTrace,
    pub records: Vec<CausalRecord>,
    pub probes: usize,
}

impl PruneResult {
    pub fn causal_set(&self) -> crate::capability::CumulativeSet {
        self.trace.history.cumulative_set()
    }
}

/// Removes non-causal capability usages from a successful test.
///
/// The original history must reproduce its success from the recorded origin.
/// Probe order is deterministic: slices left to right, capabilities within a
/// slice in component order. A non-causal probe replaces the working history
/// with the counterexample's (possibly shorter) history and slices are
/// recomputed; the loop ends when every capability of every slice has been
/// confirmed causal at its current position.
pub fn prune(spec: &ReplaySpec, executor: &mut dyn ReplayExecutor) -> Result<PruneResult, CausalError> {
    let initial = executor.replay(spec, &spec.history)?;
    if initial.success_step.is_none() {
        return Err(CausalError::NotReproducible(format!(
            "goal `{}` not reached replaying {} steps of {}s",
            spec.goal,
            spec.history.len(),
            spec.dt_secs
        )));
    }
    let mut working = initial.trace.history.clone();
    let mut confirmed: BTreeSet<(Capability, usize, usize)> = BTreeSet::new();
    let mut records = Vec::new();
    let mut probes = 0usize;

    loop {
        let mut candidate = None;
        'outer: for (k, l, set) in maximal_slices(&working) {
            for cap in set.iter() {
                let key = (cap.clone(), k, l);
                if !confirmed.contains(&key) {
                    candidate = Some(key);
                    break 'outer;
                }
            }
        }
        let Some((cap, k, l)) = candidate else { break };

        let probe_spec = ReplaySpec { history: working.clone(), ..spec.clone() };
        probes += 1;
        let (causal, counterexample) = is_causal(&probe_spec, &cap, k, l, executor)?;
        if causal {
            confirmed.insert((cap.clone(), k, l));
            records.push(CausalRecord {
                capability: cap,
                k,
                l,
                verdict: CausalVerdict::Causal,
                counterexample: None,
            });
        } else {
            let cx = counterexample.expect("non-causal probe carries its counterexample");
            debug_assert!(cx.successful);
            working = cx.history.clone();
            records.push(CausalRecord {
                capability: cap,
                k,
                l,
                verdict: CausalVerdict::Pruned,
                counterexample: Some(cx),
            });
        }
    }

    // final validation: one fresh replay of the minimised history
    let final_outcome = executor.replay(spec, &working)?;
    if final_outcome.success_step.is_none() {
        return Err(CausalError::NotReproducible(
            "minimised history failed its final validation replay".into(),
        ));
    }
    Ok(PruneResult { trace: final_outcome.trace, records, probes })
}
