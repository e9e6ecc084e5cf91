//! Equivalence classes over successful tests, strategies that exclude a whole
//! class from further derivation, parallel composition, and small-scale
//! language oracles.
//!
//! Three relations decide when two tests count as "the same": sharing a given
//! capability subset, using exactly the same cumulative capability set, or
//! applying capability sets in the same order. For each relation there is an
//! automaton construction whose language avoids the anchor test's class, so
//! composing it with a strategy steers further derivations away from tests
//! already covered.
//!
//! Languages here are prefix-closed: every prefix of a derivable history is
//! itself derivable, because a test may stop after any step. Exclusion is
//! therefore necessarily one-sided for order equivalence (a strict prefix of
//! an excluded pattern cannot itself be excluded without also killing every
//! diverging extension), and exact-set exclusion is exact on histories drawn
//! from subsets of the anchor's cumulative set. The `excluded` predicate
//! documents precisely what each construction rejects, and the oracle tests
//! hold the constructions to it.

use std::collections::BTreeSet;

use crate::capability::{CapabilitySet, CumulativeSet, History};
use crate::cond::{Assignment, CapCondition, SensorCondition, SetExpr};
use crate::strategy::{Strategy, Transition};

pub const DEFAULT_EXACT_SET_CAP: usize = 12;
pub const DEFAULT_ENUM_BUDGET: u128 = 1_000_000;
/// Upper bound on `|Q1| × |Q2|` a composition will materialise.
pub const MAX_PRODUCT_STATES: usize = 2_000_000;
/// Upper bound on the transition pairs a composition will materialise.
pub const MAX_PRODUCT_TRANSITIONS: usize = 2_000_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EquivError {
    #[error("cannot exclude the empty capability set: every test would be excluded")]
    EmptySet,
    #[error("cumulative set of size {size} exceeds the exact-set construction cap {cap}")]
    SizeCapExceeded { size: usize, cap: usize },
    #[error("order anchor must be non-empty and free of consecutive duplicates")]
    NotDeduplicated,
    #[error("enumeration of {needed} candidate histories exceeds the budget {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },
    #[error("composition would materialise {states} product states (cap {cap})")]
    ProductTooLarge { states: usize, cap: usize },
}

/// Collapses consecutive repeats: the order in which distinct capability sets
/// were applied. `P P Q Q Q P` becomes `P Q P`; the empty history stays empty.
pub fn usage_order(history: &History) -> History {
    let mut out: Vec<CapabilitySet> = Vec::new();
    for set in history.iter() {
        if out.last() != Some(set) {
            out.push(set.clone());
        }
    }
    History(out)
}

fn is_prefix(a: &History, b: &History) -> bool {
    a.len() <= b.len() && a.iter().zip(b.iter()).all(|(x, y)| x == y)
}

/// Which relation a class is built on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EquivalenceKind {
    /// Tests are equivalent when both used every capability in the set.
    CapabilitySubset(CumulativeSet),
    /// Tests are equivalent when their cumulative capability sets are equal.
    StrongSet,
    /// Tests are equivalent when one usage order is a prefix of the other.
    StrongOrder,
}

/// An equivalence class: a relation kind anchored at one reference history.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EquivalenceClass {
    pub kind: EquivalenceKind,
    pub anchor: History,
}

impl EquivalenceClass {
    pub fn capability_subset(y: CumulativeSet, anchor: History) -> Result<Self, EquivError> {
        if y.is_empty() {
            return Err(EquivError::EmptySet);
        }
        debug_assert!(
            y.is_subset(&anchor.cumulative_set()),
            "subset anchor must use every capability of Y"
        );
        Ok(EquivalenceClass { kind: EquivalenceKind::CapabilitySubset(y), anchor })
    }

    pub fn strong_set(anchor: History) -> Self {
        EquivalenceClass { kind: EquivalenceKind::StrongSet, anchor }
    }

    pub fn strong_order(anchor: History) -> Self {
        EquivalenceClass { kind: EquivalenceKind::StrongOrder, anchor }
    }

    /// The relation itself, applied to two histories of successful tests.
    pub fn equivalent(&self, a: &History, b: &History) -> bool {
        match &self.kind {
            EquivalenceKind::CapabilitySubset(y) => {
                a == b || (y.is_subset(&a.cumulative_set()) && y.is_subset(&b.cumulative_set()))
            }
            EquivalenceKind::StrongSet => a.cumulative_set() == b.cumulative_set(),
            EquivalenceKind::StrongOrder => {
                let oa = usage_order(a);
                let ob = usage_order(b);
                is_prefix(&oa, &ob) || is_prefix(&ob, &oa)
            }
        }
    }

    /// Exactly the histories the exclusion strategy refuses to derive.
    ///
    /// For a capability subset this coincides with being equivalent to the
    /// anchor. For the exact-set kind it is "the running union of within-set
    /// steps reaches the anchor's cumulative set before any step goes outside
    /// it" (equal to the relation on histories confined to subsets of the
    /// anchor set). For order equivalence it is the one-sided half of the
    /// relation: the anchor's usage order is a prefix of the history's.
    pub fn excluded(&self, history: &History) -> bool {
        match &self.kind {
            EquivalenceKind::CapabilitySubset(y) => y.is_subset(&history.cumulative_set()),
            EquivalenceKind::StrongSet => {
                let c = self.anchor.cumulative_set();
                let mut union = CumulativeSet::new();
                for set in history.iter() {
                    if !set.as_set().is_subset(&c) {
                        return false;
                    }
                    union.extend(set.iter().cloned());
                    if union == c {
                        return true;
                    }
                }
                false
            }
            EquivalenceKind::StrongOrder => {
                is_prefix(&usage_order(&self.anchor), &usage_order(history))
            }
        }
    }

    /// Builds the strategy whose language is every history this class does
    /// not exclude.
    pub fn exclusion(&self) -> Result<Strategy, EquivError> {
        match &self.kind {
            EquivalenceKind::CapabilitySubset(y) => exclude_capability_subset(y),
            EquivalenceKind::StrongSet => {
                exclude_exact_set(&self.anchor.cumulative_set(), DEFAULT_EXACT_SET_CAP)
            }
            EquivalenceKind::StrongOrder => exclude_usage_order(&usage_order(&self.anchor)),
        }
    }
}

/// Hub-and-branch exclusion for a capability subset `{y1..yn}`: the hub
/// self-loop forbids all of the set, and each branch commits to never using
/// one particular `yi`. Derivable histories are exactly those that skip at
/// least one member.
pub fn exclude_capability_subset(y: &CumulativeSet) -> Result<Strategy, EquivError> {
    if y.is_empty() {
        return Err(EquivError::EmptySet);
    }
    let caps: Vec<_> = y.iter().cloned().collect();
    let hub = "e0".to_string();
    let mut states = vec![hub.clone()];
    let mut transitions = Vec::new();

    let mut forbid_all = CapCondition::excludes(caps[0].clone());
    for c in &caps[1..] {
        forbid_all = forbid_all.and(CapCondition::excludes(c.clone()));
    }
    transitions.push(Transition::new(hub.clone(), hub.clone(), SensorCondition::True, forbid_all));

    for (i, cap) in caps.iter().enumerate() {
        let branch = format!("e{}", i + 1);
        states.push(branch.clone());
        transitions.push(Transition::new(
            hub.clone(),
            branch.clone(),
            SensorCondition::True,
            CapCondition::excludes(cap.clone()),
        ));
        transitions.push(Transition::new(
            branch.clone(),
            branch,
            SensorCondition::True,
            CapCondition::excludes(cap.clone()),
        ));
    }

    Ok(Strategy { states, initial: hub, variables: vec![], transitions })
}

fn subset_from_mask(caps: &[crate::capability::Capability], mask: usize) -> CumulativeSet {
    caps.iter()
        .enumerate()
        .filter(|(i, _)| mask & (1 << i) != 0)
        .map(|(_, c)| c.clone())
        .collect()
}

/// Lattice exclusion for an exact cumulative set `C`: states track the running
/// union of within-`C` steps through the proper subsets of `C`, a sink accepts
/// everything once some step uses a capability outside `C`, and no state
/// represents `C` itself, so histories whose within-`C` running union reaches
/// `C` cannot be derived.
pub fn exclude_exact_set(c: &CumulativeSet, cap: usize) -> Result<Strategy, EquivError> {
    let n = c.len();
    if n == 0 {
        // a do-nothing anchor has no usable lattice start state
        return Err(EquivError::EmptySet);
    }
    if n > cap {
        return Err(EquivError::SizeCapExceeded { size: n, cap });
    }
    let caps: Vec<_> = c.iter().cloned().collect();
    let full_mask: usize = (1usize << n) - 1;

    let star = "sx".to_string();
    let state_name = |mask: usize| format!("s{mask}");

    let mut states = Vec::new();
    let mut transitions = Vec::new();

    // proper subsets only; the full set deliberately has no state
    for mask in 0..full_mask {
        states.push(state_name(mask));
    }
    states.push(star.clone());

    transitions.push(Transition::new(
        star.clone(),
        star.clone(),
        SensorCondition::True,
        CapCondition::True,
    ));

    let outside_escape = CapCondition::Not(Box::new(CapCondition::Subset(
        SetExpr::Used,
        SetExpr::Lit(c.clone()),
    )));
    for mask in 0..full_mask {
        transitions.push(Transition::new(
            state_name(mask),
            star.clone(),
            SensorCondition::True,
            outside_escape.clone(),
        ));
        // monotone moves to any equal-or-larger proper subset
        let mut sup = mask;
        loop {
            if sup != full_mask {
                let gained = subset_from_mask(&caps, sup & !mask);
                let bound = subset_from_mask(&caps, sup);
                let cond = CapCondition::Subset(SetExpr::Lit(gained), SetExpr::Used)
                    .and(CapCondition::Subset(SetExpr::Used, SetExpr::Lit(bound)));
                transitions.push(Transition::new(
                    state_name(mask),
                    state_name(sup),
                    SensorCondition::True,
                    cond,
                ));
            }
            if sup == full_mask {
                break;
            }
            sup = (sup + 1) | mask;
        }
    }

    Ok(Strategy { states, initial: state_name(0), variables: vec![], transitions })
}

/// Pattern-tracker exclusion for a usage order `Y1 … Yk`: progress states walk
/// the pattern, any set that breaks it escapes to a universal sink, and there
/// is no state for completing the k-th run. Derivable histories are exactly
/// those whose usage order does not extend (or equal) the anchor order.
pub fn exclude_usage_order(ord: &History) -> Result<Strategy, EquivError> {
    let k = ord.len();
    if k == 0 {
        return Err(EquivError::NotDeduplicated);
    }
    for i in 1..k {
        if ord.0[i] == ord.0[i - 1] {
            return Err(EquivError::NotDeduplicated);
        }
    }
    let sink = format!("t{k}");
    let name = |i: usize| format!("t{i}");
    let differs =
        |set: &CapabilitySet| CapCondition::Not(Box::new(CapCondition::exactly(set.clone())));

    let mut states: Vec<String> = (0..k).map(name).collect();
    states.push(sink.clone());

    let mut transitions = vec![
        Transition::new(name(0), sink.clone(), SensorCondition::True, differs(&ord.0[0])),
        Transition::new(sink.clone(), sink.clone(), SensorCondition::True, CapCondition::True),
    ];
    for i in 1..k {
        transitions.push(Transition::new(
            name(i - 1),
            name(i),
            SensorCondition::True,
            CapCondition::exactly(ord.0[i - 1].clone()),
        ));
        transitions.push(Transition::new(
            name(i),
            name(i),
            SensorCondition::True,
            CapCondition::exactly(ord.0[i - 1].clone()),
        ));
        transitions.push(Transition::new(
            name(i),
            sink.clone(),
            SensorCondition::True,
            differs(&ord.0[i - 1]).and(differs(&ord.0[i])),
        ));
    }

    Ok(Strategy { states, initial: name(0), variables: vec![], transitions })
}

/// Parallel composition: both strategies step in lockstep, so the composed
/// language is the intersection of the component languages. State pairs get
/// bracketed names; colliding variable names on the right side are renamed.
pub fn compose(t1: &Strategy, t2: &Strategy) -> Result<Strategy, EquivError> {
    let states_product = t1.states.len().checked_mul(t2.states.len()).unwrap_or(usize::MAX);
    if states_product > MAX_PRODUCT_STATES {
        return Err(EquivError::ProductTooLarge {
            states: states_product,
            cap: MAX_PRODUCT_STATES,
        });
    }
    let transitions_product =
        t1.transitions.len().checked_mul(t2.transitions.len()).unwrap_or(usize::MAX);
    if transitions_product > MAX_PRODUCT_TRANSITIONS {
        return Err(EquivError::ProductTooLarge {
            states: transitions_product,
            cap: MAX_PRODUCT_TRANSITIONS,
        });
    }

    let mut right = t2.clone();
    let mut renames = Vec::new();
    for var in &t2.variables {
        if t1.variables.contains(var) {
            let mut fresh = format!("{var}_2");
            let mut n = 2;
            while t1.variables.contains(&fresh) || t2.variables.contains(&fresh) {
                n += 1;
                fresh = format!("{var}_{n}");
            }
            renames.push((var.clone(), fresh));
        }
    }
    for (from, to) in &renames {
        for v in right.variables.iter_mut() {
            if v == from {
                *v = to.clone();
            }
        }
        for t in right.transitions.iter_mut() {
            t.caps.rename_var(from, to);
        }
    }

    let pair = |a: &str, b: &str| format!("({a}~{b})");

    let mut states = Vec::with_capacity(states_product);
    for a in &t1.states {
        for b in &right.states {
            states.push(pair(a, b));
        }
    }

    let mut transitions = Vec::new();
    for ta in &t1.transitions {
        for tb in &right.transitions {
            transitions.push(Transition::new(
                pair(&ta.from, &tb.from),
                pair(&ta.to, &tb.to),
                SensorCondition::And(Box::new(ta.guard.clone()), Box::new(tb.guard.clone())),
                CapCondition::And(Box::new(ta.caps.clone()), Box::new(tb.caps.clone())),
            ));
        }
    }

    let mut variables = t1.variables.clone();
    variables.extend(right.variables.clone());

    Ok(Strategy {
        states,
        initial: pair(&t1.initial, &right.initial),
        variables,
        transitions,
    })
}

fn fold_true_sensor(c: &SensorCondition) -> SensorCondition {
    match c {
        SensorCondition::And(a, b) => {
            let a = fold_true_sensor(a);
            let b = fold_true_sensor(b);
            match (a, b) {
                (SensorCondition::True, x) | (x, SensorCondition::True) => x,
                (a, b) => SensorCondition::And(Box::new(a), Box::new(b)),
            }
        }
        SensorCondition::Or(a, b) => {
            SensorCondition::Or(Box::new(fold_true_sensor(a)), Box::new(fold_true_sensor(b)))
        }
        SensorCondition::Not(a) => SensorCondition::Not(Box::new(fold_true_sensor(a))),
        other => other.clone(),
    }
}

fn fold_true_caps(c: &CapCondition) -> CapCondition {
    match c {
        CapCondition::And(a, b) => {
            let a = fold_true_caps(a);
            let b = fold_true_caps(b);
            match (a, b) {
                (CapCondition::True, x) | (x, CapCondition::True) => x,
                (a, b) => CapCondition::And(Box::new(a), Box::new(b)),
            }
        }
        CapCondition::Or(a, b) => {
            CapCondition::Or(Box::new(fold_true_caps(a)), Box::new(fold_true_caps(b)))
        }
        CapCondition::Not(a) => CapCondition::Not(Box::new(fold_true_caps(a))),
        other => other.clone(),
    }
}

/// Conjunction atoms of a condition, or `None` if the tree mixes in `or`
/// branches above the atom level (in which case no unsat claim is made).
fn conj_atoms(c: &CapCondition) -> Option<Vec<&CapCondition>> {
    match c {
        CapCondition::And(a, b) => {
            let mut left = conj_atoms(a)?;
            let right = conj_atoms(b)?;
            left.extend(right);
            Some(left)
        }
        CapCondition::True => Some(vec![]),
        CapCondition::Subset(..) | CapCondition::Eq(..) | CapCondition::Not(_) => Some(vec![c]),
        CapCondition::Or(..) => None,
    }
}

fn one_per_component(set: &CumulativeSet) -> bool {
    let mut seen = BTreeSet::new();
    set.iter().all(|cap| seen.insert(cap.component.clone()))
}

/// Conservative syntactic unsatisfiability: only ever answers `true` when no
/// used set and assignment can satisfy the condition.
fn syntactically_unsat(c: &CapCondition) -> bool {
    let Some(atoms) = conj_atoms(c) else {
        return false;
    };
    if !c.variables().is_empty() {
        return false;
    }
    // a literal pin decides `_` entirely: evaluate every atom against it
    let pins: Vec<&CumulativeSet> = atoms.iter().filter_map(|a| a.as_literal_pin()).collect();
    if let Some(pin) = pins.first() {
        if !one_per_component(pin) {
            return true;
        }
        let alpha = Assignment::new();
        return atoms.iter().any(|a| a.eval_raw(pin, &alpha) == Ok(false));
    }
    // otherwise lower and upper bounds on `_` must be compatible
    let mut lower = CumulativeSet::new();
    let mut uppers: Vec<&CumulativeSet> = Vec::new();
    for atom in &atoms {
        match atom {
            CapCondition::Subset(SetExpr::Lit(l), SetExpr::Used) => {
                lower.extend(l.iter().cloned());
            }
            CapCondition::Subset(SetExpr::Used, SetExpr::Lit(u)) => uppers.push(u),
            _ => {}
        }
    }
    if !one_per_component(&lower) {
        return true;
    }
    uppers.iter().any(|u| !lower.is_subset(u))
}

/// Normalises labels, drops transitions whose capability condition can never
/// be satisfied, and prunes states unreachable from the initial state.
pub fn simplify(strategy: &Strategy) -> Strategy {
    let mut transitions: Vec<Transition> = strategy
        .transitions
        .iter()
        .map(|t| Transition {
            from: t.from.clone(),
            to: t.to.clone(),
            guard: fold_true_sensor(&t.guard),
            caps: fold_true_caps(&t.caps),
        })
        .filter(|t| !syntactically_unsat(&t.caps))
        .collect();

    let mut reachable = BTreeSet::new();
    let mut frontier = vec![strategy.initial.clone()];
    while let Some(s) = frontier.pop() {
        if !reachable.insert(s.clone()) {
            continue;
        }
        for t in &transitions {
            if t.from == s && !reachable.contains(&t.to) {
                frontier.push(t.to.clone());
            }
        }
    }
    transitions.retain(|t| reachable.contains(&t.from) && reachable.contains(&t.to));
    let states: Vec<String> =
        strategy.states.iter().filter(|s| reachable.contains(*s)).cloned().collect();

    let used_vars: BTreeSet<String> =
        transitions.iter().flat_map(|t| t.caps.variables()).collect();
    let variables =
        strategy.variables.iter().filter(|v| used_vars.contains(*v)).cloned().collect();

    Strategy { states, initial: strategy.initial.clone(), variables, transitions }
}

fn alpha_candidates(vars: &BTreeSet<String>, sets: &BTreeSet<CapabilitySet>) -> Vec<Assignment> {
    if vars.is_empty() {
        return vec![Assignment::new()];
    }
    let pool: Vec<CapabilitySet> = sets.iter().cloned().collect();
    let mut out = vec![Assignment::new()];
    for var in vars {
        let mut next = Vec::with_capacity(out.len() * pool.len());
        for alpha in &out {
            for value in &pool {
                let mut a = alpha.clone();
                a.insert(var.clone(), value.clone());
                next.push(a);
            }
        }
        out = next;
    }
    out
}

fn vars_in_strategy(strategy: &Strategy) -> BTreeSet<String> {
    strategy.transitions.iter().flat_map(|t| t.caps.variables()).collect()
}

/// Whether `history` is derivable from `strategy`, ignoring sensor guards.
/// Variable assignments are searched over the distinct sets occurring in the
/// history plus the empty set.
pub fn language_contains(
    strategy: &Strategy,
    history: &History,
    _universe: &[CapabilitySet],
) -> bool {
    let mut sets: BTreeSet<CapabilitySet> = history.iter().cloned().collect();
    sets.insert(CapabilitySet::empty());
    let vars = vars_in_strategy(strategy);
    'alpha: for alpha in alpha_candidates(&vars, &sets) {
        let mut current: BTreeSet<&str> = BTreeSet::new();
        current.insert(strategy.initial.as_str());
        for set in history.iter() {
            let mut next: BTreeSet<&str> = BTreeSet::new();
            for t in &strategy.transitions {
                if current.contains(t.from.as_str()) && t.caps.eval(set, &alpha) == Ok(true) {
                    next.insert(t.to.as_str());
                }
            }
            if next.is_empty() {
                continue 'alpha;
            }
            current = next;
        }
        return true;
    }
    false
}

/// Every history over `universe` of length at most `max_len` that the
/// strategy can derive (sensor guards ignored). Refuses up front when the
/// candidate space exceeds `budget`.
pub fn enumerate_language(
    strategy: &Strategy,
    universe: &[CapabilitySet],
    max_len: usize,
    budget: u128,
) -> Result<BTreeSet<History>, EquivError> {
    let needed =
        (universe.len() as u128).checked_pow(max_len as u32).unwrap_or(u128::MAX);
    if needed > budget {
        return Err(EquivError::BudgetExceeded { needed, budget });
    }

    let mut candidate_sets: BTreeSet<CapabilitySet> = universe.iter().cloned().collect();
    candidate_sets.insert(CapabilitySet::empty());
    let vars = vars_in_strategy(strategy);

    let mut found: BTreeSet<History> = BTreeSet::new();
    found.insert(History::default());
    for alpha in alpha_candidates(&vars, &candidate_sets) {
        // breadth-first over (prefix, reachable-state-set) nodes
        let mut layer: Vec<(History, BTreeSet<&str>)> =
            vec![(History::default(), BTreeSet::from([strategy.initial.as_str()]))];
        for _ in 0..max_len {
            let mut next_layer = Vec::new();
            for (prefix, states) in &layer {
                for set in universe {
                    let mut next: BTreeSet<&str> = BTreeSet::new();
                    for t in &strategy.transitions {
                        if states.contains(t.from.as_str())
                            && t.caps.eval(set, &alpha) == Ok(true)
                        {
                            next.insert(t.to.as_str());
                        }
                    }
                    if !next.is_empty() {
                        let mut h = prefix.clone();
                        h.0.push(set.clone());
                        found.insert(h.clone());
                        next_layer.push((h, next));
                    }
                }
            }
            if next_layer.is_empty() {
                break;
            }
            layer = next_layer;
        }
    }

    // keep exactly what `language_contains` accepts: its assignment search is
    // restricted to sets occurring in the history itself
    if !vars.is_empty() {
        found.retain(|h| language_contains(strategy, h, universe));
    }
    Ok(found)
}

/// Convenience wrapper using the default enumeration budget.
pub fn enumerate(
    strategy: &Strategy,
    universe: &[CapabilitySet],
    max_len: usize,
) -> BTreeSet<History> {
    enumerate_language(strategy, universe, max_len, DEFAULT_ENUM_BUDGET).expect("within budget")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capability::Capability;
    use crate::component::ActuatorValue::*;

    fn p1() -> Capability {
        Capability::force("MV101", Open)
    }

    fn p2() -> Capability {
        Capability::force("P101", On)
    }

    fn p3() -> Capability {
        Capability::force("P102", Off)
    }

    fn set(caps: &[Capability]) -> CapabilitySet {
        CapabilitySet::new(caps.iter().cloned()).unwrap()
    }

    fn hist(sets: &[CapabilitySet]) -> History {
        History::new(sets.to_vec())
    }

    fn all_histories(universe: &[CapabilitySet], max_len: usize) -> Vec<History> {
        let mut out = vec![History::default()];
        let mut layer = vec![History::default()];
        for _ in 0..max_len {
            let mut next = Vec::new();
            for h in &layer {
                for s in universe {
                    let mut h2 = h.clone();
                    h2.0.push(s.clone());
                    out.push(h2.clone());
                    next.push(h2);
                }
            }
            layer = next;
        }
        out
    }

    #[test]
    fn usage_order_collapses_runs() {
        let p = set(&[p1()]);
        let q = set(&[p2()]);
        let r = set(&[p3()]);
        let a = hist(&[p.clone(), q.clone(), q.clone(), r.clone(), p.clone(), p.clone()]);
        let b = hist(&[p.clone(), p.clone(), q.clone(), r.clone(), r.clone(), p.clone()]);
        let expect = hist(&[p.clone(), q.clone(), r.clone(), p.clone()]);
        assert_eq!(usage_order(&a), expect);
        assert_eq!(usage_order(&b), expect);
        assert_eq!(
            usage_order(&hist(&[p.clone(), p.clone(), p.clone(), p.clone()])),
            hist(&[p])
        );
        assert_eq!(usage_order(&History::default()), History::default());
    }

    #[test]
    fn usage_order_is_idempotent() {
        let p = set(&[p1()]);
        let q = set(&[p1(), p2()]);
        let h = hist(&[p.clone(), p.clone(), q.clone(), q, p]);
        let once = usage_order(&h);
        assert_eq!(usage_order(&once), once);
    }

    #[test]
    fn subset_equivalence() {
        let p = set(&[p1()]);
        let q = set(&[p1(), p2()]);
        // P P P Q Q Q P P P vs Q Q: both cumulative sets contain {p1,p2}
        let a = hist(&[
            p.clone(),
            p.clone(),
            p.clone(),
            q.clone(),
            q.clone(),
            q.clone(),
            p.clone(),
            p.clone(),
            p.clone(),
        ]);
        let b = hist(&[q.clone(), q.clone()]);
        let class =
            EquivalenceClass::capability_subset(CumulativeSet::from([p1(), p2()]), a.clone())
                .unwrap();
        assert!(class.equivalent(&a, &b));
        // a history using only p1 is not equivalent
        let c = hist(&[p.clone()]);
        assert!(!class.equivalent(&a, &c));
        // identical tests are always equivalent
        assert!(class.equivalent(&c, &c));
    }

    #[test]
    fn strong_order_equivalence_examples() {
        let p = set(&[p1()]);
        let q = set(&[p2()]);
        let r = set(&[p3()]);
        let class = EquivalenceClass::strong_order(hist(&[p.clone()]));
        let a = hist(&[p.clone(), q.clone(), q.clone(), r.clone(), p.clone(), p.clone()]);
        let b = hist(&[p.clone(), p.clone(), q.clone(), r.clone(), r.clone(), p.clone()]);
        assert!(class.equivalent(&a, &b));
        // an order is equivalent to any extension of itself
        let longer = hist(&[p.clone(), q.clone(), r.clone(), p.clone(), set(&[])]);
        let shorter = hist(&[p.clone(), q.clone(), r.clone(), p.clone()]);
        assert!(class.equivalent(&shorter, &longer));
    }

    #[test]
    fn relations_are_reflexive_and_symmetric() {
        let p = set(&[p1()]);
        let q = set(&[p1(), p2()]);
        let histories = [
            hist(&[]),
            hist(&[p.clone()]),
            hist(&[p.clone(), q.clone()]),
            hist(&[q.clone(), p.clone()]),
        ];
        let classes = [
            EquivalenceClass::capability_subset(CumulativeSet::from([p1()]), hist(&[p.clone()]))
                .unwrap(),
            EquivalenceClass::strong_set(hist(&[p.clone()])),
            EquivalenceClass::strong_order(hist(&[p.clone()])),
        ];
        for class in &classes {
            for a in &histories {
                assert!(class.equivalent(a, a));
                for b in &histories {
                    assert_eq!(class.equivalent(a, b), class.equivalent(b, a));
                }
            }
        }
    }

    #[test]
    fn subset_exclusion_shape_and_language() {
        let y = CumulativeSet::from([p1(), p2()]);
        let excl = exclude_capability_subset(&y).unwrap();
        // hub plus one branch per member
        assert_eq!(excl.states.len(), 3);
        assert_eq!(excl.transitions.len(), 5);
        assert!(excl.validate(None).is_empty());

        let p = set(&[p1()]);
        let q = set(&[p1(), p2()]);
        // P P Q uses both p1 and p2 at some point, so it is not derivable
        let ppq = hist(&[p.clone(), p.clone(), q.clone()]);
        let universe = vec![set(&[]), p.clone(), q.clone(), set(&[p2()])];
        assert!(!language_contains(&excl, &ppq, &universe));
        // never-p1 histories and never-p2 histories are derivable
        assert!(language_contains(&excl, &hist(&[set(&[p2()]), set(&[p2()])]), &universe));
        assert!(language_contains(&excl, &hist(&[p.clone(), p.clone()]), &universe));

        // full agreement with the excluded predicate over a small universe
        let class = EquivalenceClass::capability_subset(y, ppq).unwrap();
        let lang = enumerate(&excl, &universe, 3);
        for h in all_histories(&universe, 3) {
            assert_eq!(lang.contains(&h), !class.excluded(&h), "history {h}");
        }
    }

    #[test]
    fn empty_subset_exclusion_is_an_error() {
        assert_eq!(
            exclude_capability_subset(&CumulativeSet::new()).unwrap_err(),
            EquivError::EmptySet
        );
    }

    #[test]
    fn exact_set_exclusion_shape_and_language() {
        let c = CumulativeSet::from([p1(), p2()]);
        let excl = exclude_exact_set(&c, DEFAULT_EXACT_SET_CAP).unwrap();
        // proper subsets {}, {p1}, {p2} plus the outside sink
        assert_eq!(excl.states.len(), 4);
        assert!(excl.validate(None).is_empty());

        let p = set(&[p1()]);
        let q = set(&[p1(), p2()]);
        let p2only = set(&[p2()]);
        let universe = vec![set(&[]), p.clone(), p2only.clone(), q.clone()];

        // strictly fewer capabilities: derivable
        assert!(language_contains(&excl, &hist(&[p.clone(), p.clone()]), &universe));
        // exactly the anchor set: not derivable
        assert!(!language_contains(&excl, &hist(&[p.clone(), p2only.clone()]), &universe));
        assert!(!language_contains(&excl, &hist(&[q.clone()]), &universe));

        let class = EquivalenceClass::strong_set(hist(&[q.clone()]));
        let lang = enumerate(&excl, &universe, 4);
        for h in all_histories(&universe, 4) {
            assert_eq!(lang.contains(&h), !class.excluded(&h), "history {h}");
        }

        // on histories confined to subsets of the anchor set, exclusion is
        // exactly strong-set equivalence with the anchor
        let anchor = hist(&[q.clone()]);
        for h in all_histories(&universe, 4) {
            if h.iter().all(|s| s.as_set().is_subset(&c)) {
                assert_eq!(class.excluded(&h), class.equivalent(&h, &anchor), "history {h}");
            }
        }
    }

    #[test]
    fn exact_set_cap_is_enforced() {
        let c = CumulativeSet::from([p1(), p2(), p3()]);
        assert!(matches!(
            exclude_exact_set(&c, 2),
            Err(EquivError::SizeCapExceeded { size: 3, cap: 2 })
        ));
    }

    #[test]
    fn order_exclusion_shape_and_language() {
        let p = set(&[p1()]);
        let q = set(&[p1(), p2()]);
        let ord = hist(&[p.clone(), q.clone(), p.clone()]);
        let excl = exclude_usage_order(&ord).unwrap();
        // three progress states plus the sink
        assert_eq!(excl.states.len(), 4);
        assert!(excl.validate(None).is_empty());

        let universe = vec![set(&[]), p.clone(), q.clone(), set(&[p3()])];
        let class = EquivalenceClass::strong_order(ord.clone());

        // realising or extending the anchor order is not derivable
        assert!(!language_contains(&excl, &hist(&[p.clone(), q.clone(), p.clone()]), &universe));
        assert!(!language_contains(
            &excl,
            &hist(&[p.clone(), p.clone(), q.clone(), p.clone(), set(&[p3()])]),
            &universe
        ));
        // diverging after P is derivable
        assert!(language_contains(&excl, &hist(&[p.clone(), set(&[p3()])]), &universe));

        let lang = enumerate(&excl, &universe, 4);
        for h in all_histories(&universe, 4) {
            assert_eq!(lang.contains(&h), !class.excluded(&h), "history {h}");
        }
    }

    #[test]
    fn order_exclusion_requires_deduplicated_anchor() {
        let p = set(&[p1()]);
        assert!(matches!(
            exclude_usage_order(&hist(&[p.clone(), p.clone()])),
            Err(EquivError::NotDeduplicated)
        ));
        assert!(matches!(
            exclude_usage_order(&History::default()),
            Err(EquivError::NotDeduplicated)
        ));
    }

    #[test]
    fn composition_language_is_intersection() {
        let p = set(&[p1()]);
        let q = set(&[p1(), p2()]);
        let universe = vec![set(&[]), p.clone(), q.clone()];

        let t = Strategy::universal();
        let excl = exclude_capability_subset(&CumulativeSet::from([p1(), p2()])).unwrap();
        let composed = compose(&t, &excl).unwrap();

        let lt = enumerate(&t, &universe, 3);
        let le = enumerate(&excl, &universe, 3);
        let lc = enumerate(&composed, &universe, 3);
        let expected: BTreeSet<History> = lt.intersection(&le).cloned().collect();
        assert_eq!(lc, expected);
    }

    #[test]
    fn composition_is_associative_at_the_language_level() {
        let p = set(&[p1()]);
        let q = set(&[p2()]);
        let universe = vec![set(&[]), p.clone(), q.clone()];

        let t1 = Strategy::universal();
        let t2 = exclude_capability_subset(&CumulativeSet::from([p1()])).unwrap();
        let t3 = exclude_usage_order(&hist(&[q.clone()])).unwrap();

        let left = compose(&compose(&t1, &t2).unwrap(), &t3).unwrap();
        let right = compose(&t1, &compose(&t2, &t3).unwrap()).unwrap();
        assert_eq!(enumerate(&left, &universe, 3), enumerate(&right, &universe, 3));
    }

    #[test]
    fn composition_renames_colliding_variables() {
        use crate::cond::parse_cap_condition;
        let mk = |var: &str| Strategy {
            states: vec!["a".into()],
            initial: "a".into(),
            variables: vec![var.to_string()],
            transitions: vec![Transition::new(
                "a",
                "a",
                SensorCondition::True,
                parse_cap_condition(&format!("{var} == _")).unwrap(),
            )],
        };
        let composed = compose(&mk("X"), &mk("X")).unwrap();
        assert_eq!(composed.variables.len(), 2);
        assert_ne!(composed.variables[0], composed.variables[1]);
    }

    #[test]
    fn simplify_prunes_unsatisfiable_and_unreachable() {
        use crate::cond::parse_cap_condition;
        let p = set(&[p1()]);
        let q = set(&[p2()]);
        let strategy = Strategy {
            states: vec!["a".into(), "b".into(), "c".into()],
            initial: "a".into(),
            variables: vec![],
            transitions: vec![
                Transition::new("a", "a", SensorCondition::True, CapCondition::True),
                // two different pins can never both hold
                Transition::new(
                    "a",
                    "b",
                    SensorCondition::True,
                    CapCondition::exactly(p.clone()).and(CapCondition::exactly(q.clone())),
                ),
                Transition::new("b", "b", SensorCondition::True, CapCondition::True),
                // c is unreachable from a
                Transition::new("c", "c", SensorCondition::True, CapCondition::True),
            ],
        };
        let slim = simplify(&strategy);
        assert_eq!(slim.states, vec!["a".to_string()]);
        assert_eq!(slim.transitions.len(), 1);

        // a pin contradicted by an exclusion is pruned too
        let t = parse_cap_condition("_ == {[MV101,open]} and [MV101,open] notin _").unwrap();
        assert!(syntactically_unsat(&t));
        // satisfiable bounds survive
        let t = parse_cap_condition("[MV101,open] in _ and _ <= {[MV101,open],[P101,on]}").unwrap();
        assert!(!syntactically_unsat(&t));
        // incompatible bounds are pruned
        let t = parse_cap_condition("[P102,off] in _ and _ <= {[MV101,open]}").unwrap();
        assert!(syntactically_unsat(&t));
    }

    #[test]
    fn null_strategy_language() {
        let p = set(&[p1()]);
        let strat = Strategy::null_strategy();
        let universe = vec![set(&[]), p];
        let lang = enumerate(&strat, &universe, 2);
        let expected: BTreeSet<History> =
            [History::default(), hist(&[set(&[])]), hist(&[set(&[]), set(&[])])]
                .into_iter()
                .collect();
        assert_eq!(lang, expected);
        // the empty history is derivable from any strategy
        assert!(language_contains(&strat, &History::default(), &universe));
    }

    #[test]
    fn universal_loop_accepts_everything() {
        let p = set(&[p1()]);
        let q = set(&[p2()]);
        let universe = vec![set(&[]), p, q];
        let lang = enumerate(&Strategy::universal(), &universe, 3);
        // 1 + 3 + 9 + 27
        assert_eq!(lang.len(), 40);
    }

    #[test]
    fn enumeration_budget_is_enforced() {
        let p = set(&[p1()]);
        let universe = vec![set(&[]), p];
        assert!(matches!(
            enumerate_language(&Strategy::universal(), &universe, 30, 1000),
            Err(EquivError::BudgetExceeded { .. })
        ));
    }
}
