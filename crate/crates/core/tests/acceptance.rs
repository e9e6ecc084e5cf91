//! Acceptance suite: one test per release criterion, each printing a
//! pass/fail line (run with `cargo test --test acceptance -- --nocapture` to
//! see them).

use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha12Rng;

use icsfuzz_core::capability::{Capability, CapabilitySet, CumulativeSet, History};
use icsfuzz_core::causal::{prune, ReplaySpec, SimulatorExecutor};
use icsfuzz_core::component::ActuatorValue::*;
use icsfuzz_core::component::ComponentId;
use icsfuzz_core::cond::{parse_cap_condition, parse_sensor_condition, CapCondition, SensorCondition};
use icsfuzz_core::equiv::{
    compose, enumerate, usage_order, EquivalenceClass, EquivalenceKind,
};
use icsfuzz_core::fuzz::{
    run_campaign, Campaign, ClassKind, Goal, FAST_DT_SECS, LEVEL_DT_SECS,
};
use icsfuzz_core::plant::{miniswat, observe, physics_step_events, Simulator};
use icsfuzz_core::strategy::{Strategy, Transition};

fn caps_pool() -> [Capability; 3] {
    [
        Capability::force("MV101", Open),
        Capability::force("P101", On),
        Capability::force("P102", Off),
    ]
}

fn set_of(caps: &[&Capability]) -> CapabilitySet {
    CapabilitySet::new(caps.iter().map(|c| (*c).clone())).unwrap()
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

/// Random strategy with true guards and capability conditions drawn from
/// literal pins, single exclusions, and `true`.
fn random_strategy(universe: &[CapabilitySet], pool: &[Capability], rng: &mut ChaCha12Rng) -> Strategy {
    let n_states = rng.gen_range(1..=4usize);
    let states: Vec<String> = (0..n_states).map(|i| format!("g{i}")).collect();
    let mut transitions = Vec::new();
    for from in &states {
        for to in &states {
            if !transitions.is_empty() && rng.gen_bool(0.45) {
                continue;
            }
            let caps = match rng.gen_range(0..3) {
                0 => CapCondition::True,
                1 => CapCondition::exactly(universe[rng.gen_range(0..universe.len())].clone()),
                _ => CapCondition::excludes(pool[rng.gen_range(0..pool.len())].clone()),
            };
            transitions.push(Transition::new(
                from.clone(),
                to.clone(),
                SensorCondition::True,
                caps,
            ));
        }
    }
    Strategy { states: states.clone(), initial: states[0].clone(), variables: vec![], transitions }
}

fn random_universe(pool: &[Capability], rng: &mut ChaCha12Rng) -> Vec<CapabilitySet> {
    let mut sets: BTreeSet<CapabilitySet> = BTreeSet::new();
    sets.insert(CapabilitySet::empty());
    while sets.len() < rng.gen_range(2..=4usize) {
        let mut set = CapabilitySet::empty();
        for cap in pool {
            if rng.gen_bool(0.5) {
                set.insert(cap.clone()).unwrap();
            }
        }
        sets.insert(set);
    }
    sets.into_iter().collect()
}

/// Universe restricted to subsets of `c` (always containing the empty set).
fn within_universe(universe: &[CapabilitySet], c: &CumulativeSet) -> Vec<CapabilitySet> {
    let mut out: Vec<CapabilitySet> = universe
        .iter()
        .filter(|s| s.as_set().is_subset(c))
        .cloned()
        .collect();
    if out.is_empty() {
        out.push(CapabilitySet::empty());
    }
    out
}

#[test]
fn criterion_1_composed_exclusion_oracle() {
    let start = Instant::now();
    let pool = caps_pool();
    let mut rng = ChaCha12Rng::seed_from_u64(20_240_001);
    let mut checked = 0usize;
    let max_len = 5usize;

    while checked < 500 {
        let universe = random_universe(&pool, &mut rng);
        let strategy = random_strategy(&universe, &pool, &mut rng);
        let lang_t = enumerate(&strategy, &universe, max_len);

        // anchors are successful-test histories, so never empty
        let anchors: Vec<&History> = lang_t.iter().filter(|h| !h.is_empty()).collect();
        if anchors.is_empty() {
            continue;
        }
        let anchor = (*anchors[rng.gen_range(0..anchors.len())]).clone();

        let (class, universe) = match checked % 3 {
            0 => {
                let cset = anchor.cumulative_set();
                if cset.is_empty() {
                    continue;
                }
                let mut y = CumulativeSet::new();
                for cap in &cset {
                    if y.is_empty() || rng.gen_bool(0.6) {
                        y.insert(cap.clone());
                    }
                }
                (EquivalenceClass::capability_subset(y, anchor.clone()).unwrap(), universe)
            }
            1 => {
                let cset = anchor.cumulative_set();
                if cset.is_empty() {
                    continue;
                }
                // exact-set exclusion is exact on within-set universes
                let universe = within_universe(&universe, &cset);
                (EquivalenceClass::strong_set(anchor.clone()), universe)
            }
            _ => (EquivalenceClass::strong_order(anchor.clone()), universe),
        };

        let lang_t = enumerate(&strategy, &universe, max_len);
        if !lang_t.contains(&class.anchor) {
            continue;
        }
        let exclusion = class.exclusion().unwrap();
        let composed = compose(&strategy, &exclusion).unwrap();

        let lang_e = enumerate(&exclusion, &universe, max_len);
        let lang_c = enumerate(&composed, &universe, max_len);

        // composition is language intersection
        let expected: BTreeSet<History> = lang_t.intersection(&lang_e).cloned().collect();
        assert_eq!(lang_c, expected, "composition must intersect the languages");

        // the composed language is exactly the strategy's language minus the
        // histories the class excludes
        let filtered: BTreeSet<History> =
            lang_t.iter().filter(|h| !class.excluded(h)).cloned().collect();
        assert_eq!(lang_c, filtered, "kind {:?}", class.kind);

        // for subset classes, and for exact-set classes on within-set
        // universes, exclusion coincides with equivalence to the anchor
        match &class.kind {
            EquivalenceKind::CapabilitySubset(_) | EquivalenceKind::StrongSet => {
                let by_relation: BTreeSet<History> = lang_t
                    .iter()
                    .filter(|h| !class.equivalent(h, &class.anchor))
                    .cloned()
                    .collect();
                assert_eq!(lang_c, by_relation, "kind {:?}", class.kind);
            }
            EquivalenceKind::StrongOrder => {
                // order exclusion is one-sided: the only equivalent histories
                // that remain derivable are strict prefixes of the anchor
                // order, which no prefix-closed language could reject while
                // keeping their diverging extensions
                let ord = usage_order(&class.anchor);
                for h in &lang_c {
                    if class.equivalent(h, &class.anchor) {
                        let oh = usage_order(h);
                        assert!(
                            oh.len() < ord.len()
                                && oh.iter().zip(ord.iter()).all(|(a, b)| a == b),
                            "unexpected equivalent survivor {h}"
                        );
                    }
                }
            }
        }

        checked += 1;
    }

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 120, "took {elapsed:?}");
    println!("criterion 1 (composed exclusion oracle, {checked} triples in {elapsed:.2?}): pass");
}

#[test]
fn criterion_2_exclusion_construction_oracles() {
    let start = Instant::now();
    let pool = caps_pool();
    let mut rng = ChaCha12Rng::seed_from_u64(20_240_002);
    let max_len = 5usize;

    // capability-subset exclusion: exact complement on every universe
    for _ in 0..200 {
        let universe = random_universe(&pool, &mut rng);
        let mut y = CumulativeSet::new();
        for cap in &pool {
            if rng.gen_bool(0.5) {
                y.insert(cap.clone());
            }
        }
        if y.is_empty() {
            y.insert(pool[0].clone());
        }
        let anchor = History::new(
            y.iter().map(|c| CapabilitySet::new([c.clone()]).unwrap()).collect(),
        );
        let class = EquivalenceClass::capability_subset(y, anchor.clone()).unwrap();
        let lang = enumerate(&class.exclusion().unwrap(), &universe, max_len);
        for h in all_histories(&universe, max_len) {
            assert_eq!(
                lang.contains(&h),
                !class.equivalent(&h, &anchor),
                "subset exclusion differs on {h}"
            );
        }
    }

    // exact-set exclusion: complement of the relation on within-set
    // universes, complement of the documented excluded predicate in general
    for _ in 0..200 {
        let full = random_universe(&pool, &mut rng);
        let candidates: Vec<&CapabilitySet> = full.iter().filter(|s| !s.is_empty()).collect();
        if candidates.is_empty() {
            continue;
        }
        let mut anchor_sets = Vec::new();
        for _ in 0..rng.gen_range(1..=3usize) {
            anchor_sets.push((*candidates[rng.gen_range(0..candidates.len())]).clone());
        }
        let anchor = History::new(anchor_sets);
        let class = EquivalenceClass::strong_set(anchor.clone());
        let c = anchor.cumulative_set();
        let lang_full = enumerate(&class.exclusion().unwrap(), &full, max_len);
        for h in all_histories(&full, max_len) {
            assert_eq!(lang_full.contains(&h), !class.excluded(&h), "exact-set differs on {h}");
        }
        let within = within_universe(&full, &c);
        let lang_within = enumerate(&class.exclusion().unwrap(), &within, max_len);
        for h in all_histories(&within, max_len) {
            assert_eq!(
                lang_within.contains(&h),
                !class.equivalent(&h, &anchor),
                "exact-set differs from the relation on within-universe {h}"
            );
        }
    }

    // order exclusion: rejects exactly the histories whose usage order
    // extends the anchor's; surviving equivalents are strict order-prefixes
    for _ in 0..200 {
        let universe = random_universe(&pool, &mut rng);
        let candidates: Vec<&CapabilitySet> = universe.iter().collect();
        let mut anchor_sets = Vec::new();
        for _ in 0..rng.gen_range(1..=3usize) {
            anchor_sets.push((*candidates[rng.gen_range(0..candidates.len())]).clone());
        }
        let anchor = History::new(anchor_sets);
        if usage_order(&anchor).is_empty() {
            continue;
        }
        let class = EquivalenceClass::strong_order(anchor.clone());
        let ord = usage_order(&anchor);
        let lang = enumerate(&class.exclusion().unwrap(), &universe, max_len);
        for h in all_histories(&universe, max_len) {
            let oh = usage_order(&h);
            let extends = oh.len() >= ord.len() && ord.iter().zip(oh.iter()).all(|(a, b)| a == b);
            assert_eq!(lang.contains(&h), !extends, "order exclusion differs on {h}");
            assert_eq!(class.excluded(&h), extends);
        }
    }

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 60, "took {elapsed:?}");
    println!("criterion 2 (exclusion construction oracles in {elapsed:.2?}): pass");
}

#[test]
fn criterion_3_worked_examples() {
    let p1 = Capability::force("MV101", Open);
    let p2 = Capability::force("P101", On);
    let p3 = Capability::force("P102", Off);

    // collapsing repeats: both orderings give P Q R P
    let p = set_of(&[&p1]);
    let q = set_of(&[&p2]);
    let r = set_of(&[&p3]);
    let a = History::new(vec![p.clone(), q.clone(), q.clone(), r.clone(), p.clone(), p.clone()]);
    let b = History::new(vec![p.clone(), p.clone(), q.clone(), r.clone(), r.clone(), p.clone()]);
    let expected = History::new(vec![p.clone(), q.clone(), r.clone(), p.clone()]);
    assert_eq!(usage_order(&a), expected);
    assert_eq!(usage_order(&b), expected);

    // cumulative set of P P P Q Q Q P P P with P={p1}, Q={p1,p2}
    let q2 = set_of(&[&p1, &p2]);
    let hist = History::new(vec![
        p.clone(), p.clone(), p.clone(), q2.clone(), q2.clone(), q2.clone(),
        p.clone(), p.clone(), p.clone(),
    ]);
    let expected_cset: CumulativeSet = [p1.clone(), p2.clone()].into_iter().collect();
    assert_eq!(hist.cumulative_set(), expected_cset);

    // waiting strategy that later admits anything except p3, composed with
    // the subset exclusion of {p1, p2}
    let wait = Strategy {
        states: vec!["w0".into(), "w1".into()],
        initial: "w0".into(),
        variables: vec![],
        transitions: vec![
            Transition::new("w0", "w0", SensorCondition::True, parse_cap_condition("_ == {}").unwrap()),
            Transition::new(
                "w0",
                "w1",
                SensorCondition::True,
                parse_cap_condition("[P102,off] notin _").unwrap(),
            ),
            Transition::new(
                "w1",
                "w1",
                SensorCondition::True,
                parse_cap_condition("[P102,off] notin _").unwrap(),
            ),
        ],
    };
    let y: CumulativeSet = [p1.clone(), p2.clone()].into_iter().collect();
    let excl = EquivalenceClass::capability_subset(y, hist).unwrap().exclusion().unwrap();
    let composed = compose(&wait, &excl).unwrap();

    let empty = CapabilitySet::empty();
    let universe = vec![empty.clone(), p.clone(), q2.clone(), r.clone()];

    // ∅ ∅ ∅ P P Q Q Q Q uses both p1 and p2, so it can no longer be derived
    let blocked = History::new(vec![
        empty.clone(), empty.clone(), empty.clone(), p.clone(), p.clone(),
        q2.clone(), q2.clone(), q2.clone(), q2.clone(),
    ]);
    assert!(icsfuzz_core::equiv::language_contains(&wait, &blocked, &universe));
    assert!(!icsfuzz_core::equiv::language_contains(&composed, &blocked, &universe));

    // ∅ ∅ P P P P P only ever uses p1 and is still derivable
    let allowed = History::new(vec![
        empty.clone(), empty.clone(), p.clone(), p.clone(), p.clone(), p.clone(), p.clone(),
    ]);
    assert!(icsfuzz_core::equiv::language_contains(&composed, &allowed, &universe));

    // p3 was forbidden before the composition and stays forbidden
    let with_p3 = History::new(vec![empty.clone(), r.clone()]);
    assert!(!icsfuzz_core::equiv::language_contains(&wait, &with_p3, &universe));
    assert!(!icsfuzz_core::equiv::language_contains(&composed, &with_p3, &universe));

    println!("criterion 3 (worked examples): pass");
}

#[test]
fn criterion_4_causal_pruning_guarantee() {
    let start = Instant::now();
    let model = Arc::new(miniswat());
    let goal = parse_sensor_condition("FIT201 < 1").unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(20_240_004);

    let causes: [Vec<Capability>; 2] = [
        vec![Capability::force("MV201", Closed)],
        vec![Capability::force("P101", Off), Capability::force("P102", Off)],
    ];
    // capabilities on branches that cannot influence the transfer flow over
    // a sub-minute horizon
    let junk_pool = [
        Capability::force("MV101", Open),
        Capability::force("MV101", Closed),
        Capability::force("MV302", Open),
        Capability::force("MV302", Closed),
        Capability::force("P301", On),
        Capability::force("P301", Off),
        Capability::force("P302", On),
        Capability::force("P302", Off),
        Capability::force("P401", On),
        Capability::force("P401", Off),
        Capability::force("P402", On),
        Capability::force("P402", Off),
    ];

    let mut checked = 0usize;
    while checked < 100 {
        let cause = &causes[rng.gen_range(0..causes.len())];
        let len = rng.gen_range(1..=3usize);
        let mut sets = Vec::with_capacity(len);
        let mut injected: BTreeSet<Capability> = BTreeSet::new();
        for _ in 0..len {
            let mut set = CapabilitySet::new(cause.iter().cloned()).unwrap();
            let junk_count = rng.gen_range(1..=4usize);
            for junk in junk_pool.choose_multiple(&mut rng, junk_count) {
                if set.insert(junk.clone()).is_ok() {
                    injected.insert(junk.clone());
                }
            }
            sets.push(set);
        }
        let (q0, x0) = {
            let mut c = Campaign::new(
                model.clone(),
                Goal::low(&model, "FIT201", FAST_DT_SECS).unwrap(),
                ClassKind::CausalSet,
                0,
            );
            c.budgets.walks_per_round = Some(1);
            c.draw_start(&mut rng)
        };
        let spec = ReplaySpec {
            history: History::new(sets),
            origin: (q0, x0),
            goal: goal.clone(),
            dt_secs: FAST_DT_SECS,
        };
        let mut exec = SimulatorExecutor::new(model.clone());
        let result = prune(&spec, &mut exec).expect("seeded test reproduces");

        // (a) the pruned test still succeeds on a fresh replay
        assert!(result.trace.successful);
        // (b) no injected irrelevant capability survives
        let final_cset = result.causal_set();
        for junk in &injected {
            assert!(!final_cset.contains(junk), "junk {junk} survived pruning");
        }
        // (c) every removal carries a successful counterexample
        for record in &result.records {
            match record.verdict {
                icsfuzz_core::causal::CausalVerdict::Pruned => {
                    assert!(record.counterexample.as_ref().unwrap().successful)
                }
                icsfuzz_core::causal::CausalVerdict::Causal => {
                    assert!(record.counterexample.is_none())
                }
            }
        }
        // (d) probe count stays linear in the events of the trace
        let events = spec.history.event_count() + spec.history.len() + 1;
        assert!(
            result.probes <= 4 * events,
            "{} probes for {} events",
            result.probes,
            events
        );
        checked += 1;
    }

    println!(
        "criterion 4 (causal pruning guarantee, {checked} tests in {:.2?}): pass",
        start.elapsed()
    );
}

fn causal_campaign(model: &Arc<icsfuzz_core::PlantModel>, goal: Goal, seed: u64, iterations: usize) -> Vec<CumulativeSet> {
    let mut campaign = Campaign::new(model.clone(), goal, ClassKind::CausalSet, seed);
    campaign.budgets.max_iterations = Some(iterations);
    campaign.budgets.walks_per_round = Some(100);
    let result = run_campaign(&campaign).unwrap();
    assert!(result.pairwise_non_equivalent);
    result.tests.iter().map(|t| t.cumulative_set()).collect()
}

#[test]
fn criterion_5_causal_set_recovery() {
    let start = Instant::now();
    let model = Arc::new(miniswat());
    let cs = |caps: &[Capability]| caps.iter().cloned().collect::<CumulativeSet>();

    // transfer flow low: the closed valve and the stopped pump pair
    let fit201 = causal_campaign(
        &model,
        Goal::low(&model, "FIT201", FAST_DT_SECS).unwrap(),
        42,
        25,
    );
    let valve = cs(&[Capability::force("MV201", Closed)]);
    let pumps = cs(&[Capability::force("P101", Off), Capability::force("P102", Off)]);
    assert!(fit201.contains(&valve), "FIT201-Low missed {valve:?}");
    assert!(fit201.contains(&pumps), "FIT201-Low missed the pump pair");
    println!("  FIT201-Low: {} causal sets (valve, pump pair)", fit201.len());

    // filtration pressure low: stopping the UF pipe by valve or pump pair
    let dpit = causal_campaign(
        &model,
        Goal::low(&model, "DPIT301", FAST_DT_SECS).unwrap(),
        42,
        25,
    );
    let uf_valve = cs(&[Capability::force("MV302", Closed)]);
    let uf_pumps = cs(&[Capability::force("P301", Off), Capability::force("P302", Off)]);
    let analogues = [uf_valve, uf_pumps];
    let found = analogues.iter().filter(|a| dpit.contains(a)).count();
    assert!(found >= 2, "DPIT301-Low recovered only {found} of the analogue sets: {dpit:?}");
    println!("  DPIT301-Low: {} causal sets ({found} analogues)", dpit.len());

    // first-tank overfill: forcing the inflow valve open is causal in every
    // set, and the singleton itself is found alongside richer variants
    let lit101 = causal_campaign(
        &model,
        Goal::high(&model, "LIT101", LEVEL_DT_SECS).unwrap(),
        11,
        40,
    );
    let open = Capability::force("MV101", Open);
    let singleton = cs(&[open.clone()]);
    let with_pumps = cs(&[
        open.clone(),
        Capability::force("P101", Off),
        Capability::force("P102", Off),
    ]);
    let with_transfer_valve = cs(&[open.clone(), Capability::force("MV201", Closed)]);
    assert!(lit101.len() >= 2, "LIT101-High found only {lit101:?}");
    assert!(lit101.contains(&singleton), "LIT101-High missed the singleton: {lit101:?}");
    for set in &lit101 {
        assert!(set.contains(&open), "a LIT101-High causal set without the inflow forcing");
        assert!(
            *set == singleton || *set == with_pumps || *set == with_transfer_valve,
            "unexpected causal set {set:?}"
        );
    }
    println!("  LIT101-High: {} causal sets including the singleton", lit101.len());

    // high inflow rate: pipe flows only take the values zero and nominal, and
    // the safe range must admit the nominal refill rate, so no manipulation
    // can push the reading above it; the campaign must come back empty
    let fit101 = causal_campaign(
        &model,
        Goal::high(&model, "FIT101", FAST_DT_SECS).unwrap(),
        42,
        10,
    );
    assert!(fit101.is_empty(), "FIT101-High cannot be reachable: {fit101:?}");
    println!("  FIT101-High: unreachable by construction, 0 tests");

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 120, "took {elapsed:?}");
    println!("criterion 5 (causal set recovery in {elapsed:.2?}): pass");
}

#[test]
fn criterion_6_diversity_collapse() {
    let start = Instant::now();
    let model = Arc::new(miniswat());
    let goal = Goal::low(&model, "FIT201", FAST_DT_SECS).unwrap();
    let seed = 42;
    let iterations = 30;

    let mk = |class: ClassKind| {
        let mut c = Campaign::new(model.clone(), goal.clone(), class, seed);
        c.budgets.max_iterations = Some(iterations);
        c.budgets.walks_per_round = Some(60);
        c
    };
    let strong = run_campaign(&mk(ClassKind::StrongSet)).unwrap();
    let causal = run_campaign(&mk(ClassKind::CausalSet)).unwrap();
    assert!(strong.pairwise_non_equivalent);
    assert!(causal.pairwise_non_equivalent);

    let strong_count = strong.tests.len();
    let causal_count = causal.tests.len();
    assert!(causal_count >= 1);
    assert!(
        strong_count >= 10 * causal_count,
        "strong-set emitted {strong_count}, causal emitted {causal_count}"
    );

    // every strong-set test contains at least one discovered causal set
    let causal_sets: Vec<CumulativeSet> =
        causal.tests.iter().map(|t| t.cumulative_set()).collect();
    for test in &strong.tests {
        let cset = test.cumulative_set();
        assert!(
            causal_sets.iter().any(|y| y.is_subset(&cset)),
            "strong-set test {cset:?} contains no causal set"
        );
    }

    println!(
        "criterion 6 (diversity collapse, {strong_count} strong vs {causal_count} causal in {:.2?}): pass",
        start.elapsed()
    );
}

#[test]
fn criterion_7_pairwise_non_equivalence() {
    let start = Instant::now();
    let model = Arc::new(miniswat());

    for (class, seed) in [
        (ClassKind::CausalSet, 42u64),
        (ClassKind::StrongSet, 42),
        (ClassKind::StrongOrder, 42),
    ] {
        let mut campaign = Campaign::new(
            model.clone(),
            Goal::low(&model, "FIT201", FAST_DT_SECS).unwrap(),
            class,
            seed,
        );
        campaign.budgets.max_iterations = Some(20);
        campaign.budgets.walks_per_round = Some(60);
        let result = run_campaign(&campaign).unwrap();
        assert!(
            result.pairwise_non_equivalent,
            "{class} suite failed its self-check"
        );
        // re-check here: every later test falls outside every earlier class
        for (i, a) in result.tests.iter().enumerate() {
            for b in result.tests.iter().skip(i + 1) {
                assert!(
                    !a.class.equivalent(&a.trace.history, &b.trace.history),
                    "{class}: test {i} class covers a later test"
                );
            }
        }
    }

    println!("criterion 7 (pairwise non-equivalence in {:.2?}): pass", start.elapsed());
}

#[test]
fn criterion_8_simulator_soundness() {
    let start = Instant::now();
    let model = Arc::new(miniswat());

    // 24 hours uninjected: no reading ever leaves its safe range
    let run = |tag: &str| {
        let mut sim = Simulator::from_nominal(model.clone());
        let mut log: Vec<u8> = Vec::new();
        let mut violations = 0usize;
        for _ in 0..86_400 / model.tick_secs {
            sim.advance_recording(&CapabilitySet::empty(), model.tick_secs, |record, clamps| {
                assert!(clamps.is_empty(), "{tag}: clamp event in nominal operation");
                for (id, value) in &record.readings {
                    if !model.sensors[id].is_safe(*value) {
                        violations += 1;
                    }
                }
                serde_json::to_writer(&mut log, &record).unwrap();
                log.push(b'\n');
            })
            .unwrap();
        }
        (violations, log, sim.physical_state().clone())
    };
    let (violations, log_a, _) = run("first");
    assert_eq!(violations, 0, "uninjected run left a safe range");

    // seeded determinism: a second run is byte-identical
    let (_, log_b, _) = run("second");
    assert_eq!(log_a, log_b, "two identical runs produced different logs");

    // conservation: tank volume change matches boundary flows each sub-step
    let (q, x) = model.nominal_start();
    let mut state = x;
    let tick_hours = model.tick_secs as f64 / 3600.0;
    for _ in 0..3_600 {
        let before = state.clone();
        let (after, clamps) =
            physics_step_events(&model, &before, &q.commanded, model.tick_secs).unwrap();
        if clamps.is_empty() {
            let volume_change: f64 = model
                .tanks
                .iter()
                .enumerate()
                .map(|(i, t)| (after.levels[i] - before.levels[i]) / 1000.0 * t.area_m2)
                .sum();
            let boundary: f64 = model
                .pipes
                .iter()
                .enumerate()
                .map(|(i, p)| match (&p.from, &p.to) {
                    (icsfuzz_core::plant::Endpoint::Source, _) => after.flows[i] * tick_hours,
                    (_, icsfuzz_core::plant::Endpoint::Drain) => -after.flows[i] * tick_hours,
                    _ => 0.0,
                })
                .sum();
            assert!(
                (volume_change - boundary).abs() < 1e-9,
                "conservation residual {:e}",
                volume_change - boundary
            );
        }
        state = after;
    }

    // goal checks read true state: spot check the observation map
    let readings = observe(&model, &state);
    assert_eq!(readings.get(&ComponentId::new("LIT301")), state.level_of(&model, "T301"));

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 10, "took {elapsed:?}");
    println!("criterion 8 (simulator soundness in {elapsed:.2?}): pass");
}
