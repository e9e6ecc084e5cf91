use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use icsfuzz_core::capability::{CapabilitySet, History};
use icsfuzz_core::causal::{prune, CausalVerdict, ReplayExecutor, SimulatorExecutor};
use icsfuzz_core::component::ComponentId;
use icsfuzz_core::cond::parse_capability_set;
use icsfuzz_core::equiv::{
    compose, enumerate_language, simplify, EquivalenceClass, DEFAULT_ENUM_BUDGET,
};
use icsfuzz_core::fuzz::{run_campaign, ClassKind};
use icsfuzz_core::plant::{
    load_plant_file, miniswat, CapabilityInjector, PlantModel, ScriptInjector, Simulator,
};
use icsfuzz_core::strategy::file::{load_strategy_file, save_strategy_file};
use icsfuzz_core::strategy::Strategy;
use icsfuzz_core::suite::{CampaignConfig, SuiteFile, SuiteReport, SuiteTest};

use crate::args::*;
use crate::CliError;

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Validate(args) => cmd_validate(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Fuzz(args) => cmd_fuzz(args),
        Command::Strategy(args) => match args.command {
            StrategyCommand::Excl(a) => cmd_strategy_excl(a),
            StrategyCommand::Compose(a) => cmd_strategy_compose(a),
            StrategyCommand::Enumerate(a) => cmd_strategy_enumerate(a),
            StrategyCommand::Contains(a) => cmd_strategy_contains(a),
        },
        Command::Prune(args) => cmd_prune(args),
        Command::Report(args) => cmd_report(args),
    }
}

fn load_plant(path: &Option<String>) -> Result<Arc<PlantModel>, CliError> {
    match path {
        Some(p) => Ok(Arc::new(load_plant_file(p)?)),
        None => Ok(Arc::new(miniswat())),
    }
}

/// `;`-separated capability sets, e.g. `{[MV101,open]};{};{[P101,off]}`.
fn parse_history(src: &str) -> Result<History, CliError> {
    let src = src.trim();
    if src.is_empty() {
        return Ok(History::default());
    }
    let mut sets = Vec::new();
    for chunk in src.split(';') {
        let set = parse_capability_set(chunk.trim()).map_err(CliError::validation)?;
        sets.push(set);
    }
    Ok(History::new(sets))
}

fn parse_universe(src: &str) -> Result<Vec<CapabilitySet>, CliError> {
    Ok(parse_history(src)?.0)
}

fn cmd_validate(args: ValidateArgs) -> Result<(), CliError> {
    let model = load_plant(&args.plant)?;
    let mut problems = 0usize;

    let violations = model.validate();
    for v in &violations {
        eprintln!("plant: {v}");
    }
    problems += violations.len();

    for path in &args.strategies {
        match load_strategy_file(path) {
            Ok(strategy) => {
                let violations = strategy.validate(Some(&model));
                for v in &violations {
                    eprintln!("{path}: {v}");
                }
                problems += violations.len();
            }
            Err(e) => {
                eprintln!("{path}: {e}");
                problems += 1;
            }
        }
    }

    for path in &args.campaigns {
        match CampaignConfig::load(path) {
            Ok(config) => {
                if let Err(e) = config.resolve_goals(&model) {
                    eprintln!("{path}: {e}");
                    problems += 1;
                }
            }
            Err(e) => {
                eprintln!("{path}: {e}");
                problems += 1;
            }
        }
    }

    if problems > 0 {
        return Err(CliError::validation(format!("{problems} violation(s)")));
    }
    println!("ok");
    Ok(())
}

#[derive(serde::Deserialize)]
struct InjectFile {
    #[serde(rename = "inject", default)]
    spans: Vec<InjectSpan>,
}

#[derive(serde::Deserialize)]
struct InjectSpan {
    from: u64,
    to: u64,
    caps: Vec<icsfuzz_core::capability::Capability>,
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    if args.horizon == 0 {
        return Err(CliError::validation("horizon must be positive"));
    }
    let model = load_plant(&args.plant)?;
    let mut injector: Box<dyn CapabilityInjector> = match &args.inject {
        None => Box::new(icsfuzz_core::plant::NullInjector),
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            let file: InjectFile =
                toml::from_str(&text).map_err(|e| CliError::validation(e.to_string()))?;
            let mut spans = Vec::new();
            for span in file.spans {
                let set = CapabilitySet::new(span.caps)
                    .map_err(CliError::validation)?;
                spans.push((span.from, span.to, set));
            }
            Box::new(ScriptInjector { spans, tick_secs: model.tick_secs })
        }
    };

    std::fs::create_dir_all(&args.out)?;
    let log_path = Path::new(&args.out).join("trajectory.jsonl");
    let mut log = std::io::BufWriter::new(std::fs::File::create(&log_path)?);

    let (q0, x0) = model.nominal_start();
    let mut sim = Simulator::new(model.clone(), q0, x0);
    let mut min: BTreeMap<ComponentId, f64> = BTreeMap::new();
    let mut max: BTreeMap<ComponentId, f64> = BTreeMap::new();
    let mut first_violation: BTreeMap<ComponentId, u64> = BTreeMap::new();
    let mut clamp_count = 0usize;

    let intervals = args.horizon / model.tick_secs;
    for i in 0..intervals {
        let caps = injector.capabilities_at(i);
        let mut io_err: Option<std::io::Error> = None;
        sim.advance_recording(&caps, model.tick_secs, |record, clamps| {
            clamp_count += clamps.len();
            for (id, value) in &record.readings {
                let dom = model.sensors[id];
                min.entry(id.clone()).and_modify(|m| *m = m.min(*value)).or_insert(*value);
                max.entry(id.clone()).and_modify(|m| *m = m.max(*value)).or_insert(*value);
                if !dom.is_safe(*value) {
                    first_violation.entry(id.clone()).or_insert(record.clock_secs);
                }
            }
            if io_err.is_none() {
                if let Err(e) = serde_json::to_writer(&mut log, &record).map_err(std::io::Error::from)
                {
                    io_err = Some(e);
                } else if let Err(e) = log.write_all(b"\n") {
                    io_err = Some(e);
                }
            }
        })
        .map_err(CliError::runtime)?;
        if let Some(e) = io_err {
            return Err(e.into());
        }
    }
    log.flush()?;

    println!("simulated {}s, log: {}", args.horizon, log_path.display());
    println!("{:<10} {:>12} {:>12}  safe-range", "sensor", "min", "max");
    for (id, lo) in &min {
        let dom = model.sensors[id];
        println!(
            "{:<10} {:>12.3} {:>12.3}  [{}, {}]",
            id.to_string(),
            lo,
            max[id],
            dom.safe_lo,
            dom.safe_hi
        );
    }
    if first_violation.is_empty() {
        println!("safe-range violations: none");
    } else {
        for (id, at) in &first_violation {
            println!("violation: {id} first crossed its safe range at {at}s");
        }
    }
    if clamp_count > 0 {
        println!("tank-bound clamp events: {clamp_count}");
    }
    Ok(())
}

fn cmd_fuzz(args: FuzzArgs) -> Result<(), CliError> {
    let config = match &args.config {
        Some(path) => CampaignConfig::load(path)?,
        None => {
            if args.goals.is_empty() {
                return Err(CliError::validation("give --goals or --config"));
            }
            CampaignConfig {
                plant: args.plant.clone(),
                seed: args.seed,
                class: args.class.parse::<ClassKind>().map_err(CliError::validation)?,
                goals: args.goals.clone(),
                walks: args.walks,
                walk_len: args.walk_len,
                budget_secs: args.budget_secs,
                iterations: args.iterations,
                strategy: None,
                dt_secs: args.dt,
            }
        }
    };
    let model = load_plant(&config.plant)?;
    let initial_strategy = match &config.strategy {
        Some(path) => Some(load_strategy_file(path)?),
        None => None,
    };
    let campaigns = config.build_campaigns(&model, initial_strategy)?;
    let digest = config.digest();

    std::fs::create_dir_all(&args.out)?;

    // campaigns are independent: one thread per goal
    let results: Vec<Result<icsfuzz_core::fuzz::CampaignResult, icsfuzz_core::fuzz::FuzzError>> =
        std::thread::scope(|scope| {
            let handles: Vec<_> = campaigns
                .iter()
                .map(|campaign| scope.spawn(move || run_campaign(campaign)))
                .collect();
            handles.into_iter().map(|h| h.join().expect("campaign thread")).collect()
        });

    let mut suites = Vec::new();
    println!("{:<16} {:<12} {:>6} {:>10}", "goal", "class", "count", "wall(s)");
    for result in results {
        let result = result.map_err(CliError::from)?;
        if !result.pairwise_non_equivalent {
            return Err(CliError::runtime(format!(
                "suite self-check failed for {}: emitted tests are not pairwise non-equivalent",
                result.goal_name
            )));
        }
        let suite = SuiteFile::from_result(&model, &result, digest.clone());
        println!(
            "{:<16} {:<12} {:>6} {:>10.2}",
            suite.goal,
            suite.class.to_string(),
            suite.tests.len(),
            suite.wall_secs
        );
        let path = Path::new(&args.out).join(format!("{}.suite.json", suite.goal));
        suite.save(&path)?;
        suites.push(suite);
    }

    let report = SuiteReport::from_suites(config.seed, digest, &suites);
    let report_path = Path::new(&args.out).join("report.json");
    std::fs::write(&report_path, serde_json::to_string_pretty(&report).expect("report"))?;
    println!("report: {}", report_path.display());
    Ok(())
}

fn cmd_strategy_excl(args: ExclArgs) -> Result<(), CliError> {
    let class_kind: ClassKind = args.class.parse().map_err(CliError::validation)?;
    let anchor = parse_history(&args.anchor)?;
    let class = match class_kind {
        ClassKind::CausalSet => {
            let subset_src = args
                .subset
                .as_deref()
                .ok_or_else(|| CliError::validation("causal-set exclusion needs --subset"))?;
            let subset = parse_capability_set(subset_src)
                .map_err(CliError::validation)?
                .into_inner();
            let anchor = if anchor.is_empty() {
                // smallest history that uses the whole subset, one step each
                History::new(
                    subset
                        .iter()
                        .map(|c| CapabilitySet::new([c.clone()]).expect("singleton"))
                        .collect(),
                )
            } else {
                anchor
            };
            EquivalenceClass::capability_subset(subset, anchor)?
        }
        ClassKind::StrongSet => {
            if anchor.is_empty() {
                return Err(CliError::validation("strong-set exclusion needs --anchor"));
            }
            EquivalenceClass::strong_set(anchor)
        }
        ClassKind::StrongOrder => {
            if anchor.is_empty() {
                return Err(CliError::validation("strong-order exclusion needs --anchor"));
            }
            EquivalenceClass::strong_order(anchor)
        }
    };
    let strategy = class.exclusion()?;
    save_strategy_file(&strategy, &args.out)?;
    println!(
        "wrote {} ({} states, {} transitions)",
        args.out,
        strategy.states.len(),
        strategy.transitions.len()
    );
    Ok(())
}

fn cmd_strategy_compose(args: ComposeArgs) -> Result<(), CliError> {
    let left = load_strategy_file(&args.left)?;
    let right = load_strategy_file(&args.right)?;
    let mut product = compose(&left, &right)?;
    if args.simplify {
        product = simplify(&product);
    }
    save_strategy_file(&product, &args.out)?;
    println!(
        "wrote {} ({} states, {} transitions)",
        args.out,
        product.states.len(),
        product.transitions.len()
    );
    Ok(())
}

fn load_strategy_arg(path: &str) -> Result<Strategy, CliError> {
    Ok(load_strategy_file(path)?)
}

fn cmd_strategy_enumerate(args: EnumerateArgs) -> Result<(), CliError> {
    let strategy = load_strategy_arg(&args.strategy)?;
    let universe = parse_universe(&args.universe)?;
    let histories = enumerate_language(&strategy, &universe, args.max_len, DEFAULT_ENUM_BUDGET)?;
    for h in &histories {
        println!("{h}");
    }
    eprintln!("{} histories up to length {}", histories.len(), args.max_len);
    Ok(())
}

fn cmd_strategy_contains(args: ContainsArgs) -> Result<(), CliError> {
    let strategy = load_strategy_arg(&args.strategy)?;
    let history = parse_history(&args.history)?;
    let universe = match &args.universe {
        Some(u) => parse_universe(u)?,
        None => history.0.clone(),
    };
    let contained = icsfuzz_core::equiv::language_contains(&strategy, &history, &universe);
    println!("{}", if contained { "yes" } else { "no" });
    Ok(())
}

fn cmd_prune(args: PruneArgs) -> Result<(), CliError> {
    let model = load_plant(&args.plant)?;
    let mut suite = SuiteFile::load(&args.suite)?;
    let entry = suite
        .tests
        .get(args.index)
        .ok_or_else(|| {
            CliError::validation(format!(
                "suite has {} tests, index {} is out of range",
                suite.tests.len(),
                args.index
            ))
        })?
        .clone();
    let spec = entry.to_replay_spec(&model)?;
    let mut executor = SimulatorExecutor::new(model.clone());
    let result = prune(&spec, &mut executor).map_err(|e| match e {
        icsfuzz_core::causal::CausalError::NotReproducible(msg) => diagnose_unreproducible(
            &model,
            &spec,
            msg,
        ),
        other => CliError::runtime(other),
    })?;

    let removed: Vec<String> = result
        .records
        .iter()
        .filter(|r| r.verdict == CausalVerdict::Pruned)
        .map(|r| format!("{} over [{}..{}]", r.capability, r.k, r.l))
        .collect();
    let causal: Vec<String> = result
        .records
        .iter()
        .filter(|r| r.verdict == CausalVerdict::Causal)
        .map(|r| format!("{} over [{}..{}]", r.capability, r.k, r.l))
        .collect();
    if removed.is_empty() {
        println!("all causal");
    } else {
        println!("removed:");
        for r in &removed {
            println!("  {r}");
        }
    }
    println!("causal:");
    for c in &causal {
        println!("  {c}");
    }
    println!(
        "minimised history: {} ({} probes)",
        result.trace.history,
        result.probes
    );

    if let Some(out) = &args.out {
        let minimised = SuiteTest::from_trace(
            &model,
            &result.trace,
            entry.iteration,
            entry.dt_secs,
            &result.records,
        );
        suite.tests[args.index] = minimised;
        suite.save(out)?;
        println!("wrote {out}");
    }
    Ok(())
}

/// On a failed reproduction, show where the replay diverges from the recorded
/// final readings to help track down a stale origin.
fn diagnose_unreproducible(
    model: &Arc<PlantModel>,
    spec: &icsfuzz_core::causal::ReplaySpec,
    msg: String,
) -> CliError {
    let mut executor = SimulatorExecutor::new(model.clone());
    let detail = match executor.replay(spec, &spec.history) {
        Ok(outcome) => {
            let readings = icsfuzz_core::plant::observe(model, outcome.trace.final_physical());
            let snapshot: Vec<String> =
                readings.iter().map(|(c, v)| format!("{c}={v:.3}")).collect();
            format!("final readings after replay: {}", snapshot.join(", "))
        }
        Err(e) => format!("replay itself failed: {e}"),
    };
    CliError::runtime(format!("{msg}\n{detail}"))
}

fn cmd_report(args: ReportArgs) -> Result<(), CliError> {
    let mut paths: Vec<PathBuf> = Vec::new();
    for arg in &args.suites {
        let p = PathBuf::from(arg);
        if p.is_dir() {
            let mut entries: Vec<PathBuf> = std::fs::read_dir(&p)?
                .filter_map(|e| e.ok())
                .map(|e| e.path())
                .filter(|p| p.to_string_lossy().ends_with(".suite.json"))
                .collect();
            entries.sort();
            paths.extend(entries);
        } else {
            paths.push(p);
        }
    }
    if paths.is_empty() {
        return Err(CliError::validation("no suite files given"));
    }
    let mut suites = Vec::new();
    for p in &paths {
        suites.push(SuiteFile::load(p)?);
    }
    let seed = suites[0].seed;
    let digest = suites[0].config_digest.clone();
    let report = SuiteReport::from_suites(seed, digest, &suites);
    print!("{}", report.render());
    Ok(())
}
