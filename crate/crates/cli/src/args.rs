use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "icsfuzz", about = "Fuzz a simulated control plant for causally different tests")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check plant, strategy, and campaign files; exit 1 on any violation
    Validate(ValidateArgs),
    /// Run the plant for a fixed horizon, optionally injecting capabilities
    Simulate(SimulateArgs),
    /// Run fuzzing campaigns and write suites plus a report
    Fuzz(FuzzArgs),
    /// Build, combine, and query strategies
    Strategy(StrategyArgs),
    /// Re-run causal minimisation on one recorded suite entry
    Prune(PruneArgs),
    /// Summarise previously written suite files
    Report(ReportArgs),
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    /// Plant model file; the built-in reference plant when omitted
    #[arg(long)]
    pub plant: Option<String>,
    /// Strategy files to check (validated against the plant)
    #[arg(long = "strategy")]
    pub strategies: Vec<String>,
    /// Campaign configuration files to check
    #[arg(long = "campaign")]
    pub campaigns: Vec<String>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long)]
    pub plant: Option<String>,
    /// Simulated horizon in seconds
    #[arg(long)]
    pub horizon: u64,
    /// Injection script: TOML with [[inject]] from/to/caps spans
    #[arg(long)]
    pub inject: Option<String>,
    /// Directory for the trajectory log
    #[arg(long, default_value = "out")]
    pub out: String,
}

#[derive(Args, Debug)]
pub struct FuzzArgs {
    /// Campaign configuration file; flags below override nothing when given
    #[arg(long)]
    pub config: Option<String>,
    #[arg(long)]
    pub plant: Option<String>,
    /// Goal names like LIT101-High, or `all`
    #[arg(long, value_delimiter = ',')]
    pub goals: Vec<String>,
    #[arg(long, default_value = "causal-set")]
    pub class: String,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Wall-clock budget per goal in seconds
    #[arg(long)]
    pub budget_secs: Option<f64>,
    /// Iteration budget per goal (for reproducible runs)
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Candidate walks per planning round
    #[arg(long)]
    pub walks: Option<usize>,
    /// Maximum transitions per walk
    #[arg(long)]
    pub walk_len: Option<usize>,
    /// Interval override in seconds for every goal
    #[arg(long)]
    pub dt: Option<u64>,
    #[arg(long, default_value = "out")]
    pub out: String,
}

#[derive(Args, Debug)]
pub struct StrategyArgs {
    #[command(subcommand)]
    pub command: StrategyCommand,
}

#[derive(Subcommand, Debug)]
pub enum StrategyCommand {
    /// Write the exclusion strategy for an equivalence class
    Excl(ExclArgs),
    /// Parallel-compose two strategy files
    Compose(ComposeArgs),
    /// List every derivable history up to a length over a set universe
    Enumerate(EnumerateArgs),
    /// Ask whether a history is derivable from a strategy
    Contains(ContainsArgs),
}

#[derive(Args, Debug)]
pub struct ExclArgs {
    /// causal-set, strong-set, or strong-order
    #[arg(long)]
    pub class: String,
    /// Anchor history, e.g. `{[MV101,open]};{};{[P101,off],[P102,off]}`
    #[arg(long, default_value = "")]
    pub anchor: String,
    /// Capability subset for causal-set classes, e.g. `{[MV101,open]}`
    #[arg(long)]
    pub subset: Option<String>,
    #[arg(long)]
    pub out: String,
}

#[derive(Args, Debug)]
pub struct ComposeArgs {
    pub left: String,
    pub right: String,
    /// Prune unsatisfiable transitions and unreachable states afterwards
    #[arg(long)]
    pub simplify: bool,
    #[arg(long)]
    pub out: String,
}

#[derive(Args, Debug)]
pub struct EnumerateArgs {
    pub strategy: String,
    /// Universe of capability sets, `;`-separated
    #[arg(long)]
    pub universe: String,
    #[arg(long, default_value_t = 3)]
    pub max_len: usize,
}

#[derive(Args, Debug)]
pub struct ContainsArgs {
    pub strategy: String,
    /// History to test, `;`-separated capability sets (empty for ε)
    #[arg(long, default_value = "")]
    pub history: String,
    /// Universe of capability sets, `;`-separated (defaults to the history's)
    #[arg(long)]
    pub universe: Option<String>,
}

#[derive(Args, Debug)]
pub struct PruneArgs {
    /// Suite file written by `fuzz`
    #[arg(long)]
    pub suite: String,
    /// Which test in the suite to prune
    #[arg(long, default_value_t = 0)]
    pub index: usize,
    #[arg(long)]
    pub plant: Option<String>,
    /// Rewrite the suite file with the minimised entry
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Suite files, or a directory containing them
    pub suites: Vec<String>,
}
