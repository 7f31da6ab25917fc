mod settings;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use hamdesign::circuit::vertices_for_edges;
use hamdesign::construct::{exhaustive_optimal, expand_to, half_fraction};
use hamdesign::criteria::{bayes_d_criterion, relative_d_efficiency, Design, PriorSpec};
use hamdesign::estimate::{
    default_lambda_grid, posterior_mean, ridge_cv, ridge_fit, EstimateFile, ObservationSet,
};
use hamdesign::routes::{nearest_neighbor_route, route, Heuristic};
use hamdesign::search::{multi_start, run_search, Algorithm, Cooling, SearchConfig};
use hamdesign::sim::{
    replicate_table2, run_scenario, summarize, write_results_csv, Scenario, ScenarioConfig,
    ScoreAgainst, Table2Config,
};
use hamdesign::Error;

use settings::{layered, read_config};

/// Bayesian D-optimal route designs, edge-cost estimation and routing.
///
/// Exit status: 0 on success, 2 on invalid input or configuration, 3 on a
/// numeric failure.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    /// Worker threads [default: available parallelism]
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// JSON object of settings for the subcommand; flags take precedence
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build an optimal design by recursive expansion or exhaustive search
    Construct(ConstructArgs),
    /// Search for a design with bubble-sort exchange or simulated annealing
    Search(SearchArgs),
    /// Score a design: log det(X'X + R) and relative D-efficiency
    Eval(EvalArgs),
    /// Estimate edge costs from observed route totals
    Estimate(EstimateArgs),
    /// Build a route from an edge-cost vector
    Route(RouteArgs),
    /// Run the route-cost Monte Carlo experiment
    Simulate(SimulateArgs),
    /// Median relative D-efficiency of repeated design searches
    Table2(Table2Args),
}

#[derive(Args, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct ConstructArgs {
    /// Number of vertices of the output design
    #[arg(long)]
    m: Option<usize>,
    /// Seed design file to expand [default: built-in six-run design on 5 vertices]
    #[arg(long)]
    from: Option<PathBuf>,
    /// Run size for an exhaustive search instead of expansion
    #[arg(long)]
    n: Option<usize>,
    /// Prior precision for exhaustive search [default: 0.01]
    #[arg(long)]
    precision: Option<f64>,
    /// Output design file [default: stdout]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct SearchArgs {
    #[arg(long)]
    m: Option<usize>,
    /// Run size
    #[arg(long)]
    n: Option<usize>,
    /// bubble or anneal [default: bubble]
    #[arg(long)]
    algo: Option<String>,
    /// Random starts, best kept [default: 10]
    #[arg(long)]
    restarts: Option<usize>,
    /// Iteration budget [default: 100 for bubble, 10000 for anneal]
    #[arg(long)]
    max_iter: Option<usize>,
    /// [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Annealing temperature scale [default: 1]
    #[arg(long)]
    cooling_scale: Option<f64>,
    /// Isotropic prior precision [default: 0.01]
    #[arg(long)]
    precision: Option<f64>,
    /// Prior JSON file (overrides --precision)
    #[arg(long)]
    prior: Option<PathBuf>,
    /// Start from this design file instead of random starts
    #[arg(long)]
    start: Option<PathBuf>,
    /// Output design file [default: stdout]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct EvalArgs {
    /// Design file
    #[arg(long)]
    design: Option<PathBuf>,
    /// Prior JSON file
    #[arg(long)]
    prior: Option<PathBuf>,
    /// Isotropic prior precision when no prior file is given [default: 0.01]
    #[arg(long)]
    precision: Option<f64>,
    /// Output JSON file [default: stdout]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct EstimateArgs {
    /// Observation CSV (v1..vm, y)
    #[arg(long)]
    obs: Option<PathBuf>,
    /// bayes or ridge [default: bayes]
    #[arg(long)]
    method: Option<String>,
    /// Prior JSON file for bayes
    #[arg(long)]
    prior: Option<PathBuf>,
    /// Isotropic prior precision with zero mean when no prior file is given [default: 0.01]
    #[arg(long)]
    precision: Option<f64>,
    /// Fixed ridge penalty; cross-validated when absent
    #[arg(long)]
    lambda: Option<f64>,
    /// Cross-validation folds [default: 10]
    #[arg(long)]
    folds: Option<usize>,
    /// Fold-shuffle seed [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Output JSON file [default: stdout]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct RouteArgs {
    /// nn, arb, 2opt or exact [default: nn]
    #[arg(long)]
    algo: Option<String>,
    /// Edge costs: a JSON array or an estimate file with beta_hat
    #[arg(long)]
    beta: Option<PathBuf>,
    /// Nearest-neighbor first vertex, or "all" for the best of every start [default: all]
    #[arg(long)]
    starts: Option<String>,
    /// Insertion-order seed for arb [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Output circuit file [default: stdout]
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Flags override the matching fields of the JSON experiment config.
#[derive(Args)]
struct SimulateArgs {
    /// a or b [default: a]
    #[arg(long)]
    scenario: Option<Scenario>,
    /// Delivery zones [default: 20]
    #[arg(long)]
    m: Option<usize>,
    /// Run sizes, comma separated [default: 49,96,191,381]
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// [default: 100]
    #[arg(long)]
    replications: Option<usize>,
    /// Prior precision is tau^2 [default: 0.1]
    #[arg(long)]
    tau: Option<f64>,
    /// [default: 1]
    #[arg(long)]
    seed: Option<u64>,
    /// [default: 10]
    #[arg(long)]
    folds: Option<usize>,
    /// Annealing iterations for each design [default: 10000]
    #[arg(long)]
    anneal_iter: Option<usize>,
    /// realized or clean [default: realized]
    #[arg(long)]
    score: Option<String>,
    /// Results CSV [default: stdout]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-cell quartiles as JSON
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct Table2Args {
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    /// bubble or anneal [default: bubble]
    #[arg(long)]
    algo: Option<String>,
    /// [default: 100]
    #[arg(long)]
    trials: Option<usize>,
    /// [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Random starts per trial [default: 10]
    #[arg(long)]
    restarts: Option<usize>,
    /// Iteration budget [default: 100 for bubble, 10000 for anneal]
    #[arg(long)]
    max_iter: Option<usize>,
    /// [default: 0.01]
    #[arg(long)]
    precision: Option<f64>,
    /// Output JSON file [default: stdout]
    #[arg(long)]
    out: Option<PathBuf>,
}

fn required<T>(v: Option<T>, flag: &str) -> Result<T> {
    v.ok_or_else(|| Error::Config(format!("--{flag} is required")).into())
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn write_json(path: Option<&Path>, value: &impl Serialize) -> Result<()> {
    let mut w = output(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    let mut w = output(path)?;
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn read_design(path: &Path) -> Result<Design> {
    Ok(Design::from_text(&read(path)?).with_context(|| format!("in {}", path.display()))?)
}

fn load_prior(path: Option<&Path>, precision: Option<f64>, m: usize) -> Result<PriorSpec> {
    match path {
        Some(p) => {
            let prior = PriorSpec::from_json(&read(p)?)?;
            if prior.m != m {
                return Err(Error::Config(format!(
                    "prior is for m={}, data has m={m}",
                    prior.m
                ))
                .into());
            }
            Ok(prior)
        }
        None => Ok(PriorSpec::isotropic(m, precision.unwrap_or(0.01))?),
    }
}

fn construct(a: ConstructArgs) -> Result<()> {
    let m = required(a.m, "m")?;
    let design = match (a.n, &a.from) {
        (Some(_), Some(_)) => {
            return Err(Error::Config("--n (exhaustive) and --from (expansion) are exclusive".into()).into())
        }
        (Some(n), None) => exhaustive_optimal(m, n, &PriorSpec::isotropic(m, a.precision.unwrap_or(0.01))?)?,
        (None, Some(path)) => expand_to(read_design(path)?, m)?,
        (None, None) => half_fraction(m)?,
    };
    write_text(a.out.as_deref(), &design.to_text())
}

fn search(a: SearchArgs) -> Result<()> {
    let algo: Algorithm = a.algo.as_deref().unwrap_or("bubble").parse()?;
    let start = a.start.as_deref().map(read_design).transpose()?;
    let m = match (&start, a.m) {
        (Some(d), _) => d.m(),
        (None, m) => required(m, "m")?,
    };
    let prior = load_prior(a.prior.as_deref(), a.precision, m)?;
    let mut cfg = SearchConfig::for_algorithm(algo).with_seed(a.seed.unwrap_or(0));
    cfg.restarts = a.restarts.unwrap_or(cfg.restarts);
    cfg.max_iter = a.max_iter.unwrap_or(cfg.max_iter);
    cfg.cooling = Cooling {
        scale: a.cooling_scale.unwrap_or(1.0),
    };
    let out = match start {
        Some(d0) => run_search(algo, &d0, &prior, &cfg)?,
        None => multi_start(algo, m, required(a.n, "n")?, &prior, &cfg)?,
    };
    let eff = relative_d_efficiency(&out.design, &prior)?;
    eprintln!(
        "{algo}: m={m} n={} log_det={:.6} rel_efficiency={eff:.6}",
        out.design.n(),
        out.log_det
    );
    write_text(a.out.as_deref(), &out.design.to_text())
}

fn eval(a: EvalArgs) -> Result<()> {
    let design = read_design(&required(a.design, "design")?)?;
    let prior = load_prior(a.prior.as_deref(), a.precision, design.m())?;
    let report = json!({
        "m": design.m(),
        "n": design.n(),
        "log_det": bayes_d_criterion(&design, &prior)?,
        "rel_efficiency": relative_d_efficiency(&design, &prior)?,
    });
    write_json(a.out.as_deref(), &report)
}

fn estimate(a: EstimateArgs) -> Result<()> {
    let path = required(a.obs, "obs")?;
    let obs = ObservationSet::read_csv(File::open(&path).with_context(|| format!("opening {}", path.display()))?)
        .with_context(|| format!("in {}", path.display()))?;
    let file = match a.method.as_deref().unwrap_or("bayes") {
        "bayes" => {
            let prior = load_prior(a.prior.as_deref(), a.precision, obs.m())?;
            EstimateFile::from(&posterior_mean(&obs, &prior)?)
        }
        "ridge" => match a.lambda {
            Some(l) => EstimateFile::from(&ridge_fit(&obs, l)?),
            None => {
                let grid = default_lambda_grid(hamdesign::circuit::num_edges(obs.m()), obs.n());
                let cv = ridge_cv(&obs, a.folds.unwrap_or(10), &grid, a.seed.unwrap_or(0))?;
                EstimateFile::from(&cv.fit)
            }
        },
        other => {
            return Err(Error::Config(format!("unknown method {other:?} (expected bayes or ridge)")).into())
        }
    };
    write_json(a.out.as_deref(), &file)
}

fn read_beta(path: &Path) -> Result<Vec<f64>> {
    let v: Value = serde_json::from_str(&read(path)?).map_err(Error::from)?;
    let beta = if v.is_array() {
        serde_json::from_value(v).map_err(Error::from)?
    } else {
        serde_json::from_value::<EstimateFile>(v).map_err(Error::from)?.beta_hat
    };
    if beta.iter().any(|b: &f64| !b.is_finite()) {
        return Err(Error::InvalidInput("edge costs must be finite".into()).into());
    }
    Ok(beta)
}

fn route_cmd(a: RouteArgs) -> Result<()> {
    let beta = read_beta(&required(a.beta, "beta")?)?;
    let m = vertices_for_edges(beta.len())?;
    let algo: Heuristic = a.algo.as_deref().unwrap_or("nn").parse()?;
    let circuit = match a.starts.as_deref().unwrap_or("all") {
        "all" => route(algo, &beta, m, a.seed.unwrap_or(0))?,
        v if algo == Heuristic::Nn => {
            let first: usize = v
                .parse()
                .map_err(|_| Error::Config(format!("--starts must be \"all\" or a vertex, got {v:?}")))?;
            nearest_neighbor_route(&beta, m, Some(first))?
        }
        _ => return Err(Error::Config("--starts applies to nn only".into()).into()),
    };
    eprintln!("cost {}", circuit.cost(&beta)?);
    write_text(a.out.as_deref(), &format!("{circuit}\n"))
}

fn simulate(a: SimulateArgs, config: Option<&Value>) -> Result<()> {
    let mut cfg = match config {
        Some(v) => serde_json::from_value::<ScenarioConfig>(v.clone())
            .map_err(|e| Error::Config(format!("config file: {e}")))?,
        None => ScenarioConfig::default(),
    };
    if let Some(v) = a.scenario {
        cfg.scenario = v;
    }
    if let Some(v) = a.m {
        cfg.m = v;
    }
    if let Some(v) = a.n {
        cfg.n_values = v;
    }
    if let Some(v) = a.replications {
        cfg.replications = v;
    }
    if let Some(v) = a.tau {
        cfg.tau = v;
    }
    if let Some(v) = a.seed {
        cfg.base_seed = v;
    }
    if let Some(v) = a.folds {
        cfg.folds = v;
    }
    if let Some(v) = a.anneal_iter {
        cfg.anneal_iter = v;
    }
    if let Some(v) = a.score {
        cfg.score = serde_json::from_value::<ScoreAgainst>(Value::String(v))
            .map_err(|e| Error::Config(format!("--score: {e}")))?;
    }
    cfg.validate()?;
    let results = run_scenario(&cfg)?;
    let mut w = output(a.out.as_deref())?;
    write_results_csv(&results, &mut w)?;
    w.flush()?;
    if let Some(path) = a.summary {
        write_json(Some(&path), &summarize(&results))?;
    }
    Ok(())
}

fn table2(a: Table2Args) -> Result<()> {
    let algo: Algorithm = a.algo.as_deref().unwrap_or("bubble").parse()?;
    let cfg = Table2Config {
        seed: a.seed.unwrap_or(0),
        restarts: a.restarts.unwrap_or(10),
        max_iter: a.max_iter,
        precision: a.precision.unwrap_or(0.01),
    };
    let res = replicate_table2(
        required(a.m, "m")?,
        required(a.n, "n")?,
        algo,
        a.trials.unwrap_or(100),
        &cfg,
    )?;
    eprintln!("median relative D-efficiency {:.4}", res.median);
    write_json(a.out.as_deref(), &res)
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("--threads: {e}")))?;
    }
    let config = cli.config.as_deref().map(read_config).transpose()?;
    let config = config.as_ref();
    match cli.command {
        Command::Construct(a) => construct(layered(&a, config)?),
        Command::Search(a) => search(layered(&a, config)?),
        Command::Eval(a) => eval(layered(&a, config)?),
        Command::Estimate(a) => estimate(layered(&a, config)?),
        Command::Route(a) => route_cmd(layered(&a, config)?),
        Command::Simulate(a) => simulate(a, config),
        Command::Table2(a) => table2(layered(&a, config)?),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_numeric() => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
