//! `ftm`: generate factorization threshold networks, evaluate closed forms,
//! calibrate thresholds, fit degree distributions and run growth sweeps.
//!
//! Exit codes: 0 success, 1 domain / feasibility / numeric / data errors,
//! 2 usage errors.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use ftm_core::analytics::{self, GrowthSchedule};
use ftm_core::generator::{degrees_from_edges, Degrees};
use ftm_core::growth::{self, GrowthSeries};
use ftm_core::io::{self, RunManifest};
use ftm_core::statfit::{self, FitResult};
use ftm_core::{EdgeRule, Error, GenerateOptions, LinkFn, ModelConfig, ParetoParams, Result};

#[derive(Parser)]
#[command(name = "ftm", version, about = "Factorization threshold network models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a graph and write nodes.tsv, edges.tsv and manifest.json.
    Generate(GenerateArgs),
    /// Print a closed-form quantity.
    Oracle {
        #[command(subcommand)]
        which: Oracle,
    },
    /// Solve for the threshold giving a target expected edge count.
    Calibrate(CalibrateArgs),
    /// Fit a discrete power law to the degrees of a graph.
    Analyze(AnalyzeArgs),
    /// Run a growth sweep, or fit a growth curve with `growth fit`.
    Growth(GrowthCommand),
}

#[derive(Args, Clone, Copy)]
struct ParetoArgs {
    /// Pareto shape.
    #[arg(long, default_value_t = 3.0)]
    a: f64,
    /// Pareto scale.
    #[arg(long, default_value_t = 1.0)]
    w0: f64,
}

impl ParetoArgs {
    fn params(&self) -> Result<ParetoParams> {
        ParetoParams::new(self.a, self.w0)
    }
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum Variant {
    Undirected,
    Directed,
    Linkfn,
}

#[derive(Args, Clone)]
struct RuleArgs {
    #[arg(long, value_enum, default_value_t = Variant::Undirected)]
    variant: Variant,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// identity | exp | oddpow:m:c | evenpow:m
    #[arg(long, default_value = "identity")]
    h: String,
}

impl RuleArgs {
    fn rule(&self, theta: f64) -> Result<EdgeRule> {
        match self.variant {
            Variant::Undirected => EdgeRule::undirected(theta),
            Variant::Directed => EdgeRule::directed(theta, self.alpha, self.beta),
            Variant::Linkfn => EdgeRule::link_function(theta, self.alpha, self.beta, self.h.parse::<LinkFn>()?),
        }
    }

    /// Threshold with the given expected number of edges (arcs when directed).
    fn calibrate(&self, n: u64, pareto: &ParetoParams, target: f64) -> Result<f64> {
        match self.variant {
            Variant::Undirected => analytics::calibrate_theta(n, pareto, target),
            Variant::Directed => analytics::calibrate_theta_directed(n, pareto, self.alpha, self.beta, target),
            Variant::Linkfn => Err(Error::UnsupportedAnalytics("calibration for link-function rules".into())),
        }
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, required_unless_present = "from_manifest")]
    n: Option<usize>,
    #[command(flatten)]
    pareto: ParetoArgs,
    #[arg(long, default_value_t = 3)]
    d: usize,
    #[arg(long, conflicts_with = "target_edges")]
    theta: Option<f64>,
    /// Expected edge (or arc) count to calibrate the threshold for.
    #[arg(long)]
    target_edges: Option<f64>,
    #[command(flatten)]
    rule: RuleArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long)]
    workers: Option<usize>,
    /// Re-run the configuration recorded in a manifest.
    #[arg(long, conflicts_with_all = ["n", "theta", "target_edges"])]
    from_manifest: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Oracle {
    /// Edge probability of a random pair.
    Pe {
        #[command(flatten)]
        pareto: ParetoArgs,
        #[arg(long)]
        theta: f64,
    },
    /// Edge probability given one endpoint's weight.
    Pew {
        #[command(flatten)]
        pareto: ParetoArgs,
        #[arg(long)]
        theta: f64,
        #[arg(long)]
        w: f64,
    },
    /// Probability that a random centre links to two random nodes.
    Pwedge {
        #[command(flatten)]
        pareto: ParetoArgs,
        #[arg(long)]
        theta: f64,
    },
    /// Variance of the edge count.
    Var {
        #[command(flatten)]
        pareto: ParetoArgs,
        #[arg(long)]
        theta: f64,
        #[arg(long)]
        n: u64,
    },
    /// Expected edge count.
    Em {
        #[command(flatten)]
        pareto: ParetoArgs,
        #[arg(long)]
        theta: f64,
        #[arg(long)]
        n: u64,
    },
    /// Expected edge count under theta(n) = D n^(1/a).
    EmLinlog {
        #[command(flatten)]
        pareto: ParetoArgs,
        #[arg(long)]
        n: u64,
        #[arg(long = "D")]
        coef: f64,
    },
    /// Arc probability given the source weight.
    PewDirected {
        #[command(flatten)]
        pareto: ParetoArgs,
        #[arg(long)]
        theta: f64,
        #[arg(long)]
        w: f64,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        beta: f64,
    },
    /// Arc probability given the source weight under a link function.
    PewLinkfn {
        #[command(flatten)]
        pareto: ParetoArgs,
        #[arg(long)]
        theta: f64,
        #[arg(long)]
        w: f64,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long)]
        h: String,
    },
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    n: u64,
    #[command(flatten)]
    pareto: ParetoArgs,
    #[arg(long)]
    target_edges: f64,
    #[command(flatten)]
    rule: RuleArgs,
    /// Also write calibration.json here.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
#[command(group(clap::ArgGroup::new("input").required(true).args(["edges", "degrees"])))]
struct AnalyzeArgs {
    /// Edge list (TSV).
    #[arg(long)]
    edges: Option<PathBuf>,
    /// Degree file, one value per line.
    #[arg(long)]
    degrees: Option<PathBuf>,
    /// Node count for an edge list; defaults to the largest id + 1.
    #[arg(long, requires = "edges")]
    n: Option<usize>,
    /// Fit out- and in-degrees separately.
    #[arg(long, requires = "edges")]
    directed: bool,
    /// Fixed x_min; scanned when absent.
    #[arg(long)]
    x_min: Option<u64>,
    /// Bootstrap replicates for the KS p-value (>= 100).
    #[arg(long)]
    bootstrap: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write fit.json and CCDF CSVs here.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
#[command(args_conflicts_with_subcommands = true)]
struct GrowthCommand {
    #[command(subcommand)]
    fit: Option<GrowthSub>,
    #[command(flatten)]
    run: GrowthArgs,
}

#[derive(Subcommand)]
enum GrowthSub {
    /// Least-squares fit of m = c1 n ln n + c2 n to a series CSV.
    Fit {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ScheduleKind {
    /// theta(n) = D n^(1/a)
    Powerlaw,
    /// theta(n) calibrated so that E M(n) = c n
    Linear,
    /// fixed theta
    Constant,
}

#[derive(Args)]
struct GrowthArgs {
    #[arg(long, value_enum, default_value_t = ScheduleKind::Powerlaw)]
    schedule: ScheduleKind,
    #[arg(long = "D", default_value_t = 1.0)]
    coef: f64,
    /// Edges per node for the linear schedule.
    #[arg(long, default_value_t = 5.0)]
    c: f64,
    #[arg(long, default_value_t = 0.0)]
    theta: f64,
    #[command(flatten)]
    pareto: ParetoArgs,
    #[arg(long, value_delimiter = ',')]
    ns: Vec<u64>,
    /// Number of seeds.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    /// First seed; seeds are consecutive from here.
    #[arg(long, default_value_t = 1)]
    seed_base: u64,
    /// Also fit the growth curve to the pooled points.
    #[arg(long)]
    fit: bool,
    #[arg(long)]
    workers: Option<usize>,
    /// Write per-seed series CSVs and reports here.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn emit(line: impl std::fmt::Display) -> Result<()> {
    writeln!(std::io::stdout().lock(), "{line}")?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(args) => cmd_generate(args),
        Command::Oracle { which } => cmd_oracle(which),
        Command::Calibrate(args) => cmd_calibrate(args),
        Command::Analyze(args) => cmd_analyze(args),
        Command::Growth(GrowthCommand { fit: Some(GrowthSub::Fit { input }), .. }) => cmd_growth_fit(&input),
        Command::Growth(GrowthCommand { fit: None, run }) => cmd_growth(run),
    }
}

fn options(workers: Option<usize>) -> Result<GenerateOptions> {
    let opts = GenerateOptions::from_env()?;
    Ok(match workers {
        Some(w) => opts.with_workers(w),
        None => opts,
    })
}

fn print_json(value: &serde_json::Value) -> Result<()> {
    emit(serde_json::to_string(value)?)
}

fn cmd_generate(args: GenerateArgs) -> Result<()> {
    let (config, target) = match &args.from_manifest {
        Some(path) => {
            let m = RunManifest::read(path)?;
            (m.config, m.target_edges)
        }
        None => {
            let n = args.n.expect("clap enforces --n");
            let pareto = args.pareto.params()?;
            let theta = match (args.theta, args.target_edges) {
                (Some(t), _) => t,
                (None, Some(target)) => args.rule.calibrate(n as u64, &pareto, target)?,
                (None, None) => return Err(Error::InvalidParameter("give --theta or --target-edges".into())),
            };
            (ModelConfig::new(n, args.d, pareto, args.rule.rule(theta)?, args.seed)?, args.target_edges)
        }
    };
    let graph = ftm_core::generate_with(&config, &options(args.workers)?)?;
    let manifest = io::write_run(&graph, &args.out_dir, target)?;
    print_json(&json!({
        "n": config.n,
        "theta": config.rule.theta(),
        "edges": manifest.edge_count,
        "out_dir": args.out_dir,
        "artifacts": manifest.artifacts,
    }))
}

fn cmd_oracle(which: Oracle) -> Result<()> {
    let (name, value) = match which {
        Oracle::Pe { pareto, theta } => ("pe", analytics::p_edge(&pareto.params()?, theta)?),
        Oracle::Pew { pareto, theta, w } => ("pew", analytics::p_edge_given_weight(w, &pareto.params()?, theta)?),
        Oracle::Pwedge { pareto, theta } => ("pwedge", analytics::p_wedge(&pareto.params()?, theta)?),
        Oracle::Var { pareto, theta, n } => ("var", analytics::variance_edges(n, &pareto.params()?, theta)?),
        Oracle::Em { pareto, theta, n } => ("em", analytics::expected_edges(n, &pareto.params()?, theta)?),
        Oracle::EmLinlog { pareto, n, coef } => ("em-linlog", analytics::expected_edges_linlog(n, coef, &pareto.params()?)?),
        Oracle::PewDirected { pareto, theta, w, alpha, beta } => (
            "pew-directed",
            analytics::p_edge_given_weight_directed(w, &pareto.params()?, theta, alpha, beta)?,
        ),
        Oracle::PewLinkfn { pareto, theta, w, alpha, beta, h } => {
            let h: LinkFn = h.parse()?;
            ("pew-linkfn", analytics::p_edge_given_weight_linkfn(w, &pareto.params()?, theta, alpha, beta, &h)?)
        }
    };
    emit(value)?;
    print_json(&json!({ "quantity": name, "value": value }))
}

fn cmd_calibrate(args: CalibrateArgs) -> Result<()> {
    let pareto = args.pareto.params()?;
    let theta = args.rule.calibrate(args.n, &pareto, args.target_edges)?;
    let achieved = match args.rule.variant {
        Variant::Directed => analytics::expected_arcs(args.n, &pareto, theta, args.rule.alpha, args.rule.beta)?,
        _ => analytics::expected_edges(args.n, &pareto, theta)?,
    };
    let report = json!({
        "n": args.n,
        "a": pareto.shape(),
        "w0": pareto.scale(),
        "variant": args.rule.rule(theta)?.name(),
        "target_edges": args.target_edges,
        "theta": theta,
        "expected_edges": achieved,
    });
    if let Some(dir) = &args.out_dir {
        std::fs::create_dir_all(dir)?;
        let mut f = File::create(dir.join("calibration.json"))?;
        serde_json::to_writer_pretty(&mut f, &report)?;
        writeln!(f)?;
    }
    emit(theta)?;
    print_json(&report)
}

fn fit_one(label: &str, degrees: &[u64], args: &AnalyzeArgs, dir: Option<&Path>) -> Result<FitResult> {
    let mut fit = statfit::fit_powerlaw_discrete(degrees, args.x_min)?;
    if let Some(b) = args.bootstrap {
        let gof = statfit::gof_pvalue(degrees, &fit, b, args.seed)?;
        fit = fit.with_gof(&gof);
    }
    if let Some(dir) = dir {
        let name = if label.is_empty() { "ccdf.csv".to_string() } else { format!("ccdf_{label}.csv") };
        statfit::ccdf(degrees)?.write_csv(File::create(dir.join(name))?)?;
    }
    Ok(fit)
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<()> {
    let dir = args.out_dir.as_deref();
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir)?;
    }
    let report = if let Some(path) = &args.degrees {
        let degrees = io::read_degrees(File::open(path)?)?;
        json!({ "fit": fit_one("", &degrees, &args, dir)? })
    } else {
        let path = args.edges.as_ref().expect("clap enforces an input");
        let edges = io::read_edge_list(File::open(path)?)?;
        let max_id = edges.iter().map(|&(u, v)| u.max(v)).max().unwrap_or(0);
        let n = args.n.unwrap_or(max_id + 1);
        if n <= max_id {
            return Err(Error::Validation(format!("--n {n} is not above the largest node id {max_id}")));
        }
        match degrees_from_edges(n, &edges, args.directed) {
            Degrees::Undirected(d) => json!({ "fit": fit_one("", &d, &args, dir)? }),
            Degrees::Directed { out, inn } => json!({
                "out": fit_one("out", &out, &args, dir)?,
                "in": fit_one("in", &inn, &args, dir)?,
            }),
        }
    };
    if let Some(dir) = dir {
        let mut f = File::create(dir.join("fit.json"))?;
        serde_json::to_writer_pretty(&mut f, &report)?;
        writeln!(f)?;
    }
    print_json(&report)
}

fn cmd_growth(args: GrowthArgs) -> Result<()> {
    if args.ns.is_empty() {
        return Err(Error::InvalidParameter("--ns needs at least one size".into()));
    }
    let pareto = args.pareto.params()?;
    let schedule = match args.schedule {
        ScheduleKind::Powerlaw => GrowthSchedule::power_law(args.coef)?,
        ScheduleKind::Linear => GrowthSchedule::linear_target(args.c),
        ScheduleKind::Constant => GrowthSchedule::Constant(args.theta),
    };
    let seeds: Vec<u64> = (0..args.seeds).map(|k| args.seed_base + k).collect();
    let base = ModelConfig::new(1, 3, pareto, EdgeRule::undirected(0.0)?, 0)?;
    let series = growth::run_growth_sweep(&schedule, &args.ns, &base, &seeds, &options(args.workers)?)?;

    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    writeln!(out, "seed,n,m,em,var,theta,m_over_em")?;
    for s in &series {
        for r in &s.records {
            let (em, var, theta) = (r.em.unwrap(), r.var.unwrap(), r.theta.unwrap());
            writeln!(out, "{},{},{},{},{},{},{}", s.seed.unwrap(), r.n, r.m, em, var, theta, r.m / em)?;
        }
    }
    if let Some(dir) = &args.out_dir {
        std::fs::create_dir_all(dir)?;
        for s in &series {
            s.write_csv(File::create(dir.join(format!("series_seed{}.csv", s.seed.unwrap())))?)?;
        }
    }
    if series.len() >= growth::MIN_CONCENTRATION_SEEDS {
        let rows = growth::concentration_report(&series)?;
        emit_summary("concentration", &serde_json::to_value(&rows)?, args.out_dir.as_deref())?;
    }
    if args.fit {
        let points: Vec<(f64, f64)> = series.iter().flat_map(GrowthSeries::points).collect();
        let fit = growth::fit_growth_curve(&points)?;
        emit_summary("fit", &serde_json::to_value(fit)?, args.out_dir.as_deref())?;
    }
    Ok(())
}

/// Summaries go to stderr so that stdout stays a single CSV table.
fn emit_summary(name: &str, value: &serde_json::Value, dir: Option<&Path>) -> Result<()> {
    eprintln!("{}", serde_json::to_string(&json!({ name: value }))?);
    if let Some(dir) = dir {
        let mut f = File::create(dir.join(format!("{name}.json")))?;
        serde_json::to_writer_pretty(&mut f, value)?;
        writeln!(f)?;
    }
    Ok(())
}

fn cmd_growth_fit(input: &Path) -> Result<()> {
    let series = growth::ingest_series(input)?;
    let fit = growth::fit_growth_curve(&series.points())?;
    emit(format_args!("c1={} c2={} residual={}", fit.c1, fit.c2, fit.residual))?;
    print_json(&json!({ "fit": fit, "log": "natural", "points": series.records.len() }))
}
