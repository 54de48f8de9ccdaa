//! `netate` command-line interface.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use netate::analysis::{analyze, drop_isolated_units, network_for_units, AnalysisOptions, VarianceMode};
use netate::estimators::{Method, NpTuning};
use netate::graphon::{sample_graph, sample_latents, GraphonSpec};
use netate::rng::{Component, StreamKey};
use netate::sim::{
    emit_report, load_contact_file, reproduce_table, run_scenario, theoretical_variance_oracle,
    write_synthetic_contacts, write_table_report, ContactPeriod, Formula, ReportFormat, ReproduceOptions, RunConfig,
    Scenario, ScenarioId, TableId, GRAPHON_SPARSITY,
};
use netate::trial::{load_edge_list, read_dataset};
use netate::variance::{PiSource, PolyBasis};

#[derive(Parser)]
#[command(name = "netate", version, about = "Treatment-effect estimation under network interference")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo study of a registered scenario.
    Simulate(SimulateArgs),
    /// Re-run a reference table or figure and compare.
    Reproduce(ReproduceArgs),
    /// Analyze an observed dataset.
    Estimate(EstimateArgs),
    /// Evaluate an asymptotic-variance formula by Monte Carlo.
    Oracle(OracleArgs),
    /// Sample a graph from a graphon and write its edge list.
    SampleGraph(SampleGraphArgs),
    /// Write the synthetic morning and midday contact edge lists.
    SynthContacts(SynthContactsArgs),
}

#[derive(Args)]
struct WorkerArgs {
    /// Worker threads.
    #[arg(long, env = "NETATE_WORKERS", default_value_t = default_workers())]
    workers: usize,
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |w| w.get())
}

#[derive(Args)]
struct TuningArgs {
    /// Density quantile used for the trimming constant.
    #[arg(long, default_value_t = 0.01)]
    alpha: f64,
    /// Kernel bandwidth (overrides the rule of thumb).
    #[arg(long)]
    h_band: Option<f64>,
    /// Trimming threshold (overrides the rule of thumb).
    #[arg(long)]
    b_trim: Option<f64>,
    /// Constant of the rule-of-thumb bandwidth.
    #[arg(long)]
    bandwidth_constant: Option<f64>,
}

impl TuningArgs {
    fn tuning(&self, default: NpTuning) -> NpTuning {
        NpTuning {
            alpha: self.alpha,
            h_band: self.h_band,
            b_trim: self.b_trim,
            bandwidth_constant: self.bandwidth_constant.or(default.bandwidth_constant),
            ..default
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    scenario: String,
    /// Sample size (graphon scenarios).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    pi: Option<f64>,
    /// Covariate dimension (sec41-main).
    #[arg(long, default_value_t = 1)]
    p: usize,
    /// Use the exposure `pi` instead of the neighbor fraction (sec41-main).
    #[arg(long)]
    no_interference: bool,
    /// Comma-separated subset of dim, linear, np.
    #[arg(long, default_value = "dim,linear,np", value_delimiter = ',')]
    methods: Vec<String>,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    workers: WorkerArgs,
    /// Contact edge list for contact-vaccine.
    #[arg(long, default_value = "data/contact_morning.csv")]
    contact_file: PathBuf,
    /// Skip variance estimation and intervals.
    #[arg(long)]
    no_variance: bool,
    #[command(flatten)]
    tuning: TuningArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReproduceArgs {
    #[arg(long)]
    table: String,
    /// Fraction of the full 1000 replicates.
    #[arg(long, default_value_t = 1.0)]
    budget: f64,
    /// Explicit replicate count (overrides --budget).
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long, default_value_t = ReproduceOptions::default().seed)]
    seed: u64,
    #[command(flatten)]
    workers: WorkerArgs,
    #[arg(long, default_value = "data")]
    contact_dir: PathBuf,
    #[arg(long, default_value = "reports")]
    out: PathBuf,
}

#[derive(Args)]
struct EstimateArgs {
    /// Dataset CSV with header y,w,z1,...,zp.
    #[arg(long)]
    data: PathBuf,
    /// Edge list whose vertex ids are dataset row indices.
    #[arg(long)]
    edges: Option<PathBuf>,
    #[arg(long, default_value = "linear")]
    method: String,
    /// Design treatment probability.
    #[arg(long)]
    pi: f64,
    /// spectral, conservative or polyseq.
    #[arg(long)]
    variance: Option<String>,
    /// Eigenpairs for the spectral network term.
    #[arg(long)]
    rank: Option<usize>,
    #[arg(long, default_value_t = 5)]
    max_degree: usize,
    #[arg(long, default_value_t = 0.05)]
    rel_tol: f64,
    /// Use Legendre instead of monomial polynomial features.
    #[arg(long)]
    legendre: bool,
    /// Use the sample treated share instead of the design pi in variances.
    #[arg(long)]
    sample_pi: bool,
    /// Minimum contact count for an edge.
    #[arg(long, default_value_t = 1)]
    min_count: u64,
    /// Drop units without neighbors instead of failing.
    #[arg(long)]
    drop_isolated: bool,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[command(flatten)]
    tuning: TuningArgs,
    /// Write JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    scenario: String,
    /// vreg, vdim or vnp.
    #[arg(long)]
    formula: String,
    #[arg(long)]
    pi: Option<f64>,
    #[arg(long, default_value_t = 1)]
    p: usize,
    #[arg(long)]
    no_interference: bool,
    #[arg(long, default_value = "data/contact_morning.csv")]
    contact_file: PathBuf,
    #[arg(long, default_value_t = 1_000_000)]
    mc_reps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct SampleGraphArgs {
    /// quadratic, constant:<c> or rank1:<expr>.
    #[arg(long, default_value = "quadratic")]
    graphon: String,
    #[arg(long)]
    n: usize,
    /// Sparsity exponent gamma in rho_n = n^(-gamma).
    #[arg(long, default_value_t = GRAPHON_SPARSITY)]
    gamma: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthContactsArgs {
    #[arg(long, default_value = "data")]
    out: PathBuf,
    #[arg(long, default_value_t = 2009)]
    seed: u64,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

type CliResult = Result<(), Box<dyn std::error::Error>>;

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Reproduce(a) => reproduce(a),
        Command::Estimate(a) => estimate(a),
        Command::Oracle(a) => oracle(a),
        Command::SampleGraph(a) => sample(a),
        Command::SynthContacts(a) => synth(a),
    }
}

fn build_scenario(
    id: &str,
    pi: Option<f64>,
    p: usize,
    no_interference: bool,
    contact_file: &std::path::Path,
) -> Result<Scenario, netate::Error> {
    let id: ScenarioId = id.parse()?;
    let scenario = match id {
        ScenarioId::Sec31Validation => Scenario::sec31_validation(pi.unwrap_or(0.5))?,
        ScenarioId::Sec41Main => Scenario::sec41_main(p, !no_interference)?,
        ScenarioId::ContactVaccine => Scenario::contact_vaccine(load_contact_file(contact_file)?)?,
    };
    match pi {
        Some(pi) => scenario.with_pi(pi),
        None => Ok(scenario),
    }
}

fn simulate(a: SimulateArgs) -> CliResult {
    let scenario = build_scenario(&a.scenario, a.pi, a.p, a.no_interference, &a.contact_file)?;
    let tuning = a.tuning.tuning(scenario.np_tuning);
    let scenario = scenario.with_np_tuning(tuning);
    let methods = a.methods.iter().map(|m| m.parse()).collect::<Result<Vec<Method>, _>>()?;
    let mut config = RunConfig::new(a.n, methods, a.reps, a.seed).with_workers(a.workers.workers);
    config.variance = !a.no_variance;
    let summary = run_scenario(&scenario, &config)?;
    for path in emit_report(&summary, &a.out, &ReportFormat::ALL)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn reproduce(a: ReproduceArgs) -> CliResult {
    let table: TableId = a.table.parse()?;
    let options = ReproduceOptions {
        budget: a.budget,
        reps: a.reps,
        seed: a.seed,
        workers: a.workers.workers,
        contact_dir: a.contact_dir,
    };
    let report = reproduce_table(table, &options)?;
    let mut out = io::stdout().lock();
    writeln!(
        out,
        "{} reps={}{}",
        report.table,
        report.reps,
        if report.scaled {
            format!(" (scaled, tolerances x{:.3})", report.tolerance_factor)
        } else {
            String::new()
        }
    )?;
    for c in &report.cells {
        let reference = c.reference.map_or("-".to_string(), |p| format!("{p:.4}"));
        let status = match c.within {
            Some(true) => "ok",
            Some(false) => "MISS",
            None => "",
        };
        writeln!(out, "{:<44} reference {:>9} computed {:>9.4} {}", c.label, reference, c.computed, status)?;
    }
    for path in write_table_report(&report, &a.out)? {
        writeln!(out, "{}", path.display())?;
    }
    Ok(())
}

fn estimate(a: EstimateArgs) -> CliResult {
    let method: Method = a.method.parse()?;
    let mut data = read_dataset(&a.data, a.pi)?;
    if let Some(edges) = &a.edges {
        let list = load_edge_list(edges, a.min_count)?;
        let network = network_for_units(&list, data.n())?;
        data = data.with_network(network)?;
        if a.drop_isolated {
            let (kept, rows) = drop_isolated_units(&data)?;
            if rows.len() < data.n() {
                log::warn!("dropped {} isolated units", data.n() - rows.len());
            }
            data = kept;
        }
    }
    let options = AnalysisOptions {
        variance: a.variance.as_deref().map(str::parse::<VarianceMode>).transpose()?,
        rank: a.rank,
        np_tuning: a.tuning.tuning(NpTuning::default()),
        max_degree: a.max_degree,
        rel_tol: a.rel_tol,
        basis: if a.legendre { PolyBasis::Legendre } else { PolyBasis::Monomial },
        level: a.level,
        pi_source: if a.sample_pi { PiSource::Sample } else { PiSource::Design },
        ..AnalysisOptions::new(method)
    };
    let report = analyze(&data, &options)?;
    write_json(&report, a.out.as_ref())
}

fn oracle(a: OracleArgs) -> CliResult {
    let scenario = build_scenario(&a.scenario, a.pi, a.p, a.no_interference, &a.contact_file)?;
    let formula = match a.formula.as_str() {
        "vreg" => Formula::Vreg,
        "vdim" => Formula::Vdim,
        "vnp" => Formula::Vnp,
        other => return Err(format!("unknown formula `{other}` (expected vreg, vdim or vnp)").into()),
    };
    let v = theoretical_variance_oracle(&scenario, &formula, a.mc_reps, a.seed)?;
    #[derive(Serialize)]
    struct Out<'a> {
        scenario: ScenarioId,
        formula: &'a str,
        value: f64,
        std_error: f64,
        mc_reps: usize,
    }
    write_json(
        &Out {
            scenario: scenario.id,
            formula: &a.formula,
            value: v.value,
            std_error: v.std_error,
            mc_reps: a.mc_reps,
        },
        None,
    )
}

fn sample(a: SampleGraphArgs) -> CliResult {
    let spec = GraphonSpec::from_key(&a.graphon, a.gamma)?;
    let key = StreamKey::new(a.seed);
    let latents = sample_latents(a.n, &mut key.stream(Component::Latents, 0))?;
    let graph = sample_graph(&spec, &latents, &mut key.stream(Component::Edges, 0))?;
    match a.out {
        Some(path) => graph.write_edge_list(BufWriter::new(File::create(path)?))?,
        None => graph.write_edge_list(io::stdout().lock())?,
    }
    Ok(())
}

fn synth(a: SynthContactsArgs) -> CliResult {
    std::fs::create_dir_all(&a.out)?;
    for period in ContactPeriod::ALL {
        let path = a.out.join(period.file_name());
        write_synthetic_contacts(&path, period, a.seed)?;
        println!("{}", path.display());
    }
    Ok(())
}

fn write_json<T: Serialize>(value: &T, path: Option<&PathBuf>) -> CliResult {
    match path {
        Some(p) => {
            let mut f = BufWriter::new(File::create(p)?);
            serde_json::to_writer_pretty(&mut f, value)?;
            writeln!(f)?;
        }
        None => {
            let mut out = io::stdout().lock();
            serde_json::to_writer_pretty(&mut out, value)?;
            writeln!(out)?;
        }
    }
    Ok(())
}
