//! Command implementations behind the `flowunits` binary. Each command
//! returns what the binary prints on stdout, so tests can call them
//! in-process.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use flowunits::bundled;
use flowunits::dynamic::{UpdateCommand, UpdateError};
use flowunits::graph::LogicalGraph;
use flowunits::netsim::{simulate, Bandwidth, CostModel, NetworkCondition, SimError, SimOutcome, Simulation};
use flowunits::planner::{plan, BoundaryMode, ExecutionGraph, JobSpec, PlanError, Strategy};
use flowunits::topology::ZoneTopology;
use rayon::prelude::*;

/// A failed command. Printed as `error[<code>]: <message>` on one line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: &'static str,
    pub message: String,
}

impl CliError {
    pub fn new(code: &'static str, message: impl fmt::Display) -> Self {
        // keep the diagnostic on a single line
        let message = message.to_string().split_whitespace().collect::<Vec<_>>().join(" ");
        CliError { code, message }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error[{}]: {}", self.code, self.message)
    }
}

impl std::error::Error for CliError {}

impl From<PlanError> for CliError {
    fn from(e: PlanError) -> Self {
        let code = match e {
            PlanError::Infeasible { .. } => "infeasible",
            _ => "plan",
        };
        CliError::new(code, e)
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Plan(p) => p.into(),
            SimError::Update(u) => u.into(),
            other => CliError::new("sim", other),
        }
    }
}

impl From<UpdateError> for CliError {
    fn from(e: UpdateError) -> Self {
        CliError::new("update", e)
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "flowunits", version, about = "Plan and simulate layered streaming dataflows")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the execution plan as canonical JSON.
    Plan(PlanArgs),
    /// Simulate one plan under one network condition and print the report.
    Run(RunArgs),
    /// Sweep bandwidth x latency for both strategies and print a CSV.
    Grid(GridArgs),
    /// Simulate with a scenario of live updates and print report and audit log.
    UpdateScenario(UpdateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct JobArgs {
    /// Topology JSON file or bundled name (acme, continuum, single).
    #[arg(long, default_value = "continuum")]
    pub topology: String,
    /// Pipeline JSON file or bundled name (continuum_v1, acme_v1, word_count).
    #[arg(long, default_value = "continuum_v1")]
    pub pipeline: String,
    /// Window size for bundled pipelines.
    #[arg(long, default_value_t = bundled::DEFAULT_WINDOW)]
    pub window: u64,
    /// Comma-separated job locations; defaults to every location of the topology.
    #[arg(long, value_delimiter = ',')]
    pub locations: Vec<String>,
    #[arg(long, default_value_t = 25_000)]
    pub events_per_location: u64,
    /// Multiplies the events per location.
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// CostModel JSON file.
    #[arg(long)]
    pub cost_model: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct NetArgs {
    /// `unlimited` or Mbit/s, applied to every inter-zone link.
    #[arg(long, default_value = "unlimited")]
    pub bandwidth: Bandwidth,
    /// One-way latency per inter-zone hop.
    #[arg(long, default_value_t = 0.0)]
    pub latency_ms: f64,
}

#[derive(Debug, Clone, Args)]
pub struct PlanArgs {
    #[command(flatten)]
    pub job: JobArgs,
    #[arg(long, default_value = "flowunits")]
    pub strategy: Strategy,
    #[arg(long, default_value = "direct")]
    pub boundary: BoundaryMode,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub plan: PlanArgs,
    #[command(flatten)]
    pub net: NetArgs,
    /// Simulate a plan file from `plan` instead of planning; its pipeline,
    /// locations, strategy and boundary take precedence.
    #[arg(long = "plan")]
    pub plan_file: Option<PathBuf>,
    /// Write the sorted sink outputs here as CSV.
    #[arg(long)]
    pub sinks_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    #[command(flatten)]
    pub job: JobArgs,
    #[arg(long, value_delimiter = ',', default_value = "unlimited,1000,100,10")]
    pub bandwidths: Vec<Bandwidth>,
    #[arg(long, value_delimiter = ',', default_value = "0,10,100")]
    pub latencies_ms: Vec<f64>,
    /// Worker threads for grid cells; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Clone, Args)]
pub struct UpdateArgs {
    #[command(flatten)]
    pub job: JobArgs,
    #[command(flatten)]
    pub net: NetArgs,
    #[arg(long, default_value = "flowunits")]
    pub strategy: Strategy,
    /// JSON array of update commands.
    #[arg(long)]
    pub scenario: PathBuf,
}

pub fn execute(command: &Command) -> CliResult<String> {
    match command {
        Command::Plan(a) => cmd_plan(a),
        Command::Run(a) => cmd_run(a),
        Command::Grid(a) => cmd_grid(a),
        Command::UpdateScenario(a) => cmd_update_scenario(a),
    }
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::new("io", format!("{}: {e}", path.display())))
}

/// A path if one exists, otherwise a bundled name.
pub fn load_topology(arg: &str) -> CliResult<ZoneTopology> {
    let parsed = if Path::new(arg).is_file() {
        ZoneTopology::parse(&read(Path::new(arg))?)
    } else if bundled::topology_source(arg).is_some() {
        bundled::topology(arg)
    } else {
        return Err(CliError::new("io", format!("topology `{arg}` is neither a file nor a bundled name")));
    };
    parsed.map_err(|e| CliError::new("parse", format!("topology {arg}: {e}")))
}

pub fn load_pipeline(arg: &str, window: u64) -> CliResult<LogicalGraph> {
    let parsed = if Path::new(arg).is_file() {
        serde_json::from_str(&read(Path::new(arg))?).map_err(|e| e.to_string())
    } else if let Some(g) = bundled::pipeline(arg, window) {
        g.map_err(|e| e.to_string())
    } else {
        return Err(CliError::new("io", format!("pipeline `{arg}` is neither a file nor a bundled name")));
    };
    parsed.map_err(|e| CliError::new("parse", format!("pipeline {arg}: {e}")))
}

impl JobArgs {
    pub fn events(&self) -> CliResult<u64> {
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(CliError::new("config", format!("scale must be positive, got {}", self.scale)));
        }
        Ok((self.events_per_location as f64 * self.scale).round() as u64)
    }

    fn cost(&self) -> CliResult<CostModel> {
        match &self.cost_model {
            None => Ok(CostModel::default()),
            Some(p) => CostModel::from_json(&read(p)?).map_err(|e| CliError::new("parse", format!("cost model: {e}"))),
        }
    }

    /// Topology plus a job for `strategy` with direct boundaries.
    pub fn resolve(&self, strategy: Strategy) -> CliResult<(ZoneTopology, JobSpec)> {
        let topology = load_topology(&self.topology)?;
        let graph = load_pipeline(&self.pipeline, self.window)?;
        let locations: Vec<String> =
            if self.locations.is_empty() { topology.locations().into_iter().collect() } else { self.locations.clone() };
        let mut job = JobSpec::new(graph, locations, strategy).with_workload(self.events()?, self.seed);
        job.cost = self.cost()?;
        job.validate(&topology)?;
        Ok((topology, job))
    }
}

impl NetArgs {
    pub fn condition(&self) -> CliResult<NetworkCondition> {
        let c = NetworkCondition::new(self.bandwidth, self.latency_ms);
        c.validate().map_err(|e| CliError::new("config", e))?;
        Ok(c)
    }
}

pub fn cmd_plan(a: &PlanArgs) -> CliResult<String> {
    let (topology, job) = a.job.resolve(a.strategy)?;
    let p = plan(&job.with_boundary(a.boundary), &topology)?;
    Ok(p.to_canonical_json() + "\n")
}

/// Plans (or loads) and simulates; returns the job and outcome.
pub fn run_outcome(a: &RunArgs) -> CliResult<(JobSpec, SimOutcome)> {
    let (topology, job) = a.plan.job.resolve(a.plan.strategy)?;
    let (job, p) = match &a.plan_file {
        Some(path) => {
            let p = ExecutionGraph::from_json(&read(path)?)
                .map_err(|e| CliError::new("parse", format!("plan {}: {e}", path.display())))?;
            let job = JobSpec { graph: p.graph.clone(), locations: p.locations.iter().cloned().collect(), strategy: p.strategy, boundary: p.boundary, ..job };
            (job, p)
        }
        None => {
            let job = job.with_boundary(a.plan.boundary);
            let p = plan(&job, &topology)?;
            (job, p)
        }
    };
    let outcome = simulate(&p, &topology, &a.net.condition()?, &job)?;
    if let Some(path) = &a.sinks_csv {
        fs::write(path, outcome.output.to_csv()).map_err(|e| CliError::new("io", format!("{}: {e}", path.display())))?;
    }
    Ok((job, outcome))
}

pub fn cmd_run(a: &RunArgs) -> CliResult<String> {
    let (_, outcome) = run_outcome(a)?;
    Ok(outcome.report.to_canonical_json() + "\n")
}

/// One grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub bandwidth: Bandwidth,
    pub latency_ms: f64,
    pub baseline_makespan_s: f64,
    pub flowunits_makespan_s: f64,
}

impl GridRow {
    pub fn ratio(&self) -> f64 {
        self.baseline_makespan_s / self.flowunits_makespan_s
    }
}

/// Runs both strategies on every cell. Rows follow bandwidth order, then
/// latency order, whatever the thread count.
pub fn grid_rows(a: &GridArgs) -> CliResult<Vec<GridRow>> {
    if a.bandwidths.is_empty() || a.latencies_ms.is_empty() {
        return Err(CliError::new("config", "grid axes must be non-empty"));
    }
    let (topology, fu_job) = a.job.resolve(Strategy::FlowUnits)?;
    let bl_job = fu_job.clone().with_strategy(Strategy::Baseline);
    let fu_plan = plan(&fu_job, &topology)?;
    let bl_plan = plan(&bl_job, &topology)?;
    let cells: Vec<(Bandwidth, f64)> =
        a.bandwidths.iter().flat_map(|&b| a.latencies_ms.iter().map(move |&l| (b, l))).collect();
    let run_cell = |&(bandwidth, latency_ms): &(Bandwidth, f64)| -> CliResult<GridRow> {
        let cond = NetArgs { bandwidth, latency_ms }.condition()?;
        let bl = simulate(&bl_plan, &topology, &cond, &bl_job)?.report;
        let fu = simulate(&fu_plan, &topology, &cond, &fu_job)?.report;
        if bl.sink_digest != fu.sink_digest {
            return Err(CliError::new("sim", format!("strategies disagree on sink output at {bandwidth}/{latency_ms}")));
        }
        Ok(GridRow { bandwidth, latency_ms, baseline_makespan_s: bl.makespan_s, flowunits_makespan_s: fu.makespan_s })
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.threads)
        .build()
        .map_err(|e| CliError::new("config", format!("thread pool: {e}")))?;
    pool.install(|| cells.par_iter().map(run_cell).collect())
}

pub fn grid_csv(rows: &[GridRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["bandwidth", "latency", "baseline_makespan_s", "flowunits_makespan_s", "ratio"])
        .expect("in-memory write");
    for r in rows {
        w.write_record([
            r.bandwidth.to_string(),
            r.latency_ms.to_string(),
            r.baseline_makespan_s.to_string(),
            r.flowunits_makespan_s.to_string(),
            r.ratio().to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}

pub fn cmd_grid(a: &GridArgs) -> CliResult<String> {
    Ok(grid_csv(&grid_rows(a)?))
}

/// Simulates with queued boundaries and applies the scenario's commands.
pub fn update_outcome(a: &UpdateArgs) -> CliResult<(JobSpec, SimOutcome)> {
    let (topology, job) = a.job.resolve(a.strategy)?;
    let job = job.with_boundary(BoundaryMode::Queued);
    let commands: Vec<UpdateCommand> = UpdateCommand::parse_scenario(&read(&a.scenario)?)
        .map_err(|e| CliError::new("parse", format!("scenario {}: {e}", a.scenario.display())))?;
    let p = plan(&job, &topology)?;
    let mut sim = Simulation::new(&p, &topology, &a.net.condition()?, &job)?;
    for c in commands {
        sim.apply_update(c)?;
    }
    Ok((job, sim.run()?))
}

pub fn cmd_update_scenario(a: &UpdateArgs) -> CliResult<String> {
    let (_, outcome) = update_outcome(a)?;
    let doc = serde_json::json!({
        "report": outcome.report,
        "audit": outcome.audit,
        "snapshots": outcome.snapshots,
    });
    Ok(serde_json::to_string_pretty(&doc).expect("report serialization cannot fail") + "\n")
}
