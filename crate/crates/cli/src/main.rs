use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand};
use serde_json::json;

use conoloc::bench::{self, BenchConfig, SuiteOptions, Timing};
use conoloc::bnb::{self, LogEvent, LogRecord, MipStatus, NodeStrategy, SearchOrder, SolveConfig};
use conoloc::cbf;
use conoloc::ccflp::{self, CcflpInstance, FormulationKind, GeneratorParams};
use conoloc::oracle::{self, OracleError};

#[derive(Parser)]
#[command(name = "conoloc", version, about = "Congested facility location: generate, solve, benchmark, export")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a random instance as JSON.
    Gen(GenArgs),
    /// Solve an instance by branch-and-bound.
    Solve(SolveArgs),
    /// Run a benchmark suite.
    Bench(BenchArgs),
    /// Write the model of an instance in CBF.
    ExportCbf(ExportArgs),
    /// Enumerate opening patterns for the exact optimum (small instances).
    Oracle(OracleArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    customers: usize,
    #[arg(long)]
    facilities: usize,
    /// Total capacity over total demand.
    #[arg(long)]
    ratio: f64,
    /// Fraction of facilities to open.
    #[arg(long)]
    pi: f64,
    #[arg(long, default_value_t = ccflp::DEFAULT_CONGESTION_A)]
    a: f64,
    #[arg(long, default_value_t = ccflp::DEFAULT_CONGESTION_B)]
    b: f64,
    #[arg(long)]
    id: Option<String>,
    #[arg(long, default_value = "instance.json")]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct SolverFlags {
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long)]
    rel_gap: Option<f64>,
    #[arg(long)]
    feas_tol: Option<f64>,
    #[arg(long)]
    int_tol: Option<f64>,
    #[arg(long)]
    node_limit: Option<usize>,
    #[arg(long, value_parser = ["lazy", "converged"])]
    strategy: Option<String>,
    #[arg(long, value_parser = ["bestbound", "dfs"])]
    search: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
}

impl SolverFlags {
    fn config(&self) -> SolveConfig {
        let mut c = SolveConfig::default();
        if let Some(v) = self.time_limit {
            c.time_limit_s = v;
        }
        if let Some(v) = self.rel_gap {
            c.rel_gap_tol = v;
        }
        if let Some(v) = self.feas_tol {
            c.feas_tol = v;
        }
        if let Some(v) = self.int_tol {
            c.int_tol = v;
        }
        if let Some(v) = self.node_limit {
            c.node_limit = v;
        }
        if let Some(s) = &self.strategy {
            c.node_strategy = s.parse::<NodeStrategy>().expect("checked by clap");
        }
        if let Some(s) = &self.search {
            c.search = s.parse::<SearchOrder>().expect("checked by clap");
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        c
    }
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long, required_unless_present = "dump_config")]
    instance: Option<PathBuf>,
    #[arg(long, value_parser = ["perspective", "natural"], default_value = "perspective")]
    formulation: String,
    #[command(flatten)]
    solver: SolverFlags,
    /// Write the result as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the effective solver configuration and exit.
    #[arg(long)]
    dump_config: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// Instance JSON files.
    #[arg(long, num_args = 1..)]
    instances: Vec<PathBuf>,
    /// Use the twelve-instance 30x30 suite instead of files.
    #[arg(long)]
    desk: bool,
    /// First generator seed of the built-in suite.
    #[arg(long, default_value_t = 1)]
    suite_seed: u64,
    /// Comma-separated subset of perspective-lazy, perspective-converged,
    /// natural-lazy, natural-converged.
    #[arg(long)]
    configs: Option<String>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Record LP pivot counts in place of runtimes, for reproducible output.
    #[arg(long)]
    deterministic: bool,
    #[command(flatten)]
    solver: SolverFlags,
    #[arg(long, default_value = "bench-out")]
    out: PathBuf,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_parser = ["perspective", "natural"], default_value = "perspective")]
    formulation: String,
    #[arg(long, default_value = "model.cbf")]
    out: PathBuf,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value_t = oracle::DEFAULT_TOL)]
    tol: f64,
}

enum Failure {
    Usage(String),
    Infeasible(String),
    Internal(String),
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Internal(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum LogLevel {
    Quiet,
    Info,
    Trace,
}

fn log_level() -> Result<LogLevel, Failure> {
    match std::env::var("CONOLOC_LOG").as_deref() {
        Err(_) | Ok("") | Ok("quiet") => Ok(LogLevel::Quiet),
        Ok("info") => Ok(LogLevel::Info),
        Ok("trace") => Ok(LogLevel::Trace),
        Ok(other) => Err(Failure::Usage(format!(
            "CONOLOC_LOG must be quiet, info or trace, got `{other}`"
        ))),
    }
}

fn load_instance(path: &PathBuf) -> Result<CcflpInstance, Failure> {
    CcflpInstance::read(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn formulation(s: &str) -> FormulationKind {
    s.parse().expect("checked by clap")
}

fn fmt_bound(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.9e}")
    } else {
        format!("{v}")
    }
}

fn cmd_gen(a: &GenArgs) -> Outcome {
    let mut params = GeneratorParams::new(a.customers, a.facilities, a.ratio, a.pi);
    params.a = a.a;
    params.b = a.b;
    let mut inst = ccflp::generate_instance(a.seed, &params).map_err(|e| Failure::Usage(e.to_string()))?;
    if let Some(id) = &a.id {
        inst.id = id.clone();
    }
    inst.write(&a.out).map_err(|e| Failure::Internal(e.to_string()))?;
    println!("wrote {} (id {}, p = {})", a.out.display(), inst.id, inst.p);
    Ok(())
}

fn cmd_solve(a: &SolveArgs) -> Outcome {
    let cfg = a.solver.config();
    if a.dump_config {
        print!("{}", cfg.describe());
        return Ok(());
    }
    let level = log_level()?;
    let inst = load_instance(a.instance.as_ref().expect("required by clap"))?;
    let kind = formulation(&a.formulation);
    let mut log = |r: &LogRecord| {
        let show = match r.event {
            LogEvent::Node | LogEvent::CutRound => level >= LogLevel::Trace,
            _ => level >= LogLevel::Info,
        };
        if show {
            eprintln!("{r}");
        }
    };
    let res = bnb::solve_instance(&inst, kind, &cfg, &mut log).map_err(|e| match e {
        bnb::BnbError::Config(m) => Failure::Usage(m),
        other => Failure::Internal(other.to_string()),
    })?;
    let gap = res.rel_gap_pct();
    println!("status    {}", res.status);
    println!("ub        {}", fmt_bound(res.ub));
    println!("lb        {}", fmt_bound(res.lb));
    println!("gap_pct   {}", gap.map_or("-".into(), |g| format!("{g:.6e}")));
    println!("nodes     {}", res.nodes);
    println!("runtime_s {:.3}", res.runtime_s);
    if let Some(path) = &a.out {
        let open: Option<Vec<usize>> = res.incumbent.as_ref().map(|pt| {
            let (_, map) = inst.build_model(kind).expect("instance solved");
            map.y
                .iter()
                .enumerate()
                .filter(|(_, id)| pt.get(**id) > 0.5)
                .map(|(j, _)| j)
                .collect()
        });
        let doc = json!({
            "instance_id": inst.id,
            "formulation": kind.as_str(),
            "config": cfg.describe(),
            "status": res.status.as_str(),
            "ub": res.ub.is_finite().then_some(res.ub),
            "lb": res.lb.is_finite().then_some(res.lb),
            "gap_pct": gap,
            "nodes": res.nodes,
            "runtime_s": res.runtime_s,
            "root": {
                "lb_initial_lin": res.root.lb_initial_lin.is_finite().then_some(res.root.lb_initial_lin),
                "lb_initial_conic": res.root.lb_initial_conic,
                "lb_final": res.root.lb_final.is_finite().then_some(res.root.lb_final),
            },
            "open_facilities": open,
            "incumbent": res.incumbent.as_ref().map(|p| p.values.clone()),
        });
        std::fs::write(path, serde_json::to_string_pretty(&doc).expect("serializable") + "\n")?;
    }
    if res.status == MipStatus::Infeasible {
        return Err(Failure::Infeasible("instance is infeasible".into()));
    }
    Ok(())
}

fn cmd_bench(a: &BenchArgs) -> Outcome {
    let base = a.solver.config();
    let mut instances = Vec::new();
    if a.desk {
        instances.extend(bench::desk_suite(a.suite_seed).map_err(|e| Failure::Internal(e.to_string()))?);
    }
    for p in &a.instances {
        instances.push(load_instance(p)?);
    }
    if instances.is_empty() {
        return Err(Failure::Usage("no instances: pass --instances FILE... or --desk".into()));
    }
    let all = bench::standard_configs(&base);
    let configs: Vec<BenchConfig> = match &a.configs {
        None => all,
        Some(list) => {
            let mut out = Vec::new();
            for name in list.split(',').map(str::trim) {
                match all.iter().find(|c| c.config_id == name) {
                    Some(c) => out.push(c.clone()),
                    None => return Err(Failure::Usage(format!("unknown config `{name}`"))),
                }
            }
            out
        }
    };
    let opts = SuiteOptions {
        jobs: a.jobs,
        timing: if a.deterministic { Timing::Pivots } else { Timing::WallClock },
    };
    let report = bench::run_suite(&instances, &configs, &a.out, &opts).map_err(|e| Failure::Internal(e.to_string()))?;
    for cfg in &configs {
        println!(
            "{:<24} optimal {:>3}/{}",
            cfg.config_id,
            report.tally(&cfg.config_id, "Optimal"),
            instances.len()
        );
    }
    for f in &report.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn cmd_export(a: &ExportArgs) -> Outcome {
    let inst = load_instance(&a.instance)?;
    let (model, _) = inst.build_model(formulation(&a.formulation)).map_err(|e| match e {
        ccflp::CcflpError::Infeasible(r) => Failure::Infeasible(format!("capacity deficit {}", r.deficit)),
        other => Failure::Internal(other.to_string()),
    })?;
    cbf::write_cbf_file(&model, &a.out).map_err(|e| Failure::Internal(e.to_string()))?;
    println!("wrote {}", a.out.display());
    Ok(())
}

fn cmd_oracle(a: &OracleArgs) -> Outcome {
    let inst = load_instance(&a.instance)?;
    let r = oracle::brute_force(&inst, a.tol).map_err(|e| match e {
        OracleError::Infeasible => Failure::Infeasible(e.to_string()),
        OracleError::TooLarge(_) => Failure::Usage(e.to_string()),
        other => Failure::Internal(other.to_string()),
    })?;
    let open: Vec<usize> = r.best_y.iter().enumerate().filter(|(_, &o)| o).map(|(j, _)| j).collect();
    println!("optimum   {:.9e}", r.optimum);
    println!("open      {open:?}");
    println!("patterns  {}", r.patterns_evaluated);
    println!("fw_gap    {:.3e}", r.gap);
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let _ = e.print();
            eprintln!();
            let _ = Cli::command().print_long_help();
            return ExitCode::from(1);
        }
    };
    let out = match &cli.cmd {
        Cmd::Gen(a) => cmd_gen(a),
        Cmd::Solve(a) => cmd_solve(a),
        Cmd::Bench(a) => cmd_bench(a),
        Cmd::ExportCbf(a) => cmd_export(a),
        Cmd::Oracle(a) => cmd_oracle(a),
    };
    match out {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Infeasible(m)) => {
            eprintln!("infeasible: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Internal(m)) => {
            eprintln!("internal error: {m}");
            ExitCode::from(3)
        }
    }
}
