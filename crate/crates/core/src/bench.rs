//! Benchmark suites: runs (instance, configuration) pairs through the
//! branch-and-bound, computes gap metrics and writes `records.csv`,
//! per-configuration solution profiles and a status summary.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::bnb::{self, MipStatus, NodeStrategy, SolveConfig};
use crate::ccflp::{generate_instance, CcflpError, CcflpInstance, FormulationKind, GeneratorParams};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("gap undefined for reference value {0}")]
    UndefinedGap(f64),
    #[error("worker pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Instance(#[from] CcflpError),
}

/// `100 * (opt - lb) / |opt|`, with lower bounds above `opt` by at most
/// `1e-9 * (1 + |opt|)` counted as a closed gap.
pub fn relative_gap_pct(opt_ub: f64, lb: f64) -> Result<f64, BenchError> {
    if !opt_ub.is_finite() || opt_ub == 0.0 || lb.is_nan() {
        return Err(BenchError::UndefinedGap(opt_ub));
    }
    let gap = opt_ub - lb;
    if gap < 0.0 && -gap <= 1e-9 * (1.0 + opt_ub.abs()) {
        return Ok(0.0);
    }
    Ok(100.0 * gap / opt_ub.abs())
}

/// `max(log10(gap), -6)`; a zero gap maps to `-6`.
pub fn log_gap(gap_pct: f64) -> f64 {
    if gap_pct <= 0.0 {
        return -6.0;
    }
    gap_pct.log10().max(-6.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub config_id: String,
    pub formulation: FormulationKind,
    pub solve: SolveConfig,
}

impl BenchConfig {
    pub fn new(formulation: FormulationKind, strategy: NodeStrategy, base: &SolveConfig) -> Self {
        let mut solve = base.clone();
        solve.node_strategy = strategy;
        BenchConfig {
            config_id: format!("{}-{}", formulation.as_str(), strategy.as_str()),
            formulation,
            solve,
        }
    }
}

/// Both formulations under both node strategies.
pub fn standard_configs(base: &SolveConfig) -> Vec<BenchConfig> {
    let mut out = Vec::new();
    for f in [FormulationKind::Perspective, FormulationKind::Natural] {
        for s in [NodeStrategy::LazyOA, NodeStrategy::ConvergedOA] {
            out.push(BenchConfig::new(f, s, base));
        }
    }
    out
}

/// Twelve 30x30 instances: `r` in {5, 15}, `pi` in {0.4, 0.6, 0.8}, two
/// seeds each starting at `seed`.
pub fn desk_suite(seed: u64) -> Result<Vec<CcflpInstance>, BenchError> {
    let mut out = Vec::new();
    for r in [5.0, 15.0] {
        for pi in [0.4, 0.6, 0.8] {
            for k in 0..2 {
                let s = seed + k;
                let mut inst = generate_instance(s, &GeneratorParams::new(30, 30, r, pi))?;
                inst.id = format!("I30-J30-r{r}-pi{pi}-s{s}");
                out.push(inst);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Timing {
    WallClock,
    /// `runtime_s` holds the LP pivot count instead of seconds, so reruns
    /// produce identical bytes.
    Pivots,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SuiteOptions {
    pub jobs: usize,
    pub timing: Timing,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            jobs: 1,
            timing: Timing::WallClock,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub instance_id: String,
    pub config_id: String,
    pub formulation: FormulationKind,
    pub node_strategy: NodeStrategy,
    /// A `MipStatus` name, or `Error`.
    pub status: String,
    pub runtime_s: f64,
    pub nodes: usize,
    pub ub: f64,
    pub lb: f64,
    pub lb_root_initial_lin: f64,
    pub lb_root_initial_conic: f64,
    pub lb_root_final: f64,
    pub error: Option<String>,
}

impl BenchRecord {
    pub fn is_optimal(&self) -> bool {
        self.status == MipStatus::Optimal.as_str()
    }

    pub fn per_node_s(&self) -> Option<f64> {
        (self.nodes > 0).then(|| self.runtime_s / self.nodes as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfilePoint {
    pub time_s: f64,
    pub solved_count: usize,
}

/// Number of `Optimal` records with `runtime_s <= t`, for each grid time.
pub fn solution_profile(records: &[BenchRecord], time_grid: &[f64]) -> Vec<ProfilePoint> {
    let mut solved: Vec<f64> = records
        .iter()
        .filter(|r| r.is_optimal())
        .map(|r| r.runtime_s)
        .collect();
    solved.sort_by(f64::total_cmp);
    time_grid
        .iter()
        .map(|&t| ProfilePoint {
            time_s: t,
            solved_count: solved.partition_point(|&r| r <= t),
        })
        .collect()
}

fn run_one(inst: &CcflpInstance, cfg: &BenchConfig, timing: Timing) -> BenchRecord {
    let mut rec = BenchRecord {
        instance_id: inst.id.clone(),
        config_id: cfg.config_id.clone(),
        formulation: cfg.formulation,
        node_strategy: cfg.solve.node_strategy,
        status: "Error".into(),
        runtime_s: f64::NAN,
        nodes: 0,
        ub: f64::NAN,
        lb: f64::NAN,
        lb_root_initial_lin: f64::NAN,
        lb_root_initial_conic: f64::NAN,
        lb_root_final: f64::NAN,
        error: None,
    };
    let mut solve = cfg.solve.clone();
    solve.root_conic_bound = true;
    match bnb::solve_instance(inst, cfg.formulation, &solve, &mut |_| {}) {
        Ok(r) => {
            rec.status = r.status.as_str().into();
            rec.runtime_s = match timing {
                Timing::WallClock => r.runtime_s,
                Timing::Pivots => r.lp_iterations as f64,
            };
            rec.nodes = r.nodes;
            rec.ub = r.ub;
            rec.lb = r.lb;
            rec.lb_root_initial_lin = r.root.lb_initial_lin;
            rec.lb_root_initial_conic = r.root.lb_initial_conic.unwrap_or(f64::NAN);
            rec.lb_root_final = r.root.lb_final;
        }
        Err(e) => rec.error = Some(e.to_string()),
    }
    rec
}

pub const CSV_HEADER: &str = "instance_id,config_id,formulation,node_strategy,status,runtime_s,nodes,ub,lb,gap_pct,gap_root_initial_lin_pct,gap_root_initial_conic_pct,gap_root_final_pct";

fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.5e}")
    }
}

fn fmt_gap(reference: f64, lb: f64) -> String {
    relative_gap_pct(reference, lb).map(fmt_num).unwrap_or_default()
}

/// Best upper bound per instance over all records.
pub fn reference_values(records: &[BenchRecord]) -> BTreeMap<String, f64> {
    let mut best: BTreeMap<String, f64> = BTreeMap::new();
    for r in records {
        if r.ub.is_finite() {
            let e = best.entry(r.instance_id.clone()).or_insert(f64::INFINITY);
            *e = e.min(r.ub);
        }
    }
    best
}

/// `records.csv` contents. The end gap uses the record's own incumbent; the
/// root gaps are measured against the best incumbent for the instance.
pub fn records_csv(records: &[BenchRecord]) -> String {
    let refs = reference_values(records);
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in records {
        let opt = refs.get(&r.instance_id).copied().unwrap_or(f64::NAN);
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.instance_id,
            r.config_id,
            r.formulation.as_str(),
            r.node_strategy.as_str(),
            r.status,
            fmt_num(r.runtime_s),
            r.nodes,
            fmt_num(r.ub),
            fmt_num(r.lb),
            fmt_gap(r.ub, r.lb),
            fmt_gap(opt, r.lb_root_initial_lin),
            fmt_gap(opt, r.lb_root_initial_conic),
            fmt_gap(opt, r.lb_root_final),
        );
    }
    s
}

/// Profile grid: sorted solved runtimes followed by `horizon`.
pub fn profile_grid(records: &[BenchRecord], horizon: f64) -> Vec<f64> {
    let mut grid: Vec<f64> = records
        .iter()
        .filter(|r| r.is_optimal())
        .map(|r| r.runtime_s)
        .collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    if grid.last().is_none_or(|&t| t < horizon) {
        grid.push(horizon);
    }
    grid
}

pub fn profile_dat(points: &[ProfilePoint]) -> String {
    let mut s = String::from("# time_s solved_count\n");
    for p in points {
        let _ = writeln!(s, "{} {}", fmt_num(p.time_s), p.solved_count);
    }
    s
}

const STATUSES: &[&str] = &["Optimal", "TimeLimit", "NodeLimit", "Infeasible", "Stalled", "Error"];

pub fn summary_text(records: &[BenchRecord], configs: &[BenchConfig]) -> String {
    let refs = reference_values(records);
    let mut s = String::new();
    for cfg in configs {
        let rs: Vec<&BenchRecord> = records.iter().filter(|r| r.config_id == cfg.config_id).collect();
        let n = rs.len().max(1) as f64;
        let _ = writeln!(s, "config {} ({} runs)", cfg.config_id, rs.len());
        for st in STATUSES {
            let c = rs.iter().filter(|r| r.status == *st).count();
            if c > 0 {
                let _ = writeln!(s, "  {st:<10} {c:>4}  {:>6.2}%", 100.0 * c as f64 / n);
            }
        }
        let mean = |vals: Vec<f64>| -> String {
            if vals.is_empty() {
                "-".into()
            } else {
                fmt_num(vals.iter().sum::<f64>() / vals.len() as f64)
            }
        };
        let _ = writeln!(s, "  mean runtime_s      {}", mean(rs.iter().map(|r| r.runtime_s).filter(|v| v.is_finite()).collect()));
        let _ = writeln!(s, "  mean nodes          {}", mean(rs.iter().filter(|r| r.status != "Error").map(|r| r.nodes as f64).collect()));
        let _ = writeln!(s, "  mean per-node time  {}", mean(rs.iter().filter_map(|r| r.per_node_s()).filter(|v| v.is_finite()).collect()));
        let root_gap = |f: fn(&BenchRecord) -> f64| {
            mean(
                rs.iter()
                    .filter_map(|r| relative_gap_pct(*refs.get(&r.instance_id)?, f(r)).ok())
                    .collect(),
            )
        };
        let _ = writeln!(s, "  mean root gap lin   {}", root_gap(|r| r.lb_root_initial_lin));
        let _ = writeln!(s, "  mean root gap conic {}", root_gap(|r| r.lb_root_initial_conic));
        let _ = writeln!(s, "  mean root gap final {}", root_gap(|r| r.lb_root_final));
    }
    s
}

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub records: Vec<BenchRecord>,
    pub files: Vec<PathBuf>,
}

impl SuiteReport {
    pub fn tally(&self, config_id: &str, status: &str) -> usize {
        self.records
            .iter()
            .filter(|r| r.config_id == config_id && r.status == status)
            .count()
    }
}

/// Runs every pair, in parallel over `opts.jobs` workers, and writes the
/// output files to `out_dir`. Records are ordered by
/// `(instance_id, config_id)`.
pub fn run_suite(
    instances: &[CcflpInstance],
    configs: &[BenchConfig],
    out_dir: &Path,
    opts: &SuiteOptions,
) -> Result<SuiteReport, BenchError> {
    let pairs: Vec<(&CcflpInstance, &BenchConfig)> = instances
        .iter()
        .flat_map(|i| configs.iter().map(move |c| (i, c)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.max(1))
        .build()
        .map_err(|e| BenchError::Pool(e.to_string()))?;
    let mut records: Vec<BenchRecord> =
        pool.install(|| pairs.par_iter().map(|(i, c)| run_one(i, c, opts.timing)).collect());
    records.sort_by(|a, b| (&a.instance_id, &a.config_id).cmp(&(&b.instance_id, &b.config_id)));

    std::fs::create_dir_all(out_dir)?;
    let mut files = Vec::new();
    let path = out_dir.join("records.csv");
    std::fs::write(&path, records_csv(&records))?;
    files.push(path);
    for cfg in configs {
        let rs: Vec<BenchRecord> = records
            .iter()
            .filter(|r| r.config_id == cfg.config_id)
            .cloned()
            .collect();
        let horizon = match opts.timing {
            Timing::WallClock => cfg.solve.time_limit_s,
            Timing::Pivots => rs.iter().map(|r| r.runtime_s).filter(|v| v.is_finite()).fold(0.0, f64::max),
        };
        let grid = profile_grid(&rs, horizon);
        let path = out_dir.join(format!("profile-{}.dat", cfg.config_id));
        std::fs::write(&path, profile_dat(&solution_profile(&rs, &grid)))?;
        files.push(path);
    }
    let path = out_dir.join("summary.txt");
    std::fs::write(&path, summary_text(&records, configs))?;
    files.push(path);
    Ok(SuiteReport { records, files })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(status: &str, t: f64) -> BenchRecord {
        BenchRecord {
            instance_id: "i".into(),
            config_id: "c".into(),
            formulation: FormulationKind::Perspective,
            node_strategy: NodeStrategy::ConvergedOA,
            status: status.into(),
            runtime_s: t,
            nodes: 1,
            ub: 1.0,
            lb: 1.0,
            lb_root_initial_lin: 1.0,
            lb_root_initial_conic: 1.0,
            lb_root_final: 1.0,
            error: None,
        }
    }

    #[test]
    fn gap_examples() {
        assert_eq!(relative_gap_pct(200.0, 150.0).unwrap(), 25.0);
        assert_eq!(relative_gap_pct(200.0, 200.0).unwrap(), 0.0);
        assert_eq!(relative_gap_pct(100.0, 100.0 + 1e-12).unwrap(), 0.0);
        assert!(matches!(relative_gap_pct(0.0, 1.0), Err(BenchError::UndefinedGap(_))));
        assert!(relative_gap_pct(f64::INFINITY, 1.0).is_err());
    }

    #[test]
    fn log_gap_examples() {
        assert!((log_gap(9.34e-5) - (-4.0297)).abs() < 1e-4);
        assert_eq!(log_gap(0.0), -6.0);
        assert_eq!(log_gap(1e-9), -6.0);
        assert!((log_gap(25.0) - 1.3979).abs() < 1e-4);
    }

    #[test]
    fn profile_examples() {
        let rs = vec![rec("Optimal", 10.0), rec("Optimal", 20.0), rec("TimeLimit", 100.0)];
        let p = solution_profile(&rs, &[15.0, 30.0]);
        assert_eq!(p.iter().map(|q| q.solved_count).collect::<Vec<_>>(), vec![1, 2]);
        assert!(solution_profile(&[], &[1.0, 2.0]).iter().all(|q| q.solved_count == 0));
        let rs = vec![rec("Optimal", 180.68), rec("Optimal", 137.91), rec("Optimal", 59.25)];
        let p = solution_profile(&rs, &[100.0, 200.0]);
        assert_eq!(p.iter().map(|q| q.solved_count).collect::<Vec<_>>(), vec![1, 3]);
    }

    #[test]
    fn grid_ends_at_horizon() {
        let rs = vec![rec("Optimal", 3.0), rec("Optimal", 1.0), rec("Error", f64::NAN)];
        assert_eq!(profile_grid(&rs, 10.0), vec![1.0, 3.0, 10.0]);
    }

    #[test]
    fn csv_number_format() {
        assert_eq!(fmt_num(11020.0602), "1.10201e4");
        assert_eq!(fmt_num(f64::INFINITY), "inf");
        assert_eq!(fmt_num(f64::NAN), "");
    }
}
