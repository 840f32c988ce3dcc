//! `pathfind` and `contract`.

use clap::{Args, ValueEnum};
use qcsim::exec::{contract, contract_distributed, contract_into, make_plan, CacheStats, SliceRange, WorkspaceArena};
use qcsim::pathfinder::{find_path, greedy_path, GreedyParams, OptimizerConfig, OptimizerResult};
use qcsim::tn::{Tensor, TensorNetwork};
use serde_json::json;

use crate::input::NetworkArgs;
use crate::report::{complex_json, digest, CliError, CliResult, RunReport, Stopwatch};

/// Output entries listed in a contract report.
const SHOWN_VALUES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Baseline {
    Greedy,
}

#[derive(Args, Debug)]
pub struct SearchArgs {
    /// Hyper-optimizer samples.
    #[arg(long, default_value_t = 16)]
    pub samples: usize,
    /// Largest per-slice intermediate, bytes.
    #[arg(long)]
    pub memory_budget: Option<f64>,
}

impl SearchArgs {
    fn config(&self, seed: u64) -> OptimizerConfig {
        OptimizerConfig { num_hyper_samples: self.samples, memory_budget: self.memory_budget, seed, ..OptimizerConfig::default() }
    }
}

#[derive(Args, Debug)]
pub struct PathfindArgs {
    #[command(flatten)]
    pub source: NetworkArgs,
    #[command(flatten)]
    pub search: SearchArgs,
    /// Also report the cost of this baseline.
    #[arg(long, value_enum)]
    pub compare: Option<Baseline>,
}

#[derive(Args, Debug)]
pub struct ContractArgs {
    #[command(flatten)]
    pub source: NetworkArgs,
    #[command(flatten)]
    pub search: SearchArgs,
    /// Half-open slice range `a..b`; all slices when absent.
    #[arg(long)]
    pub slices: Option<String>,
    /// Sum the slices one call at a time into the result.
    #[arg(long)]
    pub accumulate: bool,
    /// Cache budget in bytes. Tensors not listed in `--mutable` become constant.
    #[arg(long)]
    pub cache_bytes: Option<usize>,
    /// Tensor ids that stay mutable when caching.
    #[arg(long, value_delimiter = ',')]
    pub mutable: Vec<usize>,
    /// Contract this many times with the same arenas.
    #[arg(long, default_value_t = 1)]
    pub repeat: usize,
}

fn describe_network(report: &mut RunReport, tn: &TensorNetwork) {
    report.counter("tensors", tn.num_tensors());
    report.counter("labels", tn.extents().len());
}

fn describe_path(report: &mut RunReport, tn: &TensorNetwork, path: &OptimizerResult) {
    report.counter("flops", path.total_flops);
    report.counter("slices", path.num_slices);
    report.result("slicing_overhead", path.slicing_overhead_factor);
    report.result("largest_intermediate_bytes", path.largest_intermediate * 16.0);
    report.result("winning_sample", path.sample);
    report.result("path", path.to_path_json(tn));
}

pub fn pathfind(args: &PathfindArgs, seed: u64) -> CliResult<RunReport> {
    let mut report = RunReport::new(seed);
    let mut clock = Stopwatch::start();
    let tn = clock.time("build", || args.source.build(seed))?;
    describe_network(&mut report, &tn);
    let path = clock.time("find_path", || find_path(&tn, &args.search.config(seed)))?;
    describe_path(&mut report, &tn, &path);
    if let Some(Baseline::Greedy) = args.compare {
        let tree = clock.time("greedy", || greedy_path(&tn, GreedyParams::default(), seed))?;
        let greedy = tree.total_flops(&tn);
        report.result("greedy_flops", greedy);
        report.result("flops_ratio_to_greedy", path.total_flops / greedy);
    }
    report.timings = clock.finish();
    Ok(report)
}

fn parse_range(spec: &str) -> CliResult<(usize, usize)> {
    let bad = || CliError::invalid(format!("slice range `{spec}` is not of the form a..b"));
    let (a, b) = spec.split_once("..").ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

fn merged_stats(arenas: &[WorkspaceArena]) -> CacheStats {
    arenas.iter().map(WorkspaceArena::cache_stats).fold(CacheStats::default(), |a, s| CacheStats {
        used_bytes: a.used_bytes + s.used_bytes,
        recommended_bytes: a.recommended_bytes.max(s.recommended_bytes),
        budget_bytes: a.budget_bytes + s.budget_bytes,
        entries: a.entries + s.entries,
        hits: a.hits + s.hits,
        recomputes: a.recomputes + s.recomputes,
        evictions: a.evictions + s.evictions,
    })
}

pub fn contract_cmd(args: &ContractArgs, seed: u64, workers: usize) -> CliResult<RunReport> {
    let mut report = RunReport::new(seed);
    let mut clock = Stopwatch::start();
    let mut tn = clock.time("build", || args.source.build(seed))?;
    if !tn.is_bound() {
        return Err(CliError::invalid("every tensor needs data to contract"));
    }
    if args.cache_bytes.is_some() {
        let constant: Vec<usize> = (0..tn.num_tensors()).filter(|i| !args.mutable.contains(i)).collect();
        tn.mark_constant(&constant)?;
        tn.mark_mutable(&args.mutable)?;
    }
    describe_network(&mut report, &tn);
    let path = clock.time("find_path", || find_path(&tn, &args.search.config(seed)))?;
    describe_path(&mut report, &tn, &path);
    let plan = make_plan(&tn, &path)?;
    let ws = plan.workspace();
    report.result("workspace", json!({ "min": ws.min, "recommended": ws.recommended, "max": ws.max }));
    report.result("cache_recommended_bytes", plan.cache_recommended_bytes());
    let (begin, end) = match &args.slices {
        Some(s) => parse_range(s)?,
        None => (0, plan.num_slices()),
    };
    let full = begin == 0 && end == plan.num_slices();
    if workers > 1 && (!full || args.accumulate) {
        return Err(CliError::invalid("multiple workers contract the full slice range only"));
    }
    let workers = workers.max(1);
    let mut arenas: Vec<WorkspaceArena> = (0..workers).map(|_| WorkspaceArena::new(ws.recommended, args.cache_bytes.unwrap_or(0))).collect();
    let mut flops = Vec::with_capacity(args.repeat);
    let mut out: Option<Tensor> = None;
    for rep in 0..args.repeat.max(1) {
        arenas.iter_mut().for_each(WorkspaceArena::reset_counters);
        let t = clock.time(&format!("contract[{rep}]"), || -> CliResult<Tensor> {
            if workers > 1 {
                return Ok(contract_distributed(&plan, &tn, &mut arenas, workers)?);
            }
            if args.accumulate {
                let mut target = Tensor::zeros(tn.output().to_vec(), tn.output_extents())?;
                for s in begin..end {
                    contract_into(&plan, &tn, &mut arenas[0], SliceRange::new(s, s + 1, true), &mut target)?;
                }
                return Ok(target);
            }
            Ok(contract(&plan, &tn, &mut arenas[0], SliceRange::new(begin, end, false))?)
        })?;
        flops.push(arenas.iter().map(WorkspaceArena::flops_executed).sum::<f64>());
        out = Some(t);
    }
    let out = out.expect("at least one repetition");
    report.counter("slices_contracted", end - begin);
    report.counter("workers", workers);
    report.counter("flops_executed", flops.clone());
    report.counter("cache", serde_json::to_value(merged_stats(&arenas))?);
    report.result("shape", out.extents().to_vec());
    report.result("digest", digest(out.data()));
    report.result("values", out.data().iter().take(SHOWN_VALUES).map(|&z| complex_json(z)).collect::<Vec<_>>());
    report.timings = clock.finish();
    Ok(report)
}
