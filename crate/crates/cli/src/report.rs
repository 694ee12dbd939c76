//! Aggregation of finished runs into comparison tables.
//!
//! `throughput.csv` has one row per planned run: `run, hop_limit, groups,
//! multipliers, mode, demands, servable, objective, upper_bound, exhausted`.
//! `comparison.csv` pairs, per hop limit, the best single-group objective
//! with the best multi-group one: `hop_limit, dip_objective, fdip_objective,
//! difference`. `latency.csv` has one row per simulated flow: `run, flow,
//! samples, min_ns, p50_ns, p99_ns, max_ns, jitter_ns`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::commands::{create_dir, write_csv, PlanStats, DELAYS_FILE, PLAN_STATS_FILE};
use crate::error::{CliError, CliResult};

pub const THROUGHPUT_FILE: &str = "throughput.csv";
pub const COMPARISON_FILE: &str = "comparison.csv";
pub const LATENCY_FILE: &str = "latency.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThroughputRow {
    pub run: String,
    pub hop_limit: usize,
    pub groups: usize,
    pub multipliers: String,
    pub mode: String,
    pub demands: usize,
    pub servable: usize,
    pub objective: usize,
    pub upper_bound: Option<usize>,
    pub exhausted: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub hop_limit: usize,
    pub dip_objective: Option<usize>,
    pub fdip_objective: Option<usize>,
    pub difference: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatencyRow {
    pub run: String,
    pub flow: String,
    pub samples: usize,
    pub min_ns: u64,
    pub p50_ns: u64,
    pub p99_ns: u64,
    pub max_ns: u64,
    pub jitter_ns: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Summary {
    pub throughput: Vec<ThroughputRow>,
    pub comparison: Vec<ComparisonRow>,
    pub latency: Vec<LatencyRow>,
}

#[derive(Debug, Deserialize)]
struct DelaySample {
    flow: String,
    #[allow(dead_code)]
    sample: usize,
    delay_ns: u64,
}

/// Every file named `name` under `root`, sorted by path.
fn find_files(root: &Path, name: &str, out: &mut Vec<PathBuf>) -> CliResult<()> {
    let entries = fs::read_dir(root).map_err(|e| CliError::io(root, e))?;
    let mut paths: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
    paths.sort();
    for p in paths {
        if p.is_dir() {
            find_files(&p, name, out)?;
        } else if p.file_name().is_some_and(|f| f == name) {
            out.push(p);
        }
    }
    Ok(())
}

fn run_name(root: &Path, file: &Path) -> String {
    let dir = file.parent().unwrap_or(root);
    let rel = dir.strip_prefix(root).unwrap_or(dir);
    if rel.as_os_str().is_empty() {
        ".".to_string()
    } else {
        rel.to_string_lossy().replace('\\', "/")
    }
}

/// Nearest-rank percentile of a sorted, non-empty slice.
fn percentile(sorted: &[u64], p: f64) -> u64 {
    let rank = ((p / 100.0) * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

pub fn summarize(root: &Path) -> CliResult<Summary> {
    let mut stats_files = Vec::new();
    find_files(root, PLAN_STATS_FILE, &mut stats_files)?;
    let mut delay_files = Vec::new();
    find_files(root, DELAYS_FILE, &mut delay_files)?;
    if stats_files.is_empty() && delay_files.is_empty() {
        return Err(CliError::invalid(format!("{}: no runs found", root.display())));
    }

    let mut summary = Summary::default();
    let mut by_h: BTreeMap<usize, (Option<usize>, Option<usize>)> = BTreeMap::new();
    for path in &stats_files {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let s: PlanStats =
            serde_json::from_str(&text).map_err(|e| CliError::invalid(format!("corrupt stats file {}: {e}", path.display())))?;
        let groups = s.multipliers.len();
        let entry = by_h.entry(s.hop_limit).or_default();
        let slot = if groups == 1 { &mut entry.0 } else { &mut entry.1 };
        *slot = Some(slot.map_or(s.objective, |o| o.max(s.objective)));
        summary.throughput.push(ThroughputRow {
            run: run_name(root, path),
            hop_limit: s.hop_limit,
            groups,
            multipliers: s.multipliers.iter().map(|k| k.to_string()).collect::<Vec<_>>().join("x"),
            mode: s.mode.as_str().to_string(),
            demands: s.demands,
            servable: s.servable,
            objective: s.objective,
            upper_bound: s.upper_bound,
            exhausted: s.exhausted,
        });
    }
    summary.comparison = by_h
        .into_iter()
        .map(|(hop_limit, (dip, fdip))| ComparisonRow {
            hop_limit,
            dip_objective: dip,
            fdip_objective: fdip,
            difference: dip.zip(fdip).map(|(d, f)| f as i64 - d as i64),
        })
        .collect();

    for path in &delay_files {
        let corrupt = |e: csv::Error| CliError::invalid(format!("corrupt delay file {}: {e}", path.display()));
        let mut rdr = csv::Reader::from_path(path).map_err(corrupt)?;
        let mut per_flow: BTreeMap<String, Vec<u64>> = BTreeMap::new();
        for row in rdr.deserialize::<DelaySample>() {
            let row = row.map_err(corrupt)?;
            per_flow.entry(row.flow).or_default().push(row.delay_ns);
        }
        let run = run_name(root, path);
        for (flow, mut d) in per_flow {
            d.sort_unstable();
            summary.latency.push(LatencyRow {
                run: run.clone(),
                flow,
                samples: d.len(),
                min_ns: d[0],
                p50_ns: percentile(&d, 50.0),
                p99_ns: percentile(&d, 99.0),
                max_ns: *d.last().unwrap(),
                jitter_ns: d.last().unwrap() - d[0],
            });
        }
    }
    Ok(summary)
}

pub fn write_summary(out: &Path, s: &Summary) -> CliResult<()> {
    create_dir(out)?;
    write_csv(
        &out.join(THROUGHPUT_FILE),
        &s.throughput,
        &["run", "hop_limit", "groups", "multipliers", "mode", "demands", "servable", "objective", "upper_bound", "exhausted"],
    )?;
    write_csv(&out.join(COMPARISON_FILE), &s.comparison, &["hop_limit", "dip_objective", "fdip_objective", "difference"])?;
    write_csv(
        &out.join(LATENCY_FILE),
        &s.latency,
        &["run", "flow", "samples", "min_ns", "p50_ns", "p99_ns", "max_ns", "jitter_ns"],
    )
}
