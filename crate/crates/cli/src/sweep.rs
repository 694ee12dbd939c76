//! Parameter sweeps. Each point is planned, simulated and verified in its own
//! subdirectory; points run in parallel and are reported in input order.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use fdip_core::simulator::TrafficConfig;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::commands::{plan, simulate, write_csv, write_plan, write_simulation, PlanOptions, PlanOutput};
use crate::error::{CliError, CliResult};
use crate::scenario::Scenario;

pub const SWEEP_FILE: &str = "sweep.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SweepKind {
    /// Values are cycle lengths in ns; each point uses a single-group ladder.
    CycleLength,
    /// Values are best-effort utilizations; the plan is shared.
    BeLoad,
    /// Values are hop limits; each point plans the scenario ladder and its
    /// single-group restriction.
    HopLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub run: String,
    pub value: f64,
    pub groups: usize,
    pub hop_limit: usize,
    pub objective: usize,
    pub upper_bound: Option<usize>,
    pub flows: usize,
    pub max_delay_ns: Option<u64>,
    pub max_jitter_ns: Option<u64>,
    pub max_bound_ns: Option<u64>,
    pub dropped: u64,
    pub verified: bool,
}

struct Job {
    run: String,
    value: f64,
    scenario: Scenario,
    opts: PlanOptions,
    traffic: TrafficConfig,
    shared_plan: Option<PlanOutput>,
}

fn execute(job: &Job, out: &Path) -> CliResult<SweepPoint> {
    let dir = out.join(&job.run);
    let planned;
    let plan_out = match &job.shared_plan {
        Some(p) => p,
        None => {
            planned = plan(&job.scenario, job.opts)?;
            write_plan(&dir, &planned)?;
            &planned
        }
    };
    let sim = simulate(&job.scenario, &plan_out.doc, &job.traffic)?;
    write_simulation(&dir, &sim)?;
    let flows = sim.report.flows.values();
    Ok(SweepPoint {
        run: job.run.clone(),
        value: job.value,
        groups: job.scenario.ladder.group_count(),
        hop_limit: job.opts.hop_limit,
        objective: plan_out.doc.objective,
        upper_bound: plan_out.stats.upper_bound,
        flows: sim.report.flows.len(),
        max_delay_ns: flows.clone().filter_map(|f| f.max_delay_ns).max(),
        max_jitter_ns: flows.clone().filter_map(|f| f.jitter_ns).max(),
        max_bound_ns: flows.clone().map(|f| f.e2e_bound_ns).max(),
        dropped: flows.map(|f| f.dropped).sum(),
        verified: sim.verification.passed,
    })
}

fn label(value: f64) -> String {
    let s = format!("{value}");
    s.replace('.', "_")
}

/// Runs the sweep and writes `sweep.csv` plus one directory per point.
pub fn sweep(
    scn: &Scenario,
    kind: SweepKind,
    values: &[f64],
    opts: PlanOptions,
    traffic: &TrafficConfig,
    out: &Path,
) -> CliResult<Vec<SweepPoint>> {
    if values.is_empty() {
        return Err(CliError::invalid("sweep needs at least one value"));
    }
    let mut jobs = Vec::new();
    match kind {
        SweepKind::CycleLength => {
            let d0 = scn.ladder.delta0();
            for &v in values {
                let ns = v as u64;
                if v < 0.0 || v.fract() != 0.0 || ns == 0 || !ns.is_multiple_of(d0) {
                    return Err(CliError::invalid(format!("cycle length {v} is not a positive multiple of {d0} ns")));
                }
                jobs.push(Job {
                    run: format!("cycle{ns}"),
                    value: v,
                    scenario: scn.with_multipliers(vec![ns / d0])?,
                    opts,
                    traffic: traffic.clone(),
                    shared_plan: None,
                });
            }
        }
        SweepKind::BeLoad => {
            let shared = plan(scn, opts)?;
            write_plan(&out.join("plan"), &shared)?;
            for &v in values {
                jobs.push(Job {
                    run: format!("be{}", label(v)),
                    value: v,
                    scenario: scn.clone(),
                    opts,
                    traffic: TrafficConfig { be_utilization: v, ..traffic.clone() },
                    shared_plan: Some(shared.clone()),
                });
            }
        }
        SweepKind::HopLimit => {
            let mut ladders = vec![scn.clone()];
            if scn.ladder.group_count() > 1 {
                ladders.insert(0, scn.first_group_only()?);
            }
            for &v in values {
                if v < 1.0 || v.fract() != 0.0 {
                    return Err(CliError::invalid(format!("hop limit {v} is not a positive integer")));
                }
                for s in &ladders {
                    let h = v as usize;
                    jobs.push(Job {
                        run: format!("H{h}_M{}", s.ladder.group_count()),
                        value: v,
                        scenario: s.clone(),
                        opts: PlanOptions { hop_limit: h, ..opts },
                        traffic: traffic.clone(),
                        shared_plan: None,
                    });
                }
            }
        }
    }
    let points: Vec<SweepPoint> = jobs.par_iter().map(|j| execute(j, out)).collect::<CliResult<_>>()?;
    write_csv(
        &out.join(SWEEP_FILE),
        &points,
        &[
            "run",
            "value",
            "groups",
            "hop_limit",
            "objective",
            "upper_bound",
            "flows",
            "max_delay_ns",
            "max_jitter_ns",
            "max_bound_ns",
            "dropped",
            "verified",
        ],
    )?;
    Ok(points)
}

/// Directory of a sweep point.
pub fn point_dir(out: &Path, point: &SweepPoint) -> PathBuf {
    out.join(&point.run)
}
