//! The plan / simulate / verify pipeline and the files each step writes.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use fdip_core::capacity_ledger::{demand_footprint, within_budget, CapacityLedger, UtilizationRow};
use fdip_core::cycle_forwarding::{check_qos, trace_schedule, ScheduleRow};
use fdip_core::planner::{
    brute_force_oracle, branch_and_bound, greedy_baseline, AcceptedRoute, Assignment, Instance, SearchStats,
};
use fdip_core::simulator::{flows_from_assignment, run, verify_against_bounds, FlowStats, SimReport, TrafficConfig, VerificationReport};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::scenario::{Mode, Scenario};

pub const ASSIGNMENT_FILE: &str = "assignment.json";
pub const PLAN_STATS_FILE: &str = "plan_stats.json";
pub const SCHEDULES_FILE: &str = "schedules.csv";
pub const UTILIZATION_FILE: &str = "utilization.csv";
pub const FLOW_STATS_FILE: &str = "flow_stats.csv";
pub const DELAYS_FILE: &str = "delays.csv";
pub const VERIFICATION_FILE: &str = "verification.json";
pub const TRACE_FILE: &str = "trace.csv";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignmentDoc {
    pub scenario_hash: String,
    pub mode: Mode,
    pub hop_limit: usize,
    pub multipliers: Vec<u64>,
    pub objective: usize,
    pub accepted: BTreeMap<String, AcceptedRoute>,
}

impl AssignmentDoc {
    pub fn assignment(&self) -> Assignment {
        Assignment { accepted: self.accepted.clone(), objective: self.objective }
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanStats {
    pub mode: Mode,
    pub hop_limit: usize,
    pub paths_per_demand: usize,
    pub multipliers: Vec<u64>,
    pub cycle_lengths_ns: Vec<u64>,
    pub hypercycle_ns: u64,
    pub demands: usize,
    /// Demands with at least one admissible candidate.
    pub servable: usize,
    pub candidates: usize,
    pub objective: usize,
    pub greedy_objective: usize,
    /// Proven upper bound on the optimum, when the mode yields one.
    pub upper_bound: Option<usize>,
    pub exhausted: bool,
    pub accepted_per_group: BTreeMap<usize, usize>,
    /// Accepted demands per id prefix (the part before the first `-`).
    pub accepted_per_class: BTreeMap<String, usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub search: Option<SearchStats>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlanOptions {
    pub mode: Mode,
    pub hop_limit: usize,
}

impl PlanOptions {
    pub fn from_scenario(scn: &Scenario) -> Self {
        PlanOptions { mode: scn.file.planner.mode, hop_limit: scn.file.planner.hop_limit }
    }
}

#[derive(Debug, Clone)]
pub struct PlanOutput {
    pub doc: AssignmentDoc,
    pub stats: PlanStats,
    pub schedules: Vec<ScheduleRow>,
    pub utilization: Vec<UtilizationRow>,
}

fn class_of(id: &str) -> String {
    id.split('-').next().unwrap_or(id).to_string()
}

pub fn plan(scn: &Scenario, opts: PlanOptions) -> CliResult<PlanOutput> {
    let pc = &scn.file.planner;
    let inst = Instance::new(&scn.ladder, &scn.net, &scn.demands, opts.hop_limit, pc.paths_per_demand)?;
    let greedy = greedy_baseline(&inst, pc.weights)?;
    let (assignment, upper_bound, exhausted, search) = match opts.mode {
        Mode::Greedy => (greedy.clone(), None, false, None),
        Mode::Oracle => {
            let a = brute_force_oracle(&inst, pc.oracle_cap)?;
            let ub = a.objective;
            (a, Some(ub), true, None)
        }
        Mode::Bnb => {
            let out = branch_and_bound(&inst, &pc.bnb())?;
            let ub = out.stats.upper_bound;
            let exhausted = out.stats.exhausted;
            (out.assignment, Some(ub), exhausted, Some(out.stats))
        }
    };

    let mut per_group = BTreeMap::new();
    let mut per_class = BTreeMap::new();
    let mut ledger = CapacityLedger::new(&scn.ladder);
    let mut schedules = Vec::new();
    for (id, route) in &assignment.accepted {
        *per_group.entry(route.group).or_insert(0) += 1;
        *per_class.entry(class_of(id)).or_insert(0) += 1;
        let c = &inst.candidates[route.candidate];
        ledger.commit(&c.footprint)?;
        schedules.push(c.schedule.to_row(&scn.net));
    }

    let stats = PlanStats {
        mode: opts.mode,
        hop_limit: opts.hop_limit,
        paths_per_demand: pc.paths_per_demand,
        multipliers: scn.ladder.multipliers().to_vec(),
        cycle_lengths_ns: scn.ladder.groups().map(|m| scn.ladder.cycle_length(m).expect("group in range")).collect(),
        hypercycle_ns: scn.ladder.hypercycle(),
        demands: scn.demands.len(),
        servable: inst.by_demand.iter().filter(|c| !c.is_empty()).count(),
        candidates: inst.len(),
        objective: assignment.objective,
        greedy_objective: greedy.objective,
        upper_bound,
        exhausted,
        accepted_per_group: per_group,
        accepted_per_class: per_class,
        search,
    };
    let doc = AssignmentDoc {
        scenario_hash: scn.hash.clone(),
        mode: opts.mode,
        hop_limit: opts.hop_limit,
        multipliers: scn.ladder.multipliers().to_vec(),
        objective: assignment.objective,
        accepted: assignment.accepted,
    };
    Ok(PlanOutput { doc, stats, schedules, utilization: ledger.utilization(&scn.net) })
}

pub fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("output types serialize");
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> CliResult<()> {
    let mut w = csv::WriterBuilder::new().has_headers(!rows.is_empty()).from_path(path)?;
    if rows.is_empty() {
        // Keep the schema header even when there is nothing to report.
        w.write_record(header)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub const SCHEDULE_HEADER: &[&str] = &["demand", "group", "path", "tx_cycles", "e2e_bound_ns", "jitter_bound_ns"];
pub const UTILIZATION_HEADER: &[&str] = &["src", "dst", "group", "max_fill", "mean_fill"];
pub const FLOW_STATS_HEADER: &[&str] = &[
    "flow",
    "group",
    "e2e_bound_ns",
    "jitter_bound_ns",
    "delivered",
    "dropped",
    "min_delay_ns",
    "max_delay_ns",
    "mean_delay_ns",
    "jitter_ns",
    "bound_violations",
];
pub const DELAYS_HEADER: &[&str] = &["flow", "sample", "delay_ns"];

pub fn write_plan(dir: &Path, out: &PlanOutput) -> CliResult<()> {
    create_dir(dir)?;
    write_json(&dir.join(ASSIGNMENT_FILE), &out.doc)?;
    write_json(&dir.join(PLAN_STATS_FILE), &out.stats)?;
    write_csv(&dir.join(SCHEDULES_FILE), &out.schedules, SCHEDULE_HEADER)?;
    write_csv(&dir.join(UTILIZATION_FILE), &out.utilization, UTILIZATION_HEADER)
}

/// Problems found when re-checking an assignment against its scenario.
pub fn verify_assignment(scn: &Scenario, doc: &AssignmentDoc) -> CliResult<Vec<String>> {
    check_hash(scn, doc)?;
    let mut problems = Vec::new();
    let mut ledger = CapacityLedger::new(&scn.ladder);
    for (id, route) in &doc.accepted {
        let Some(demand) = scn.demands.iter().find(|d| &d.id == id) else {
            problems.push(format!("{id}: unknown demand"));
            continue;
        };
        if route.group == 0 || route.group > scn.ladder.group_count() {
            problems.push(format!("{id}: group {} out of range", route.group));
            continue;
        }
        let path = match scn.net.path_from_ids(&route.path) {
            Ok(p) if p.source() == demand.src && p.sink() == demand.dst => p,
            Ok(_) => {
                problems.push(format!("{id}: path does not join its endpoints"));
                continue;
            }
            Err(e) => {
                problems.push(format!("{id}: {e}"));
                continue;
            }
        };
        let delta = scn.ladder.cycle_length(route.group)?;
        if !path.links.iter().all(|&l| within_budget(demand.payload_bits, scn.net.links()[l].bandwidth_bps, delta)) {
            problems.push(format!("{id}: payload does not fit one cycle of group {}", route.group));
        }
        let schedule = trace_schedule(&scn.ladder, &scn.net, demand, &path, route.group)?;
        let verdict = check_qos(&schedule, demand);
        if !verdict.feasible {
            problems.push(format!("{id}: latency or jitter limit exceeded (slack {} ns)", verdict.latency_slack_ns));
        }
        ledger.commit(&demand_footprint(&scn.ladder, &scn.net, &schedule, demand)?)?;
    }
    for v in ledger.check_capacity(&scn.net) {
        let l = &scn.net.links()[v.cell.link];
        problems.push(format!(
            "cell {}>{} group {} cycle {} over budget by {} bits",
            scn.net.node(l.src).id,
            scn.net.node(l.dst).id,
            v.cell.group,
            v.cell.cycle,
            v.excess_bits
        ));
    }
    Ok(problems)
}

fn check_hash(scn: &Scenario, doc: &AssignmentDoc) -> CliResult<()> {
    if doc.scenario_hash != scn.hash {
        return Err(CliError::invalid(format!(
            "assignment was planned for scenario {} but this scenario is {}",
            doc.scenario_hash, scn.hash
        )));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub report: SimReport,
    pub verification: VerificationReport,
}

#[derive(Debug, Clone, Serialize)]
struct DelayRow<'a> {
    flow: &'a str,
    sample: usize,
    delay_ns: u64,
}

pub fn simulate(scn: &Scenario, doc: &AssignmentDoc, traffic: &TrafficConfig) -> CliResult<SimOutput> {
    check_hash(scn, doc)?;
    let flows = flows_from_assignment(&scn.ladder, &scn.net, &scn.demands, &doc.assignment())?;
    let report = run(&scn.ladder, &scn.net, &flows, traffic)?;
    let verification = verify_against_bounds(&report, &flows);
    Ok(SimOutput { report, verification })
}

pub fn write_simulation(dir: &Path, out: &SimOutput) -> CliResult<()> {
    create_dir(dir)?;
    let stats: Vec<&FlowStats> = out.report.flows.values().collect();
    write_csv(&dir.join(FLOW_STATS_FILE), &stats, FLOW_STATS_HEADER)?;
    let delays: Vec<DelayRow> = out
        .report
        .flows
        .values()
        .flat_map(|s| s.delays.iter().enumerate().map(|(i, &d)| DelayRow { flow: &s.flow, sample: i, delay_ns: d }))
        .collect();
    write_csv(&dir.join(DELAYS_FILE), &delays, DELAYS_HEADER)?;
    write_json(&dir.join(VERIFICATION_FILE), &out.verification)?;
    if !out.report.trace.is_empty() {
        let path: PathBuf = dir.join(TRACE_FILE);
        let mut text = String::from("time_ns,node,event,flow,bits\n");
        for line in &out.report.trace {
            text.push_str(line);
            text.push('\n');
        }
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    }
    Ok(())
}
