//! Cycle mapping across a hop, per-hop worst-case delay, and the per-path
//! transmit-cycle recursion that yields end-to-end latency and jitter bounds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network_model::{Demand, LinkIdx, Network, Path};
use crate::time_model::GroupLadder;

/// `((a+1)Δ_m + τ − τ_hc) / Δ_m`, floored, on absolute (unwrapped) cycles.
fn mapped_cycle_abs(ladder: &GroupLadder, net: &Network, link: LinkIdx, m: usize, a: u64) -> Result<i128> {
    let delta = ladder.cycle_length(m)? as i128;
    let tau = net.link(link)?.delay_ns as i128;
    let offset = net.hypercycle_offset(link)? as i128;
    Ok(((a as i128 + 1) * delta + tau - offset).div_euclid(delta))
}

fn check_index(ladder: &GroupLadder, m: usize, a: u64) -> Result<u64> {
    let cycles = ladder.cycles_per_hypercycle(m)?;
    if a >= cycles {
        return Err(Error::CycleOutOfRange { group: m, index: a, cycles });
    }
    Ok(cycles)
}

/// Downstream cycle index `b` such that packets sent in cycle `a` upstream are
/// re-sent downstream in cycle `b + 1`.
pub fn cycle_map(ladder: &GroupLadder, net: &Network, link: LinkIdx, m: usize, a: u64) -> Result<u64> {
    let cycles = check_index(ladder, m, a)?;
    let b = mapped_cycle_abs(ladder, net, link, m, a)?;
    Ok(b.rem_euclid(cycles as i128) as u64)
}

/// Absolute-time form of [`cycle_map`]: the downstream cycle number counted
/// from the shared epoch rather than reduced into one hypercycle.
pub fn cycle_map_absolute(ladder: &GroupLadder, net: &Network, link: LinkIdx, m: usize, a: u64) -> Result<u64> {
    let b = mapped_cycle_abs(ladder, net, link, m, a)?;
    u64::try_from(b).map_err(|_| Error::Overflow("absolute cycle mapping"))
}

/// Time from the end of upstream cycle `a` to the end of the mapped
/// downstream cycle. Always in `(τ, τ + Δ_m]` for validated offsets.
pub fn hop_delay(ladder: &GroupLadder, net: &Network, link: LinkIdx, m: usize, a: u64) -> Result<u64> {
    check_index(ladder, m, a)?;
    let delta = ladder.cycle_length(m)? as i128;
    let offset = net.hypercycle_offset(link)? as i128;
    let b = mapped_cycle_abs(ladder, net, link, m, a)?;
    let d = b * delta + offset - a as i128 * delta;
    u64::try_from(d).map_err(|_| Error::Overflow("hop delay"))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathSchedule {
    pub demand_id: String,
    pub path: Path,
    pub group: usize,
    /// Transmit cycle at each sending node, one per hop.
    pub tx_cycles: Vec<u64>,
    /// Accumulated worst-case delay at each node of the path.
    pub acc_delays: Vec<u64>,
    pub e2e_bound: u64,
    pub jitter_bound: u64,
}

/// Schedule of a demand's first release on `path` in group `m`.
pub fn trace_schedule(ladder: &GroupLadder, net: &Network, demand: &Demand, path: &Path, m: usize) -> Result<PathSchedule> {
    trace_release(ladder, net, &demand.id, path, m, demand.arrival_cycle)
}

/// Schedule for a release at unitary cycle `arrival_cycle`.
pub fn trace_release(
    ladder: &GroupLadder,
    net: &Network,
    demand_id: &str,
    path: &Path,
    m: usize,
    arrival_cycle: u64,
) -> Result<PathSchedule> {
    if m == 0 || m > ladder.group_count() {
        return Err(Error::GroupOutOfRange { group: m, groups: ladder.group_count() });
    }
    if path.hops() == 0 {
        return Err(Error::InvalidTopology("empty path".into()));
    }
    let delta = ladder.cycle_length(m)?;
    let cycles = ladder.cycles_per_hypercycle(m)?;
    let first = (ladder.align(0, m, arrival_cycle)? + 1) % cycles;

    let mut tx_cycles = Vec::with_capacity(path.hops());
    let mut acc_delays = Vec::with_capacity(path.hops() + 1);
    tx_cycles.push(first);
    acc_delays.push(delta);
    for (i, &link) in path.links.iter().enumerate() {
        let sent = tx_cycles[i];
        let acc = acc_delays[i] + delta + hop_delay(ladder, net, link, m, sent)?;
        acc_delays.push(acc);
        if i + 1 < path.hops() {
            tx_cycles.push((cycle_map(ladder, net, link, m, sent)? + 1) % cycles);
        }
    }
    Ok(PathSchedule {
        demand_id: demand_id.to_string(),
        path: path.clone(),
        group: m,
        tx_cycles,
        e2e_bound: *acc_delays.last().unwrap(),
        acc_delays,
        jitter_bound: 2 * delta,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QosVerdict {
    pub feasible: bool,
    pub latency_slack_ns: i64,
    /// `None` when the demand has no jitter bound.
    pub jitter_slack_ns: Option<i64>,
}

pub fn check_qos(schedule: &PathSchedule, demand: &Demand) -> QosVerdict {
    let latency_slack_ns = demand.max_latency_ns as i64 - schedule.e2e_bound as i64;
    let jitter_slack_ns = demand.max_jitter_ns.map(|j| j as i64 - schedule.jitter_bound as i64);
    QosVerdict {
        feasible: latency_slack_ns >= 0 && jitter_slack_ns.is_none_or(|s| s >= 0),
        latency_slack_ns,
        jitter_slack_ns,
    }
}

/// Flat report row for a schedule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleRow {
    pub demand: String,
    pub group: usize,
    pub path: String,
    pub tx_cycles: String,
    pub e2e_bound_ns: u64,
    pub jitter_bound_ns: u64,
}

impl PathSchedule {
    pub fn to_row(&self, net: &Network) -> ScheduleRow {
        ScheduleRow {
            demand: self.demand_id.clone(),
            group: self.group,
            path: net.path_ids(&self.path).join(">"),
            tx_cycles: self.tx_cycles.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(";"),
            e2e_bound_ns: self.e2e_bound,
            jitter_bound_ns: self.jitter_bound,
        }
    }
}
