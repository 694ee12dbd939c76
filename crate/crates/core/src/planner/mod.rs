//! Admission control, path selection and group assignment.
//!
//! A [`Candidate`] is one admissible way to carry a demand: a path plus a
//! queue group, already filtered by the latency, jitter and serialization
//! limits. Planning picks at most one candidate per demand such that the
//! combined footprints respect every cell budget, maximizing the number of
//! accepted demands.

mod baseline;
mod bnb;
mod relaxation;
pub mod simplex;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use baseline::{brute_force_oracle, brute_force_restricted, greedy_baseline, greedy_selection, DEFAULT_ORACLE_CAP};
pub use bnb::{branch_and_bound, BnbConfig, NodeOrder, NodeRecord, SearchOutcome, SearchStats};
pub use relaxation::{solve_relaxation, Relaxation};

use crate::capacity_ledger::{demand_footprint, within_budget, CapacityLedger, CellKey, Footprint};
use crate::cycle_forwarding::{check_qos, trace_schedule, PathSchedule};
use crate::error::{Error, Result};
use crate::network_model::{Demand, Network, Path};
use crate::time_model::GroupLadder;

pub const DEFAULT_PATHS_PER_DEMAND: usize = 16;

#[derive(Debug, Clone)]
pub struct Candidate {
    pub id: usize,
    /// Index into the instance's demand slice.
    pub demand: usize,
    pub path: Path,
    pub group: usize,
    pub schedule: PathSchedule,
    pub footprint: Footprint,
    /// Footprint after the strict-priority cascade, sorted by cell.
    pub cells: Vec<(CellKey, u64)>,
}

/// Branching priority weights `(ξ1, ξ2, ξ3)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub value: f64,
    pub headroom: f64,
    pub exponent: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Weights { value: 1.0, headroom: 1.0, exponent: 1.0 }
    }
}

/// Everything the planners need: the models plus the candidate universe.
#[derive(Debug, Clone)]
pub struct Instance<'a> {
    pub ladder: &'a GroupLadder,
    pub net: &'a Network,
    pub demands: &'a [Demand],
    pub candidates: Vec<Candidate>,
    /// Candidate ids per demand, ascending.
    pub by_demand: Vec<Vec<usize>>,
}

impl<'a> Instance<'a> {
    pub fn new(
        ladder: &'a GroupLadder,
        net: &'a Network,
        demands: &'a [Demand],
        hop_limit: usize,
        paths_per_demand: usize,
    ) -> Result<Self> {
        let candidates = build_candidates(ladder, net, demands, hop_limit, paths_per_demand)?;
        Ok(Self::from_candidates(ladder, net, demands, candidates))
    }

    pub fn from_candidates(
        ladder: &'a GroupLadder,
        net: &'a Network,
        demands: &'a [Demand],
        mut candidates: Vec<Candidate>,
    ) -> Self {
        let mut by_demand = vec![Vec::new(); demands.len()];
        for (i, c) in candidates.iter_mut().enumerate() {
            c.id = i;
            by_demand[c.demand].push(i);
        }
        Instance { ladder, net, demands, candidates, by_demand }
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub(crate) fn budget_ok(&self, cell: CellKey, load: u64) -> bool {
        let bw = self.net.links()[cell.link].bandwidth_bps;
        within_budget(load, bw, self.ladder.len_of(cell.group))
    }

    pub(crate) fn budget_bits(&self, cell: CellKey) -> f64 {
        crate::capacity_ledger::cell_budget_bits(self.net.links()[cell.link].bandwidth_bps, self.ladder.len_of(cell.group))
    }

    /// Checks that a selection is a valid plan: one candidate per demand at
    /// most, every schedule within its QoS limits, and no cell over budget.
    pub fn verify_selection(&self, selection: &[usize]) -> Result<()> {
        let mut seen = vec![false; self.demands.len()];
        let mut ledger = CapacityLedger::new(self.ladder);
        for &id in selection {
            let c = self
                .candidates
                .get(id)
                .ok_or_else(|| Error::InfeasibleAssignment(format!("unknown candidate {id}")))?;
            if std::mem::replace(&mut seen[c.demand], true) {
                return Err(Error::InfeasibleAssignment(format!(
                    "demand '{}' selected twice",
                    self.demands[c.demand].id
                )));
            }
            if !check_qos(&c.schedule, &self.demands[c.demand]).feasible {
                return Err(Error::InfeasibleAssignment(format!(
                    "demand '{}' violates its QoS bounds",
                    self.demands[c.demand].id
                )));
            }
            ledger.commit(&c.footprint)?;
        }
        let violations = ledger.check_capacity(self.net);
        if let Some(v) = violations.first() {
            return Err(Error::InfeasibleAssignment(format!(
                "{} cell(s) over budget, first at link {} group {} cycle {} (+{} bits)",
                violations.len(),
                v.cell.link,
                v.cell.group,
                v.cell.cycle,
                v.excess_bits
            )));
        }
        Ok(())
    }

    /// Builds the assignment for a verified selection.
    pub fn assignment(&self, selection: &[usize]) -> Result<Assignment> {
        self.verify_selection(selection)?;
        let mut accepted = BTreeMap::new();
        for &id in selection {
            let c = &self.candidates[id];
            accepted.insert(
                self.demands[c.demand].id.clone(),
                AcceptedRoute {
                    candidate: id,
                    path: self.net.path_ids(&c.path),
                    group: c.group,
                    e2e_bound_ns: c.schedule.e2e_bound,
                    jitter_bound_ns: c.schedule.jitter_bound,
                },
            );
        }
        Ok(Assignment { objective: accepted.len(), accepted })
    }
}

/// Cross product of hop-bounded paths and groups per demand, keeping only
/// choices that meet the latency and jitter limits and whose payload fits in
/// one cycle of the group on every link. Ordered by demand, path, group.
pub fn build_candidates(
    ladder: &GroupLadder,
    net: &Network,
    demands: &[Demand],
    hop_limit: usize,
    paths_per_demand: usize,
) -> Result<Vec<Candidate>> {
    let mut out = Vec::new();
    for (di, d) in demands.iter().enumerate() {
        for path in net.enumerate_paths(d.src, d.dst, hop_limit, paths_per_demand) {
            for m in ladder.groups() {
                let delta = ladder.len_of(m);
                let serializable = path
                    .links
                    .iter()
                    .all(|&l| within_budget(d.payload_bits, net.links()[l].bandwidth_bps, delta));
                if !serializable {
                    continue;
                }
                let schedule = trace_schedule(ladder, net, d, &path, m)?;
                if !check_qos(&schedule, d).feasible {
                    continue;
                }
                let footprint = demand_footprint(ladder, net, &schedule, d)?;
                let cells = footprint.cascaded_cells(ladder);
                out.push(Candidate { id: out.len(), demand: di, path: path.clone(), group: m, schedule, footprint, cells });
            }
        }
    }
    Ok(out)
}

/// Branching priority: `ξ1·v + ξ2·Σ headroom^ξ3` over the candidate's links,
/// each evaluated at the cycle the candidate would transmit in.
pub fn priority(inst: &Instance<'_>, candidate: &Candidate, ledger: &CapacityLedger, weights: Weights) -> f64 {
    let value = inst.demands[candidate.demand].value;
    let headroom: f64 = candidate
        .path
        .links
        .iter()
        .zip(&candidate.schedule.tx_cycles)
        .map(|(&l, &c)| ledger.headroom(inst.net, l, candidate.group, c).powf(weights.exponent))
        .sum();
    weights.value * value + weights.headroom * headroom
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcceptedRoute {
    pub candidate: usize,
    pub path: Vec<String>,
    pub group: usize,
    pub e2e_bound_ns: u64,
    pub jitter_bound_ns: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Assignment {
    pub accepted: BTreeMap<String, AcceptedRoute>,
    pub objective: usize,
}
