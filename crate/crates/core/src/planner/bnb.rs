//! LP-bounded branch-and-bound over candidate fixings.
//!
//! Nodes are expanded best-first by bound. Each expansion picks the free
//! candidate with the highest priority under the ledger of the node's
//! fixed-to-one set and creates the fixed-to-zero and fixed-to-one children.
//! After every fixing, candidates that can no longer be part of any integral
//! completion (their demand is already served, or they no longer fit) are
//! moved to the fixed-to-zero set.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use ordered_float::OrderedFloat;
use serde::{Deserialize, Serialize};

use super::baseline::greedy_selection;
use super::relaxation::{relax_state, Relaxation, FIXED_ONE, FIXED_ZERO, FREE};
use super::{priority, Assignment, Instance, Weights};
use crate::capacity_ledger::CapacityLedger;
use crate::error::Result;

/// Slack when flooring fractional bounds; LP values carry float noise.
const BOUND_TOL: f64 = 1e-6;
const INTEGRAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeOrder {
    /// Expand the open node with the largest bound.
    #[default]
    BestBound,
    /// Expand the open node with the smallest bound.
    WorstBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BnbConfig {
    pub weights: Weights,
    /// Expansion budget; `None` runs to exhaustion.
    pub max_nodes: Option<usize>,
    /// Wall-clock budget. Makes results timing dependent, so off by default.
    pub time_budget: Option<Duration>,
    pub node_order: NodeOrder,
    /// Start from the greedy plan instead of the empty one.
    pub seed_with_greedy: bool,
    /// Keep every bounded node for later inspection.
    pub record_nodes: bool,
}

impl Default for BnbConfig {
    fn default() -> Self {
        BnbConfig {
            weights: Weights::default(),
            max_nodes: None,
            time_budget: None,
            node_order: NodeOrder::BestBound,
            seed_with_greedy: true,
            record_nodes: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub fixed_zero: Vec<usize>,
    pub fixed_one: Vec<usize>,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SearchStats {
    pub candidates: usize,
    pub nodes_bounded: usize,
    pub nodes_expanded: usize,
    pub pruned_by_bound: usize,
    pub pruned_infeasible: usize,
    pub incumbent_updates: usize,
    /// Incumbent objective after each improvement, starting with the seed.
    pub incumbent_trace: Vec<usize>,
    pub exhausted: bool,
    pub upper_bound: usize,
    pub gap: usize,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub nodes: Vec<NodeRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub assignment: Assignment,
    pub selection: Vec<usize>,
    pub stats: SearchStats,
}

struct OpenNode {
    key: OrderedFloat<f64>,
    seq: usize,
    bound: f64,
    state: Vec<u8>,
}

impl PartialEq for OpenNode {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for OpenNode {}
impl PartialOrd for OpenNode {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for OpenNode {
    fn cmp(&self, other: &Self) -> Ordering {
        // Max-heap on key; earlier nodes first among equal keys.
        self.key.cmp(&other.key).then_with(|| other.seq.cmp(&self.seq))
    }
}

fn floor_bound(bound: f64) -> usize {
    (bound + BOUND_TOL).floor().max(0.0) as usize
}

struct Solver<'s, 'a> {
    inst: &'s Instance<'a>,
    cfg: &'s BnbConfig,
    best: Vec<usize>,
    stats: SearchStats,
    open: BinaryHeap<OpenNode>,
    seq: usize,
}

impl Solver<'_, '_> {
    fn ledger_of(&self, state: &[u8]) -> CapacityLedger {
        let mut ledger = CapacityLedger::new(self.inst.ladder);
        for c in self.inst.candidates.iter().filter(|c| state[c.id] == FIXED_ONE) {
            ledger.commit(&c.footprint).expect("fixings hold one candidate per demand");
        }
        ledger
    }

    /// Fixes to zero every free candidate that no integral completion can use.
    fn propagate(&self, state: &mut [u8], ledger: &CapacityLedger) {
        let mut served = vec![false; self.inst.demands.len()];
        for c in self.inst.candidates.iter().filter(|c| state[c.id] == FIXED_ONE) {
            served[c.demand] = true;
        }
        for c in &self.inst.candidates {
            if state[c.id] == FREE && (served[c.demand] || !ledger.fits(self.inst.net, &c.cells)) {
                state[c.id] = FIXED_ZERO;
            }
        }
    }

    fn record(&mut self, state: &[u8], relax: &Relaxation) {
        self.stats.nodes_bounded += 1;
        if self.cfg.record_nodes {
            let pick = |v: u8| state.iter().enumerate().filter(|(_, &s)| s == v).map(|(i, _)| i).collect();
            self.stats.nodes.push(NodeRecord { fixed_zero: pick(FIXED_ZERO), fixed_one: pick(FIXED_ONE), bound: relax.bound });
        }
    }

    fn offer_incumbent(&mut self, selection: Vec<usize>) -> bool {
        if selection.len() <= self.best.len() {
            return false;
        }
        if self.inst.verify_selection(&selection).is_err() {
            return false;
        }
        self.best = selection;
        self.stats.incumbent_updates += 1;
        self.stats.incumbent_trace.push(self.best.len());
        true
    }

    /// Bounds a node and either closes it, prunes it, or queues it.
    fn bound_node(&mut self, state: Vec<u8>) {
        let relax = relax_state(self.inst, &state);
        self.record(&state, &relax);
        if !relax.is_feasible() {
            self.stats.pruned_infeasible += 1;
            return;
        }
        let all_fixed = !state.contains(&FREE);
        if all_fixed || relax.is_integral(INTEGRAL_TOL) {
            let selection: Vec<usize> = (0..state.len()).filter(|&i| relax.fractional[i] > 0.5).collect();
            let value = selection.len();
            let closed = self.inst.verify_selection(&selection).is_ok() && floor_bound(relax.bound) <= value;
            self.offer_incumbent(selection);
            if closed || all_fixed {
                return;
            }
        }
        if floor_bound(relax.bound) <= self.best.len() {
            self.stats.pruned_by_bound += 1;
            return;
        }
        let key = match self.cfg.node_order {
            NodeOrder::BestBound => relax.bound,
            NodeOrder::WorstBound => -relax.bound,
        };
        self.seq += 1;
        self.open.push(OpenNode { key: OrderedFloat(key), seq: self.seq, bound: relax.bound, state });
    }

    fn branch_candidate(&self, state: &[u8], ledger: &CapacityLedger) -> Option<usize> {
        let mut best: Option<(f64, usize)> = None;
        for c in self.inst.candidates.iter().filter(|c| state[c.id] == FREE) {
            let p = priority(self.inst, c, ledger, self.cfg.weights);
            if best.is_none_or(|(bp, _)| p > bp) {
                best = Some((p, c.id));
            }
        }
        best.map(|(_, id)| id)
    }

    fn run(&mut self) {
        let started = Instant::now();
        let mut root = vec![FREE; self.inst.len()];
        let empty = CapacityLedger::new(self.inst.ladder);
        self.propagate(&mut root, &empty);
        self.bound_node(root);

        while let Some(node) = self.open.pop() {
            if floor_bound(node.bound) <= self.best.len() {
                self.stats.pruned_by_bound += 1;
                continue;
            }
            let over_nodes = self.cfg.max_nodes.is_some_and(|n| self.stats.nodes_expanded >= n);
            let over_time = self.cfg.time_budget.is_some_and(|t| started.elapsed() >= t);
            if over_nodes || over_time {
                self.open.push(node);
                break;
            }
            self.stats.nodes_expanded += 1;

            let ledger = self.ledger_of(&node.state);
            let Some(pick) = self.branch_candidate(&node.state, &ledger) else { continue };

            let mut zero = node.state.clone();
            zero[pick] = FIXED_ZERO;
            self.bound_node(zero);

            let mut one = node.state;
            one[pick] = FIXED_ONE;
            let mut ledger = ledger;
            ledger.commit(&self.inst.candidates[pick].footprint).expect("pick is free, so its demand is open");
            self.propagate(&mut one, &ledger);
            self.bound_node(one);
        }

        self.stats.exhausted = self.open.is_empty();
        let open_bound = self.open.iter().map(|n| floor_bound(n.bound)).max().unwrap_or(0);
        self.stats.upper_bound = open_bound.max(self.best.len());
        self.stats.gap = self.stats.upper_bound - self.best.len();
    }
}

/// Runs the search and returns the best plan found, with statistics. When a
/// budget stops the search early, `stats.exhausted` is false and `stats.gap`
/// bounds the distance to the optimum.
pub fn branch_and_bound(inst: &Instance<'_>, cfg: &BnbConfig) -> Result<SearchOutcome> {
    let best = if cfg.seed_with_greedy { greedy_selection(inst, cfg.weights) } else { Vec::new() };
    let mut solver = Solver {
        inst,
        cfg,
        stats: SearchStats { candidates: inst.len(), incumbent_trace: vec![best.len()], ..SearchStats::default() },
        best,
        open: BinaryHeap::new(),
        seq: 0,
    };
    solver.run();
    let Solver { best, stats, .. } = solver;
    let assignment = inst.assignment(&best)?;
    Ok(SearchOutcome { assignment, selection: best, stats })
}
