//! Greedy lower bound and exhaustive ground truth.

use std::collections::BTreeSet;

use super::{priority, Assignment, Instance, Weights};
use crate::capacity_ledger::CapacityLedger;
use crate::error::{Error, Result};

pub const DEFAULT_ORACLE_CAP: usize = 22;

/// Candidates ranked once by priority on the empty ledger (ties by candidate
/// id), accepted in that order whenever the demand is still open and the
/// footprint fits. Returns the selected candidate ids, ascending.
pub fn greedy_selection(inst: &Instance<'_>, weights: Weights) -> Vec<usize> {
    let empty = CapacityLedger::new(inst.ladder);
    let mut ranked: Vec<(f64, usize)> =
        inst.candidates.iter().map(|c| (priority(inst, c, &empty, weights), c.id)).collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

    let mut ledger = CapacityLedger::new(inst.ladder);
    let mut taken = vec![false; inst.demands.len()];
    let mut selected = Vec::new();
    for (_, id) in ranked {
        let c = &inst.candidates[id];
        if taken[c.demand] || !ledger.fits(inst.net, &c.cells) {
            continue;
        }
        ledger.commit(&c.footprint).expect("demand is not yet committed");
        taken[c.demand] = true;
        selected.push(id);
    }
    selected.sort_unstable();
    selected
}

pub fn greedy_baseline(inst: &Instance<'_>, weights: Weights) -> Result<Assignment> {
    inst.assignment(&greedy_selection(inst, weights))
}

/// Maximum-cardinality plan by exhaustive enumeration of every
/// at-most-one-candidate-per-demand subset.
pub fn brute_force_oracle(inst: &Instance<'_>, cap: usize) -> Result<Assignment> {
    let best = brute_force_restricted(inst, cap, &BTreeSet::new(), &BTreeSet::new())?
        .expect("the empty selection is always feasible");
    inst.assignment(&best)
}

/// Exhaustive optimum subject to fixings; `Ok(None)` when no feasible
/// selection honours them.
pub fn brute_force_restricted(
    inst: &Instance<'_>,
    cap: usize,
    fixed_zero: &BTreeSet<usize>,
    fixed_one: &BTreeSet<usize>,
) -> Result<Option<Vec<usize>>> {
    if inst.len() > cap {
        return Err(Error::OracleCapExceeded { count: inst.len(), cap });
    }
    let mut search = Search {
        inst,
        fixed_zero,
        fixed_one,
        ledger: CapacityLedger::new(inst.ladder),
        current: Vec::new(),
        best: None,
    };
    search.visit(0);
    Ok(search.best)
}

struct Search<'s, 'a> {
    inst: &'s Instance<'a>,
    fixed_zero: &'s BTreeSet<usize>,
    fixed_one: &'s BTreeSet<usize>,
    ledger: CapacityLedger,
    current: Vec<usize>,
    best: Option<Vec<usize>>,
}

impl Search<'_, '_> {
    fn visit(&mut self, demand: usize) {
        if demand == self.inst.demands.len() {
            if self.best.as_ref().is_none_or(|b| self.current.len() > b.len()) {
                self.best = Some(self.current.clone());
            }
            return;
        }
        let options = &self.inst.by_demand[demand];
        let forced: Vec<usize> = options.iter().copied().filter(|c| self.fixed_one.contains(c)).collect();
        if forced.len() > 1 {
            return;
        }
        if forced.is_empty() {
            self.visit(demand + 1);
        }
        for &id in options {
            if self.fixed_zero.contains(&id) || (!forced.is_empty() && forced[0] != id) {
                continue;
            }
            let c = &self.inst.candidates[id];
            if !self.ledger.fits(self.inst.net, &c.cells) {
                continue;
            }
            self.ledger.commit(&c.footprint).expect("one candidate per demand");
            self.current.push(id);
            self.visit(demand + 1);
            self.current.pop();
            self.ledger.rollback(&c.footprint).expect("committed above");
        }
    }
}
