//! Continuous relaxation of the admission problem under partial fixings.
//!
//! The LP has one variable per free candidate, one `Σ a ≤ 1` row per demand
//! and one row per cell that the free candidates could possibly overflow.
//! Two exact reductions keep it small:
//! - a cell whose worst case (largest contribution per demand, summed) still
//!   fits its remaining budget can never bind and is dropped;
//! - a demand with a free candidate touching no remaining row contributes a
//!   full unit, since moving its mass onto that candidate only lowers load.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::simplex::{maximize, LinearProgram};
use super::Instance;
use crate::capacity_ledger::CellKey;

pub const FIXED_ZERO: u8 = 0;
pub const FIXED_ONE: u8 = 1;
pub const FREE: u8 = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct Relaxation {
    /// LP optimum, `-inf` when the fixings are infeasible.
    pub bound: f64,
    /// Optimal value of every candidate's variable.
    pub fractional: Vec<f64>,
}

impl Relaxation {
    pub fn infeasible(n: usize) -> Self {
        Relaxation { bound: f64::NEG_INFINITY, fractional: vec![0.0; n] }
    }

    pub fn is_feasible(&self) -> bool {
        self.bound.is_finite()
    }

    /// Whether every variable is within `tol` of 0 or 1.
    pub fn is_integral(&self, tol: f64) -> bool {
        self.fractional.iter().all(|&v| v <= tol || v >= 1.0 - tol)
    }
}

/// LP bound for the subproblem with `fixed_zero` forced to 0 and
/// `fixed_one` forced to 1.
pub fn solve_relaxation(inst: &Instance<'_>, fixed_zero: &BTreeSet<usize>, fixed_one: &BTreeSet<usize>) -> Relaxation {
    let mut state = vec![FREE; inst.len()];
    for &c in fixed_zero {
        state[c] = FIXED_ZERO;
    }
    for &c in fixed_one {
        if state[c] == FIXED_ZERO {
            return Relaxation::infeasible(inst.len());
        }
        state[c] = FIXED_ONE;
    }
    relax_state(inst, &state)
}

pub(crate) fn relax_state(inst: &Instance<'_>, state: &[u8]) -> Relaxation {
    let n = inst.len();
    let mut x = vec![0.0; n];

    let mut satisfied = vec![false; inst.demands.len()];
    let mut base: HashMap<CellKey, u64> = HashMap::new();
    let mut fixed_ones = 0usize;
    for c in inst.candidates.iter().filter(|c| state[c.id] == FIXED_ONE) {
        if std::mem::replace(&mut satisfied[c.demand], true) {
            return Relaxation::infeasible(n);
        }
        fixed_ones += 1;
        x[c.id] = 1.0;
        for &(cell, bits) in &c.cells {
            *base.entry(cell).or_default() += bits;
        }
    }
    if base.iter().any(|(&cell, &load)| !inst.budget_ok(cell, load)) {
        return Relaxation::infeasible(n);
    }

    // Per cell: each demand's largest contribution among its free candidates.
    let mut worst: BTreeMap<CellKey, BTreeMap<usize, u64>> = BTreeMap::new();
    for c in inst.candidates.iter() {
        if state[c.id] != FREE || satisfied[c.demand] {
            continue;
        }
        for &(cell, bits) in &c.cells {
            let per_demand = worst.entry(cell).or_default();
            let w = per_demand.entry(c.demand).or_default();
            *w = (*w).max(bits);
        }
    }
    let mut binding: BTreeSet<CellKey> = BTreeSet::new();
    for (cell, per_demand) in &worst {
        let load = base.get(cell).copied().unwrap_or(0) + per_demand.values().sum::<u64>();
        if !inst.budget_ok(*cell, load) {
            binding.insert(*cell);
        }
    }

    let mut auto = 0usize;
    let mut lp_demands: Vec<usize> = Vec::new();
    for (d, ids) in inst.by_demand.iter().enumerate() {
        if satisfied[d] {
            continue;
        }
        let free: Vec<usize> = ids.iter().copied().filter(|&c| state[c] == FREE).collect();
        if free.is_empty() {
            continue;
        }
        let unconstrained =
            free.iter().copied().find(|&c| inst.candidates[c].cells.iter().all(|(cell, _)| !binding.contains(cell)));
        match unconstrained {
            Some(c) => {
                x[c] = 1.0;
                auto += 1;
            }
            None => lp_demands.push(d),
        }
    }

    let mut var_of: HashMap<usize, usize> = HashMap::new();
    let mut cand_of: Vec<usize> = Vec::new();
    for &d in &lp_demands {
        for &c in &inst.by_demand[d] {
            if state[c] == FREE {
                var_of.insert(c, cand_of.len());
                cand_of.push(c);
            }
        }
    }
    if cand_of.is_empty() {
        return Relaxation { bound: (fixed_ones + auto) as f64, fractional: x };
    }

    let mut lp = LinearProgram::new(cand_of.len());
    lp.objective = vec![1.0; cand_of.len()];
    for &d in &lp_demands {
        let row: Vec<(usize, f64)> =
            inst.by_demand[d].iter().filter_map(|c| var_of.get(c).map(|&v| (v, 1.0))).collect();
        lp.add_row(row, 1.0);
    }
    let mut rows: BTreeMap<CellKey, Vec<(usize, f64)>> = BTreeMap::new();
    for (v, &c) in cand_of.iter().enumerate() {
        for &(cell, bits) in &inst.candidates[c].cells {
            if binding.contains(&cell) {
                rows.entry(cell).or_default().push((v, bits as f64));
            }
        }
    }
    for (cell, coeffs) in rows {
        // Normalize by the cell budget so all coefficients are O(1).
        let budget = inst.budget_bits(cell);
        let used = base.get(&cell).copied().unwrap_or(0) as f64;
        let coeffs = coeffs.into_iter().map(|(v, b)| (v, b / budget)).collect();
        lp.add_row(coeffs, ((budget - used) / budget).max(0.0));
    }

    match maximize(&lp) {
        Ok(sol) => {
            for (v, &c) in cand_of.iter().enumerate() {
                x[c] = sol.x[v].clamp(0.0, 1.0);
            }
            Relaxation { bound: (fixed_ones + auto) as f64 + sol.value, fractional: x }
        }
        // Bounded by the demand rows and feasible at the origin, so neither
        // error can occur; treat it as an infeasible node if it ever does.
        Err(_) => Relaxation::infeasible(n),
    }
}
