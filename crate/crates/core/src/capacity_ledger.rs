//! Per-(link, group, cycle) bit accounting with the strict-priority cascade.
//!
//! Traffic committed in a fast group also occupies the overlapping cycle of
//! every slower group, because the strict-priority scheduler serves it first.
//! The ledger keeps both the direct load and the cascaded load, updated
//! incrementally so that commit and rollback are exact inverses.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::cycle_forwarding::{trace_release, PathSchedule};
use crate::error::{Error, Result};
use crate::network_model::{Demand, LinkIdx, Network};
use crate::time_model::GroupLadder;

const NS_PER_S: u128 = 1_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellKey {
    pub link: LinkIdx,
    pub group: usize,
    pub cycle: u64,
}

/// Bits a demand reserves per hypercycle, by cell of its own group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Footprint {
    pub demand_id: String,
    pub group: usize,
    /// Sorted by cell, one entry per distinct cell.
    pub entries: Vec<(CellKey, u64)>,
}

impl Footprint {
    pub fn total_bits(&self) -> u64 {
        self.entries.iter().map(|(_, b)| b).sum()
    }

    /// Load this footprint adds to every cell once the cascade into slower
    /// groups is applied. Sorted by cell.
    pub fn cascaded_cells(&self, ladder: &GroupLadder) -> Vec<(CellKey, u64)> {
        let mut cells: BTreeMap<CellKey, u64> = BTreeMap::new();
        for &(cell, bits) in &self.entries {
            for m in cell.group..=ladder.group_count() {
                let cycle = ladder.align_unchecked(cell.group, m, cell.cycle);
                *cells.entry(CellKey { link: cell.link, group: m, cycle }).or_default() += bits;
            }
        }
        cells.into_iter().collect()
    }
}

/// Footprint of a demand on the schedule's path and group, covering every
/// release of the demand within one hypercycle. With the default period (the
/// hypercycle itself) this is one entry of `ω` bits per hop.
pub fn demand_footprint(ladder: &GroupLadder, net: &Network, schedule: &PathSchedule, demand: &Demand) -> Result<Footprint> {
    let mut cells: BTreeMap<CellKey, u64> = BTreeMap::new();
    for r in 0..demand.releases(ladder) {
        let traced;
        let sched = if r == 0 {
            schedule
        } else {
            let arrival = demand.release_cycle(ladder, r);
            traced = trace_release(ladder, net, &demand.id, &schedule.path, schedule.group, arrival)?;
            &traced
        };
        for (&link, &cycle) in schedule.path.links.iter().zip(&sched.tx_cycles) {
            *cells.entry(CellKey { link, group: schedule.group, cycle }).or_default() += demand.payload_bits;
        }
    }
    Ok(Footprint { demand_id: demand.id.clone(), group: schedule.group, entries: cells.into_iter().collect() })
}

/// Bits a link can carry in one cycle of length `delta_ns`.
pub fn cell_budget_bits(bandwidth_bps: u64, delta_ns: u64) -> f64 {
    (bandwidth_bps as u128 * delta_ns as u128) as f64 / NS_PER_S as f64
}

/// Exact `load <= bandwidth * delta`.
pub fn within_budget(load_bits: u64, bandwidth_bps: u64, delta_ns: u64) -> bool {
    load_bits as u128 * NS_PER_S <= bandwidth_bps as u128 * delta_ns as u128
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub cell: CellKey,
    pub load_bits: u64,
    pub excess_bits: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CapacityLedger {
    lengths: Vec<u64>,
    hypercycle: u64,
    raw: HashMap<CellKey, u64>,
    cascaded: HashMap<CellKey, u64>,
    committed: BTreeMap<String, Footprint>,
}

impl CapacityLedger {
    pub fn new(ladder: &GroupLadder) -> Self {
        CapacityLedger {
            lengths: (0..=ladder.group_count()).map(|m| ladder.len_of(m)).collect(),
            hypercycle: ladder.hypercycle(),
            raw: HashMap::new(),
            cascaded: HashMap::new(),
            committed: BTreeMap::new(),
        }
    }

    fn group_count(&self) -> usize {
        self.lengths.len() - 1
    }

    pub fn raw(&self, cell: CellKey) -> u64 {
        self.raw.get(&cell).copied().unwrap_or(0)
    }

    pub fn cascaded(&self, cell: CellKey) -> u64 {
        self.cascaded.get(&cell).copied().unwrap_or(0)
    }

    /// Non-empty direct-load cells, sorted.
    pub fn raw_cells(&self) -> Vec<(CellKey, u64)> {
        let mut v: Vec<_> = self.raw.iter().map(|(k, v)| (*k, *v)).collect();
        v.sort_unstable();
        v
    }

    /// Non-empty cascaded cells, sorted.
    pub fn cascaded_cells(&self) -> Vec<(CellKey, u64)> {
        let mut v: Vec<_> = self.cascaded.iter().map(|(k, v)| (*k, *v)).collect();
        v.sort_unstable();
        v
    }

    pub fn is_committed(&self, demand_id: &str) -> bool {
        self.committed.contains_key(demand_id)
    }

    pub fn committed_count(&self) -> usize {
        self.committed.len()
    }

    fn align(&self, from: usize, to: usize, cycle: u64) -> u64 {
        let ratio = self.lengths[to] / self.lengths[from];
        cycle / ratio
    }

    fn apply(&mut self, fp: &Footprint, add: bool) {
        let m_max = self.group_count();
        for &(cell, bits) in &fp.entries {
            bump(&mut self.raw, cell, bits, add);
            for m in cell.group..=m_max {
                let cycle = self.align(cell.group, m, cell.cycle);
                bump(&mut self.cascaded, CellKey { link: cell.link, group: m, cycle }, bits, add);
            }
        }
    }

    pub fn commit(&mut self, footprint: &Footprint) -> Result<()> {
        if self.committed.contains_key(&footprint.demand_id) {
            return Err(Error::DoubleCommit(footprint.demand_id.clone()));
        }
        self.apply(footprint, true);
        self.committed.insert(footprint.demand_id.clone(), footprint.clone());
        Ok(())
    }

    pub fn rollback(&mut self, footprint: &Footprint) -> Result<()> {
        match self.committed.get(&footprint.demand_id) {
            Some(stored) if stored == footprint => {}
            _ => return Err(Error::UnknownFootprint(footprint.demand_id.clone())),
        }
        self.committed.remove(&footprint.demand_id);
        self.apply(footprint, false);
        Ok(())
    }

    fn budget_ok(&self, net: &Network, cell: CellKey, load: u64) -> bool {
        let bw = net.links()[cell.link].bandwidth_bps;
        within_budget(load, bw, self.lengths[cell.group])
    }

    /// Whether `cells` (already cascaded) can be added without any violation.
    pub fn fits(&self, net: &Network, cells: &[(CellKey, u64)]) -> bool {
        cells.iter().all(|&(cell, bits)| self.budget_ok(net, cell, self.cascaded(cell) + bits))
    }

    /// Every cell whose cascaded load exceeds `BW_e · Δ_m`, sorted by cell.
    pub fn check_capacity(&self, net: &Network) -> Vec<Violation> {
        self.cascaded_cells()
            .into_iter()
            .filter(|&(cell, load)| !self.budget_ok(net, cell, load))
            .map(|(cell, load)| {
                let budget = cell_budget_bits(net.links()[cell.link].bandwidth_bps, self.lengths[cell.group]);
                Violation { cell, load_bits: load, excess_bits: load as f64 - budget }
            })
            .collect()
    }

    /// Unused fraction of a cell's budget, clamped at zero.
    pub fn headroom(&self, net: &Network, link: LinkIdx, m: usize, c: u64) -> f64 {
        let budget = cell_budget_bits(net.links()[link].bandwidth_bps, self.lengths[m]);
        let load = self.cascaded(CellKey { link, group: m, cycle: c }) as f64;
        (1.0 - load / budget).max(0.0)
    }

    /// Max and mean cell fill per (link, group) with any load.
    pub fn utilization(&self, net: &Network) -> Vec<UtilizationRow> {
        let mut sums: BTreeMap<(LinkIdx, usize), (f64, f64)> = BTreeMap::new();
        for (cell, load) in self.cascaded_cells() {
            let budget = cell_budget_bits(net.links()[cell.link].bandwidth_bps, self.lengths[cell.group]);
            let fill = load as f64 / budget;
            let e = sums.entry((cell.link, cell.group)).or_insert((0.0, 0.0));
            e.0 = e.0.max(fill);
            e.1 += fill;
        }
        sums.into_iter()
            .map(|((link, group), (max, sum))| {
                let l = &net.links()[link];
                let cycles = self.hypercycle / self.lengths[group];
                UtilizationRow {
                    src: net.node(l.src).id.clone(),
                    dst: net.node(l.dst).id.clone(),
                    group,
                    max_fill: max,
                    mean_fill: sum / cycles as f64,
                }
            })
            .collect()
    }
}

fn bump(map: &mut HashMap<CellKey, u64>, cell: CellKey, bits: u64, add: bool) {
    if add {
        *map.entry(cell).or_default() += bits;
    } else {
        let v = map.get_mut(&cell).expect("rollback of a cell that was never loaded");
        *v -= bits;
        if *v == 0 {
            map.remove(&cell);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilizationRow {
    pub src: String,
    pub dst: String,
    pub group: usize,
    pub max_fill: f64,
    pub mean_fill: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network_model::{LinkDoc, NodeDoc, TopologyDoc};

    const US: u64 = 1_000;

    /// Δ1 = 10 us, Δ2 = 20 us, hypercycle 80 us.
    fn ladder() -> GroupLadder {
        GroupLadder::new(US, vec![10, 2], 4).unwrap()
    }

    fn net() -> Network {
        Network::from_doc(&TopologyDoc {
            nodes: ["A", "B", "C"].iter().map(|id| NodeDoc { id: id.to_string(), clock_offset_ns: None }).collect(),
            links: vec![
                LinkDoc { src: "A".into(), dst: "B".into(), delay_ns: 0, bandwidth_bps: 10_000_000_000 },
                LinkDoc { src: "B".into(), dst: "C".into(), delay_ns: 0, bandwidth_bps: 10_000_000_000 },
            ],
        })
        .unwrap()
    }

    fn fp(id: &str, link: LinkIdx, group: usize, cycle: u64, bits: u64) -> Footprint {
        Footprint { demand_id: id.into(), group, entries: vec![(CellKey { link, group, cycle }, bits)] }
    }

    fn demand(id: &str, bits: u64) -> Demand {
        Demand {
            id: id.into(),
            src: 0,
            dst: 2,
            period_ns: 80 * US,
            arrival_cycle: 0,
            payload_bits: bits,
            max_latency_ns: 1_000 * US,
            max_jitter_ns: None,
            value: 1.0,
        }
    }

    #[test]
    fn footprint_has_one_entry_per_hop() {
        let (l, n) = (ladder(), net());
        let path = n.enumerate_paths(0, 2, 2, 1).remove(0);
        let d = demand("d", 4_000);
        let s = crate::cycle_forwarding::trace_schedule(&l, &n, &d, &path, 1).unwrap();
        let f = demand_footprint(&l, &n, &s, &d).unwrap();
        assert_eq!(f.entries.len(), 2);
        assert!(f.entries.iter().all(|&(c, b)| b == 4_000 && c.group == 1));
        assert_eq!(f.entries[0].0.cycle, s.tx_cycles[0]);
        assert_eq!(f.entries[1].0.cycle, s.tx_cycles[1]);

        let one_hop = n.enumerate_paths(0, 1, 1, 1).remove(0);
        let s1 = crate::cycle_forwarding::trace_schedule(&l, &n, &d, &one_hop, 2).unwrap();
        let f1 = demand_footprint(&l, &n, &s1, &d).unwrap();
        assert_eq!(f1.entries, vec![(CellKey { link: 0, group: 2, cycle: s1.tx_cycles[0] }, 4_000)]);
    }

    #[test]
    fn shorter_periods_reserve_every_release() {
        let (l, n) = (ladder(), net());
        let path = n.enumerate_paths(0, 1, 1, 1).remove(0);
        let mut d = demand("d", 1_000);
        d.period_ns = 40 * US;
        let s = crate::cycle_forwarding::trace_schedule(&l, &n, &d, &path, 1).unwrap();
        let f = demand_footprint(&l, &n, &s, &d).unwrap();
        assert_eq!(f.entries.len(), 2);
        assert_eq!(f.entries[0].0.cycle + 4, f.entries[1].0.cycle);
    }

    #[test]
    fn different_groups_use_disjoint_raw_cells() {
        let mut led = CapacityLedger::new(&ladder());
        led.commit(&fp("a", 0, 1, 2, 4_000)).unwrap();
        led.commit(&fp("b", 0, 2, 1, 4_000)).unwrap();
        assert_eq!(led.raw_cells().len(), 2);
        assert_eq!(led.cascaded(CellKey { link: 0, group: 2, cycle: 1 }), 8_000);
    }

    #[test]
    fn commit_rollback_is_identity() {
        let l = ladder();
        let mut led = CapacityLedger::new(&l);
        led.commit(&fp("base", 1, 1, 0, 500)).unwrap();
        let before = led.clone();
        let f = fp("x", 0, 1, 2, 4_000);
        led.commit(&f).unwrap();
        assert_eq!(led.cascaded(CellKey { link: 0, group: 2, cycle: 1 }), 4_000);
        assert_eq!(led.commit(&f), Err(Error::DoubleCommit("x".into())));
        led.rollback(&f).unwrap();
        assert_eq!(led, before);
        assert_eq!(led.rollback(&f), Err(Error::UnknownFootprint("x".into())));
    }

    #[test]
    fn disjoint_links_are_independent() {
        let mut led = CapacityLedger::new(&ladder());
        led.commit(&fp("a", 0, 1, 3, 100)).unwrap();
        led.commit(&fp("b", 1, 1, 3, 200)).unwrap();
        assert_eq!(led.raw(CellKey { link: 0, group: 1, cycle: 3 }), 100);
        assert_eq!(led.raw(CellKey { link: 1, group: 1, cycle: 3 }), 200);
    }

    #[test]
    fn capacity_examples() {
        let (l, n) = (ladder(), net());
        let mut led = CapacityLedger::new(&l);
        led.commit(&fp("one", 0, 1, 0, 4_000)).unwrap();
        assert!(led.check_capacity(&n).is_empty());

        let mut led = CapacityLedger::new(&l);
        for i in 0..26 {
            led.commit(&fp(&format!("d{i}"), 0, 1, 4, 4_000)).unwrap();
        }
        let v = led.check_capacity(&n);
        // The group-1 cell overflows; its group-2 parent (budget 200,000) does not.
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].cell, CellKey { link: 0, group: 1, cycle: 4 });
        assert_eq!(v[0].excess_bits, 4_000.0);

        let mut led = CapacityLedger::new(&l);
        led.commit(&fp("fast", 0, 1, 2, 90_000)).unwrap();
        led.commit(&fp("slow", 0, 2, 1, 150_000)).unwrap();
        let v = led.check_capacity(&n);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].cell, CellKey { link: 0, group: 2, cycle: 1 });
        assert_eq!(v[0].excess_bits, 40_000.0);
    }

    #[test]
    fn headroom_examples() {
        let (l, n) = (ladder(), net());
        let mut led = CapacityLedger::new(&l);
        assert_eq!(led.headroom(&n, 0, 1, 0), 1.0);
        led.commit(&fp("a", 0, 1, 0, 4_000)).unwrap();
        assert!((led.headroom(&n, 0, 1, 0) - 0.96).abs() < 1e-12);
        led.commit(&fp("b", 0, 1, 1, 100_000)).unwrap();
        assert_eq!(led.headroom(&n, 0, 1, 1), 0.0);
        led.commit(&fp("c", 0, 1, 1, 1)).unwrap();
        assert_eq!(led.headroom(&n, 0, 1, 1), 0.0);
    }

    #[test]
    fn fits_respects_cascade() {
        let (l, n) = (ladder(), net());
        let mut led = CapacityLedger::new(&l);
        led.commit(&fp("slow", 0, 2, 0, 150_000)).unwrap();
        let fast = fp("fast", 0, 1, 1, 60_000);
        assert!(!led.fits(&n, &fast.cascaded_cells(&l)));
        let small = fp("small", 0, 1, 1, 50_000);
        assert!(led.fits(&n, &small.cascaded_cells(&l)));
    }

    #[test]
    fn utilization_rows() {
        let (l, n) = (ladder(), net());
        let mut led = CapacityLedger::new(&l);
        led.commit(&fp("a", 0, 1, 0, 50_000)).unwrap();
        let rows = led.utilization(&n);
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].group, 1);
        assert_eq!(rows[0].max_fill, 0.5);
        assert_eq!(rows[0].mean_fill, 0.5 / 8.0);
        assert_eq!(rows[1].max_fill, 0.25);
    }
}
