//! Multi-rate cycle ladder and the alignment algebra between its groups.
//!
//! All durations are integer nanoseconds. Group `0` is the unitary grid of
//! length `delta0`; groups `1..=M` are the queue groups, each cycle length an
//! integer multiple of the previous one. The hypercycle is the common period
//! after which every group and every demand period realigns.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum number of queues per group for cyclic forwarding to absorb the
/// one-cycle arrival uncertainty plus the cycle being transmitted.
pub const MIN_QUEUES_PER_GROUP: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupLadder {
    delta0: u64,
    multipliers: Vec<u64>,
    queues_per_group: usize,
    /// `lengths[m]` is the cycle length of group `m`, `lengths[0] == delta0`.
    lengths: Vec<u64>,
    hypercycle_factor: u64,
    hypercycle: u64,
}

impl GroupLadder {
    /// Builds a ladder and its minimal hypercycle for an empty demand set.
    pub fn new(delta0: u64, multipliers: Vec<u64>, queues_per_group: usize) -> Result<Self> {
        if delta0 == 0 {
            return Err(Error::InvalidLadder("delta0 must be positive".into()));
        }
        if multipliers.is_empty() {
            return Err(Error::InvalidLadder("at least one group is required".into()));
        }
        if multipliers.contains(&0) {
            return Err(Error::InvalidLadder("multipliers must be positive integers".into()));
        }
        if queues_per_group < MIN_QUEUES_PER_GROUP {
            return Err(Error::InvalidLadder(format!(
                "queues_per_group must be >= {MIN_QUEUES_PER_GROUP}, got {queues_per_group}"
            )));
        }
        let mut lengths = Vec::with_capacity(multipliers.len() + 1);
        lengths.push(delta0);
        for &k in &multipliers {
            let prev = *lengths.last().unwrap();
            lengths.push(prev.checked_mul(k).ok_or(Error::Overflow("cycle length"))?);
        }
        let mut ladder = GroupLadder {
            delta0,
            multipliers,
            queues_per_group,
            lengths,
            hypercycle_factor: 1,
            hypercycle: 0,
        };
        ladder.build_hypercycle(&[])?;
        Ok(ladder)
    }

    pub fn delta0(&self) -> u64 {
        self.delta0
    }

    pub fn multipliers(&self) -> &[u64] {
        &self.multipliers
    }

    /// Number of queue groups `M` (group 0 is not counted).
    pub fn group_count(&self) -> usize {
        self.multipliers.len()
    }

    pub fn queues_per_group(&self) -> usize {
        self.queues_per_group
    }

    pub fn hypercycle(&self) -> u64 {
        self.hypercycle
    }

    pub fn hypercycle_factor(&self) -> u64 {
        self.hypercycle_factor
    }

    /// Iterator over the queue-group indices `1..=M`.
    pub fn groups(&self) -> std::ops::RangeInclusive<usize> {
        1..=self.group_count()
    }

    fn check_group(&self, m: usize) -> Result<()> {
        if m > self.group_count() {
            Err(Error::GroupOutOfRange { group: m, groups: self.group_count() })
        } else {
            Ok(())
        }
    }

    /// `delta0 * k_1 * ... * k_m`; `m == 0` yields `delta0`.
    pub fn cycle_length(&self, m: usize) -> Result<u64> {
        self.check_group(m)?;
        Ok(self.lengths[m])
    }

    /// Cycle length of a group already known to be valid.
    pub(crate) fn len_of(&self, m: usize) -> u64 {
        self.lengths[m]
    }

    /// Number of group-`m` cycles in one hypercycle.
    pub fn cycles_per_hypercycle(&self, m: usize) -> Result<u64> {
        self.check_group(m)?;
        Ok(self.hypercycle / self.lengths[m])
    }

    pub(crate) fn cycles_of(&self, m: usize) -> u64 {
        self.hypercycle / self.lengths[m]
    }

    /// Smallest factor `N_hc` such that `N_hc * base` holds at least
    /// `queues_per_group` cycles of the slowest group.
    fn minimal_factor(&self, base: u64) -> u64 {
        let slowest = *self.lengths.last().unwrap();
        let need = slowest as u128 * self.queues_per_group as u128;
        need.div_ceil(base as u128).max(1) as u64
    }

    /// Sets the hypercycle to `N_hc * lcm({Δ_M} ∪ periods)` with the minimal
    /// admissible `N_hc` and returns it.
    pub fn build_hypercycle(&mut self, demand_periods: &[u64]) -> Result<u64> {
        let base = self.period_lcm(demand_periods)?;
        let factor = self.minimal_factor(base);
        self.set_hypercycle(base, factor)
    }

    /// Like [`build_hypercycle`](Self::build_hypercycle) but with a caller
    /// chosen factor, which must not be below the minimal one.
    pub fn build_hypercycle_with_factor(&mut self, demand_periods: &[u64], factor: u64) -> Result<u64> {
        let base = self.period_lcm(demand_periods)?;
        let min = self.minimal_factor(base);
        if factor < min {
            return Err(Error::InvalidLadder(format!(
                "hypercycle factor {factor} below the minimum {min}"
            )));
        }
        self.set_hypercycle(base, factor)
    }

    fn period_lcm(&self, demand_periods: &[u64]) -> Result<u64> {
        let mut acc = *self.lengths.last().unwrap();
        for &p in demand_periods {
            if p == 0 {
                return Err(Error::InvalidLadder("demand periods must be positive".into()));
            }
            acc = lcm(acc, p).ok_or(Error::Overflow("hypercycle lcm"))?;
        }
        Ok(acc)
    }

    fn set_hypercycle(&mut self, base: u64, factor: u64) -> Result<u64> {
        self.hypercycle = base.checked_mul(factor).ok_or(Error::Overflow("hypercycle"))?;
        self.hypercycle_factor = factor;
        Ok(self.hypercycle)
    }

    /// Index of the group-`to` cycle overlapping cycle `a` of group `from`:
    /// `ceil((a+1) Δ_from / Δ_to) - 1`.
    pub fn align(&self, from: usize, to: usize, a: u64) -> Result<u64> {
        self.check_pair(from, to)?;
        self.check_cycle(from, a)?;
        Ok(self.align_unchecked(from, to, a))
    }

    /// Alignment without range checks; also valid for absolute (non-wrapped)
    /// cycle numbers.
    pub(crate) fn align_unchecked(&self, from: usize, to: usize, a: u64) -> u64 {
        let ratio = self.lengths[to] / self.lengths[from];
        (a + 1).div_ceil(ratio) - 1
    }

    /// All group-`from` cycles that overlap cycle `b` of group `to`. The
    /// result is contiguous, so it is returned as a range.
    pub fn align_inverse(&self, from: usize, to: usize, b: u64) -> Result<Range<u64>> {
        self.check_pair(from, to)?;
        self.check_cycle(to, b)?;
        let ratio = self.lengths[to] / self.lengths[from];
        Ok(b * ratio..(b + 1) * ratio)
    }

    fn check_pair(&self, from: usize, to: usize) -> Result<()> {
        self.check_group(from)?;
        self.check_group(to)?;
        if from >= to {
            return Err(Error::AlignmentOrder { from, to });
        }
        Ok(())
    }

    fn check_cycle(&self, m: usize, index: u64) -> Result<()> {
        let cycles = self.cycles_of(m);
        if index >= cycles {
            return Err(Error::CycleOutOfRange { group: m, index, cycles });
        }
        Ok(())
    }
}

pub(crate) fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

fn lcm(a: u64, b: u64) -> Option<u64> {
    (a / gcd(a, b)).checked_mul(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn us(v: u64) -> u64 {
        v * 1_000
    }

    fn ladder_10_2() -> GroupLadder {
        GroupLadder::new(us(1), vec![10, 2], 4).unwrap()
    }

    #[test]
    fn cycle_lengths_follow_the_product() {
        let l = ladder_10_2();
        assert_eq!(l.cycle_length(0).unwrap(), us(1));
        assert_eq!(l.cycle_length(1).unwrap(), us(10));
        assert_eq!(l.cycle_length(2).unwrap(), us(20));
        assert!(matches!(l.cycle_length(3), Err(Error::GroupOutOfRange { .. })));
    }

    #[test]
    fn minimal_hypercycle() {
        let mut l = ladder_10_2();
        assert_eq!(l.build_hypercycle(&[]).unwrap(), us(80));
        assert_eq!(l.hypercycle_factor(), 4);
        assert_eq!(l.build_hypercycle(&[us(80)]).unwrap(), us(80));
        assert_eq!(l.hypercycle_factor(), 1);

        let mut small = GroupLadder::new(us(1), vec![2], 4).unwrap();
        assert_eq!(small.build_hypercycle(&[]).unwrap(), us(8));
        assert_eq!(small.hypercycle_factor(), 4);
    }

    #[test]
    fn hypercycle_factor_override() {
        let mut l = ladder_10_2();
        assert_eq!(l.build_hypercycle_with_factor(&[], 6).unwrap(), us(120));
        assert!(l.build_hypercycle_with_factor(&[], 3).is_err());
    }

    #[test]
    fn hypercycle_overflow_is_reported() {
        let mut l = GroupLadder::new(1, vec![1], 3).unwrap();
        let err = l.build_hypercycle(&[u64::MAX - 1, u64::MAX - 2]).unwrap_err();
        assert_eq!(err, Error::Overflow("hypercycle lcm"));
    }

    #[test]
    fn rejects_bad_ladders() {
        assert!(GroupLadder::new(0, vec![2], 4).is_err());
        assert!(GroupLadder::new(1, vec![], 4).is_err());
        assert!(GroupLadder::new(1, vec![2, 0], 4).is_err());
        assert!(GroupLadder::new(1, vec![2], 2).is_err());
    }

    #[test]
    fn align_examples() {
        let l = ladder_10_2();
        assert_eq!(l.align(1, 2, 3).unwrap(), 1);
        assert_eq!(l.align(1, 2, 0).unwrap(), 0);
        assert_eq!(l.align(0, 2, 39).unwrap(), 1);
        assert!(matches!(l.align(2, 1, 0), Err(Error::AlignmentOrder { .. })));
        assert!(matches!(l.align(1, 2, 8), Err(Error::CycleOutOfRange { .. })));
    }

    #[test]
    fn align_inverse_examples() {
        let l = ladder_10_2();
        assert_eq!(l.align_inverse(1, 2, 1).unwrap(), 2..4);
        assert_eq!(l.align_inverse(1, 2, 0).unwrap(), 0..2);
        assert!(l.align_inverse(1, 2, 4).is_err());

        let mut flat = GroupLadder::new(us(1), vec![10, 1], 4).unwrap();
        flat.build_hypercycle_with_factor(&[], 8).unwrap();
        assert_eq!(flat.align_inverse(1, 2, 5).unwrap(), 5..6);
    }
}
