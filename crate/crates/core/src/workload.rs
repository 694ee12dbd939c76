//! Seeded demand and instance generators.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network_model::{load_demands, Demand, DemandDoc, DemandRow, LinkDoc, Network, NodeDoc, TopologyDoc};
use crate::time_model::GroupLadder;

/// One traffic class of a mix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficType {
    pub name: String,
    pub period_ns: u64,
    pub payload_bytes: u64,
    pub max_latency_ns: u64,
    pub max_jitter_ns: Option<u64>,
}

/// PLC automation, industrial supervision and remote VR profiles.
pub fn industrial_types() -> Vec<TrafficType> {
    vec![
        TrafficType {
            name: "T1".into(),
            period_ns: 100_000,
            payload_bytes: 750,
            max_latency_ns: 500_000,
            max_jitter_ns: Some(100_000),
        },
        TrafficType {
            name: "T2".into(),
            period_ns: 500_000,
            payload_bytes: 1_500,
            max_latency_ns: 900_000,
            max_jitter_ns: None,
        },
        TrafficType {
            name: "T3".into(),
            period_ns: 1_000_000,
            payload_bytes: 6_200,
            max_latency_ns: 2_000_000,
            max_jitter_ns: None,
        },
    ]
}

/// `per_type` demands of every type, sources drawn round-robin from
/// `sources`, arrival cycle uniform over the first period. Ids are
/// `<type>-<nnn>`.
pub fn mixed_demands(
    types: &[TrafficType],
    per_type: usize,
    sources: &[String],
    sink: &str,
    delta0_ns: u64,
    seed: u64,
) -> Result<DemandDoc> {
    if sources.is_empty() {
        return Err(Error::InvalidDemand { id: "-".into(), reason: "no source nodes given".into() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut demands = Vec::with_capacity(types.len() * per_type);
    for t in types {
        if delta0_ns == 0 || t.period_ns % delta0_ns != 0 {
            return Err(Error::InvalidDemand {
                id: t.name.clone(),
                reason: format!("period {} ns is not a multiple of {delta0_ns} ns", t.period_ns),
            });
        }
        let slots = t.period_ns / delta0_ns;
        for i in 0..per_type {
            demands.push(DemandRow {
                id: format!("{}-{:03}", t.name, i),
                src: sources[i % sources.len()].clone(),
                dst: sink.to_string(),
                period_ns: Some(t.period_ns),
                arrival_cycle: rng.gen_range(0..slots),
                payload_bytes: t.payload_bytes,
                max_latency_ns: t.max_latency_ns,
                max_jitter_ns: t.max_jitter_ns,
                value: None,
            });
        }
    }
    Ok(DemandDoc { demands })
}

/// A small self-contained planning instance.
#[derive(Debug, Clone)]
pub struct SmallInstance {
    pub ladder: GroupLadder,
    pub net: Network,
    pub demands: Vec<Demand>,
}

/// Random instance with 4 to 6 nodes, 2 to 5 demands and links slow enough
/// that demands compete for cells. Use with at most two paths per demand to
/// stay within 20 candidates.
pub fn small_instance(seed: u64) -> Result<SmallInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(4..=6usize);
    let names: Vec<String> = (0..n).map(|i| format!("n{i}")).collect();

    let mut pairs: Vec<(usize, usize)> = (1..n).map(|i| (rng.gen_range(0..i), i)).collect();
    for _ in 0..rng.gen_range(0..=n) {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        if a != b && !pairs.contains(&(a, b)) && !pairs.contains(&(b, a)) {
            pairs.push((a, b));
        }
    }
    let mut links = Vec::new();
    for &(a, b) in &pairs {
        let delay = rng.gen_range(0..3_000i64);
        for (s, d) in [(a, b), (b, a)] {
            links.push(LinkDoc {
                src: names[s].clone(),
                dst: names[d].clone(),
                delay_ns: delay,
                bandwidth_bps: 1_000_000_000,
            });
        }
    }
    let net = Network::from_doc(&TopologyDoc {
        nodes: names.iter().map(|id| NodeDoc { id: id.clone(), clock_offset_ns: Some(rng.gen_range(0..1_000)) }).collect(),
        links,
    })?;

    let multipliers = if rng.gen_bool(0.5) { vec![1, 2] } else { vec![1, 2, 2] };
    let mut ladder = GroupLadder::new(1_000, multipliers, 3)?;
    ladder.build_hypercycle(&[])?;
    net.validate_offsets(&ladder)?;

    let count = rng.gen_range(2..=5usize);
    let mut rows = Vec::with_capacity(count);
    let slots = ladder.hypercycle() / ladder.delta0();
    for i in 0..count {
        // Most demands share one sink so that they meet on its links.
        let mut ends: Vec<usize> = (0..n).collect();
        ends.shuffle(&mut rng);
        let dst = if rng.gen_bool(0.6) { 0 } else { ends[1] };
        let src = if ends[0] == dst { ends[1] } else { ends[0] };
        rows.push(DemandRow {
            id: format!("d{i}"),
            src: names[src].clone(),
            dst: names[dst].clone(),
            period_ns: None,
            arrival_cycle: rng.gen_range(0..slots),
            payload_bytes: rng.gen_range(100..=240),
            max_latency_ns: rng.gen_range(20_000..=80_000),
            max_jitter_ns: None,
            value: None,
        });
    }
    let demands = load_demands(&DemandDoc { demands: rows }, &net, &ladder)?;
    Ok(SmallInstance { ladder, net, demands })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mix_has_requested_shape() {
        let sources = vec!["A".to_string(), "B".to_string()];
        let doc = mixed_demands(&industrial_types(), 4, &sources, "Z", 1_000, 3).unwrap();
        assert_eq!(doc.demands.len(), 12);
        assert_eq!(doc.demands[0].id, "T1-000");
        assert_eq!(doc.demands[1].src, "B");
        assert!(doc.demands.iter().filter(|d| d.id.starts_with("T1")).all(|d| d.arrival_cycle < 100));
        assert_eq!(doc, mixed_demands(&industrial_types(), 4, &sources, "Z", 1_000, 3).unwrap());
    }

    #[test]
    fn small_instances_are_deterministic() {
        let a = small_instance(11).unwrap();
        let b = small_instance(11).unwrap();
        assert_eq!(a.demands, b.demands);
        assert_eq!(a.net.to_doc(), b.net.to_doc());
    }
}
