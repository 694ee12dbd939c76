//! With one-bit cells and zero link delay, every link of a layered graph is
//! used in the same cycle by every path, so admitting unit demands from the
//! source layer to the sink is exactly edge-disjoint path packing.

use std::collections::VecDeque;

use fdip_core::network_model::{load_demands, DemandDoc, DemandRow, LinkDoc, Network, NodeDoc, TopologyDoc};
use fdip_core::planner::{branch_and_bound, BnbConfig, Instance};
use fdip_core::time_model::GroupLadder;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Unit-capacity max flow by BFS augmentation.
fn max_flow(n: usize, edges: &[(usize, usize)], s: usize, t: usize) -> usize {
    let mut cap = vec![vec![0i32; n]; n];
    for &(a, b) in edges {
        cap[a][b] += 1;
    }
    let mut flow = 0;
    loop {
        let mut prev = vec![usize::MAX; n];
        prev[s] = s;
        let mut q = VecDeque::from([s]);
        while let Some(u) = q.pop_front() {
            for v in 0..n {
                if prev[v] == usize::MAX && cap[u][v] > 0 {
                    prev[v] = u;
                    q.push_back(v);
                }
            }
        }
        if prev[t] == usize::MAX {
            return flow;
        }
        let mut v = t;
        while v != s {
            let u = prev[v];
            cap[u][v] -= 1;
            cap[v][u] += 1;
            v = u;
        }
        flow += 1;
    }
}

#[test]
fn admission_equals_max_flow_on_layered_graphs() {
    let ladder = GroupLadder::new(1, vec![1], 3).unwrap();
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = rng.gen_range(1..=3usize);
        let width = rng.gen_range(2..=3usize);
        // Node 0 is the source, the last node the sink.
        let n = layers * width + 2;
        let sink = n - 1;
        let layer = |l: usize, i: usize| 1 + l * width + i;
        let mut edges = Vec::new();
        for i in 0..width {
            if rng.gen_bool(0.8) {
                edges.push((0, layer(0, i)));
            }
            if rng.gen_bool(0.8) {
                edges.push((layer(layers - 1, i), sink));
            }
        }
        for l in 0..layers - 1 {
            for i in 0..width {
                for j in 0..width {
                    if rng.gen_bool(0.5) {
                        edges.push((layer(l, i), layer(l + 1, j)));
                    }
                }
            }
        }

        let name = |v: usize| format!("v{v}");
        let net = Network::from_doc(&TopologyDoc {
            nodes: (0..n).map(|v| NodeDoc { id: name(v), clock_offset_ns: None }).collect(),
            links: edges
                .iter()
                .map(|&(a, b)| LinkDoc { src: name(a), dst: name(b), delay_ns: 0, bandwidth_bps: 1_000_000_000 })
                .collect(),
        })
        .unwrap();
        let rows = (0..width + 1)
            .map(|i| DemandRow {
                id: format!("d{i}"),
                src: name(0),
                dst: name(sink),
                period_ns: None,
                arrival_cycle: 0,
                payload_bytes: 1,
                max_latency_ns: 1_000,
                max_jitter_ns: None,
                value: None,
            })
            .collect();
        let mut demands = load_demands(&DemandDoc { demands: rows }, &net, &ladder).unwrap();
        for d in &mut demands {
            d.payload_bits = 1;
        }

        let inst = Instance::new(&ladder, &net, &demands, layers + 1, 1_000).unwrap();
        let out = branch_and_bound(&inst, &BnbConfig::default()).unwrap();
        assert!(out.stats.exhausted);
        assert_eq!(out.assignment.objective, max_flow(n, &edges, 0, sink), "seed {seed}");
    }
}
