//! Topology and demand ingestion plus hop-bounded path enumeration.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::time_model::GroupLadder;

pub type NodeIdx = usize;
pub type LinkIdx = usize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub id: String,
    /// Phase of this node's cycle grid relative to the shared hypercycle start.
    pub clock_offset_ns: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Link {
    pub src: NodeIdx,
    pub dst: NodeIdx,
    pub delay_ns: u64,
    pub bandwidth_bps: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Network {
    nodes: Vec<Node>,
    links: Vec<Link>,
    by_id: HashMap<String, NodeIdx>,
    by_endpoints: HashMap<(NodeIdx, NodeIdx), LinkIdx>,
    /// Outgoing links per node, sorted by destination id.
    out: Vec<Vec<LinkIdx>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopologyDoc {
    pub nodes: Vec<NodeDoc>,
    pub links: Vec<LinkDoc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeDoc {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clock_offset_ns: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkDoc {
    pub src: String,
    pub dst: String,
    /// Signed so that negative values are rejected with a useful message
    /// instead of a parse failure.
    pub delay_ns: i64,
    pub bandwidth_bps: u64,
}

impl Network {
    pub fn from_doc(doc: &TopologyDoc) -> Result<Self> {
        let mut nodes = Vec::with_capacity(doc.nodes.len());
        let mut by_id = HashMap::new();
        for n in &doc.nodes {
            if by_id.insert(n.id.clone(), nodes.len()).is_some() {
                return Err(Error::InvalidTopology(format!("duplicate node id '{}'", n.id)));
            }
            nodes.push(Node { id: n.id.clone(), clock_offset_ns: n.clock_offset_ns.unwrap_or(0) });
        }
        let mut links = Vec::with_capacity(doc.links.len());
        let mut by_endpoints = HashMap::new();
        for l in &doc.links {
            let src = *by_id
                .get(&l.src)
                .ok_or_else(|| Error::InvalidTopology(format!("link endpoint '{}' is not a node", l.src)))?;
            let dst = *by_id
                .get(&l.dst)
                .ok_or_else(|| Error::InvalidTopology(format!("link endpoint '{}' is not a node", l.dst)))?;
            if src == dst {
                return Err(Error::InvalidTopology(format!("self loop on '{}'", l.src)));
            }
            if l.delay_ns < 0 {
                return Err(Error::InvalidTopology(format!(
                    "negative delay on link {} -> {}",
                    l.src, l.dst
                )));
            }
            if l.bandwidth_bps == 0 {
                return Err(Error::InvalidTopology(format!(
                    "zero bandwidth on link {} -> {}",
                    l.src, l.dst
                )));
            }
            if by_endpoints.insert((src, dst), links.len()).is_some() {
                return Err(Error::InvalidTopology(format!(
                    "duplicate link {} -> {}",
                    l.src, l.dst
                )));
            }
            links.push(Link { src, dst, delay_ns: l.delay_ns as u64, bandwidth_bps: l.bandwidth_bps });
        }
        let mut out = vec![Vec::new(); nodes.len()];
        for (i, l) in links.iter().enumerate() {
            out[l.src].push(i);
        }
        for adj in &mut out {
            adj.sort_by(|&a, &b| nodes[links[a].dst].id.cmp(&nodes[links[b].dst].id));
        }
        Ok(Network { nodes, links, by_id, by_endpoints, out })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: TopologyDoc =
            serde_json::from_str(text).map_err(|e| Error::InvalidTopology(e.to_string()))?;
        Self::from_doc(&doc)
    }

    pub fn to_doc(&self) -> TopologyDoc {
        TopologyDoc {
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeDoc { id: n.id.clone(), clock_offset_ns: Some(n.clock_offset_ns) })
                .collect(),
            links: self
                .links
                .iter()
                .map(|l| LinkDoc {
                    src: self.nodes[l.src].id.clone(),
                    dst: self.nodes[l.dst].id.clone(),
                    delay_ns: l.delay_ns as i64,
                    bandwidth_bps: l.bandwidth_bps,
                })
                .collect(),
        }
    }

    /// Every clock phase must lie inside the fastest group's cycle so that
    /// neighbour offsets stay within one cycle of every group.
    pub fn validate_offsets(&self, ladder: &GroupLadder) -> Result<()> {
        let fastest = ladder.len_of(1);
        for n in &self.nodes {
            if n.clock_offset_ns >= fastest {
                return Err(Error::InvalidTopology(format!(
                    "clock offset {} ns of '{}' is not below the fastest cycle {} ns",
                    n.clock_offset_ns, n.id, fastest
                )));
            }
        }
        Ok(())
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn node(&self, idx: NodeIdx) -> &Node {
        &self.nodes[idx]
    }

    pub fn link(&self, idx: LinkIdx) -> Result<&Link> {
        self.links.get(idx).ok_or(Error::UnknownLink(idx))
    }

    pub fn node_index(&self, id: &str) -> Result<NodeIdx> {
        self.by_id.get(id).copied().ok_or_else(|| Error::UnknownNode(id.to_string()))
    }

    pub fn link_between(&self, src: NodeIdx, dst: NodeIdx) -> Option<LinkIdx> {
        self.by_endpoints.get(&(src, dst)).copied()
    }

    pub fn out_links(&self, node: NodeIdx) -> &[LinkIdx] {
        &self.out[node]
    }

    /// Offset between the hypercycle starts of the link's endpoints,
    /// `θ_dst − θ_src`. Bounded by the fastest cycle once offsets validate.
    pub fn hypercycle_offset(&self, link: LinkIdx) -> Result<i64> {
        let l = self.link(link)?;
        Ok(self.nodes[l.dst].clock_offset_ns as i64 - self.nodes[l.src].clock_offset_ns as i64)
    }

    /// All simple paths from `s` to `t` with at most `hop_limit` hops, ordered
    /// by hop count, then total link delay, then the node-id sequence, and
    /// truncated to `limit`.
    pub fn enumerate_paths(&self, s: NodeIdx, t: NodeIdx, hop_limit: usize, limit: usize) -> Vec<Path> {
        let mut found = Vec::new();
        if s == t || s >= self.nodes.len() || t >= self.nodes.len() {
            return found;
        }
        let mut on_path = vec![false; self.nodes.len()];
        let mut stack_nodes = vec![s];
        let mut stack_links = Vec::new();
        on_path[s] = true;
        self.dfs(t, hop_limit, &mut on_path, &mut stack_nodes, &mut stack_links, &mut found);
        found.sort_by(|a, b| self.path_order(a, b));
        found.truncate(limit);
        found
    }

    fn dfs(
        &self,
        t: NodeIdx,
        hop_limit: usize,
        on_path: &mut [bool],
        nodes: &mut Vec<NodeIdx>,
        links: &mut Vec<LinkIdx>,
        found: &mut Vec<Path>,
    ) {
        if links.len() == hop_limit {
            return;
        }
        let here = *nodes.last().unwrap();
        for &li in &self.out[here] {
            let next = self.links[li].dst;
            if on_path[next] {
                continue;
            }
            nodes.push(next);
            links.push(li);
            if next == t {
                found.push(Path { nodes: nodes.clone(), links: links.clone() });
            } else {
                on_path[next] = true;
                self.dfs(t, hop_limit, on_path, nodes, links, found);
                on_path[next] = false;
            }
            nodes.pop();
            links.pop();
        }
    }

    pub fn path_delay(&self, path: &Path) -> u64 {
        path.links.iter().map(|&l| self.links[l].delay_ns).sum()
    }

    fn path_order(&self, a: &Path, b: &Path) -> Ordering {
        a.hops()
            .cmp(&b.hops())
            .then_with(|| self.path_delay(a).cmp(&self.path_delay(b)))
            .then_with(|| {
                let ids_a = a.nodes.iter().map(|&n| self.nodes[n].id.as_str());
                let ids_b = b.nodes.iter().map(|&n| self.nodes[n].id.as_str());
                ids_a.cmp(ids_b)
            })
    }

    pub fn path_ids(&self, path: &Path) -> Vec<String> {
        path.nodes.iter().map(|&n| self.nodes[n].id.clone()).collect()
    }

    /// Rebuilds a path from a node-id sequence, checking every hop exists.
    pub fn path_from_ids(&self, ids: &[String]) -> Result<Path> {
        if ids.len() < 2 {
            return Err(Error::InvalidTopology("a path needs at least two nodes".into()));
        }
        let nodes = ids.iter().map(|id| self.node_index(id)).collect::<Result<Vec<_>>>()?;
        let mut links = Vec::with_capacity(nodes.len() - 1);
        for w in nodes.windows(2) {
            let l = self.link_between(w[0], w[1]).ok_or_else(|| {
                Error::InvalidTopology(format!(
                    "no link {} -> {}",
                    self.nodes[w[0]].id, self.nodes[w[1]].id
                ))
            })?;
            links.push(l);
        }
        let mut seen = nodes.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != nodes.len() {
            return Err(Error::InvalidTopology("path revisits a node".into()));
        }
        Ok(Path { nodes, links })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Path {
    pub nodes: Vec<NodeIdx>,
    pub links: Vec<LinkIdx>,
}

impl Path {
    pub fn hops(&self) -> usize {
        self.links.len()
    }

    pub fn source(&self) -> NodeIdx {
        self.nodes[0]
    }

    pub fn sink(&self) -> NodeIdx {
        *self.nodes.last().unwrap()
    }
}

/// A periodic time-sensitive flow.
#[derive(Debug, Clone, PartialEq)]
pub struct Demand {
    pub id: String,
    pub src: NodeIdx,
    pub dst: NodeIdx,
    pub period_ns: u64,
    /// Release instant as an index on the unitary (`delta0`) grid.
    pub arrival_cycle: u64,
    pub payload_bits: u64,
    pub max_latency_ns: u64,
    /// `None` means the jitter is unconstrained.
    pub max_jitter_ns: Option<u64>,
    /// Value weight used by the branching priority.
    pub value: f64,
}

impl Demand {
    /// Releases per hypercycle.
    pub fn releases(&self, ladder: &GroupLadder) -> u64 {
        ladder.hypercycle() / self.period_ns
    }

    /// Unitary-cycle index of release `r` within the hypercycle.
    pub fn release_cycle(&self, ladder: &GroupLadder, r: u64) -> u64 {
        self.arrival_cycle + r * (self.period_ns / ladder.delta0())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandDoc {
    pub demands: Vec<DemandRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandRow {
    pub id: String,
    pub src: String,
    pub dst: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period_ns: Option<u64>,
    pub arrival_cycle: u64,
    pub payload_bytes: u64,
    pub max_latency_ns: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_jitter_ns: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
}

/// Distinct explicit periods in a demand document, used to size the hypercycle
/// before the demands themselves are validated.
pub fn declared_periods(doc: &DemandDoc) -> Vec<u64> {
    let mut periods: Vec<u64> = doc.demands.iter().filter_map(|d| d.period_ns).collect();
    periods.sort_unstable();
    periods.dedup();
    periods
}

/// Validates demand rows against a network and a ladder whose hypercycle has
/// already been built. Omitted periods default to the hypercycle.
pub fn load_demands(doc: &DemandDoc, net: &Network, ladder: &GroupLadder) -> Result<Vec<Demand>> {
    let mut seen = BTreeMap::new();
    let mut out = Vec::with_capacity(doc.demands.len());
    for row in &doc.demands {
        let bad = |reason: String| Error::InvalidDemand { id: row.id.clone(), reason };
        if seen.insert(row.id.clone(), ()).is_some() {
            return Err(bad("duplicate demand id".into()));
        }
        let src = net.node_index(&row.src)?;
        let dst = net.node_index(&row.dst)?;
        if src == dst {
            return Err(bad("source equals sink".into()));
        }
        if row.payload_bytes == 0 {
            return Err(bad("payload must be positive".into()));
        }
        if row.max_latency_ns == 0 {
            return Err(bad("latency bound must be positive".into()));
        }
        let period = row.period_ns.unwrap_or(ladder.hypercycle());
        if period == 0 || !ladder.hypercycle().is_multiple_of(period) {
            return Err(bad(format!(
                "period {} ns does not divide the hypercycle {} ns",
                period,
                ladder.hypercycle()
            )));
        }
        if period % ladder.delta0() != 0 {
            return Err(bad(format!(
                "period {} ns is not a multiple of delta0 {} ns",
                period,
                ladder.delta0()
            )));
        }
        if row.arrival_cycle >= period / ladder.delta0() {
            return Err(bad(format!(
                "arrival cycle {} lies outside the first period",
                row.arrival_cycle
            )));
        }
        let value = row.value.unwrap_or(1.0);
        if !value.is_finite() {
            return Err(bad("value weight must be finite".into()));
        }
        out.push(Demand {
            id: row.id.clone(),
            src,
            dst,
            period_ns: period,
            arrival_cycle: row.arrival_cycle,
            payload_bits: row.payload_bytes * 8,
            max_latency_ns: row.max_latency_ns,
            max_jitter_ns: row.max_jitter_ns,
            value,
        });
    }
    Ok(out)
}

pub fn demands_to_doc(demands: &[Demand], net: &Network) -> DemandDoc {
    DemandDoc {
        demands: demands
            .iter()
            .map(|d| DemandRow {
                id: d.id.clone(),
                src: net.node(d.src).id.clone(),
                dst: net.node(d.dst).id.clone(),
                period_ns: Some(d.period_ns),
                arrival_cycle: d.arrival_cycle,
                payload_bytes: d.payload_bits / 8,
                max_latency_ns: d.max_latency_ns,
                max_jitter_ns: d.max_jitter_ns,
                value: if d.value == 1.0 { None } else { Some(d.value) },
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn link(src: &str, dst: &str, delay_ns: i64) -> LinkDoc {
        LinkDoc { src: src.into(), dst: dst.into(), delay_ns, bandwidth_bps: 10_000_000_000 }
    }

    fn nodes(ids: &[&str]) -> Vec<NodeDoc> {
        ids.iter().map(|id| NodeDoc { id: id.to_string(), clock_offset_ns: None }).collect()
    }

    #[test]
    fn loads_two_node_topology() {
        let doc = TopologyDoc { nodes: nodes(&["A", "B"]), links: vec![link("A", "B", 60_000)] };
        let net = Network::from_doc(&doc).unwrap();
        assert_eq!(net.nodes().len(), 2);
        assert_eq!(net.links().len(), 1);
        assert_eq!(net.node(0).clock_offset_ns, 0);
        assert_eq!(Network::from_doc(&net.to_doc()).unwrap(), net);
    }

    #[test]
    fn rejects_bad_topologies() {
        let dangling = TopologyDoc { nodes: nodes(&["A"]), links: vec![link("A", "Z", 1)] };
        assert!(matches!(Network::from_doc(&dangling), Err(Error::InvalidTopology(_))));
        let dup = TopologyDoc { nodes: nodes(&["A", "A"]), links: vec![] };
        assert!(Network::from_doc(&dup).is_err());
        let negative = TopologyDoc { nodes: nodes(&["A", "B"]), links: vec![link("A", "B", -1)] };
        assert!(Network::from_doc(&negative).is_err());
        let twice =
            TopologyDoc { nodes: nodes(&["A", "B"]), links: vec![link("A", "B", 1), link("A", "B", 2)] };
        assert!(Network::from_doc(&twice).is_err());
    }

    #[test]
    fn line_graph_paths() {
        let doc = TopologyDoc {
            nodes: nodes(&["A", "B", "C"]),
            links: vec![link("A", "B", 1), link("B", "C", 1)],
        };
        let net = Network::from_doc(&doc).unwrap();
        let paths = net.enumerate_paths(0, 2, 2, 16);
        assert_eq!(paths.len(), 1);
        assert_eq!(net.path_ids(&paths[0]), vec!["A", "B", "C"]);
        assert!(net.enumerate_paths(0, 2, 1, 16).is_empty());
        assert!(net.enumerate_paths(2, 0, 5, 16).is_empty());
    }

    #[test]
    fn diamond_paths_are_ordered() {
        let doc = TopologyDoc {
            nodes: nodes(&["A", "C", "B", "D"]),
            links: vec![link("A", "C", 5), link("A", "B", 5), link("C", "D", 5), link("B", "D", 5)],
        };
        let net = Network::from_doc(&doc).unwrap();
        let paths = net.enumerate_paths(0, 3, 2, 16);
        let ids: Vec<_> = paths.iter().map(|p| net.path_ids(p).join("")).collect();
        assert_eq!(ids, vec!["ABD", "ACD"]);
        assert_eq!(net.enumerate_paths(0, 3, 2, 1).len(), 1);
    }

    #[test]
    fn hypercycle_offsets() {
        let doc = TopologyDoc {
            nodes: vec![
                NodeDoc { id: "i".into(), clock_offset_ns: Some(2_000) },
                NodeDoc { id: "j".into(), clock_offset_ns: Some(7_000) },
            ],
            links: vec![link("i", "j", 0), link("j", "i", 0)],
        };
        let net = Network::from_doc(&doc).unwrap();
        assert_eq!(net.hypercycle_offset(0).unwrap(), 5_000);
        assert_eq!(net.hypercycle_offset(1).unwrap(), -5_000);
        assert!(matches!(net.hypercycle_offset(2), Err(Error::UnknownLink(2))));
        let ladder = GroupLadder::new(1_000, vec![10], 4).unwrap();
        assert!(net.validate_offsets(&ladder).is_ok());
        let tight = GroupLadder::new(1_000, vec![5], 4).unwrap();
        assert!(net.validate_offsets(&tight).is_err());
    }

    fn table_one_row(id: &str, period_us: u64, bytes: u64, latency_us: u64, jitter_us: Option<u64>) -> DemandRow {
        DemandRow {
            id: id.into(),
            src: "A".into(),
            dst: "B".into(),
            period_ns: Some(period_us * 1_000),
            arrival_cycle: 0,
            payload_bytes: bytes,
            max_latency_ns: latency_us * 1_000,
            max_jitter_ns: jitter_us.map(|j| j * 1_000),
            value: None,
        }
    }

    #[test]
    fn table_one_rows_convert_to_bits() {
        let net = Network::from_doc(&TopologyDoc { nodes: nodes(&["A", "B"]), links: vec![link("A", "B", 1)] })
            .unwrap();
        let doc = DemandDoc {
            demands: vec![
                table_one_row("t1", 100, 750, 500, Some(100)),
                table_one_row("t3", 1_000, 6_200, 2_000, None),
            ],
        };
        let mut ladder = GroupLadder::new(1_000, vec![2, 8], 4).unwrap();
        ladder.build_hypercycle(&declared_periods(&doc)).unwrap();
        let demands = load_demands(&doc, &net, &ladder).unwrap();
        assert_eq!(demands[0].payload_bits, 6_000);
        assert_eq!(demands[0].period_ns, 100_000);
        assert_eq!(demands[0].max_latency_ns, 500_000);
        assert_eq!(demands[0].max_jitter_ns, Some(100_000));
        assert_eq!(demands[1].payload_bits, 49_600);
        assert_eq!(demands[1].max_jitter_ns, None);
        assert_eq!(demands_to_doc(&demands, &net), doc);
    }

    #[test]
    fn rejects_non_dividing_period() {
        let net = Network::from_doc(&TopologyDoc { nodes: nodes(&["A", "B"]), links: vec![] }).unwrap();
        let mut ladder = GroupLadder::new(1_000, vec![10, 2], 4).unwrap();
        ladder.build_hypercycle(&[]).unwrap();
        assert_eq!(ladder.hypercycle(), 80_000);
        let mut row = table_one_row("x", 3, 10, 10, None);
        let doc = DemandDoc { demands: vec![row.clone()] };
        assert!(matches!(load_demands(&doc, &net, &ladder), Err(Error::InvalidDemand { .. })));
        row.period_ns = None;
        row.payload_bytes = 0;
        assert!(load_demands(&DemandDoc { demands: vec![row] }, &net, &ladder).is_err());
    }
}
