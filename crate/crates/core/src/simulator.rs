//! Discrete-event packet simulator for cyclically gated output ports.
//!
//! Every directed link is an output port with `M` queue groups of `N_dn`
//! queues each plus one best-effort queue. Group `m` at node `v` opens its
//! queue for absolute cycle `K` during `[θ_v + KΔ_m, θ_v + (K+1)Δ_m)`; a
//! time-sensitive packet waits in the queue of the cycle it is scheduled to
//! leave in. The transmitter serves the highest-priority packet among the
//! open queues (group 1 first, best effort last) and preempts lower classes
//! instantly, resuming them later without loss of progress.
//!
//! Time is integer nanoseconds. Transmission work is tracked in
//! `bits · 10⁹` so that progress at `bandwidth_bps` is exact per nanosecond.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cycle_forwarding::{cycle_map_absolute, trace_schedule, PathSchedule};
use crate::error::{Error, Result};
use crate::network_model::{Demand, LinkIdx, Network, Path};
use crate::planner::Assignment;
use crate::time_model::GroupLadder;

const NS_PER_S: u128 = 1_000_000_000;
const WARMUP_HYPERCYCLES: u64 = 1;

/// One accepted demand as the simulator replays it.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSpec {
    pub demand: Demand,
    pub path: Path,
    pub group: usize,
    pub schedule: PathSchedule,
}

impl FlowSpec {
    pub fn new(ladder: &GroupLadder, net: &Network, demand: Demand, path: Path, group: usize) -> Result<Self> {
        let schedule = trace_schedule(ladder, net, &demand, &path, group)?;
        Ok(FlowSpec { demand, path, group, schedule })
    }
}

/// Resolves every accepted route of `assignment` against the demand set.
/// Flows come back sorted by demand id.
pub fn flows_from_assignment(
    ladder: &GroupLadder,
    net: &Network,
    demands: &[Demand],
    assignment: &Assignment,
) -> Result<Vec<FlowSpec>> {
    let mut flows = Vec::with_capacity(assignment.accepted.len());
    for (id, route) in &assignment.accepted {
        let demand = demands
            .iter()
            .find(|d| &d.id == id)
            .ok_or_else(|| Error::InvalidSimulation(format!("assignment names unknown demand '{id}'")))?;
        let path = net.path_from_ids(&route.path)?;
        if path.source() != demand.src || path.sink() != demand.dst {
            return Err(Error::InvalidSimulation(format!("path of '{id}' does not join its endpoints")));
        }
        flows.push(FlowSpec::new(ladder, net, demand.clone(), path, route.group)?);
    }
    Ok(flows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficConfig {
    /// Offered best-effort load on every link, as a fraction of its rate.
    pub be_utilization: f64,
    pub be_burst_bits: u64,
    pub be_packet_bits: u64,
    pub horizon_hypercycles: u64,
    pub seed: u64,
    /// Keep the per-event trace lines in the report.
    #[serde(default)]
    pub record_trace: bool,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        TrafficConfig {
            be_utilization: 0.0,
            be_burst_bits: 120_000,
            be_packet_bits: 12_000,
            horizon_hypercycles: 2,
            seed: 0,
            record_trace: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BePacket {
    pub link: LinkIdx,
    pub time_ns: u64,
    pub bits: u64,
}

/// Seeded on/off background stream on every link over `[0, horizon_ns)`.
///
/// Bursts of `be_burst_bits` arrive all at once. Burst `k` on a link starts
/// at `k·G + U(0, G − B)` where `G` is the mean burst spacing for the target
/// load and `B` the burst's own transmission time, so the offered load over
/// any window is within one burst of the target.
pub fn inject_background(net: &Network, cfg: &TrafficConfig, horizon_ns: u64) -> Result<Vec<BePacket>> {
    let u = cfg.be_utilization;
    if !(0.0..1.0).contains(&u) || u.is_nan() {
        return Err(Error::InvalidTraffic(format!("utilization must be in [0, 1), got {u}")));
    }
    if u == 0.0 {
        return Ok(Vec::new());
    }
    if cfg.be_burst_bits == 0 || cfg.be_packet_bits == 0 {
        return Err(Error::InvalidTraffic("burst and packet sizes must be positive".into()));
    }
    let mut out = Vec::new();
    for (idx, link) in net.links().iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(idx as u64);
        let busy = cfg.be_burst_bits as f64 * 1e9 / link.bandwidth_bps as f64;
        let gap = busy / u;
        for k in 0u64.. {
            let start = k as f64 * gap + rng.gen_range(0.0..=(gap - busy));
            let time_ns = start.floor() as u64;
            if time_ns >= horizon_ns {
                break;
            }
            let mut left = cfg.be_burst_bits;
            while left > 0 {
                let bits = left.min(cfg.be_packet_bits);
                out.push(BePacket { link: idx, time_ns, bits });
                left -= bits;
            }
        }
    }
    out.sort_by_key(|p| (p.time_ns, p.link));
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DropReason {
    /// Arrived after its transmit cycle had begun.
    Late,
    /// Target cycle further ahead than the queues can hold.
    QueueConflict,
    /// Not fully sent when its window closed.
    GateClosed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HopStamp {
    pub node: String,
    pub arrival_ns: u64,
    pub target_cycle: u64,
    pub departure_ns: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PacketTrace {
    pub flow: String,
    pub release: u64,
    pub created_ns: u64,
    pub hops: Vec<HopStamp>,
    pub delivered_ns: Option<u64>,
    pub dropped: Option<DropReason>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowStats {
    pub flow: String,
    pub group: usize,
    pub e2e_bound_ns: u64,
    pub jitter_bound_ns: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub min_delay_ns: Option<u64>,
    pub max_delay_ns: Option<u64>,
    pub mean_delay_ns: Option<f64>,
    pub jitter_ns: Option<u64>,
    pub bound_violations: u64,
    /// Measured delays in release order.
    #[serde(skip)]
    pub delays: Vec<u64>,
    #[serde(skip)]
    pub worst_packet: Option<PacketTrace>,
    #[serde(skip)]
    pub first_drop: Option<PacketTrace>,
}

impl FlowStats {
    fn new(flow: &FlowSpec) -> Self {
        FlowStats {
            flow: flow.demand.id.clone(),
            group: flow.group,
            e2e_bound_ns: flow.schedule.e2e_bound,
            jitter_bound_ns: flow.schedule.jitter_bound,
            delivered: 0,
            dropped: 0,
            min_delay_ns: None,
            max_delay_ns: None,
            mean_delay_ns: None,
            jitter_ns: None,
            bound_violations: 0,
            delays: Vec::new(),
            worst_packet: None,
            first_drop: None,
        }
    }

    fn finish(&mut self) {
        if self.delays.is_empty() {
            return;
        }
        let min = *self.delays.iter().min().unwrap();
        let max = *self.delays.iter().max().unwrap();
        self.min_delay_ns = Some(min);
        self.max_delay_ns = Some(max);
        self.jitter_ns = Some(max - min);
        self.mean_delay_ns = Some(self.delays.iter().map(|&d| d as f64).sum::<f64>() / self.delays.len() as f64);
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BeStats {
    pub offered_bits: u64,
    pub sent_packets: u64,
    pub max_delay_ns: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    /// Keyed by flow id.
    pub flows: BTreeMap<String, FlowStats>,
    pub be: BeStats,
    /// Drops of time-sensitive packets released during warm-up.
    pub warmup_drops: u64,
    /// Time-sensitive transmissions that ended outside their window.
    pub gate_violations: u64,
    pub events: u64,
    pub end_ns: u64,
    pub trace_hash: String,
    #[serde(skip)]
    pub trace: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum EventKind {
    GateClose { port: usize, group: usize, cycle: u64 },
    GateOpen { port: usize, group: usize, cycle: u64 },
    Arrival { packet: usize },
    Completion { port: usize, token: u64 },
}

impl EventKind {
    fn class(&self) -> u8 {
        match self {
            EventKind::GateClose { .. } => 0,
            EventKind::GateOpen { .. } => 1,
            EventKind::Arrival { .. } => 2,
            EventKind::Completion { .. } => 3,
        }
    }
}

/// Heap key: time, event class, flow order (best effort last), insertion.
type EventKey = Reverse<(u64, u8, usize, u64, EventKind)>;

#[derive(Debug)]
enum Kind {
    Ts { flow: usize, release: u64, targets: Vec<u64> },
    Be { link: LinkIdx },
}

#[derive(Debug)]
struct Packet {
    kind: Kind,
    bits: u64,
    created: u64,
    /// Index of the link the packet is waiting for, equal to the hop count
    /// once it has reached the sink.
    hop: usize,
    remaining: u128,
    stamps: Vec<HopStamp>,
}

struct Serving {
    packet: usize,
    since: u64,
}

struct Port {
    node_offset: u64,
    bandwidth: u128,
    delay: u64,
    /// Per group: queues keyed by absolute cycle.
    ts: Vec<BTreeMap<u64, VecDeque<usize>>>,
    open: Vec<Option<u64>>,
    windows: HashSet<(usize, u64)>,
    be: VecDeque<usize>,
    serving: Option<Serving>,
    token: u64,
}

struct Sim<'a> {
    ladder: &'a GroupLadder,
    net: &'a Network,
    flows: &'a [FlowSpec],
    ports: Vec<Port>,
    packets: Vec<Packet>,
    events: BinaryHeap<EventKey>,
    seq: u64,
    stats: Vec<FlowStats>,
    be: BeStats,
    warmup_drops: u64,
    gate_violations: u64,
    warmup_end: u64,
    hasher: Sha256,
    trace: Option<Vec<String>>,
    processed: u64,
    now: u64,
}

impl Sim<'_> {
    fn push(&mut self, time: u64, order: usize, kind: EventKind) {
        self.seq += 1;
        self.events.push(Reverse((time, kind.class(), order, self.seq, kind)));
    }

    fn flow_order(&self, packet: usize) -> usize {
        match self.packets[packet].kind {
            Kind::Ts { flow, .. } => flow,
            Kind::Be { .. } => usize::MAX,
        }
    }

    fn log(&mut self, node: usize, event: &str, packet: Option<usize>) {
        let (flow, bits) = match packet {
            Some(p) => {
                let name = match &self.packets[p].kind {
                    Kind::Ts { flow, release, .. } => format!("{}#{}", self.flows[*flow].demand.id, release),
                    Kind::Be { link } => format!("be@{link}"),
                };
                (name, self.packets[p].bits)
            }
            None => ("-".to_string(), 0),
        };
        let line = format!("{},{},{},{},{}", self.now, self.net.node(node).id, event, flow, bits);
        self.hasher.update(line.as_bytes());
        self.hasher.update(b"\n");
        if let Some(t) = self.trace.as_mut() {
            t.push(line);
        }
    }

    fn cycle_start(&self, port: usize, group: usize, cycle: u64) -> u64 {
        self.ports[port].node_offset + cycle * self.ladder.len_of(group)
    }

    /// Credits transmission progress up to `t` and completes the packet in
    /// service if its last bit has left.
    fn advance(&mut self, port: usize, t: u64) {
        let bw = self.ports[port].bandwidth;
        let Some(serving) = self.ports[port].serving.as_mut() else { return };
        let p = serving.packet;
        let elapsed = (t - serving.since) as u128;
        let before = self.packets[p].remaining;
        let finish = serving.since + before.div_ceil(bw) as u64;
        serving.since = t;
        self.packets[p].remaining = before.saturating_sub(elapsed * bw);
        if self.packets[p].remaining == 0 {
            self.ports[port].serving = None;
            self.complete(port, p, finish);
        }
    }

    fn complete(&mut self, port: usize, p: usize, finish: u64) {
        let src = self.net.links()[port].src;
        let delay = self.ports[port].delay;
        match self.packets[p].kind {
            Kind::Ts { flow, ref targets, .. } => {
                let group = self.flows[flow].group;
                let target = targets[self.packets[p].hop];
                let queue = self.ports[port].ts[group].get_mut(&target).expect("served packet is queued");
                debug_assert_eq!(queue.front(), Some(&p));
                queue.pop_front();
                let start = self.cycle_start(port, group, target);
                let end = start + self.ladder.len_of(group);
                if finish > end || finish < start {
                    self.gate_violations += 1;
                }
                if let Some(s) = self.packets[p].stamps.last_mut() {
                    s.departure_ns = Some(finish);
                }
                self.packets[p].hop += 1;
                self.log(src, "tx_done", Some(p));
                self.push(finish + delay, flow, EventKind::Arrival { packet: p });
            }
            Kind::Be { .. } => {
                self.ports[port].be.pop_front();
                self.be.sent_packets += 1;
                self.be.max_delay_ns = self.be.max_delay_ns.max(finish - self.packets[p].created);
                self.log(src, "be_tx_done", Some(p));
            }
        }
    }

    /// Puts the highest-priority eligible packet into service.
    fn select(&mut self, port: usize, t: u64) {
        let pst = &self.ports[port];
        let mut choice = None;
        for m in self.ladder.groups() {
            if let Some(k) = pst.open[m] {
                if let Some(&p) = pst.ts[m].get(&k).and_then(|q| q.front()) {
                    choice = Some(p);
                    break;
                }
            }
        }
        if choice.is_none() {
            choice = pst.be.front().copied();
        }
        if pst.serving.as_ref().map(|s| s.packet) == choice {
            return;
        }
        let bandwidth = pst.bandwidth;
        let pst = &mut self.ports[port];
        pst.token += 1;
        pst.serving = choice.map(|packet| Serving { packet, since: t });
        let token = pst.token;
        if let Some(p) = choice {
            let finish = t + self.packets[p].remaining.div_ceil(bandwidth) as u64;
            let order = self.flow_order(p);
            self.push(finish, order, EventKind::Completion { port, token });
        }
    }

    fn drop_packet(&mut self, p: usize, reason: DropReason, node: usize) {
        let Kind::Ts { flow, .. } = self.packets[p].kind else { return };
        let label = match reason {
            DropReason::Late => "drop_late",
            DropReason::QueueConflict => "drop_conflict",
            DropReason::GateClosed => "drop_gate",
        };
        self.log(node, label, Some(p));
        if self.packets[p].created < self.warmup_end {
            self.warmup_drops += 1;
            return;
        }
        let trace = self.packet_trace(p, None, Some(reason));
        let st = &mut self.stats[flow];
        st.dropped += 1;
        if st.first_drop.is_none() {
            st.first_drop = Some(trace);
        }
    }

    fn packet_trace(&self, p: usize, delivered: Option<u64>, dropped: Option<DropReason>) -> PacketTrace {
        let pk = &self.packets[p];
        let Kind::Ts { flow, release, .. } = pk.kind else { unreachable!("only time-sensitive packets are traced") };
        PacketTrace {
            flow: self.flows[flow].demand.id.clone(),
            release,
            created_ns: pk.created,
            hops: pk.stamps.clone(),
            delivered_ns: delivered,
            dropped,
        }
    }

    fn on_arrival(&mut self, p: usize, t: u64) {
        let (flow, hop) = match self.packets[p].kind {
            Kind::Ts { flow, .. } => (flow, self.packets[p].hop),
            Kind::Be { link } => {
                self.advance(link, t);
                self.ports[link].be.push_back(p);
                let src = self.net.links()[link].src;
                self.log(src, "be_enqueue", Some(p));
                self.select(link, t);
                return;
            }
        };
        let flows = self.flows;
        let spec = &flows[flow];
        if hop == spec.path.hops() {
            self.deliver(p, flow, t);
            return;
        }
        let port = spec.path.links[hop];
        let group = spec.group;
        let node = spec.path.nodes[hop];
        let Kind::Ts { ref targets, .. } = self.packets[p].kind else { unreachable!() };
        let target = targets[hop];
        self.packets[p].stamps.push(HopStamp {
            node: self.net.node(node).id.clone(),
            arrival_ns: t,
            target_cycle: target,
            departure_ns: None,
        });

        let delta = self.ladder.len_of(group);
        let offset = self.ports[port].node_offset;
        // Arrivals never precede the node's epoch on a valid schedule.
        let current = t.saturating_sub(offset) / delta;
        let reason = if t < offset || target <= current {
            Some(DropReason::Late)
        } else if target - current > self.ladder.queues_per_group() as u64 - 1 {
            Some(DropReason::QueueConflict)
        } else {
            None
        };
        if let Some(r) = reason {
            self.drop_packet(p, r, node);
            return;
        }

        self.advance(port, t);
        self.ports[port].ts[group].entry(target).or_default().push_back(p);
        if self.ports[port].windows.insert((group, target)) {
            let start = self.cycle_start(port, group, target);
            self.push(start, 0, EventKind::GateOpen { port, group, cycle: target });
            self.push(start + delta, 0, EventKind::GateClose { port, group, cycle: target });
        }
        self.log(node, "enqueue", Some(p));
        self.select(port, t);
    }

    fn deliver(&mut self, p: usize, flow: usize, t: u64) {
        let sink = self.flows[flow].path.sink();
        self.log(sink, "deliver", Some(p));
        let created = self.packets[p].created;
        if created < self.warmup_end {
            return;
        }
        let delay = t - created;
        let trace_needed = self.stats[flow].max_delay_ns.is_none_or(|m| delay > m);
        let trace = trace_needed.then(|| self.packet_trace(p, Some(t), None));
        let st = &mut self.stats[flow];
        st.delivered += 1;
        if delay > st.e2e_bound_ns {
            st.bound_violations += 1;
        }
        if let Some(tr) = trace {
            st.worst_packet = Some(tr);
        }
        st.delays.push(delay);
        st.max_delay_ns = st.max_delay_ns.max(Some(delay));
    }

    fn on_gate_close(&mut self, port: usize, group: usize, cycle: u64, t: u64) {
        self.advance(port, t);
        if self.ports[port].open[group] == Some(cycle) {
            self.ports[port].open[group] = None;
        }
        self.ports[port].windows.remove(&(group, cycle));
        let left = self.ports[port].ts[group].remove(&cycle).unwrap_or_default();
        if let Some(s) = &self.ports[port].serving {
            if left.contains(&s.packet) {
                self.ports[port].serving = None;
                self.ports[port].token += 1;
            }
        }
        let node = self.net.links()[port].src;
        for p in left {
            self.drop_packet(p, DropReason::GateClosed, node);
        }
        self.select(port, t);
    }

    fn on_gate_open(&mut self, port: usize, group: usize, cycle: u64, t: u64) {
        self.advance(port, t);
        self.ports[port].open[group] = Some(cycle);
        self.select(port, t);
    }

    fn on_completion(&mut self, port: usize, token: u64, t: u64) {
        if self.ports[port].token != token {
            return;
        }
        self.advance(port, t);
        self.select(port, t);
    }

    fn run(&mut self) {
        while let Some(Reverse((t, _, _, _, kind))) = self.events.pop() {
            self.now = t;
            self.processed += 1;
            match kind {
                EventKind::GateClose { port, group, cycle } => self.on_gate_close(port, group, cycle, t),
                EventKind::GateOpen { port, group, cycle } => self.on_gate_open(port, group, cycle, t),
                EventKind::Arrival { packet } => self.on_arrival(packet, t),
                EventKind::Completion { port, token } => self.on_completion(port, token, t),
            }
        }
    }
}

/// Absolute transmit cycle at every hop for a packet created at `created`.
fn absolute_targets(ladder: &GroupLadder, net: &Network, flow: &FlowSpec, created: u64) -> Result<Vec<u64>> {
    let delta = ladder.len_of(flow.group);
    let theta = net.node(flow.path.source()).clock_offset_ns;
    let mut targets = Vec::with_capacity(flow.path.hops());
    targets.push((created - theta) / delta + 1);
    for (i, &link) in flow.path.links.iter().enumerate().take(flow.path.hops() - 1) {
        targets.push(cycle_map_absolute(ladder, net, link, flow.group, targets[i])? + 1);
    }
    Ok(targets)
}

/// Replays `flows` for `cfg.horizon_hypercycles` hypercycles with seeded
/// best-effort background and returns per-flow statistics. The first
/// hypercycle is warm-up. Releases stop at the horizon and the network is
/// then drained.
///
/// Capacity is not checked here, so over-committed plans can be replayed to
/// observe their failures.
pub fn run(ladder: &GroupLadder, net: &Network, flows: &[FlowSpec], cfg: &TrafficConfig) -> Result<SimReport> {
    if cfg.horizon_hypercycles < 2 {
        return Err(Error::InvalidSimulation(format!(
            "horizon must cover at least 2 hypercycles, got {}",
            cfg.horizon_hypercycles
        )));
    }
    for w in flows.windows(2) {
        if w[0].demand.id >= w[1].demand.id {
            return Err(Error::InvalidSimulation("flows must be sorted by unique demand id".into()));
        }
    }
    let hc = ladder.hypercycle();
    let horizon = hc.checked_mul(cfg.horizon_hypercycles).ok_or(Error::Overflow("simulation horizon"))?;
    let background = inject_background(net, cfg, horizon)?;

    let ports = net
        .links()
        .iter()
        .map(|l| Port {
            node_offset: net.node(l.src).clock_offset_ns,
            bandwidth: l.bandwidth_bps as u128,
            delay: l.delay_ns,
            ts: vec![BTreeMap::new(); ladder.group_count() + 1],
            open: vec![None; ladder.group_count() + 1],
            windows: HashSet::new(),
            be: VecDeque::new(),
            serving: None,
            token: 0,
        })
        .collect();
    let mut sim = Sim {
        ladder,
        net,
        flows,
        ports,
        packets: Vec::new(),
        events: BinaryHeap::new(),
        seq: 0,
        stats: flows.iter().map(FlowStats::new).collect(),
        be: BeStats::default(),
        warmup_drops: 0,
        gate_violations: 0,
        warmup_end: WARMUP_HYPERCYCLES * hc,
        hasher: Sha256::new(),
        trace: cfg.record_trace.then(Vec::new),
        processed: 0,
        now: 0,
    };

    for (fi, flow) in flows.iter().enumerate() {
        let d = &flow.demand;
        if flow.path.hops() == 0 || flow.group == 0 || flow.group > ladder.group_count() {
            return Err(Error::InvalidSimulation(format!("flow '{}' has no valid path or group", d.id)));
        }
        let theta = net.node(flow.path.source()).clock_offset_ns;
        let total = horizon / d.period_ns;
        for release in 0..total {
            let created = theta + d.arrival_cycle * ladder.delta0() + release * d.period_ns;
            let targets = absolute_targets(ladder, net, flow, created)?;
            sim.packets.push(Packet {
                kind: Kind::Ts { flow: fi, release, targets },
                bits: d.payload_bits,
                created,
                hop: 0,
                remaining: d.payload_bits as u128 * NS_PER_S,
                stamps: Vec::new(),
            });
            let p = sim.packets.len() - 1;
            sim.push(created, fi, EventKind::Arrival { packet: p });
        }
    }
    for be in &background {
        sim.be.offered_bits += be.bits;
        sim.packets.push(Packet {
            kind: Kind::Be { link: be.link },
            bits: be.bits,
            created: be.time_ns,
            hop: 0,
            remaining: be.bits as u128 * NS_PER_S,
            stamps: Vec::new(),
        });
        let p = sim.packets.len() - 1;
        sim.push(be.time_ns, usize::MAX, EventKind::Arrival { packet: p });
    }

    sim.run();
    let mut stats = std::mem::take(&mut sim.stats);
    for s in &mut stats {
        s.finish();
    }
    let digest = sim.hasher.finalize();
    Ok(SimReport {
        flows: stats.into_iter().map(|s| (s.flow.clone(), s)).collect(),
        be: sim.be,
        warmup_drops: sim.warmup_drops,
        gate_violations: sim.gate_violations,
        events: sim.processed,
        end_ns: sim.now,
        trace_hash: digest.iter().map(|b| format!("{b:02x}")).collect(),
        trace: sim.trace.unwrap_or_default(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowVerdict {
    pub flow: String,
    pub passed: bool,
    pub delivered: u64,
    pub dropped: u64,
    pub max_delay_ns: Option<u64>,
    pub e2e_bound_ns: u64,
    pub jitter_ns: Option<u64>,
    pub jitter_bound_ns: u64,
    pub failures: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub offending_packet: Option<PacketTrace>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub passed: bool,
    pub gate_violations: u64,
    pub flows: Vec<FlowVerdict>,
}

/// Checks every flow's measured delay, jitter and loss against its analytic
/// bounds.
pub fn verify_against_bounds(report: &SimReport, flows: &[FlowSpec]) -> VerificationReport {
    let mut verdicts = Vec::with_capacity(flows.len());
    for flow in flows {
        let id = &flow.demand.id;
        let bound = flow.schedule.e2e_bound;
        let jitter_bound = flow.schedule.jitter_bound;
        let mut failures = Vec::new();
        let mut offending = None;
        let Some(st) = report.flows.get(id) else {
            verdicts.push(FlowVerdict {
                flow: id.clone(),
                passed: false,
                delivered: 0,
                dropped: 0,
                max_delay_ns: None,
                e2e_bound_ns: bound,
                jitter_ns: None,
                jitter_bound_ns: jitter_bound,
                failures: vec!["flow missing from simulation".into()],
                offending_packet: None,
            });
            continue;
        };
        if st.dropped > 0 {
            failures.push(format!("{} packet(s) dropped", st.dropped));
            offending = st.first_drop.clone();
        }
        if let Some(max) = st.max_delay_ns.filter(|&m| m > bound) {
            failures.push(format!("max delay {max} ns exceeds bound {bound} ns"));
            offending = offending.or_else(|| st.worst_packet.clone());
        }
        if let Some(j) = st.jitter_ns.filter(|&j| j > jitter_bound) {
            failures.push(format!("jitter {j} ns exceeds bound {jitter_bound} ns"));
            offending = offending.or_else(|| st.worst_packet.clone());
        }
        verdicts.push(FlowVerdict {
            flow: id.clone(),
            passed: failures.is_empty(),
            delivered: st.delivered,
            dropped: st.dropped,
            max_delay_ns: st.max_delay_ns,
            e2e_bound_ns: bound,
            jitter_ns: st.jitter_ns,
            jitter_bound_ns: jitter_bound,
            failures,
            offending_packet: offending,
        });
    }
    VerificationReport {
        passed: report.gate_violations == 0 && verdicts.iter().all(|v| v.passed),
        gate_violations: report.gate_violations,
        flows: verdicts,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network_model::{LinkDoc, NodeDoc, TopologyDoc};

    const US: u64 = 1_000;

    fn line(delay: i64, bw: u64) -> Network {
        Network::from_doc(&TopologyDoc {
            nodes: ["A", "B", "C"].iter().map(|id| NodeDoc { id: id.to_string(), clock_offset_ns: None }).collect(),
            links: vec![
                LinkDoc { src: "A".into(), dst: "B".into(), delay_ns: delay, bandwidth_bps: bw },
                LinkDoc { src: "B".into(), dst: "C".into(), delay_ns: delay, bandwidth_bps: bw },
            ],
        })
        .unwrap()
    }

    fn flow(ladder: &GroupLadder, net: &Network, id: &str, bits: u64, arrival: u64) -> FlowSpec {
        let demand = Demand {
            id: id.into(),
            src: 0,
            dst: 2,
            period_ns: ladder.hypercycle(),
            arrival_cycle: arrival,
            payload_bits: bits,
            max_latency_ns: 1_000 * US,
            max_jitter_ns: None,
            value: 1.0,
        };
        let path = net.path_from_ids(&["A".into(), "B".into(), "C".into()]).unwrap();
        FlowSpec::new(ladder, net, demand, path, 1).unwrap()
    }

    #[test]
    fn two_hop_flow_meets_its_bounds() {
        let ladder = GroupLadder::new(10 * US, vec![1], 3).unwrap();
        let net = line(0, 10_000_000_000);
        let flows = vec![flow(&ladder, &net, "f", 1_000, 0)];
        assert_eq!(flows[0].schedule.e2e_bound, 50 * US);
        let cfg = TrafficConfig { horizon_hypercycles: 4, ..TrafficConfig::default() };
        let report = run(&ladder, &net, &flows, &cfg).unwrap();
        let st = &report.flows["f"];
        assert_eq!(st.delivered, 3);
        assert_eq!(st.dropped, 0);
        assert!(st.max_delay_ns.unwrap() <= 50 * US);
        assert!(st.jitter_ns.unwrap() <= 20 * US);
        assert!(verify_against_bounds(&report, &flows).passed);
    }

    #[test]
    fn background_does_not_move_time_sensitive_packets() {
        let ladder = GroupLadder::new(10 * US, vec![1], 3).unwrap();
        let net = line(0, 10_000_000_000);
        let flows = vec![flow(&ladder, &net, "f", 1_000, 0)];
        let quiet = TrafficConfig { horizon_hypercycles: 4, ..TrafficConfig::default() };
        let busy = TrafficConfig { be_utilization: 0.9, seed: 7, ..quiet.clone() };
        let a = run(&ladder, &net, &flows, &quiet).unwrap();
        let b = run(&ladder, &net, &flows, &busy).unwrap();
        assert!(b.be.offered_bits > 0);
        assert_eq!(a.flows["f"].delays, b.flows["f"].delays);
        assert_eq!(a.flows, b.flows);
    }

    #[test]
    fn short_horizon_is_rejected() {
        let ladder = GroupLadder::new(10 * US, vec![1], 3).unwrap();
        let net = line(0, 10_000_000_000);
        let cfg = TrafficConfig { horizon_hypercycles: 1, ..TrafficConfig::default() };
        assert!(run(&ladder, &net, &[], &cfg).is_err());
    }

    #[test]
    fn empty_plan_verifies_trivially() {
        let ladder = GroupLadder::new(10 * US, vec![1], 3).unwrap();
        let net = line(0, 10_000_000_000);
        let report = run(&ladder, &net, &[], &TrafficConfig::default()).unwrap();
        let v = verify_against_bounds(&report, &[]);
        assert!(v.passed && v.flows.is_empty());
    }

    #[test]
    fn utilization_of_one_is_rejected() {
        let net = line(0, 10_000_000_000);
        let cfg = TrafficConfig { be_utilization: 1.0, ..TrafficConfig::default() };
        assert!(inject_background(&net, &cfg, 1_000_000).is_err());
        let cfg = TrafficConfig { be_utilization: 0.0, ..TrafficConfig::default() };
        assert!(inject_background(&net, &cfg, 1_000_000).unwrap().is_empty());
    }
}
