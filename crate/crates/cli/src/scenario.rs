//! Scenario files: one TOML document naming the topology and demand files
//! plus ladder, planner and traffic settings.
//!
//! ```toml
//! seed = 7
//! topology = "topology.json"
//! demands = "demands.json"
//!
//! [ladder]
//! delta0_ns = 1000
//! multipliers = [2, 8]
//!
//! [planner]
//! mode = "bnb"
//! hop_limit = 5
//! max_nodes = 100
//!
//! [traffic]
//! be_utilization = 0.3
//! ```

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::ValueEnum;
use fdip_core::network_model::{declared_periods, load_demands, Demand, DemandDoc, Network, TopologyDoc};
use fdip_core::planner::{BnbConfig, NodeOrder, Weights, DEFAULT_PATHS_PER_DEMAND};
use fdip_core::simulator::TrafficConfig;
use fdip_core::time_model::GroupLadder;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Bnb,
    Greedy,
    Oracle,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Bnb => "bnb",
            Mode::Greedy => "greedy",
            Mode::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderConfig {
    pub delta0_ns: u64,
    pub multipliers: Vec<u64>,
    #[serde(default = "default_queues")]
    pub queues_per_group: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hypercycle_factor: Option<u64>,
}

fn default_queues() -> usize {
    fdip_core::time_model::MIN_QUEUES_PER_GROUP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlannerConfig {
    pub mode: Mode,
    pub hop_limit: usize,
    pub paths_per_demand: usize,
    pub weights: Weights,
    pub max_nodes: Option<usize>,
    pub time_budget_ms: Option<u64>,
    pub node_order: NodeOrder,
    pub seed_with_greedy: bool,
    pub oracle_cap: usize,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            mode: Mode::Bnb,
            hop_limit: 5,
            paths_per_demand: DEFAULT_PATHS_PER_DEMAND,
            weights: Weights::default(),
            max_nodes: None,
            time_budget_ms: None,
            node_order: NodeOrder::BestBound,
            seed_with_greedy: true,
            oracle_cap: fdip_core::planner::DEFAULT_ORACLE_CAP,
        }
    }
}

impl PlannerConfig {
    pub fn bnb(&self) -> BnbConfig {
        BnbConfig {
            weights: self.weights,
            max_nodes: self.max_nodes,
            time_budget: self.time_budget_ms.map(Duration::from_millis),
            node_order: self.node_order,
            seed_with_greedy: self.seed_with_greedy,
            record_nodes: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrafficSection {
    pub be_utilization: f64,
    pub be_burst_bits: u64,
    pub be_packet_bits: u64,
    pub horizon_hypercycles: u64,
}

impl Default for TrafficSection {
    fn default() -> Self {
        let t = TrafficConfig::default();
        TrafficSection {
            be_utilization: t.be_utilization,
            be_burst_bits: t.be_burst_bits,
            be_packet_bits: t.be_packet_bits,
            horizon_hypercycles: t.horizon_hypercycles,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub seed: u64,
    pub topology: PathBuf,
    pub demands: PathBuf,
    pub ladder: LadderConfig,
    #[serde(default)]
    pub planner: PlannerConfig,
    #[serde(default)]
    pub traffic: TrafficSection,
}

/// A loaded scenario with its models built.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub topology: TopologyDoc,
    pub demand_doc: DemandDoc,
    pub net: Network,
    pub ladder: GroupLadder,
    pub demands: Vec<Demand>,
    /// Fingerprint of the ladder, topology and demands.
    pub hash: String,
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    serde_json::from_str(&read(path)?).map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))
}

impl Scenario {
    pub fn load(path: &Path) -> CliResult<Self> {
        let file: ScenarioFile =
            toml::from_str(&read(path)?).map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let topology: TopologyDoc = read_json(&base.join(&file.topology))?;
        let demand_doc: DemandDoc = read_json(&base.join(&file.demands))?;
        Self::build(file, topology, demand_doc)
    }

    pub fn build(file: ScenarioFile, topology: TopologyDoc, demand_doc: DemandDoc) -> CliResult<Self> {
        let net = Network::from_doc(&topology)?;
        let lc = &file.ladder;
        let mut ladder = GroupLadder::new(lc.delta0_ns, lc.multipliers.clone(), lc.queues_per_group)?;
        let periods = declared_periods(&demand_doc);
        match lc.hypercycle_factor {
            Some(f) => ladder.build_hypercycle_with_factor(&periods, f)?,
            None => ladder.build_hypercycle(&periods)?,
        };
        net.validate_offsets(&ladder)?;
        let demands = load_demands(&demand_doc, &net, &ladder)?;

        let mut h = Sha256::new();
        for part in [
            serde_json::to_string(lc).expect("ladder serializes"),
            serde_json::to_string(&topology).expect("topology serializes"),
            serde_json::to_string(&demand_doc).expect("demands serialize"),
        ] {
            h.update(part.as_bytes());
            h.update([0u8]);
        }
        let hash = hex::encode(h.finalize());
        Ok(Scenario { file, topology, demand_doc, net, ladder, demands, hash })
    }

    /// Same scenario with a different ladder.
    pub fn with_multipliers(&self, multipliers: Vec<u64>) -> CliResult<Self> {
        let mut file = self.file.clone();
        file.ladder.multipliers = multipliers;
        file.ladder.hypercycle_factor = None;
        Self::build(file, self.topology.clone(), self.demand_doc.clone())
    }

    /// Single-group restriction keeping only the fastest group.
    pub fn first_group_only(&self) -> CliResult<Self> {
        self.with_multipliers(self.file.ladder.multipliers[..1].to_vec())
    }

    pub fn traffic(&self) -> TrafficConfig {
        let t = &self.file.traffic;
        TrafficConfig {
            be_utilization: t.be_utilization,
            be_burst_bits: t.be_burst_bits,
            be_packet_bits: t.be_packet_bits,
            horizon_hypercycles: t.horizon_hypercycles,
            seed: self.file.seed,
            record_trace: false,
        }
    }
}
