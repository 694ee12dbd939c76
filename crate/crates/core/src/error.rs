use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("invalid ladder: {0}")]
    InvalidLadder(String),
    #[error("group index {group} out of range (ladder has {groups} groups)")]
    GroupOutOfRange { group: usize, groups: usize },
    #[error("cycle index {index} out of range for group {group} ({cycles} cycles per hypercycle)")]
    CycleOutOfRange { group: usize, index: u64, cycles: u64 },
    #[error("alignment requires a faster source group, got {from} -> {to}")]
    AlignmentOrder { from: usize, to: usize },
    #[error("arithmetic overflow while computing {0}")]
    Overflow(&'static str),
    #[error("invalid topology: {0}")]
    InvalidTopology(String),
    #[error("invalid demand {id}: {reason}")]
    InvalidDemand { id: String, reason: String },
    #[error("unknown node '{0}'")]
    UnknownNode(String),
    #[error("unknown link {0}")]
    UnknownLink(usize),
    #[error("footprint of demand '{0}' is already committed")]
    DoubleCommit(String),
    #[error("footprint of demand '{0}' is not committed")]
    UnknownFootprint(String),
    #[error("oracle cap exceeded: {count} candidates > cap {cap}")]
    OracleCapExceeded { count: usize, cap: usize },
    #[error("infeasible assignment: {0}")]
    InfeasibleAssignment(String),
    #[error("invalid simulation input: {0}")]
    InvalidSimulation(String),
    #[error("invalid traffic config: {0}")]
    InvalidTraffic(String),
}
