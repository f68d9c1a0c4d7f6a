use thiserror::Error;

/// Errors raised by the per-cluster rate and power-allocation model.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum NomaError {
    #[error("SINR must be finite and strictly positive, got {0}")]
    InvalidSinr(f64),
    #[error("SIC imperfection must lie in [0, 1], got {0}")]
    InvalidBeta(f64),
    #[error("cluster must contain at least one user")]
    EmptyCluster,
    #[error(
        "cluster members must be sorted by descending SINR (rank {rank} exceeds rank {previous})"
    )]
    Unsorted { rank: usize, previous: usize },
    #[error("rank {rank} is outside 1..={size}")]
    RankOutOfRange { rank: usize, size: usize },
    #[error("pair rank {rank} is outside 2..={size}")]
    PairRankOutOfRange { rank: usize, size: usize },
    #[error("tail power sum must lie in [0, 1), got {0}")]
    TailSumOutOfRange(f64),
    #[error("power allocation has {alphas} entries but the cluster has {size} users")]
    AllocationMismatch { alphas: usize, size: usize },
    #[error("minimum power fractions sum to {required} >= 1; cluster cannot be served in NOMA")]
    PowerBudgetExceeded { required: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClusteringError {
    #[error("user pool is empty")]
    EmptyPool,
    #[error("user id {0} appears more than once in the pool")]
    DuplicateUser(u32),
    #[error("cluster size {0} is not a power of two")]
    UnsupportedClusterSize(usize),
    #[error("{users} users cannot be split into clusters of {cluster_size}")]
    Indivisible { users: usize, cluster_size: usize },
    #[error("cannot split a cluster of odd size {0}")]
    OddSplit(usize),
    #[error(transparent)]
    Noma(#[from] NomaError),
}

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("invalid radio configuration: {0}")]
    InvalidConfig(String),
    #[error("drop {drop_index} produced no base stations after {attempts} attempts")]
    DegenerateDrop { drop_index: u64, attempts: u32 },
    #[error("base station {bs} does not exist in this deployment")]
    UnknownBaseStation { bs: usize },
    #[error("user {user} does not exist in this deployment")]
    UnknownUser { user: usize },
    #[error(transparent)]
    Noma(#[from] NomaError),
    #[error(transparent)]
    Clustering(#[from] ClusteringError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment configuration: {0}")]
    InvalidConfig(String),
    #[error("unknown policy `{0}`")]
    UnknownPolicy(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Clustering(#[from] ClusteringError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
