//! Two-layer heterogeneous message-passing model with a bilinear edge scorer,
//! trained with a pairwise margin loss against sampled non-edges.

pub mod backward;
pub mod checkpoint;
pub mod forward;
pub mod loss;
pub mod negative;
pub mod params;
pub mod train;

pub use backward::loss_and_gradients;
pub use checkpoint::{checkpoint_id, load_checkpoint, save_checkpoint, Checkpoint};
pub use forward::{
    embed_local, embed_reusing, forward, forward_cached, input_embeddings, EmbeddingTable,
    ForwardCache, NodeFeatures,
};
pub use loss::{edge_scores, margin_loss, score_pair, sigmoid, SCORED_RELATIONS};
pub use negative::{sample_negative_graph, NegGraph, NegPair};
pub use params::{
    init_params, msg_into, FeatureDims, Hyper, ModelParams, MsgRel, Weights, NUM_LAYERS,
};
pub use train::{train, AdamState, TrainConfig, TrainOutcome};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("embedding dimension must be positive")]
    InvalidDim,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("empty batch: no positive/negative pairs to score")]
    EmptyBatch,
    #[error("no negative candidates: every user is adjacent to every candidate node")]
    NoNegativeCandidates,
    #[error("training diverged at epoch {epoch} (non-finite loss)")]
    DivergenceDetected {
        epoch: usize,
        /// Parameters before the failing step.
        last_good: Box<ModelParams>,
    },
    #[error("model has not been trained")]
    UntrainedModel,
    #[error("checkpoint version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("corrupt checkpoint: {0}")]
    CorruptFile(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
