//! Reference MoE-ViT workload: model configuration, token/weight containers,
//! routing tables and slow-but-obvious reference math.
//!
//! Everything here is written for clarity, not speed — the kernel emulations
//! in [`crate::kernels`] are validated against these functions.

mod config;
mod matrix;
mod ops;
mod reference;
mod routing;

pub use config::ModelConfig;
pub use matrix::TokenMatrix;
pub use ops::{count_ops, count_ops_breakdown, OpCounts, OP_COUNT_FORMULA};
pub use reference::{
    gate_topk, gelu, reference_attention, reference_moe, safe_softmax_3pass, ExpertWeights,
};
pub use routing::RoutingTable;
