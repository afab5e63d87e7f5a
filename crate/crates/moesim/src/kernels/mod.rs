//! Functional emulation of the two hardware kernels: streaming attention
//! with fused softmax, and the reusable tiled linear engine that serves
//! both dense projections and expert FFNs.

mod attention;
mod linear;
mod trace;

pub use attention::{
    attention_forward, attention_forward_with_mode, fused_softmax_weighted_sum,
    fused_softmax_weighted_sum_online, reorder_assign_q, streamed_row_scores,
    AttentionKernelParams, FusedRow, FusedSoftmaxMode, QAssignment, RowScores,
};
pub use linear::{linear_forward, moe_forward, router_round_robin, LinearKernelParams};
pub use trace::{EventKind, StreamTrace, TraceEvent, UnitKind};
