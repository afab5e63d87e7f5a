//! Desk-scale toolkit for a streaming-attention + reusable-linear MoE-ViT accelerator.
//!
//! The crate models one accelerator family end to end:
//!
//! * [`workload`] — slow, obviously-correct reference math for MoE-ViT blocks
//!   (3-pass softmax, attention, top-k gating, expert-by-expert MoE) plus the
//!   op counter used for throughput reporting;
//! * [`kernels`] — functional emulation of the streaming attention kernel
//!   (fused exp/weighted-sum softmax, one division per row and head) and the
//!   reusable tiled linear kernel with round-robin token routing, both
//!   producing cycle-tagged traces;
//! * [`costmodel`] — closed-form DSP/BRAM/latency models and the MSA/MoE
//!   composition rules, plus budget checks against platform profiles;
//! * [`simtime`] — discrete-event re-derivations of every cost-model quantity
//!   and the double-buffered two-block pipeline timeline;
//! * [`dse`] — the two-stage hardware search (exhaustive MoE scan, per-`num`
//!   genetic MSA search, dsp-ordered binary shrink) and a joint exhaustive
//!   oracle for small domains;
//! * [`report`] / [`cli`] — deterministic JSON/CSV/text reports and the
//!   `search | simulate | verify | report` subcommands.
//!
//! Runnable walkthroughs live in `examples/`; `cargo run -- --help` shows the
//! CLI surface.

pub mod cli;
pub mod costmodel;
pub mod dse;
pub mod error;
pub mod kernels;
pub mod report;
pub mod simtime;
pub mod workload;

pub use error::{Error, Result};
