//! Analytical DSP/BRAM/latency closed forms for the attention kernel, the
//! linear-kernel extensions, platform budgets and the double-buffered
//! pipeline total. Everything here is pure arithmetic over small structs and
//! safe to evaluate from many search threads at once.

mod linear;
mod platform;
mod report;

use serde::{Deserialize, Serialize};

pub use linear::{
    bram_linear, dsp_linear, latency_linear, latency_linear_with, latency_moe, latency_moe_with,
    weight_load_cycles, BRAM_LINEAR_FORMULA, DSP_LINEAR_FORMULA, LATENCY_LINEAR_FORMULA,
    LATENCY_MOE_FORMULA, WEIGHT_LOAD_FORMULA,
};
pub use platform::PlatformProfile;
pub use report::{LatencyReport, ResourceReport};

use crate::error::{Error, Result};
use crate::kernels::{AttentionKernelParams, LinearKernelParams};
use crate::workload::ModelConfig;

pub const DSP_ATTENTION_FORMULA: &str = "dsp_attn = ceil((2*psi(q)*T_a + D_exp*h) * N_a)";
pub const BRAM_ATTENTION_FORMULA: &str =
    "bram_attn = 2*ceil(q/bwidth)*ceil(N/bdepth) + B_exp*h*N_a";
pub const LATENCY_ATTENTION_FORMULA: &str = "latency_attn = ceil(N/N_a) * N * ceil(F/T_a)";
pub const LATENCY_MSA_FORMULA: &str = "latency_msa = max(latency_attn, task if num>0) + (4 - min(num,4)) * task, task = latency_linear(N, F, F)";
pub const PIPELINE_FORMULA: &str =
    "total = non_encoder + l_msa + (pairs-1)*max(l_msa, l_moe) + l_moe";

/// Number of per-layer linear tasks around the attention kernel:
/// Q, K and V generation plus the output projection, each N x F x F.
pub const MSA_LINEAR_TASKS: usize = 4;

/// Full per-design hardware parameter vector: `num` dedicated streaming
/// linear modules, attention tile/PE counts, and the linear-kernel shape
/// shared by the MSA-side instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HardwareParams {
    pub num: usize,
    pub tile_a: usize,
    pub pes_a: usize,
    pub tile_in: usize,
    pub tile_out: usize,
    pub cus: usize,
}

impl HardwareParams {
    pub fn validate(&self) -> Result<()> {
        if self.tile_a < 1 || self.pes_a < 1 {
            return Err(Error::domain("tile_a and pes_a must be >= 1"));
        }
        self.linear().validate()
    }

    pub fn attention(&self) -> AttentionKernelParams {
        AttentionKernelParams { tile_a: self.tile_a, pes_a: self.pes_a }
    }

    pub fn linear(&self) -> LinearKernelParams {
        LinearKernelParams { tile_in: self.tile_in, tile_out: self.tile_out, cus: self.cus }
    }
}

/// DSPs consumed per multiplier at bit-width `q`; the over-16-bit factor is
/// profile data.
pub fn psi(q: u32, psi_32: f64) -> Result<f64> {
    match q {
        0 | 33.. => Err(Error::domain(format!("bit width {q} outside [1, 32]"))),
        1..=4 => Ok(0.0),
        5..=8 => Ok(0.5),
        9..=16 => Ok(1.0),
        17..=32 => Ok(psi_32),
    }
}

/// Attention-kernel DSPs: the MAC tile per PE plus one exponential unit per
/// head per PE.
pub fn dsp_attention(hp: &HardwareParams, cfg: &ModelConfig, pf: &PlatformProfile) -> Result<u64> {
    let macs = 2.0 * psi(cfg.bitwidth, pf.psi_32)? * hp.tile_a as f64;
    let exps = (pf.d_exp * cfg.heads as u64) as f64;
    Ok(((macs + exps) * hp.pes_a as f64).ceil() as u64)
}

/// Attention-kernel BRAMs: double-buffered K/V token stores plus the
/// exponential units' tables.
pub fn bram_attention(hp: &HardwareParams, cfg: &ModelConfig, pf: &PlatformProfile) -> u64 {
    let store = 2
        * (cfg.bitwidth as u64).div_ceil(pf.bwidth as u64)
        * (cfg.patches as u64).div_ceil(pf.bdepth as u64);
    store + pf.b_exp * cfg.heads as u64 * hp.pes_a as u64
}

/// Streaming-attention cycles: PE rounds times K-stream length times feature
/// tiles. Exactly N^2 * F / (T_a * N_a) when the tile sizes divide evenly.
pub fn latency_attention(hp: &HardwareParams, cfg: &ModelConfig) -> u64 {
    cfg.patches.div_ceil(hp.pes_a) as u64
        * cfg.patches as u64
        * cfg.feat_dim.div_ceil(hp.tile_a) as u64
}

/// MSA-block latency: `min(num, 4)` of the four linear tasks run on dedicated
/// streaming modules concurrently with attention (max composition); the rest
/// time-share one reusable instance after it (additive composition).
pub fn latency_msa(hp: &HardwareParams, cfg: &ModelConfig) -> u64 {
    let attn = latency_attention(hp, cfg);
    let task = latency_linear(cfg.patches, cfg.feat_dim, cfg.feat_dim, &hp.linear());
    let covered = hp.num.min(MSA_LINEAR_TASKS);
    let overlapped = if covered > 0 { attn.max(task) } else { attn };
    overlapped + (MSA_LINEAR_TASKS - covered) as u64 * task
}

/// Resource usage of the MSA block: the attention kernel plus `num` dedicated
/// streaming linear modules plus the one shared reusable instance, all with
/// the same linear-kernel shape. The MoE block's instance is sized separately
/// and added via [`ResourceReport::with_extra_linear`].
pub fn resources_total(
    hp: &HardwareParams,
    cfg: &ModelConfig,
    pf: &PlatformProfile,
) -> Result<ResourceReport> {
    let instances = hp.num as u64 + 1;
    let lp = hp.linear();
    Ok(ResourceReport::compose(
        dsp_attention(hp, cfg, pf)?,
        bram_attention(hp, cfg, pf),
        instances * dsp_linear(&lp, cfg.bitwidth, pf)?,
        instances * bram_linear(&lp, cfg, pf),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BandwidthVerdict {
    /// Bandwidth is dynamically allocated at run time; the static model
    /// reports it without enforcing a budget.
    Unchecked,
}

/// Budget check outcome with per-resource slack (negative when over budget).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetVerdict {
    pub feasible: bool,
    pub dsp_slack: i64,
    pub bram_slack: i64,
    pub bandwidth: BandwidthVerdict,
    /// Names of the violated resources, empty when feasible.
    pub violations: Vec<String>,
}

/// Inclusive budgets: usage equal to the total is feasible with zero slack.
pub fn check_budget(rr: &ResourceReport, pf: &PlatformProfile) -> BudgetVerdict {
    let dsp_slack = pf.dsp_total as i64 - rr.dsp_total_used as i64;
    let bram_slack = pf.bram_total as i64 - rr.bram_total_used as i64;
    let mut violations = Vec::new();
    if dsp_slack < 0 {
        violations.push("dsp".to_string());
    }
    if bram_slack < 0 {
        violations.push("bram".to_string());
    }
    BudgetVerdict {
        feasible: violations.is_empty(),
        dsp_slack,
        bram_slack,
        bandwidth: BandwidthVerdict::Unchecked,
        violations,
    }
}

/// Closed form for the round-barrier double-buffered pipeline: after the
/// first MSA fills Buf0, every swap round costs the slower of the two blocks,
/// and the last MoE drains alone.
pub fn pipeline_total_cycles(layer_pairs: u64, l_msa: u64, l_moe: u64, non_encoder: u64) -> u64 {
    if layer_pairs == 0 {
        return non_encoder;
    }
    non_encoder + l_msa + (layer_pairs - 1) * l_msa.max(l_moe) + l_moe
}
