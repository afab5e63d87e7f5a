//! Resource and latency models for the reusable linear kernel and the MoE
//! block built on it. These are model extensions in the same style as the
//! attention closed forms; every formula here is exported as a string so
//! reports can print exactly what was evaluated, and the whole set lives in
//! this one file so an alternative model can be swapped in wholesale.

use crate::costmodel::{psi, PlatformProfile};
use crate::error::Result;
use crate::kernels::LinearKernelParams;
use crate::workload::{ModelConfig, RoutingTable};

pub const LATENCY_LINEAR_FORMULA: &str =
    "latency_linear = ceil(tokens/N_L) * ceil(in/T_in) * ceil(out/T_out) + tile_overhead * tiles";
pub const WEIGHT_LOAD_FORMULA: &str =
    "weight_load = ceil(2*F*H / (T_in*T_out * wt_words_per_cycle))";
pub const LATENCY_MOE_FORMULA: &str =
    "latency_moe = sum over activated experts of latency_linear(tokens_e, F, H) + latency_linear(tokens_e, H, F) + weight_load";
pub const DSP_LINEAR_FORMULA: &str = "dsp_linear = ceil(psi(q) * T_in * T_out * N_L)";
pub const BRAM_LINEAR_FORMULA: &str =
    "bram_linear = N_L * ceil(q/bwidth) * ceil((max(F,H) + T_in*T_out) / bdepth)";

/// Tokens-per-wave times weight-tile count, plus an optional fixed per-tile
/// stall for designs where weights do not stream concurrently with compute.
pub fn latency_linear_with(
    tokens: usize,
    in_dim: usize,
    out_dim: usize,
    lp: &LinearKernelParams,
    tile_overhead: u64,
) -> u64 {
    let waves = tokens.div_ceil(lp.cus) as u64;
    let tiles = (in_dim.div_ceil(lp.tile_in) * out_dim.div_ceil(lp.tile_out)) as u64;
    waves * tiles + tile_overhead * tiles
}

/// Dense linear pass with weights streamed concurrently (zero overhead).
pub fn latency_linear(tokens: usize, in_dim: usize, out_dim: usize, lp: &LinearKernelParams) -> u64 {
    latency_linear_with(tokens, in_dim, out_dim, lp, 0)
}

/// Cycles to swap one expert's W1+W2 into the kernel at
/// `wt_words_per_cycle` weight tiles per cycle.
pub fn weight_load_cycles(
    feat_dim: usize,
    hidden_dim: usize,
    lp: &LinearKernelParams,
    wt_words_per_cycle: u64,
) -> u64 {
    let words = 2 * feat_dim as u64 * hidden_dim as u64;
    words.div_ceil(lp.tile_wt() as u64 * wt_words_per_cycle.max(1))
}

/// Expert-by-expert MoE latency: experts with no routed tokens are skipped
/// entirely (no load, no compute).
pub fn latency_moe(cfg: &ModelConfig, routing: &RoutingTable, lp: &LinearKernelParams) -> u64 {
    latency_moe_with(cfg, routing, lp, 1)
}

pub fn latency_moe_with(
    cfg: &ModelConfig,
    routing: &RoutingTable,
    lp: &LinearKernelParams,
    wt_words_per_cycle: u64,
) -> u64 {
    let (f, h) = (cfg.feat_dim, cfg.hidden_dim);
    routing
        .expert_token_counts()
        .iter()
        .filter(|&&count| count > 0)
        .map(|&count| {
            latency_linear(count, f, h, lp)
                + latency_linear(count, h, f, lp)
                + weight_load_cycles(f, h, lp, wt_words_per_cycle)
        })
        .sum()
}

/// One MAC per weight-tile element per CU.
pub fn dsp_linear(lp: &LinearKernelParams, q: u32, pf: &PlatformProfile) -> Result<u64> {
    let macs = (lp.tile_in * lp.tile_out * lp.cus) as f64;
    Ok((psi(q, pf.psi_32)? * macs).ceil() as u64)
}

/// Per-CU activation buffer sized for the larger of the two FFN operands,
/// plus one resident weight tile per CU for the broadcast double buffer.
pub fn bram_linear(lp: &LinearKernelParams, cfg: &ModelConfig, pf: &PlatformProfile) -> u64 {
    let buffer_depth = (cfg.feat_dim.max(cfg.hidden_dim) + lp.tile_wt()) as u64;
    lp.cus as u64
        * (cfg.bitwidth as u64).div_ceil(pf.bwidth as u64)
        * buffer_depth.div_ceil(pf.bdepth as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp(tile_in: usize, tile_out: usize, cus: usize) -> LinearKernelParams {
        LinearKernelParams { tile_in, tile_out, cus }
    }

    fn small_cfg(feat: usize, hidden: usize) -> ModelConfig {
        ModelConfig {
            layers: 2,
            patches: 8,
            feat_dim: feat,
            hidden_dim: hidden,
            heads: 1,
            experts: 4,
            top_k: 1,
            bitwidth: 16,
            moe_alternate: true,
            non_encoder_cycles: 0,
        }
    }

    #[test]
    fn latency_linear_spot_values() {
        assert_eq!(latency_linear(1, 1, 1, &lp(4, 4, 2)), 1);
        assert_eq!(latency_linear(5, 8, 16, &lp(3, 4, 2)), 36);
    }

    #[test]
    fn latency_linear_overhead_adds_per_tile() {
        // 12 tiles, 3 waves -> 36 + 2 cycles per tile = 60
        assert_eq!(latency_linear_with(5, 8, 16, &lp(3, 4, 2), 2), 60);
    }

    #[test]
    fn weight_load_spot_value() {
        // 2*8*16 = 256 words, tile 12 words -> ceil = 22
        assert_eq!(weight_load_cycles(8, 16, &lp(3, 4, 2), 1), 22);
        assert_eq!(weight_load_cycles(8, 16, &lp(3, 4, 2), 2), 11);
    }

    #[test]
    fn moe_skips_empty_experts() {
        let cfg = small_cfg(4, 8);
        let all_to_one = RoutingTable::new(4, vec![vec![(2, 1.0)]; 8]).unwrap();
        let one = latency_moe(&cfg, &all_to_one, &lp(2, 2, 2));
        let expected = latency_linear(8, 4, 8, &lp(2, 2, 2))
            + latency_linear(8, 8, 4, &lp(2, 2, 2))
            + weight_load_cycles(4, 8, &lp(2, 2, 2), 1);
        assert_eq!(one, expected);
    }

    #[test]
    fn moe_uniform_k1_two_experts_symmetric() {
        let cfg = small_cfg(4, 8);
        let routing = RoutingTable::new(
            2,
            (0..8).map(|t| vec![(t % 2, 1.0)]).collect(),
        )
        .unwrap();
        let total = latency_moe(&cfg, &routing, &lp(2, 2, 1));
        let per_expert = latency_linear(4, 4, 8, &lp(2, 2, 1))
            + latency_linear(4, 8, 4, &lp(2, 2, 1))
            + weight_load_cycles(4, 8, &lp(2, 2, 1), 1);
        assert_eq!(total, 2 * per_expert);
    }

    #[test]
    fn moe_invariant_under_expert_permutation() {
        let cfg = small_cfg(6, 10);
        let routing = RoutingTable::synthetic_uniform(16, 4, 2, 9).unwrap();
        let permuted = RoutingTable::new(
            4,
            (0..16)
                .map(|t| {
                    routing
                        .assignment(t)
                        .iter()
                        .map(|&(e, w)| ((e + 1) % 4, w))
                        .collect()
                })
                .collect(),
        )
        .unwrap();
        let p = lp(3, 3, 2);
        assert_eq!(latency_moe(&cfg, &routing, &p), latency_moe(&cfg, &permuted, &p));
    }

    #[test]
    fn dsp_linear_spot_values() {
        let pf = PlatformProfile::zcu102();
        assert_eq!(dsp_linear(&lp(4, 4, 2), 16, &pf).unwrap(), 32);
        assert_eq!(dsp_linear(&lp(4, 4, 2), 4, &pf).unwrap(), 0);
        assert_eq!(dsp_linear(&lp(3, 3, 1), 8, &pf).unwrap(), 5); // ceil(4.5)
    }

    #[test]
    fn linear_counts_scale_with_cus() {
        let pf = PlatformProfile::zcu102();
        let cfg = small_cfg(64, 128);
        let base_dsp = dsp_linear(&lp(4, 4, 2), 16, &pf).unwrap();
        let base_bram = bram_linear(&lp(4, 4, 2), &cfg, &pf);
        assert_eq!(dsp_linear(&lp(4, 4, 4), 16, &pf).unwrap(), 2 * base_dsp);
        assert_eq!(bram_linear(&lp(4, 4, 4), &cfg, &pf), 2 * base_bram);
    }

    #[test]
    fn bram_linear_tracks_buffer_depth() {
        let pf = PlatformProfile::zcu102();
        // depth = max(1500, 100) + 16 = 1516 > 1024 -> 2 BRAMs per CU
        let mut cfg = small_cfg(1500, 100);
        assert_eq!(bram_linear(&lp(4, 4, 3), &cfg, &pf), 6);
        cfg.feat_dim = 100;
        // depth = 116 -> 1 BRAM per CU
        assert_eq!(bram_linear(&lp(4, 4, 3), &cfg, &pf), 3);
    }
}
