//! Discrete-event re-derivations of every latency the cost model predicts.
//! The counters here step through schedules cycle by cycle instead of
//! evaluating closed forms, so they can disagree with `costmodel` — the
//! whole point is that `validate_cost_model` proves they do not.

mod pipeline;

use serde::{Deserialize, Serialize};

pub use pipeline::{simulate_layer_pipeline, BlockKind, Interval, PipelineSpec, Timeline};

use crate::costmodel::{self, HardwareParams, MSA_LINEAR_TASKS};
use crate::error::{Error, Result};
use crate::kernels::LinearKernelParams;
use crate::workload::{ModelConfig, RoutingTable};

/// Streaming-attention cycle count by walking the schedule: one round per
/// PE-group of Q rows, one K-stream step per patch, one cycle per feature
/// tile.
pub fn simulate_attention_cycles(cfg: &ModelConfig, hp: &HardwareParams) -> u64 {
    let mut cycles = 0u64;
    let mut row = 0;
    while row < cfg.patches {
        for _k_step in 0..cfg.patches {
            let mut feat = 0;
            while feat < cfg.feat_dim {
                cycles += 1;
                feat += hp.tile_a;
            }
        }
        row += hp.pes_a;
    }
    cycles
}

/// Dense linear pass: weight tiles outer, token waves inner.
pub fn simulate_linear_task_cycles(
    tokens: usize,
    in_dim: usize,
    out_dim: usize,
    lp: &LinearKernelParams,
) -> u64 {
    let mut cycles = 0u64;
    let mut i = 0;
    while i < in_dim {
        let mut o = 0;
        while o < out_dim {
            let mut t = 0;
            while t < tokens {
                cycles += 1;
                t += lp.cus;
            }
            o += lp.tile_out;
        }
        i += lp.tile_in;
    }
    cycles
}

/// Expert-by-expert MoE block: per activated expert, a word-chunk weight
/// load loop followed by the two tiled FFN passes over its routed tokens.
pub fn simulate_moe_cycles(cfg: &ModelConfig, routing: &RoutingTable, lp: &LinearKernelParams) -> u64 {
    let (f, h) = (cfg.feat_dim, cfg.hidden_dim);
    let mut cycles = 0u64;
    for count in routing.expert_token_counts() {
        if count == 0 {
            continue;
        }
        let mut words = (2 * f * h) as u64;
        while words > 0 {
            cycles += 1;
            words = words.saturating_sub(lp.tile_wt() as u64);
        }
        cycles += simulate_linear_task_cycles(count, f, h, lp);
        cycles += simulate_linear_task_cycles(count, h, f, lp);
    }
    cycles
}

/// MSA block as a two-phase schedule: attention and the dedicated streaming
/// linear modules start together and barrier at the slowest; the linear
/// tasks left over run back to back on the one shared instance.
pub fn simulate_msa_cycles(cfg: &ModelConfig, hp: &HardwareParams) -> u64 {
    let task =
        simulate_linear_task_cycles(cfg.patches, cfg.feat_dim, cfg.feat_dim, &hp.linear());
    let mut unit_ends = vec![simulate_attention_cycles(cfg, hp)];
    for _dedicated in 0..hp.num.min(MSA_LINEAR_TASKS) {
        unit_ends.push(task);
    }
    let mut barrier = unit_ends.into_iter().max().unwrap_or(0);
    for _shared in 0..MSA_LINEAR_TASKS - hp.num.min(MSA_LINEAR_TASKS) {
        barrier += task;
    }
    barrier
}

/// One quantity compared across the analytical and simulated paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationRow {
    pub quantity: String,
    pub analytical: u64,
    pub simulated: u64,
    pub abs_diff: u64,
    pub rel_diff: f64,
    pub tolerance: f64,
}

impl ValidationRow {
    fn new(quantity: &str, analytical: u64, simulated: u64, tolerance: f64) -> Self {
        let abs_diff = analytical.abs_diff(simulated);
        let rel_diff = if analytical == 0 && simulated == 0 {
            0.0
        } else {
            abs_diff as f64 / (analytical.max(simulated) as f64)
        };
        ValidationRow {
            quantity: quantity.to_string(),
            analytical,
            simulated,
            abs_diff,
            rel_diff,
            tolerance,
        }
    }

    pub fn within_tolerance(&self) -> bool {
        self.rel_diff <= self.tolerance
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub rows: Vec<ValidationRow>,
}

impl ValidationReport {
    pub fn render(&self) -> String {
        let mut out = String::from("quantity analytical simulated abs_diff rel_diff\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{} {} {} {} {:.6}\n",
                r.quantity, r.analytical, r.simulated, r.abs_diff, r.rel_diff
            ));
        }
        out
    }
}

/// Runs both latency paths and enforces the agreement contract: exact for
/// attention and MoE, within 1% for the MSA composition and the pipeline
/// total.
pub fn validate_cost_model(
    cfg: &ModelConfig,
    hp: &HardwareParams,
    moe_lp: &LinearKernelParams,
    routing: &RoutingTable,
) -> Result<ValidationReport> {
    let l_msa = costmodel::latency_msa(hp, cfg);
    let l_moe = if cfg.has_moe() { costmodel::latency_moe(cfg, routing, moe_lp) } else { 0 };
    let sim_msa = simulate_msa_cycles(cfg, hp);
    let sim_moe = if cfg.has_moe() { simulate_moe_cycles(cfg, routing, moe_lp) } else { 0 };
    let spec = PipelineSpec {
        layer_pairs: cfg.layer_pairs(),
        l_msa: sim_msa,
        l_moe: sim_moe,
        non_encoder_cycles: cfg.non_encoder_cycles,
    };
    let (sim_total, _) = simulate_layer_pipeline(&spec);
    let total = costmodel::pipeline_total_cycles(
        cfg.layer_pairs(),
        l_msa,
        l_moe,
        cfg.non_encoder_cycles,
    );

    let rows = vec![
        ValidationRow::new(
            "latency_attn",
            costmodel::latency_attention(hp, cfg),
            simulate_attention_cycles(cfg, hp),
            0.0,
        ),
        ValidationRow::new("latency_moe", l_moe, sim_moe, 0.0),
        ValidationRow::new("latency_msa", l_msa, sim_msa, 0.01),
        ValidationRow::new("latency_total", total, sim_total, 0.01),
    ];
    let report = ValidationReport { rows };
    let offenders: Vec<&str> = report
        .rows
        .iter()
        .filter(|r| !r.within_tolerance())
        .map(|r| r.quantity.as_str())
        .collect();
    if offenders.is_empty() {
        Ok(report)
    } else {
        Err(Error::Validation(format!(
            "out of tolerance: {}",
            offenders.join(", ")
        )))
    }
}

#[cfg(test)]
mod tests {
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::costmodel::{latency_attention, latency_linear, latency_moe};

    fn cfg(patches: usize, feat: usize) -> ModelConfig {
        ModelConfig {
            layers: 4,
            patches,
            feat_dim: feat,
            hidden_dim: 2 * feat,
            heads: 1,
            experts: 4,
            top_k: 2,
            bitwidth: 16,
            moe_alternate: true,
            non_encoder_cycles: 0,
        }
    }

    fn hp(num: usize, tile_a: usize, pes_a: usize, lp: LinearKernelParams) -> HardwareParams {
        HardwareParams {
            num,
            tile_a,
            pes_a,
            tile_in: lp.tile_in,
            tile_out: lp.tile_out,
            cus: lp.cus,
        }
    }

    fn lp(tile_in: usize, tile_out: usize, cus: usize) -> LinearKernelParams {
        LinearKernelParams { tile_in, tile_out, cus }
    }

    #[test]
    fn attention_simulation_spot_values() {
        assert_eq!(simulate_attention_cycles(&cfg(4, 8), &hp(0, 2, 2, lp(1, 1, 1))), 32);
        assert_eq!(simulate_attention_cycles(&cfg(5, 8), &hp(0, 3, 2, lp(1, 1, 1))), 45);
        // saturation: every Q row has a PE and one tile covers all features
        assert_eq!(simulate_attention_cycles(&cfg(7, 6), &hp(0, 8, 9, lp(1, 1, 1))), 7);
    }

    #[test]
    fn attention_simulation_equals_formula_on_grid() {
        for patches in [1, 3, 4, 16, 31] {
            for feat in [1, 2, 8, 33] {
                for tile_a in [1, 2, 5, 8] {
                    for pes_a in [1, 2, 7] {
                        let c = cfg(patches, feat);
                        let h = hp(0, tile_a, pes_a, lp(1, 1, 1));
                        assert_eq!(
                            simulate_attention_cycles(&c, &h),
                            latency_attention(&h, &c),
                            "patches {patches} feat {feat} tile_a {tile_a} pes_a {pes_a}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn linear_task_simulation_equals_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let tokens = rng.gen_range(1..64);
            let in_dim = rng.gen_range(1..64);
            let out_dim = rng.gen_range(1..64);
            let p = lp(rng.gen_range(1..9), rng.gen_range(1..9), rng.gen_range(1..9));
            assert_eq!(
                simulate_linear_task_cycles(tokens, in_dim, out_dim, &p),
                latency_linear(tokens, in_dim, out_dim, &p)
            );
        }
    }

    #[test]
    fn moe_simulation_single_token_1x1() {
        // one expert, one token, 1x1 dims, 1x1 tiles: two load cycles for the
        // two weight words, one cycle per FFN pass
        let c = ModelConfig { feat_dim: 1, hidden_dim: 1, patches: 1, ..cfg(1, 1) };
        let routing = RoutingTable::new(4, vec![vec![(0, 1.0)]]).unwrap();
        assert_eq!(simulate_moe_cycles(&c, &routing, &lp(1, 1, 1)), 4);
    }

    #[test]
    fn moe_simulation_equals_formula_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let patches = rng.gen_range(1..40);
            let experts = rng.gen_range(1..8);
            let top_k = rng.gen_range(1..=experts);
            let c = ModelConfig {
                patches,
                experts,
                top_k,
                feat_dim: rng.gen_range(1..32),
                hidden_dim: rng.gen_range(1..48),
                ..cfg(patches, 8)
            };
            let routing =
                RoutingTable::synthetic_uniform(patches, experts, top_k, rng.gen()).unwrap();
            let p = lp(rng.gen_range(1..7), rng.gen_range(1..7), rng.gen_range(1..5));
            assert_eq!(
                simulate_moe_cycles(&c, &routing, &p),
                latency_moe(&c, &routing, &p)
            );
        }
    }

    #[test]
    fn skewed_routing_is_never_slower_than_spread() {
        // expert-by-expert execution rewards concentration: fewer weight
        // loads and fuller waves
        for seed in 0..10u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let patches = rng.gen_range(4..32);
            let experts = rng.gen_range(2..6);
            let c = ModelConfig {
                patches,
                experts,
                top_k: 1,
                feat_dim: rng.gen_range(2..16),
                hidden_dim: rng.gen_range(2..24),
                ..cfg(patches, 8)
            };
            let p = lp(rng.gen_range(1..5), rng.gen_range(1..5), rng.gen_range(1..4));
            let skewed = RoutingTable::new(experts, vec![vec![(0, 1.0)]; patches]).unwrap();
            let spread = RoutingTable::new(
                experts,
                (0..patches).map(|t| vec![(t % experts, 1.0)]).collect(),
            )
            .unwrap();
            assert!(
                simulate_moe_cycles(&c, &skewed, &p) <= simulate_moe_cycles(&c, &spread, &p),
                "seed {seed}"
            );
        }
    }

    #[test]
    fn msa_simulation_matches_composition() {
        let c = cfg(16, 32);
        for num in 0..=5 {
            let h = hp(num, 4, 4, lp(2, 2, 2));
            assert_eq!(
                simulate_msa_cycles(&c, &h),
                costmodel::latency_msa(&h, &c),
                "num {num}"
            );
        }
    }

    #[test]
    fn validation_passes_on_divisible_instance() {
        let c = cfg(16, 32);
        let h = hp(2, 4, 4, lp(2, 2, 2));
        let routing = RoutingTable::synthetic_uniform(16, 4, 2, 1).unwrap();
        let report =
            validate_cost_model(&c, &h, &lp(2, 2, 2), &routing).unwrap();
        for row in &report.rows {
            assert_eq!(row.abs_diff, 0, "{}", row.quantity);
        }
    }

    #[test]
    fn validation_sweep_seeded() {
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        for _ in 0..50 {
            let patches = rng.gen_range(2..32);
            let experts = rng.gen_range(1..6);
            let c = ModelConfig {
                patches,
                experts,
                top_k: rng.gen_range(1..=experts),
                feat_dim: rng.gen_range(2..48),
                hidden_dim: rng.gen_range(2..64),
                layers: rng.gen_range(1..8),
                ..cfg(patches, 8)
            };
            let h = hp(
                rng.gen_range(0..5),
                rng.gen_range(1..9),
                rng.gen_range(1..9),
                lp(rng.gen_range(1..6), rng.gen_range(1..6), rng.gen_range(1..5)),
            );
            let moe_lp = lp(rng.gen_range(1..6), rng.gen_range(1..6), rng.gen_range(1..5));
            let routing =
                RoutingTable::synthetic_uniform(patches, c.experts, c.top_k, rng.gen()).unwrap();
            validate_cost_model(&c, &h, &moe_lp, &routing).unwrap();
        }
    }
}
