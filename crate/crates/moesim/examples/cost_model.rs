//! Closed-form DSP / BRAM / latency models for a few hand-picked designs of
//! the same model, checked against the platform budget.
//!
//! ```text
//! cargo run --example cost_model
//! ```

use moesim::costmodel::{
    check_budget, latency_attention, latency_moe, latency_msa, resources_total, HardwareParams,
    PlatformProfile, DSP_ATTENTION_FORMULA, LATENCY_ATTENTION_FORMULA, LATENCY_MSA_FORMULA,
};
use moesim::workload::{ModelConfig, RoutingTable};
use moesim::Result;

fn main() -> Result<()> {
    let pf = PlatformProfile::zcu102();
    let cfg = ModelConfig {
        layers: 12,
        patches: 196,
        feat_dim: 384,
        hidden_dim: 1536,
        heads: 6,
        experts: 16,
        top_k: 2,
        bitwidth: 16,
        moe_alternate: true,
        non_encoder_cycles: 0,
    };
    let routing = RoutingTable::synthetic_uniform(cfg.patches, cfg.experts, cfg.top_k, 7)?;

    println!("attention latency: {LATENCY_ATTENTION_FORMULA}");
    println!("attention dsp:     {DSP_ATTENTION_FORMULA}");
    println!("msa composition:   {LATENCY_MSA_FORMULA}");
    println!();
    println!("{} ({} DSP, {} BRAM, {} MHz)\n", pf.name, pf.dsp_total, pf.bram_total, pf.clock_mhz);

    let designs = [
        HardwareParams { num: 0, tile_a: 4, pes_a: 7, tile_in: 4, tile_out: 4, cus: 1 },
        HardwareParams { num: 2, tile_a: 8, pes_a: 14, tile_in: 8, tile_out: 8, cus: 2 },
        HardwareParams { num: 4, tile_a: 16, pes_a: 28, tile_in: 16, tile_out: 16, cus: 4 },
    ];
    println!("num tile_a pes_a tile_in tile_out cus |    attn     msa     moe |  dsp bram feasible");
    for hp in designs {
        let res = resources_total(&hp, &cfg, &pf)?;
        let verdict = check_budget(&res, &pf);
        println!(
            "{:>3} {:>6} {:>5} {:>7} {:>8} {:>3} | {:>7} {:>7} {:>7} | {:>4} {:>4} {}",
            hp.num,
            hp.tile_a,
            hp.pes_a,
            hp.tile_in,
            hp.tile_out,
            hp.cus,
            latency_attention(&hp, &cfg),
            latency_msa(&hp, &cfg),
            latency_moe(&cfg, &routing, &hp.linear()),
            res.dsp_total_used,
            res.bram_total_used,
            if verdict.feasible { "yes" } else { "NO" },
        );
    }

    // Pushing tiles past the budget flips the verdict and names the culprit.
    let greedy = HardwareParams { num: 4, tile_a: 32, pes_a: 28, tile_in: 32, tile_out: 32, cus: 8 };
    let res = resources_total(&greedy, &cfg, &pf)?;
    let verdict = check_budget(&res, &pf);
    println!(
        "\ngreedy design: dsp {} (slack {}), bram {} (slack {}) -> {}",
        res.dsp_total_used,
        verdict.dsp_slack,
        res.bram_total_used,
        verdict.bram_slack,
        if verdict.feasible {
            "feasible".to_string()
        } else {
            format!("violates {}", verdict.violations.join(", "))
        }
    );
    Ok(())
}
