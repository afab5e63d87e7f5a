//! End-to-end two-stage hardware search on a small model, compared against
//! the joint exhaustive oracle.
//!
//! ```text
//! cargo run --release --example hardware_search
//! ```

use moesim::dse::{exhaustive_search, has_search, GaConfig, SearchDomain};
use moesim::costmodel::PlatformProfile;
use moesim::workload::{ModelConfig, RoutingTable};
use moesim::Result;

fn main() -> Result<()> {
    let pf = PlatformProfile::zcu102();
    let cfg = ModelConfig {
        layers: 4,
        patches: 16,
        feat_dim: 32,
        hidden_dim: 64,
        heads: 2,
        experts: 4,
        top_k: 2,
        bitwidth: 16,
        moe_alternate: true,
        non_encoder_cycles: 0,
    };
    let routing = RoutingTable::synthetic_uniform(cfg.patches, cfg.experts, cfg.top_k, 7)?;
    let domain = SearchDomain {
        num: vec![0, 1, 2],
        tile_a: vec![1, 2, 4, 8],
        pes_a: vec![1, 2, 4, 8, 16],
        tile_in: vec![1, 2, 4],
        tile_out: vec![1, 2, 4],
        cus: vec![1, 2, 4],
    };
    println!("joint domain: {} design points", domain.joint_size());

    let ga = GaConfig { population_size: 32, generations: 60, seed: 7, ..Default::default() };
    let result = has_search(&pf, &cfg, &routing, &domain, &ga)?;
    println!("\ntwo-stage search:");
    for line in &result.stage_log {
        println!("  {line}");
    }
    println!(
        "  -> num={} tile_a={} pes_a={} / moe {:?}, total {} cycles",
        result.params.num,
        result.params.tile_a,
        result.params.pes_a,
        result.moe_params,
        result.latency.cycles_total
    );

    let oracle = exhaustive_search(&pf, &cfg, &routing, &domain, None)?;
    println!(
        "\nexhaustive oracle: total {} cycles (search is {:.2}% above)",
        oracle.latency.cycles_total,
        100.0 * (result.latency.cycles_total as f64 / oracle.latency.cycles_total as f64 - 1.0)
    );
    Ok(())
}
