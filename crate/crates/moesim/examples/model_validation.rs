//! Cost model vs discrete-event simulation: every analytical quantity is
//! re-derived by counting cycles in a loop and the two must agree.
//!
//! ```text
//! cargo run --example model_validation
//! ```

use moesim::costmodel::HardwareParams;
use moesim::kernels::LinearKernelParams;
use moesim::simtime::validate_cost_model;
use moesim::workload::{ModelConfig, RoutingTable};
use moesim::Result;

fn main() -> Result<()> {
    let cfg = ModelConfig {
        layers: 6,
        patches: 49,
        feat_dim: 96,
        hidden_dim: 384,
        heads: 3,
        experts: 8,
        top_k: 2,
        bitwidth: 16,
        moe_alternate: true,
        non_encoder_cycles: 120,
    };
    let hp = HardwareParams { num: 2, tile_a: 8, pes_a: 7, tile_in: 4, tile_out: 4, cus: 2 };
    let moe_lp = LinearKernelParams { tile_in: 8, tile_out: 8, cus: 4 };
    let routing = RoutingTable::synthetic_uniform(cfg.patches, cfg.experts, cfg.top_k, 21)?;

    let report = validate_cost_model(&cfg, &hp, &moe_lp, &routing)?;
    print!("{}", report.render());

    // A second design with deliberately awkward tiling still validates; the
    // attention and MoE rows stay exact, the composed rows stay within 1%.
    let awkward = HardwareParams { num: 3, tile_a: 5, pes_a: 6, tile_in: 3, tile_out: 5, cus: 3 };
    let report = validate_cost_model(&cfg, &awkward, &moe_lp, &routing)?;
    println!();
    print!("{}", report.render());
    Ok(())
}
