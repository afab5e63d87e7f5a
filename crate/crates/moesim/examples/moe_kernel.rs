//! One reusable tiled linear kernel serving a whole mixture-of-experts
//! block: round-robin token routing, per-expert weight reloads, gate-weighted
//! accumulation.
//!
//! ```text
//! cargo run --example moe_kernel
//! ```

use moesim::kernels::{moe_forward, router_round_robin, EventKind, LinearKernelParams};
use moesim::workload::{reference_moe, ExpertWeights, RoutingTable, TokenMatrix};
use moesim::Result;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (tokens, experts, top_k, f, h) = (32, 8, 2, 16, 32);

    let x = TokenMatrix::random(tokens, f, 1.0, &mut rng);
    let routing = RoutingTable::synthetic_uniform(tokens, experts, top_k, 42)?;
    let weights: Vec<ExpertWeights> = (0..experts)
        .map(|_| {
            ExpertWeights::new(
                TokenMatrix::random(f, h, 1.0, &mut rng),
                TokenMatrix::random(h, f, 1.0, &mut rng),
            )
        })
        .collect::<Result<_>>()?;

    println!("routing ({tokens} tokens, top-{top_k} of {experts} experts):");
    let counts = routing.expert_token_counts();
    for (e, c) in counts.iter().enumerate() {
        println!("  expert {e}: {c} tokens");
    }

    // How the round-robin router splits one expert's queue across CUs.
    let pending = routing.tokens_for_expert(0);
    for cus in [1, 2, 4] {
        let groups = router_round_robin(&pending, cus);
        let sizes: Vec<usize> = groups.iter().map(Vec::len).collect();
        println!(
            "expert 0 queue {} tokens over {cus} CU(s): group sizes {sizes:?}",
            pending.len()
        );
    }

    let want = reference_moe(&x, &routing, &weights)?;
    for params in [
        LinearKernelParams { tile_in: 1, tile_out: 1, cus: 1 },
        LinearKernelParams { tile_in: 4, tile_out: 8, cus: 2 },
        LinearKernelParams { tile_in: 16, tile_out: 16, cus: 4 },
    ] {
        let (out, trace) = moe_forward(&x, &routing, &weights, &params)?;
        println!(
            "tile {}x{} cus {}: span {:>6} cycles, {:>5} weight tile loads, {:>5} waves, max diff {:.2e}",
            params.tile_in,
            params.tile_out,
            params.cus,
            trace.cycle_count(),
            trace.count(EventKind::TileLoad),
            trace.count(EventKind::Wave),
            out.max_abs_diff(&want),
        );
    }
    Ok(())
}
