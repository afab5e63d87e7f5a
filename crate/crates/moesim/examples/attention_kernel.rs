//! Streaming multi-head attention kernel against the reference oracle, with
//! the cycle trace it emits along the way.
//!
//! ```text
//! cargo run --example attention_kernel
//! ```

use moesim::kernels::{attention_forward, AttentionKernelParams, EventKind};
use moesim::workload::{reference_attention, TokenMatrix};
use moesim::Result;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (n, heads, head_dim) = (24, 2, 8);
    let f = heads * head_dim;
    let q = TokenMatrix::random(n, f, 1.0, &mut rng);
    let k = TokenMatrix::random(n, f, 1.0, &mut rng);
    let v = TokenMatrix::random(n, f, 1.0, &mut rng);

    let want = reference_attention(&q, &k, &v, heads)?;

    // The same math runs under any tiling; only the trace changes.
    for params in [
        AttentionKernelParams { tile_a: 1, pes_a: 1 },
        AttentionKernelParams { tile_a: 4, pes_a: 3 },
        AttentionKernelParams { tile_a: 16, pes_a: 24 },
    ] {
        let (out, trace) = attention_forward(&q, &k, &v, heads, &params)?;
        trace.check_unit_monotonic()?;
        println!(
            "tile_a={:<2} pes_a={:<2}  span {:>5} cycles, {:>5} dot steps, {} fused rows, {} divisions, max diff {:.2e}",
            params.tile_a,
            params.pes_a,
            trace.cycle_count(),
            trace.count(EventKind::DotStep),
            trace.count(EventKind::FusedRow),
            trace.count(EventKind::Division),
            out.max_abs_diff(&want),
        );
    }

    // One division per (row, head) is the whole point of the fused kernel.
    let params = AttentionKernelParams { tile_a: 4, pes_a: 6 };
    let (_, trace) = attention_forward(&q, &k, &v, heads, &params)?;
    println!(
        "divisions = {} = {} rows x {} heads",
        trace.count(EventKind::Division),
        n,
        heads
    );
    Ok(())
}
