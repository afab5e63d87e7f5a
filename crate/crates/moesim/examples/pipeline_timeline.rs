//! Double-buffered MSA/MoE pipeline: the event-driven timeline, its
//! invariants, and the closed form it lands on.
//!
//! ```text
//! cargo run --example pipeline_timeline
//! ```

use moesim::costmodel::pipeline_total_cycles;
use moesim::simtime::{simulate_layer_pipeline, BlockKind, PipelineSpec};
use moesim::Result;

fn main() -> Result<()> {
    // Three layer pairs, MoE slower than MSA, a little prologue in front.
    let spec = PipelineSpec {
        layer_pairs: 3,
        l_msa: 10,
        l_moe: 14,
        non_encoder_cycles: 5,
    };
    let (total, timeline) = simulate_layer_pipeline(&spec);
    timeline.check_invariants()?;

    println!("block  layer  start  end");
    print!("{}", timeline.render());
    println!(
        "total {total} cycles; closed form {}",
        pipeline_total_cycles(spec.layer_pairs, spec.l_msa, spec.l_moe, spec.non_encoder_cycles)
    );

    // In steady state one new layer pair starts every max(l_msa, l_moe).
    let deep = PipelineSpec { layer_pairs: 8, l_msa: 10, l_moe: 14, non_encoder_cycles: 0 };
    let (_, timeline) = simulate_layer_pipeline(&deep);
    let starts: Vec<u64> = timeline.blocks_of(BlockKind::Msa).iter().map(|iv| iv.start).collect();
    let gaps: Vec<u64> = starts.windows(2).map(|w| w[1] - w[0]).collect();
    println!("\n8 pairs, msa 10 / moe 14: msa start-to-start gaps {gaps:?}");
    println!("steady-state period = max(10, 14) = {}", deep.l_msa.max(deep.l_moe));

    // When the MoE side is faster the MSA block sets the rhythm instead.
    let flipped = PipelineSpec { layer_pairs: 8, l_msa: 14, l_moe: 6, non_encoder_cycles: 0 };
    let (total, timeline) = simulate_layer_pipeline(&flipped);
    timeline.check_invariants()?;
    println!(
        "flipped (msa 14 / moe 6): total {total} = {}",
        pipeline_total_cycles(8, 14, 6, 0)
    );
    Ok(())
}
