//! Fused softmax + weighted sum: one division per row, same numbers as the
//! classic 3-pass version.
//!
//! ```text
//! cargo run --example softmax_fusion
//! ```

use moesim::kernels::fused_softmax_weighted_sum;
use moesim::workload::{safe_softmax_3pass, TokenMatrix};
use moesim::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);

    // One hand-sized row first so the numbers are easy to follow.
    let scores = [1.0, 2.0, 3.0];
    let v = TokenMatrix::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]])?;
    let row_max = 3.0;
    let fused = fused_softmax_weighted_sum(&scores, row_max, &v)?;
    let weights = safe_softmax_3pass(&scores)?;
    println!("scores   {scores:?}");
    println!("weights  [{:.6}, {:.6}, {:.6}]", weights[0], weights[1], weights[2]);
    println!("fused    [{:.6}, {:.6}]  ({} division)", fused.values[0], fused.values[1], fused.divisions);

    // Then a stress sweep across magnitudes that would overflow a naive
    // exp-then-normalize implementation.
    let mut worst: f64 = 0.0;
    let rows = 2000;
    for i in 0..rows {
        let n = rng.gen_range(1..=256);
        let scale = [1.0, 64.0, 1e3][i % 3];
        let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(-scale..scale)).collect();
        let v = TokenMatrix::random(n, 8, 1.0, &mut rng);
        let row_max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let fused = fused_softmax_weighted_sum(&scores, row_max, &v)?;
        assert_eq!(fused.divisions, 1);
        let weights = safe_softmax_3pass(&scores)?;
        for c in 0..8 {
            let want: f64 = (0..n).map(|r| weights[r] * v.get(r, c)).sum();
            worst = worst.max((fused.values[c] - want).abs());
        }
    }
    println!("{rows} random rows, score magnitudes up to 1e3");
    println!("worst |fused - 3-pass| = {worst:.3e}");
    Ok(())
}
