use crate::error::{Error, Result};
use crate::workload::{RoutingTable, TokenMatrix};

/// Numerically safe softmax in three explicit passes:
/// row max, sum of shifted exponentials, normalized scores.
pub fn safe_softmax_3pass(x: &[f64]) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::domain("softmax over an empty row"));
    }
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let l: f64 = x.iter().map(|&v| (v - m).exp()).sum();
    Ok(x.iter().map(|&v| (v - m).exp() / l).collect())
}

/// GELU in its tanh form; shared by the reference MoE path and the kernel
/// emulation so only the tiling/routing logic is under test.
pub fn gelu(x: f64) -> f64 {
    const C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
    0.5 * x * (1.0 + (C * (x + 0.044_715 * x * x * x)).tanh())
}

/// Multi-head attention, the slow way: per head,
/// `softmax(Q Kᵀ / sqrt(head_dim)) V`, heads concatenated.
pub fn reference_attention(
    q: &TokenMatrix,
    k: &TokenMatrix,
    v: &TokenMatrix,
    heads: usize,
) -> Result<TokenMatrix> {
    let n = q.rows();
    let f = q.cols();
    if k.rows() != n || v.rows() != n || k.cols() != f || v.cols() != f {
        return Err(Error::domain(format!(
            "attention shape mismatch: q {}x{}, k {}x{}, v {}x{}",
            n,
            f,
            k.rows(),
            k.cols(),
            v.rows(),
            v.cols()
        )));
    }
    if heads < 1 || f % heads != 0 {
        return Err(Error::domain(format!(
            "feat dim {f} not divisible by heads {heads}"
        )));
    }
    let hd = f / heads;
    let scale = 1.0 / (hd as f64).sqrt();
    let mut out = TokenMatrix::zeros(n, f);
    for h in 0..heads {
        let qh = q.column_block(h * hd, hd)?;
        let kh = k.column_block(h * hd, hd)?;
        let vh = v.column_block(h * hd, hd)?;
        for i in 0..n {
            let mut scores = Vec::with_capacity(n);
            for j in 0..n {
                let dot: f64 = (0..hd).map(|d| qh.get(i, d) * kh.get(j, d)).sum();
                scores.push(dot * scale);
            }
            let weights = safe_softmax_3pass(&scores)?;
            for d in 0..hd {
                let acc: f64 = (0..n).map(|j| weights[j] * vh.get(j, d)).sum();
                out.set(i, h * hd + d, acc);
            }
        }
    }
    Ok(out)
}

/// Top-k gating: per token, logits against `gate` (feat_dim x experts),
/// the k largest logits win (ties to the lower expert index), and the gate
/// weights are a softmax over the selected logits only.
pub fn gate_topk(tokens: &TokenMatrix, gate: &TokenMatrix, top_k: usize) -> Result<RoutingTable> {
    if tokens.cols() != gate.rows() {
        return Err(Error::domain(format!(
            "gate shape mismatch: tokens {}x{}, gate {}x{}",
            tokens.rows(),
            tokens.cols(),
            gate.rows(),
            gate.cols()
        )));
    }
    let experts = gate.cols();
    if top_k < 1 || top_k > experts {
        return Err(Error::domain(format!(
            "top_k {top_k} must satisfy 1 <= top_k <= experts {experts}"
        )));
    }
    let mut assignments = Vec::with_capacity(tokens.rows());
    for t in 0..tokens.rows() {
        let mut logits = Vec::with_capacity(experts);
        for e in 0..experts {
            let dot: f64 = (0..tokens.cols())
                .map(|c| tokens.get(t, c) * gate.get(c, e))
                .sum();
            logits.push((e, dot));
        }
        // Descending logit, ties to the lower index.
        logits.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        logits.truncate(top_k);
        let selected: Vec<f64> = logits.iter().map(|&(_, l)| l).collect();
        let weights = safe_softmax_3pass(&selected)?;
        assignments.push(
            logits
                .iter()
                .zip(weights)
                .map(|(&(e, _), w)| (e, w))
                .collect(),
        );
    }
    RoutingTable::new(experts, assignments)
}

/// One expert's MLP weights: `w1` is feat_dim x hidden, `w2` hidden x feat_dim.
#[derive(Debug, Clone)]
pub struct ExpertWeights {
    pub w1: TokenMatrix,
    pub w2: TokenMatrix,
}

impl ExpertWeights {
    pub fn new(w1: TokenMatrix, w2: TokenMatrix) -> Result<Self> {
        if w1.cols() != w2.rows() {
            return Err(Error::domain(format!(
                "expert weight shapes disagree: w1 {}x{}, w2 {}x{}",
                w1.rows(),
                w1.cols(),
                w2.rows(),
                w2.cols()
            )));
        }
        Ok(ExpertWeights { w1, w2 })
    }
}

/// Expert-by-expert MoE reference: for each expert, gather its tokens, run
/// `gelu(x W1) W2`, and scatter the gate-weighted rows back. Matches the
/// accelerator's computation order (one expert's weights resident at a time).
pub fn reference_moe(
    tokens: &TokenMatrix,
    routing: &RoutingTable,
    experts: &[ExpertWeights],
) -> Result<TokenMatrix> {
    if routing.tokens() != tokens.rows() {
        return Err(Error::domain(format!(
            "routing covers {} tokens, input has {}",
            routing.tokens(),
            tokens.rows()
        )));
    }
    if routing.experts() > experts.len() {
        return Err(Error::domain(format!(
            "routing references {} experts, weights provided for {}",
            routing.experts(),
            experts.len()
        )));
    }
    let f = tokens.cols();
    let mut out = TokenMatrix::zeros(tokens.rows(), f);
    for (e, ew) in experts.iter().enumerate() {
        if ew.w1.rows() != f || ew.w2.cols() != f {
            return Err(Error::domain(format!(
                "expert {e}: weight dims do not match feat dim {f}"
            )));
        }
        let toks = routing.tokens_for_expert(e);
        if toks.is_empty() {
            continue;
        }
        let gathered = tokens.gather_rows(&toks)?;
        let hidden = gathered.matmul(&ew.w1)?.map(gelu);
        let expert_out = hidden.matmul(&ew.w2)?;
        for (i, &tok) in toks.iter().enumerate() {
            let w = routing
                .assignment(tok)
                .iter()
                .find(|&&(id, _)| id == e)
                .map(|&(_, w)| w)
                .expect("tokens_for_expert returned a token without this expert");
            for c in 0..f {
                out.add_assign(tok, c, w * expert_out.get(i, c));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn softmax_uniform_row() {
        let s = safe_softmax_3pass(&[0.0, 0.0, 0.0, 0.0]).unwrap();
        for v in s {
            assert!(close(v, 0.25, 1e-12));
        }
    }

    #[test]
    fn softmax_no_overflow_at_large_magnitudes() {
        let s = safe_softmax_3pass(&[1000.0, 1000.0]).unwrap();
        assert!(close(s[0], 0.5, 1e-12));
        assert!(close(s[1], 0.5, 1e-12));
        let t = safe_softmax_3pass(&[1e4, 0.0, -1e4]).unwrap();
        assert!(t.iter().all(|v| v.is_finite()));
        assert!(close(t.iter().sum::<f64>(), 1.0, 1e-12));
    }

    #[test]
    fn softmax_two_element_spot_value() {
        let s = safe_softmax_3pass(&[1.0, 2.0]).unwrap();
        assert!(close(s[0], 0.26894, 1e-5));
        assert!(close(s[1], 0.73106, 1e-5));
    }

    #[test]
    fn softmax_rejects_empty_row() {
        assert!(safe_softmax_3pass(&[]).is_err());
    }

    // Deliberately independent oracle: single flat loop nest, inline softmax.
    fn brute_force_attention(
        q: &TokenMatrix,
        k: &TokenMatrix,
        v: &TokenMatrix,
        heads: usize,
    ) -> TokenMatrix {
        let n = q.rows();
        let hd = q.cols() / heads;
        let mut out = TokenMatrix::zeros(n, q.cols());
        for h in 0..heads {
            for i in 0..n {
                let mut scores = vec![0.0; n];
                for j in 0..n {
                    for d in 0..hd {
                        scores[j] += q.get(i, h * hd + d) * k.get(j, h * hd + d);
                    }
                    scores[j] /= (hd as f64).sqrt();
                }
                let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = scores.iter().map(|&s| (s - m).exp()).collect();
                let denom: f64 = exps.iter().sum();
                for d in 0..hd {
                    let mut acc = 0.0;
                    for j in 0..n {
                        acc += exps[j] / denom * v.get(j, h * hd + d);
                    }
                    out.set(i, h * hd + d, acc);
                }
            }
        }
        out
    }

    #[test]
    fn attention_matches_independent_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let q = TokenMatrix::random(4, 8, 1.0, &mut rng);
        let k = TokenMatrix::random(4, 8, 1.0, &mut rng);
        let v = TokenMatrix::random(4, 8, 1.0, &mut rng);
        let got = reference_attention(&q, &k, &v, 2).unwrap();
        let want = brute_force_attention(&q, &k, &v, 2);
        assert!(got.max_abs_diff(&want) < 1e-9);
    }

    #[test]
    fn attention_single_token_passes_v_through() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let q = TokenMatrix::random(1, 6, 1.0, &mut rng);
        let k = TokenMatrix::random(1, 6, 1.0, &mut rng);
        let v = TokenMatrix::random(1, 6, 1.0, &mut rng);
        let got = reference_attention(&q, &k, &v, 3).unwrap();
        assert!(got.max_abs_diff(&v) < 1e-12);
    }

    #[test]
    fn attention_identical_keys_average_v() {
        // All K rows equal -> uniform softmax -> every output row is the
        // column mean of V.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let q = TokenMatrix::random(5, 4, 1.0, &mut rng);
        let k_row: Vec<f64> = (0..4).map(|i| 0.3 * i as f64).collect();
        let k = TokenMatrix::from_rows(vec![k_row; 5]).unwrap();
        let v = TokenMatrix::random(5, 4, 1.0, &mut rng);
        let got = reference_attention(&q, &k, &v, 2).unwrap();
        for i in 0..5 {
            for c in 0..4 {
                let mean: f64 = (0..5).map(|j| v.get(j, c)).sum::<f64>() / 5.0;
                assert!(close(got.get(i, c), mean, 1e-12));
            }
        }
    }

    #[test]
    fn attention_rejects_shape_mismatch() {
        let q = TokenMatrix::zeros(2, 4);
        let k = TokenMatrix::zeros(3, 4);
        let v = TokenMatrix::zeros(2, 4);
        assert!(reference_attention(&q, &k, &v, 2).is_err());
    }

    #[test]
    fn gate_selects_top_two() {
        // One feature, identity token: logits equal the gate row.
        let tokens = TokenMatrix::from_rows(vec![vec![1.0]]).unwrap();
        let gate = TokenMatrix::from_rows(vec![vec![2.0, 1.0, 0.5, -1.0]]).unwrap();
        let rt = gate_topk(&tokens, &gate, 2).unwrap();
        let a = rt.assignment(0);
        assert_eq!(a[0].0, 0);
        assert_eq!(a[1].0, 1);
        assert!(close(a[0].1, 0.73106, 1e-5));
        assert!(close(a[1].1, 0.26894, 1e-5));
    }

    #[test]
    fn gate_ties_break_to_lower_index() {
        let tokens = TokenMatrix::from_rows(vec![vec![1.0]]).unwrap();
        let gate = TokenMatrix::from_rows(vec![vec![0.7, 0.7, 0.7, 0.7]]).unwrap();
        let rt = gate_topk(&tokens, &gate, 2).unwrap();
        let a = rt.assignment(0);
        assert_eq!((a[0].0, a[1].0), (0, 1));
        assert!(close(a[0].1, 0.5, 1e-12));
        assert!(close(a[1].1, 0.5, 1e-12));
    }

    #[test]
    fn gate_rejects_k_above_expert_count() {
        let tokens = TokenMatrix::from_rows(vec![vec![1.0]]).unwrap();
        let gate = TokenMatrix::from_rows(vec![vec![1.0, 2.0]]).unwrap();
        assert!(gate_topk(&tokens, &gate, 3).is_err());
    }

    fn random_experts(count: usize, f: usize, h: usize, rng: &mut ChaCha8Rng) -> Vec<ExpertWeights> {
        (0..count)
            .map(|_| {
                ExpertWeights::new(
                    TokenMatrix::random(f, h, 1.0, rng),
                    TokenMatrix::random(h, f, 1.0, rng),
                )
                .unwrap()
            })
            .collect()
    }

    // Token-major oracle: walks tokens, not experts.
    fn token_major_moe(
        tokens: &TokenMatrix,
        routing: &RoutingTable,
        experts: &[ExpertWeights],
    ) -> TokenMatrix {
        let f = tokens.cols();
        let mut out = TokenMatrix::zeros(tokens.rows(), f);
        for t in 0..tokens.rows() {
            for &(e, w) in routing.assignment(t) {
                let ew = &experts[e];
                let h = ew.w1.cols();
                let mut hidden = vec![0.0; h];
                for j in 0..h {
                    for c in 0..f {
                        hidden[j] += tokens.get(t, c) * ew.w1.get(c, j);
                    }
                    hidden[j] = gelu(hidden[j]);
                }
                for c in 0..f {
                    let mut acc = 0.0;
                    for j in 0..h {
                        acc += hidden[j] * ew.w2.get(j, c);
                    }
                    out.add_assign(t, c, w * acc);
                }
            }
        }
        out
    }

    #[test]
    fn moe_expert_major_matches_token_major() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let tokens = TokenMatrix::random(8, 6, 1.0, &mut rng);
        let routing = RoutingTable::synthetic_uniform(8, 4, 2, 7).unwrap();
        let experts = random_experts(4, 6, 10, &mut rng);
        let got = reference_moe(&tokens, &routing, &experts).unwrap();
        let want = token_major_moe(&tokens, &routing, &experts);
        assert!(got.max_abs_diff(&want) < 1e-9);
    }

    #[test]
    fn moe_single_expert_equals_plain_mlp() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let tokens = TokenMatrix::random(5, 4, 1.0, &mut rng);
        let experts = random_experts(1, 4, 8, &mut rng);
        let routing =
            RoutingTable::new(1, vec![vec![(0, 1.0)]; 5]).unwrap();
        let got = reference_moe(&tokens, &routing, &experts).unwrap();
        let want = tokens.matmul(&experts[0].w1).unwrap().map(gelu).matmul(&experts[0].w2).unwrap();
        assert!(got.max_abs_diff(&want) < 1e-12);
    }

    #[test]
    fn moe_zero_w2_gives_zero_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let tokens = TokenMatrix::random(3, 4, 1.0, &mut rng);
        let experts = vec![ExpertWeights::new(
            TokenMatrix::random(4, 6, 1.0, &mut rng),
            TokenMatrix::zeros(6, 4),
        )
        .unwrap()];
        let routing = RoutingTable::new(1, vec![vec![(0, 1.0)]; 3]).unwrap();
        let got = reference_moe(&tokens, &routing, &experts).unwrap();
        assert!(got.max_abs_diff(&TokenMatrix::zeros(3, 4)) < 1e-15);
    }

    #[test]
    fn moe_rejects_missing_expert_weights() {
        let tokens = TokenMatrix::zeros(2, 4);
        let routing = RoutingTable::new(3, vec![vec![(2, 1.0)]; 2]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let experts = random_experts(2, 4, 4, &mut rng);
        assert!(reference_moe(&tokens, &routing, &experts).is_err());
    }
}
