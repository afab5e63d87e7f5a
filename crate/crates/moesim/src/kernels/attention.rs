use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{EventKind, StreamTrace, UnitKind};
use crate::workload::TokenMatrix;

/// Streaming attention kernel shape: `tile_a` features per cycle per PE,
/// `pes_a` processing elements holding one query row each.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttentionKernelParams {
    pub tile_a: usize,
    pub pes_a: usize,
}

impl AttentionKernelParams {
    pub fn validate(&self) -> Result<()> {
        if self.tile_a < 1 || self.pes_a < 1 {
            return Err(Error::domain("tile_a and pes_a must be >= 1"));
        }
        Ok(())
    }
}

/// How the second softmax stage consumes a score row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum FusedSoftmaxMode {
    /// Stage 1 buffers the complete score row and its max, then stage 2
    /// streams exp + weighted sum with one final division.
    #[default]
    TwoStage,
    /// Flash-style running rescale: max/denominator/accumulator updated as
    /// scores arrive; still exactly one division at the end.
    OnlineRescale,
}

/// Round-by-round ownership of query rows: `rounds[r][pe]` is the row PE `pe`
/// holds during round `r` (`None` = idle lane in the final round).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QAssignment {
    pub rounds: Vec<Vec<Option<usize>>>,
}

/// Patch-reorder assignment: consecutive query rows pinned to the PE array,
/// `ceil(patch_count / pes_a)` rounds, every row owned exactly once.
pub fn reorder_assign_q(patch_count: usize, pes_a: usize) -> QAssignment {
    let mut rounds = Vec::new();
    let mut next = 0;
    while next < patch_count {
        let mut round = Vec::with_capacity(pes_a);
        for _ in 0..pes_a {
            if next < patch_count {
                round.push(Some(next));
                next += 1;
            } else {
                round.push(None);
            }
        }
        rounds.push(round);
    }
    QAssignment { rounds }
}

/// Stage-1 result for one (query row, head): scaled scores against every key
/// row, the running maximum, and one `dot_step` trace event per tile step.
#[derive(Debug, Clone)]
pub struct RowScores {
    pub scores: Vec<f64>,
    pub row_max: f64,
    pub trace: StreamTrace,
}

/// Streams key rows past one query row, `tile_a` features per step, scaling
/// by `1/sqrt(k_mat.cols())` and tracking the row max online.
pub fn streamed_row_scores(q_row: &[f64], k_mat: &TokenMatrix, tile_a: usize) -> Result<RowScores> {
    if tile_a < 1 {
        return Err(Error::domain("tile_a must be >= 1"));
    }
    if q_row.len() != k_mat.cols() {
        return Err(Error::domain(format!(
            "query row has {} features, keys have {}",
            q_row.len(),
            k_mat.cols()
        )));
    }
    let scale = 1.0 / (k_mat.cols() as f64).sqrt();
    let mut trace = StreamTrace::new();
    let mut cycle = 0u64;
    let mut scores = Vec::with_capacity(k_mat.rows());
    let mut row_max = f64::NEG_INFINITY;
    for j in 0..k_mat.rows() {
        let k_row = k_mat.row(j);
        let mut dot = 0.0;
        let mut f = 0;
        while f < k_row.len() {
            let hi = (f + tile_a).min(k_row.len());
            for idx in f..hi {
                dot += q_row[idx] * k_row[idx];
            }
            trace.push(cycle, UnitKind::Pe, 0, EventKind::DotStep);
            cycle += 1;
            f = hi;
        }
        let s = dot * scale;
        row_max = row_max.max(s);
        scores.push(s);
    }
    Ok(RowScores {
        scores,
        row_max,
        trace,
    })
}

/// Output of the fused softmax/weighted-sum stage for one (row, head).
#[derive(Debug, Clone)]
pub struct FusedRow {
    pub values: Vec<f64>,
    /// Division operations performed; the kernel contract is exactly one.
    pub divisions: u64,
}

/// Single-pass softmax-times-V: accumulates `exp(s_i - row_max) * V_i` and the
/// denominator together, then divides once. `row_max` must be the true row
/// maximum (stage 1 supplies it); a stale value is a contract violation.
pub fn fused_softmax_weighted_sum(
    scores: &[f64],
    row_max: f64,
    v_mat: &TokenMatrix,
) -> Result<FusedRow> {
    check_fused_inputs(scores, v_mat)?;
    let true_max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if (true_max - row_max).abs() > 1e-9 {
        return Err(Error::contract(format!(
            "row_max {row_max} does not match score maximum {true_max}"
        )));
    }
    let cols = v_mat.cols();
    let mut acc = vec![0.0; cols];
    let mut denom = 0.0;
    for (j, &s) in scores.iter().enumerate() {
        let e = (s - row_max).exp();
        denom += e;
        let v_row = v_mat.row(j);
        for c in 0..cols {
            acc[c] += e * v_row[c];
        }
    }
    let recip = 1.0 / denom; // the one division
    for a in &mut acc {
        *a *= recip;
    }
    Ok(FusedRow {
        values: acc,
        divisions: 1,
    })
}

/// Flash-style alternative: running max with rescale of the partial
/// accumulator and denominator; numerically equivalent, same single division.
pub fn fused_softmax_weighted_sum_online(scores: &[f64], v_mat: &TokenMatrix) -> Result<FusedRow> {
    check_fused_inputs(scores, v_mat)?;
    let cols = v_mat.cols();
    let mut acc = vec![0.0; cols];
    let mut denom = 0.0;
    let mut running_max = f64::NEG_INFINITY;
    for (j, &s) in scores.iter().enumerate() {
        if s > running_max {
            let rescale = if running_max.is_finite() {
                (running_max - s).exp()
            } else {
                0.0
            };
            denom *= rescale;
            for a in &mut acc {
                *a *= rescale;
            }
            running_max = s;
        }
        let e = (s - running_max).exp();
        denom += e;
        let v_row = v_mat.row(j);
        for c in 0..cols {
            acc[c] += e * v_row[c];
        }
    }
    let recip = 1.0 / denom; // the one division
    for a in &mut acc {
        *a *= recip;
    }
    Ok(FusedRow {
        values: acc,
        divisions: 1,
    })
}

fn check_fused_inputs(scores: &[f64], v_mat: &TokenMatrix) -> Result<()> {
    if scores.is_empty() {
        return Err(Error::domain("fused softmax over an empty score row"));
    }
    if scores.len() != v_mat.rows() {
        return Err(Error::domain(format!(
            "{} scores against {} value rows",
            scores.len(),
            v_mat.rows()
        )));
    }
    Ok(())
}

/// Full streaming attention emulation.
///
/// Stage 1 streams every key patch past the PE array, one `tile_a`-wide
/// feature tile per cycle over the full feature dim (tiles may span head
/// boundaries); per-head max registers update as each patch completes.
/// Stage 2 runs the fused softmax against V per (row, head), pipelined behind
/// the stream, so the trace's cycle span is exactly
/// `ceil(N/pes_a) * N * ceil(F/tile_a)`.
pub fn attention_forward(
    q: &TokenMatrix,
    k: &TokenMatrix,
    v: &TokenMatrix,
    heads: usize,
    params: &AttentionKernelParams,
) -> Result<(TokenMatrix, StreamTrace)> {
    attention_forward_with_mode(q, k, v, heads, params, FusedSoftmaxMode::TwoStage)
}

pub fn attention_forward_with_mode(
    q: &TokenMatrix,
    k: &TokenMatrix,
    v: &TokenMatrix,
    heads: usize,
    params: &AttentionKernelParams,
    mode: FusedSoftmaxMode,
) -> Result<(TokenMatrix, StreamTrace)> {
    params.validate()?;
    let n = q.rows();
    let f = q.cols();
    if k.rows() != n || v.rows() != n || k.cols() != f || v.cols() != f {
        return Err(Error::domain("attention kernel shape mismatch".to_string()));
    }
    if heads < 1 || f % heads != 0 {
        return Err(Error::domain(format!(
            "feat dim {f} not divisible by heads {heads}"
        )));
    }
    let hd = f / heads;
    let scale = 1.0 / (hd as f64).sqrt();
    let v_heads: Vec<TokenMatrix> = (0..heads)
        .map(|h| v.column_block(h * hd, hd))
        .collect::<Result<_>>()?;

    let assignment = reorder_assign_q(n, params.pes_a);
    let mut out = TokenMatrix::zeros(n, f);
    let mut trace = StreamTrace::new();
    let mut cycle = 0u64;

    for round in &assignment.rounds {
        // scores[pe][head][key], maxes[pe][head]
        let mut scores = vec![vec![Vec::with_capacity(n); heads]; params.pes_a];
        let mut maxes = vec![vec![f64::NEG_INFINITY; heads]; params.pes_a];

        for j in 0..n {
            let k_row = k.row(j);
            let mut acc = vec![vec![0.0; heads]; params.pes_a];
            let mut fstart = 0;
            while fstart < f {
                let hi = (fstart + params.tile_a).min(f);
                for (pe, owner) in round.iter().enumerate() {
                    let Some(row) = owner else { continue };
                    let q_row = q.row(*row);
                    for idx in fstart..hi {
                        acc[pe][idx / hd] += q_row[idx] * k_row[idx];
                    }
                    trace.push(cycle, UnitKind::Pe, pe as u32, EventKind::DotStep);
                }
                cycle += 1;
                fstart = hi;
            }
            for (pe, owner) in round.iter().enumerate() {
                if owner.is_none() {
                    continue;
                }
                for h in 0..heads {
                    let s = acc[pe][h] * scale;
                    maxes[pe][h] = maxes[pe][h].max(s);
                    scores[pe][h].push(s);
                }
            }
        }

        // Stage 2, pipelined behind the stream: charged to the last stream cycle.
        let stage2_cycle = cycle.saturating_sub(1);
        for (pe, owner) in round.iter().enumerate() {
            let Some(row) = owner else { continue };
            for h in 0..heads {
                let fused = match mode {
                    FusedSoftmaxMode::TwoStage => {
                        fused_softmax_weighted_sum(&scores[pe][h], maxes[pe][h], &v_heads[h])?
                    }
                    FusedSoftmaxMode::OnlineRescale => {
                        fused_softmax_weighted_sum_online(&scores[pe][h], &v_heads[h])?
                    }
                };
                if fused.divisions != 1 {
                    return Err(Error::contract(format!(
                        "row {row} head {h}: {} divisions, expected exactly 1",
                        fused.divisions
                    )));
                }
                trace.push(stage2_cycle, UnitKind::Pe, pe as u32, EventKind::FusedRow);
                trace.push(stage2_cycle, UnitKind::Pe, pe as u32, EventKind::Division);
                for d in 0..hd {
                    out.set(*row, h * hd + d, fused.values[d]);
                }
            }
        }
    }
    Ok((out, trace))
}
