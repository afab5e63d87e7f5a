use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{EventKind, StreamTrace, UnitKind};
use crate::workload::{gelu, ExpertWeights, RoutingTable, TokenMatrix};

/// Reusable linear kernel shape: weight tiles of `tile_in` x `tile_out`
/// broadcast to `cus` compute units, tokens distributed round-robin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinearKernelParams {
    pub tile_in: usize,
    pub tile_out: usize,
    pub cus: usize,
}

impl LinearKernelParams {
    pub fn validate(&self) -> Result<()> {
        if self.tile_in < 1 || self.tile_out < 1 || self.cus < 1 {
            return Err(Error::domain("tile_in, tile_out and cus must be >= 1"));
        }
        Ok(())
    }

    /// Words per broadcast weight tile.
    pub fn tile_wt(&self) -> usize {
        self.tile_in * self.tile_out
    }
}

/// Round-robin token router: pending token at position `j` goes to CU
/// `j mod cus`. Group sizes differ by at most one and concatenating the
/// groups in wave order reconstructs the pending list.
pub fn router_round_robin(pending: &[usize], cus: usize) -> Vec<Vec<usize>> {
    let mut groups = vec![Vec::with_capacity(pending.len().div_ceil(cus.max(1))); cus.max(1)];
    for (j, &tok) in pending.iter().enumerate() {
        groups[j % cus.max(1)].push(tok);
    }
    groups
}

/// Tiled matrix product against the resident weight: weight tiles outer
/// (one `tile_load` each when `emit_tile_loads`), token waves inner (one
/// `wave` event per active CU per cycle). Cycle span = tiles * waves.
fn run_tiled(
    tokens: &TokenMatrix,
    weight: &TokenMatrix,
    params: &LinearKernelParams,
    trace: &mut StreamTrace,
    cycle: &mut u64,
    emit_tile_loads: bool,
) -> Result<TokenMatrix> {
    if tokens.cols() != weight.rows() {
        return Err(Error::domain(format!(
            "linear shape mismatch: tokens {}x{}, weight {}x{}",
            tokens.rows(),
            tokens.cols(),
            weight.rows(),
            weight.cols()
        )));
    }
    let groups = router_round_robin(&(0..tokens.rows()).collect::<Vec<_>>(), params.cus);
    let waves = tokens.rows().div_ceil(params.cus);
    let (in_dim, out_dim) = (weight.rows(), weight.cols());
    let mut out = TokenMatrix::zeros(tokens.rows(), out_dim);

    let mut i0 = 0;
    while i0 < in_dim {
        let i_hi = (i0 + params.tile_in).min(in_dim);
        let mut o0 = 0;
        while o0 < out_dim {
            let o_hi = (o0 + params.tile_out).min(out_dim);
            if emit_tile_loads {
                trace.push(*cycle, UnitKind::Loader, 0, EventKind::TileLoad);
            }
            for wave in 0..waves {
                for (cu, group) in groups.iter().enumerate() {
                    let Some(&tok) = group.get(wave) else { continue };
                    for i in i0..i_hi {
                        let x = tokens.get(tok, i);
                        for o in o0..o_hi {
                            out.add_assign(tok, o, x * weight.get(i, o));
                        }
                    }
                    trace.push(*cycle, UnitKind::Cu, cu as u32, EventKind::Wave);
                }
                *cycle += 1;
            }
            o0 = o_hi;
        }
        i0 = i_hi;
    }
    Ok(out)
}

/// Dense linear pass on the reusable kernel. Weight tiles stream concurrently
/// with compute (zero load overhead), so the trace spans
/// `ceil(tokens/cus) * ceil(in/tile_in) * ceil(out/tile_out)` cycles and holds
/// one `tile_load` event per weight tile.
pub fn linear_forward(
    tokens: &TokenMatrix,
    weight: &TokenMatrix,
    params: &LinearKernelParams,
) -> Result<(TokenMatrix, StreamTrace)> {
    params.validate()?;
    let mut trace = StreamTrace::new();
    let mut cycle = 0;
    let out = run_tiled(tokens, weight, params, &mut trace, &mut cycle, true)?;
    Ok((out, trace))
}

/// Expert-by-expert MoE emulation: for each activated expert, a serial weight
/// load phase (`tile_load` events spread over `ceil(2*F*H / tile_wt)` cycles,
/// one event per W1/W2 tile), then `gelu(x W1) W2` on the gathered tokens via
/// the tiled kernel; gate-weighted rows scatter back in token order. Trace
/// cycle span equals the analytical MoE latency.
pub fn moe_forward(
    tokens: &TokenMatrix,
    routing: &RoutingTable,
    experts: &[ExpertWeights],
    params: &LinearKernelParams,
) -> Result<(TokenMatrix, StreamTrace)> {
    params.validate()?;
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
    let mut trace = StreamTrace::new();
    let mut cycle = 0u64;

    for (e, ew) in experts.iter().enumerate() {
        let toks = routing.tokens_for_expert(e);
        if toks.is_empty() {
            continue;
        }
        if ew.w1.rows() != f || ew.w2.cols() != f {
            return Err(Error::domain(format!(
                "expert {e}: weight dims do not match feat dim {f}"
            )));
        }
        let hidden_dim = ew.w1.cols();

        // Serial load phase: one expert's W1+W2 words at one tile per cycle.
        let words = 2 * f * hidden_dim;
        let load_cycles = (words as u64).div_ceil(params.tile_wt() as u64);
        let tile_count = (f.div_ceil(params.tile_in) * hidden_dim.div_ceil(params.tile_out)
            + hidden_dim.div_ceil(params.tile_in) * f.div_ceil(params.tile_out))
            as u64;
        for t in 0..tile_count {
            trace.push(
                cycle + t * load_cycles / tile_count,
                UnitKind::Loader,
                0,
                EventKind::TileLoad,
            );
        }
        cycle += load_cycles;

        let gathered = tokens.gather_rows(&toks)?;
        let hidden =
            run_tiled(&gathered, &ew.w1, params, &mut trace, &mut cycle, false)?.map(gelu);
        let expert_out = run_tiled(&hidden, &ew.w2, params, &mut trace, &mut cycle, false)?;

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
    Ok((out, trace))
}
