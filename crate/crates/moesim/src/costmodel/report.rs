use serde::{Deserialize, Serialize};

/// Per-kernel and total resource usage for one design point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceReport {
    pub dsp_attn: u64,
    pub bram_attn: u64,
    /// Summed over every linear-kernel instance in the design.
    pub dsp_linear: u64,
    pub bram_linear: u64,
    pub dsp_total_used: u64,
    pub bram_total_used: u64,
}

impl ResourceReport {
    pub fn compose(dsp_attn: u64, bram_attn: u64, dsp_linear: u64, bram_linear: u64) -> Self {
        ResourceReport {
            dsp_attn,
            bram_attn,
            dsp_linear,
            bram_linear,
            dsp_total_used: dsp_attn + dsp_linear,
            bram_total_used: bram_attn + bram_linear,
        }
    }

    /// Usage with one extra linear-kernel instance folded in (the MoE block).
    pub fn with_extra_linear(&self, dsp: u64, bram: u64) -> Self {
        ResourceReport::compose(
            self.dsp_attn,
            self.bram_attn,
            self.dsp_linear + dsp,
            self.bram_linear + bram,
        )
    }
}

/// Cycle counts for each pipeline block plus the composed total.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub cycles_attn: u64,
    pub cycles_msa: u64,
    pub cycles_moe: u64,
    pub cycles_non_encoder: u64,
    pub cycles_total: u64,
    /// Wall-clock total at the profile clock.
    pub total_ms: f64,
}

impl LatencyReport {
    pub fn compose(
        cycles_attn: u64,
        cycles_msa: u64,
        cycles_moe: u64,
        cycles_non_encoder: u64,
        layer_pairs: u64,
        clock_mhz: f64,
    ) -> Self {
        let cycles_total =
            crate::costmodel::pipeline_total_cycles(layer_pairs, cycles_msa, cycles_moe, cycles_non_encoder);
        LatencyReport {
            cycles_attn,
            cycles_msa,
            cycles_moe,
            cycles_non_encoder,
            cycles_total,
            total_ms: cycles_total as f64 / (clock_mhz * 1e3),
        }
    }
}
