use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inputs to the double-buffered encoder pipeline: `layer_pairs` rounds of
/// (MSA block, MoE block) plus a constant for everything outside the encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineSpec {
    pub layer_pairs: u64,
    pub l_msa: u64,
    pub l_moe: u64,
    pub non_encoder_cycles: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    NonEncoder,
    Msa,
    Moe,
}

impl fmt::Display for BlockKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BlockKind::NonEncoder => write!(f, "non_encoder"),
            BlockKind::Msa => write!(f, "msa"),
            BlockKind::Moe => write!(f, "moe"),
        }
    }
}

/// Half-open `[start, end)` occupancy of one block instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interval {
    pub block: BlockKind,
    /// 1-based encoder layer; 0 for the non-encoder prologue.
    pub layer: u64,
    pub start: u64,
    pub end: u64,
}

/// Block schedule in start order. Zero-length blocks are omitted.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Timeline {
    pub intervals: Vec<Interval>,
}

impl Timeline {
    pub fn blocks_of(&self, kind: BlockKind) -> Vec<&Interval> {
        self.intervals.iter().filter(|iv| iv.block == kind).collect()
    }

    /// Line-oriented export: `block layer start end`, stable order.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for iv in &self.intervals {
            out.push_str(&format!("{} {} {} {}\n", iv.block, iv.layer, iv.start, iv.end));
        }
        out
    }

    /// Checks the buffer-swap schedule rules:
    /// no same-kind overlap, MoE of layer i only after MSA of layer i, and
    /// shared start cycles for MSA of layer i+1 and MoE of layer i.
    pub fn check_invariants(&self) -> Result<()> {
        for kind in [BlockKind::Msa, BlockKind::Moe] {
            let blocks = self.blocks_of(kind);
            for pair in blocks.windows(2) {
                if pair[1].start < pair[0].end {
                    return Err(Error::contract(format!(
                        "{kind} blocks overlap: layer {} ends at {}, layer {} starts at {}",
                        pair[0].layer, pair[0].end, pair[1].layer, pair[1].start
                    )));
                }
            }
        }
        let find = |kind: BlockKind, layer: u64| {
            self.intervals
                .iter()
                .find(|iv| iv.block == kind && iv.layer == layer)
        };
        for moe in self.blocks_of(BlockKind::Moe) {
            if let Some(msa) = find(BlockKind::Msa, moe.layer) {
                if moe.start < msa.end {
                    return Err(Error::contract(format!(
                        "moe {} starts at {} before its msa ends at {}",
                        moe.layer, moe.start, msa.end
                    )));
                }
            }
            if let Some(next_msa) = find(BlockKind::Msa, moe.layer + 1) {
                if next_msa.start != moe.start {
                    return Err(Error::contract(format!(
                        "buffer swap broken at layer {}: msa {} starts at {}, moe starts at {}",
                        moe.layer,
                        moe.layer + 1,
                        next_msa.start,
                        moe.start
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Walks the buffer-swap schedule round by round: the first MSA runs alone,
/// then each round launches MoE of layer i together with MSA of layer i+1
/// and ends when the slower of the two finishes, and the last MoE drains.
pub fn simulate_layer_pipeline(spec: &PipelineSpec) -> (u64, Timeline) {
    let mut timeline = Timeline::default();
    let mut push = |block: BlockKind, layer: u64, start: u64, len: u64| {
        if len > 0 {
            timeline.intervals.push(Interval { block, layer, start, end: start + len });
        }
    };

    push(BlockKind::NonEncoder, 0, 0, spec.non_encoder_cycles);
    let mut cursor = spec.non_encoder_cycles;
    if spec.layer_pairs == 0 {
        return (cursor, timeline);
    }

    push(BlockKind::Msa, 1, cursor, spec.l_msa);
    cursor += spec.l_msa;
    for layer in 1..=spec.layer_pairs {
        push(BlockKind::Moe, layer, cursor, spec.l_moe);
        if layer < spec.layer_pairs {
            push(BlockKind::Msa, layer + 1, cursor, spec.l_msa);
            cursor += spec.l_msa.max(spec.l_moe);
        } else {
            cursor += spec.l_moe;
        }
    }
    (cursor, timeline)
}
