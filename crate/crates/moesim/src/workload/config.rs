use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// MoE-ViT model description, loaded from a TOML file.
///
/// `moe_alternate = true` places a mixture-of-experts block in every second
/// encoder (the 2nd, 4th, ...); the remaining encoders run a dense
/// feed-forward, which the op counter treats as a single always-active
/// expert. `moe_alternate = false` describes an attention-only stack (no
/// feed-forward stage at all) — a plain dense-FFN ViT is instead expressed
/// as `experts = 1, top_k = 1, moe_alternate = true`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Encoder layer count.
    pub layers: usize,
    /// Token (patch) count per image.
    pub patches: usize,
    /// Embedding width F; must be divisible by `heads`.
    pub feat_dim: usize,
    /// Expert / feed-forward hidden width.
    pub hidden_dim: usize,
    /// Attention head count.
    pub heads: usize,
    /// Experts per MoE block.
    pub experts: usize,
    /// Activated experts per token.
    pub top_k: usize,
    /// Operand bit width q used by the resource models.
    pub bitwidth: u32,
    /// MoE block in every second encoder (see type-level docs).
    pub moe_alternate: bool,
    /// Fixed latency charged once for everything outside the encoder stack
    /// (patch embedding, head, ...).
    pub non_encoder_cycles: u64,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers < 1 {
            return Err(Error::domain("layers must be >= 1"));
        }
        if self.patches < 1 {
            return Err(Error::domain("patches must be >= 1"));
        }
        if self.feat_dim < 1 || self.hidden_dim < 1 {
            return Err(Error::domain("feat_dim and hidden_dim must be >= 1"));
        }
        if self.heads < 1 || self.feat_dim % self.heads != 0 {
            return Err(Error::domain(format!(
                "feat_dim {} must be divisible by heads {}",
                self.feat_dim, self.heads
            )));
        }
        if self.top_k < 1 || self.top_k > self.experts {
            return Err(Error::domain(format!(
                "top_k {} must satisfy 1 <= top_k <= experts {}",
                self.top_k, self.experts
            )));
        }
        if !(4..=32).contains(&self.bitwidth) {
            return Err(Error::domain(format!(
                "bitwidth {} must lie in 4..=32",
                self.bitwidth
            )));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.feat_dim / self.heads
    }

    /// (MSA, feed-forward) stage pairs driving the double-buffered pipeline;
    /// one pair per encoder layer.
    pub fn layer_pairs(&self) -> u64 {
        self.layers as u64
    }

    /// Encoders carrying a MoE block (the 2nd, 4th, ... when alternating).
    pub fn moe_layers(&self) -> usize {
        if self.moe_alternate {
            self.layers / 2
        } else {
            0
        }
    }

    /// Encoders with a dense feed-forward stage.
    pub fn dense_ff_layers(&self) -> usize {
        if self.moe_alternate {
            self.layers - self.layers / 2
        } else {
            0
        }
    }

    /// True when at least one encoder runs a MoE block.
    pub fn has_moe(&self) -> bool {
        self.moe_layers() > 0
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::parse(path, e.to_string()))?;
        let cfg: ModelConfig =
            toml::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
        cfg.validate()
            .map_err(|e| Error::parse(path, e.to_string()))?;
        Ok(cfg)
    }

    pub fn to_file(&self, path: &Path) -> Result<()> {
        let text = toml::to_string_pretty(self)
            .map_err(|e| Error::domain(format!("serialize model config: {e}")))?;
        std::fs::write(path, text)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ModelConfig {
        ModelConfig {
            layers: 4,
            patches: 16,
            feat_dim: 32,
            hidden_dim: 64,
            heads: 4,
            experts: 4,
            top_k: 2,
            bitwidth: 16,
            moe_alternate: true,
            non_encoder_cycles: 0,
        }
    }

    #[test]
    fn valid_config_passes() {
        assert!(tiny().validate().is_ok());
        assert_eq!(tiny().head_dim(), 8);
        assert_eq!(tiny().moe_layers(), 2);
        assert_eq!(tiny().dense_ff_layers(), 2);
    }

    #[test]
    fn heads_must_divide_feat_dim() {
        let mut cfg = tiny();
        cfg.heads = 5;
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("heads"), "message should name the field: {err}");
    }

    #[test]
    fn top_k_bounded_by_experts() {
        let mut cfg = tiny();
        cfg.top_k = 9;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn bitwidth_range_enforced() {
        let mut cfg = tiny();
        cfg.bitwidth = 2;
        assert!(cfg.validate().is_err());
        cfg.bitwidth = 33;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn toml_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.toml");
        tiny().to_file(&path).unwrap();
        let back = ModelConfig::from_file(&path).unwrap();
        assert_eq!(back, tiny());
    }

    #[test]
    fn attention_only_when_not_alternating() {
        let mut cfg = tiny();
        cfg.moe_alternate = false;
        assert!(!cfg.has_moe());
        assert_eq!(cfg.dense_ff_layers(), 0);
    }
}
