use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// FPGA resource budget and per-unit cost constants for one target device.
///
/// The exponential-unit costs (`d_exp`, `b_exp`), BRAM geometry and the
/// over-16-bit DSP factor (`psi_32`) are model data, not code: edit the
/// profile file to recalibrate without touching any formula.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlatformProfile {
    pub name: String,
    pub dsp_total: u64,
    pub bram_total: u64,
    /// Off-chip bandwidth budget in GB/s. Reported but not enforced: the
    /// budget check returns "unchecked" for bandwidth.
    pub bw_total: f64,
    pub clock_mhz: f64,
    /// DSPs consumed by one exponential unit.
    #[serde(default = "default_d_exp")]
    pub d_exp: u64,
    /// BRAMs consumed by one exponential unit.
    #[serde(default = "default_b_exp")]
    pub b_exp: u64,
    /// Data bits one BRAM port provides.
    #[serde(default = "default_bwidth")]
    pub bwidth: u32,
    /// Words one BRAM holds.
    #[serde(default = "default_bdepth")]
    pub bdepth: u32,
    /// DSP factor per multiplier for 16 < q <= 32.
    #[serde(default = "default_psi_32")]
    pub psi_32: f64,
}

fn default_d_exp() -> u64 {
    5
}
fn default_b_exp() -> u64 {
    2
}
fn default_bwidth() -> u32 {
    36
}
fn default_bdepth() -> u32 {
    1024
}
fn default_psi_32() -> f64 {
    4.0
}

impl PlatformProfile {
    /// Xilinx ZCU102 (XCZU9EG) budget from the vendor datasheet.
    pub fn zcu102() -> Self {
        PlatformProfile {
            name: "zcu102".into(),
            dsp_total: 2520,
            bram_total: 912,
            bw_total: 19.2,
            clock_mhz: 300.0,
            d_exp: default_d_exp(),
            b_exp: default_b_exp(),
            bwidth: default_bwidth(),
            bdepth: default_bdepth(),
            psi_32: default_psi_32(),
        }
    }

    /// Xilinx Alveo U280 budget from the vendor datasheet.
    pub fn u280() -> Self {
        PlatformProfile {
            name: "u280".into(),
            dsp_total: 9024,
            bram_total: 2016,
            bw_total: 460.0,
            clock_mhz: 200.0,
            d_exp: default_d_exp(),
            b_exp: default_b_exp(),
            bwidth: default_bwidth(),
            bdepth: default_bdepth(),
            psi_32: default_psi_32(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::domain("platform name must not be empty"));
        }
        if self.dsp_total == 0 {
            return Err(Error::domain("dsp_total must be positive"));
        }
        if self.bram_total == 0 {
            return Err(Error::domain("bram_total must be positive"));
        }
        if !(self.bw_total > 0.0) {
            return Err(Error::domain("bw_total must be positive"));
        }
        if !(self.clock_mhz > 0.0) {
            return Err(Error::domain("clock_mhz must be positive"));
        }
        if self.bwidth == 0 {
            return Err(Error::domain("bwidth must be positive"));
        }
        if self.bdepth == 0 {
            return Err(Error::domain("bdepth must be positive"));
        }
        if !(self.psi_32 > 0.0) {
            return Err(Error::domain("psi_32 must be positive"));
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let profile: PlatformProfile = toml::from_str(&text)
            .map_err(|e| Error::parse(path, e.to_string()))?;
        profile
            .validate()
            .map_err(|e| Error::parse(path, e.to_string()))?;
        Ok(profile)
    }

    pub fn to_file(&self, path: &Path) -> Result<()> {
        let text = toml::to_string_pretty(self)
            .map_err(|e| Error::parse(path, e.to_string()))?;
        std::fs::write(path, text)?;
        Ok(())
    }
}
