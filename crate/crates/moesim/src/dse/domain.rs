use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::costmodel::HardwareParams;
use crate::dse::GaConfig;
use crate::error::{Error, Result};
use crate::kernels::LinearKernelParams;

/// Explicit candidate lists for every hardware parameter. The search never
/// invents values outside these lists, so a domain file pins the whole
/// design space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchDomain {
    pub num: Vec<usize>,
    pub tile_a: Vec<usize>,
    pub pes_a: Vec<usize>,
    pub tile_in: Vec<usize>,
    pub tile_out: Vec<usize>,
    pub cus: Vec<usize>,
}

impl Default for SearchDomain {
    fn default() -> Self {
        SearchDomain {
            num: vec![0, 1, 2, 3, 4],
            tile_a: vec![1, 2, 4, 8, 16],
            pes_a: vec![1, 2, 4, 7, 14, 28],
            tile_in: vec![1, 2, 4, 8, 16],
            tile_out: vec![1, 2, 4, 8, 16],
            cus: vec![1, 2, 4, 8, 16],
        }
    }
}

fn check_list(name: &str, list: &[usize], min: usize) -> Result<()> {
    if list.is_empty() {
        return Err(Error::domain(format!("domain list {name} is empty")));
    }
    if list[0] < min {
        return Err(Error::domain(format!("domain list {name} starts below {min}")));
    }
    if list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::domain(format!(
            "domain list {name} must be strictly increasing"
        )));
    }
    Ok(())
}

impl SearchDomain {
    pub fn validate(&self) -> Result<()> {
        check_list("num", &self.num, 0)?;
        check_list("tile_a", &self.tile_a, 1)?;
        check_list("pes_a", &self.pes_a, 1)?;
        check_list("tile_in", &self.tile_in, 1)?;
        check_list("tile_out", &self.tile_out, 1)?;
        check_list("cus", &self.cus, 1)
    }

    /// The five GA genome fields (everything except `num`, which the outer
    /// sweep fixes per invocation), in genome order.
    pub fn genome_lists(&self) -> [&[usize]; 5] {
        [&self.tile_a, &self.pes_a, &self.tile_in, &self.tile_out, &self.cus]
    }

    pub fn decode(&self, num: usize, genome: &[usize; 5]) -> HardwareParams {
        let lists = self.genome_lists();
        HardwareParams {
            num,
            tile_a: lists[0][genome[0]],
            pes_a: lists[1][genome[1]],
            tile_in: lists[2][genome[2]],
            tile_out: lists[3][genome[3]],
            cus: lists[4][genome[4]],
        }
    }

    /// Every (T_in, T_out, N_L) point, in domain order.
    pub fn moe_points(&self) -> Vec<LinearKernelParams> {
        let mut points =
            Vec::with_capacity(self.tile_in.len() * self.tile_out.len() * self.cus.len());
        for &tile_in in &self.tile_in {
            for &tile_out in &self.tile_out {
                for &cus in &self.cus {
                    points.push(LinearKernelParams { tile_in, tile_out, cus });
                }
            }
        }
        points
    }

    /// Every MSA-side parameter vector for a fixed `num`, in domain order.
    pub fn msa_points(&self, num: usize) -> Vec<HardwareParams> {
        let mut points = Vec::new();
        for &tile_a in &self.tile_a {
            for &pes_a in &self.pes_a {
                for &tile_in in &self.tile_in {
                    for &tile_out in &self.tile_out {
                        for &cus in &self.cus {
                            points.push(HardwareParams {
                                num,
                                tile_a,
                                pes_a,
                                tile_in,
                                tile_out,
                                cus,
                            });
                        }
                    }
                }
            }
        }
        points
    }

    /// Size of the joint MSA x MoE design space enumerated by the
    /// exhaustive oracle.
    pub fn joint_size(&self) -> u128 {
        let msa = self.num.len() as u128
            * self.tile_a.len() as u128
            * self.pes_a.len() as u128
            * self.tile_in.len() as u128
            * self.tile_out.len() as u128
            * self.cus.len() as u128;
        let moe =
            self.tile_in.len() as u128 * self.tile_out.len() as u128 * self.cus.len() as u128;
        msa * moe
    }
}

/// On-disk search configuration: master seed, domain lists, GA knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub domain: SearchDomain,
    #[serde(default)]
    pub ga: GaConfig,
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        self.domain.validate()?;
        self.ga.validate()
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let config: SearchConfig =
            toml::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
        config.validate().map_err(|e| Error::parse(path, e.to_string()))?;
        Ok(config)
    }

    pub fn to_file(&self, path: &Path) -> Result<()> {
        let text =
            toml::to_string_pretty(self).map_err(|e| Error::parse(path, e.to_string()))?;
        std::fs::write(path, text)?;
        Ok(())
    }
}
