//! Machine-readable run artifacts: the provenance manifest embedded in every
//! report, the JSON search/simulate reports, the per-generation CSV trace and
//! the derived throughput figures. Serialization order is fixed by struct
//! layout so regenerating a report from unchanged inputs is byte-identical.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::costmodel::{self, HardwareParams, LatencyReport, ResourceReport};
use crate::dse::{GenerationTrace, SearchResult};
use crate::error::{Error, Result};
use crate::kernels::LinearKernelParams;
use crate::simtime::ValidationReport;
use crate::workload::{count_ops, ModelConfig};

/// Provenance block embedded in every emitted report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub inputs: Vec<InputDigest>,
    pub seed: u64,
    pub profile: String,
    /// Unix seconds; `SOURCE_DATE_EPOCH` wins, otherwise the newest input
    /// mtime, so unchanged inputs regenerate identical bytes.
    pub timestamp: u64,
    pub stage_summary: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

impl RunManifest {
    pub fn new(
        inputs: &[PathBuf],
        seed: u64,
        profile: &str,
        stage_summary: Vec<String>,
    ) -> Result<Self> {
        let mut digests = Vec::with_capacity(inputs.len());
        let mut newest_mtime = 0u64;
        for path in inputs {
            let bytes = std::fs::read(path)?;
            digests.push(InputDigest {
                path: path.display().to_string(),
                sha256: hex::encode(Sha256::digest(&bytes)),
            });
            if let Ok(meta) = std::fs::metadata(path) {
                if let Ok(modified) = meta.modified() {
                    if let Ok(secs) = modified.duration_since(std::time::UNIX_EPOCH) {
                        newest_mtime = newest_mtime.max(secs.as_secs());
                    }
                }
            }
        }
        let timestamp = std::env::var("SOURCE_DATE_EPOCH")
            .ok()
            .and_then(|v| v.parse().ok())
            .unwrap_or(newest_mtime);
        Ok(RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            inputs: digests,
            seed,
            profile: profile.to_string(),
            timestamp,
            stage_summary,
        })
    }
}

/// The closed forms behind every latency/resource figure in a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Formulas {
    pub latency_attn: String,
    pub dsp_attn: String,
    pub bram_attn: String,
    pub latency_linear: String,
    pub weight_load: String,
    pub latency_moe: String,
    pub dsp_linear: String,
    pub bram_linear: String,
    pub latency_msa: String,
    pub pipeline: String,
}

impl Default for Formulas {
    fn default() -> Self {
        Formulas {
            latency_attn: costmodel::LATENCY_ATTENTION_FORMULA.into(),
            dsp_attn: costmodel::DSP_ATTENTION_FORMULA.into(),
            bram_attn: costmodel::BRAM_ATTENTION_FORMULA.into(),
            latency_linear: costmodel::LATENCY_LINEAR_FORMULA.into(),
            weight_load: costmodel::WEIGHT_LOAD_FORMULA.into(),
            latency_moe: costmodel::LATENCY_MOE_FORMULA.into(),
            dsp_linear: costmodel::DSP_LINEAR_FORMULA.into(),
            bram_linear: costmodel::BRAM_LINEAR_FORMULA.into(),
            latency_msa: costmodel::LATENCY_MSA_FORMULA.into(),
            pipeline: costmodel::PIPELINE_FORMULA.into(),
        }
    }
}

mod fit_score_serde {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &f64, ser: S) -> Result<S::Ok, S::Error> {
        if value.is_infinite() {
            ser.serialize_str("no-moe")
        } else {
            ser.serialize_f64(*value)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(de)? {
            Raw::Number(v) => Ok(v),
            Raw::Text(s) if s == "no-moe" => Ok(f64::INFINITY),
            Raw::Text(s) => Err(D::Error::custom(format!("unexpected fit_score \"{s}\""))),
        }
    }
}

/// JSON artifact of `search`: provenance, the chosen design, its modeled
/// latency/resources, derived throughput, the formulas used, and the GA
/// trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchReport {
    pub manifest: RunManifest,
    pub params: HardwareParams,
    pub moe_params: Option<LinearKernelParams>,
    pub latency: LatencyReport,
    pub resources: ResourceReport,
    /// l_moe / l_msa, or the string "no-moe" for models without MoE.
    #[serde(with = "fit_score_serde")]
    pub fit_score: f64,
    pub total_ops: u64,
    pub throughput_gops: f64,
    pub formulas: Formulas,
    pub trace: Vec<GenerationTrace>,
}

impl SearchReport {
    pub fn new(manifest: RunManifest, result: &SearchResult, cfg: &ModelConfig) -> Self {
        let total_ops = count_ops(cfg);
        SearchReport {
            manifest,
            params: result.params,
            moe_params: result.moe_params,
            latency: result.latency,
            resources: result.resources,
            fit_score: result.fit_score,
            total_ops,
            throughput_gops: throughput_gops(total_ops, result.latency.total_ms),
            formulas: Formulas::default(),
            trace: result.trace.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))
    }
}

/// JSON artifact of `simulate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateReport {
    pub manifest: RunManifest,
    pub params: HardwareParams,
    pub moe_params: Option<LinearKernelParams>,
    pub latency: LatencyReport,
    pub validation: ValidationReport,
}

impl SimulateReport {
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))
    }
}

/// Ops per second in GOPS given a per-image op count and latency.
pub fn throughput_gops(total_ops: u64, total_ms: f64) -> f64 {
    total_ops as f64 / (total_ms * 1e6)
}

/// Work implied by a (latency, throughput) pair, in GOP. Two measurements of
/// the same workload must agree on this product.
pub fn gop_product(latency_ms: f64, throughput_gops: f64) -> f64 {
    latency_ms * throughput_gops / 1e3
}

/// Per-generation trace as CSV, header always present.
pub fn trace_csv(trace: &[GenerationTrace]) -> String {
    let mut out = String::from("generation,best_fitness,best_l_msa,dsp_used,bram_used\n");
    for row in trace {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.generation, row.best_fitness, row.best_l_msa, row.dsp_used, row.bram_used
        ));
    }
    out
}

/// Human-readable rendering of a search report.
pub fn render_search_table(report: &SearchReport) -> String {
    let p = &report.params;
    let fit = if report.fit_score.is_infinite() {
        "no-moe".to_string()
    } else {
        format!("{:.6}", report.fit_score)
    };
    let moe = match &report.moe_params {
        Some(lp) => format!("tile_in={} tile_out={} cus={}", lp.tile_in, lp.tile_out, lp.cus),
        None => "-".to_string(),
    };
    let mut out = String::new();
    out.push_str(&format!(
        "design        num={} tile_a={} pes_a={} tile_in={} tile_out={} cus={}\n",
        p.num, p.tile_a, p.pes_a, p.tile_in, p.tile_out, p.cus
    ));
    out.push_str(&format!("moe kernel    {moe}\n"));
    out.push_str(&format!("fit score     {fit}\n"));
    out.push_str(&format!(
        "latency       attn={} msa={} moe={} total={} cycles ({:.4} ms)\n",
        report.latency.cycles_attn,
        report.latency.cycles_msa,
        report.latency.cycles_moe,
        report.latency.cycles_total,
        report.latency.total_ms
    ));
    out.push_str(&format!(
        "resources     dsp={} bram={} (attn {}+{}, linear {}+{})\n",
        report.resources.dsp_total_used,
        report.resources.bram_total_used,
        report.resources.dsp_attn,
        report.resources.bram_attn,
        report.resources.dsp_linear,
        report.resources.bram_linear
    ));
    out.push_str(&format!(
        "throughput    {:.2} GOPS over {} ops\n",
        report.throughput_gops, report.total_ops
    ));
    out.push_str(&format!(
        "seed          {} on {}\n",
        report.manifest.seed, report.manifest.profile
    ));
    out
}

/// On-disk hardware parameter file consumed by `simulate` and written by
/// `search`: an `[msa]` table plus an optional `[moe]` kernel table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsFile {
    pub msa: HardwareParams,
    pub moe: Option<LinearKernelParams>,
}

impl ParamsFile {
    pub fn validate(&self) -> Result<()> {
        self.msa.validate()?;
        if let Some(moe) = &self.moe {
            moe.validate()?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let params: ParamsFile =
            toml::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
        params.validate().map_err(|e| Error::parse(path, e.to_string()))?;
        Ok(params)
    }

    pub fn to_file(&self, path: &Path) -> Result<()> {
        let text = toml::to_string_pretty(self).map_err(|e| Error::parse(path, e.to_string()))?;
        std::fs::write(path, text)?;
        Ok(())
    }
}

/// Throughput sanity helper for externally measured pairs: all pairs must
/// describe the same total work within `tol` (relative).
pub fn cross_check_gop(pairs: &[(f64, f64)], tol: f64) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::domain("no latency/throughput pairs given"));
    }
    let gops: Vec<f64> = pairs
        .iter()
        .map(|&(lat_ms, thr)| gop_product(lat_ms, thr))
        .collect();
    let first = gops[0];
    for (i, g) in gops.iter().enumerate() {
        if (g - first).abs() / first > tol {
            return Err(Error::Validation(format!(
                "pair {i} implies {g:.4} GOP, pair 0 implies {first:.4} GOP (tol {tol})"
            )));
        }
    }
    Ok(first)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gop_product_is_latency_times_throughput() {
        assert!((gop_product(10.0, 250.0) - 2.5).abs() < 1e-12);
        assert!((throughput_gops(2_500_000_000, 10.0) - 250.0).abs() < 1e-9);
    }

    #[test]
    fn published_pairs_describe_the_same_work() {
        // 97.04 GOPS at 25.76 ms and 242.01 GOPS at 10.33 ms both imply
        // roughly 2.50 GOP per image
        let gop = cross_check_gop(&[(25.76, 97.04), (10.33, 242.01)], 1e-3).unwrap();
        assert!((gop - 2.50).abs() / 2.50 < 1e-3, "{gop}");
    }

    #[test]
    fn cross_check_rejects_disagreeing_pairs() {
        assert!(cross_check_gop(&[(10.0, 250.0), (10.0, 200.0)], 1e-3).is_err());
    }

    #[test]
    fn trace_csv_header_always_present() {
        assert_eq!(
            trace_csv(&[]),
            "generation,best_fitness,best_l_msa,dsp_used,bram_used\n"
        );
        let rows = vec![GenerationTrace {
            generation: 0,
            best_fitness: 0.5,
            best_l_msa: 1000,
            dsp_used: 88,
            bram_used: 10,
        }];
        assert_eq!(
            trace_csv(&rows),
            "generation,best_fitness,best_l_msa,dsp_used,bram_used\n0,0.5,1000,88,10\n"
        );
    }

    #[test]
    fn fit_score_no_moe_round_trip() {
        let manifest = RunManifest {
            tool_version: "0".into(),
            inputs: vec![],
            seed: 1,
            profile: "zcu102".into(),
            timestamp: 0,
            stage_summary: vec![],
        };
        let mut report = SearchReport {
            manifest,
            params: HardwareParams { num: 0, tile_a: 1, pes_a: 1, tile_in: 1, tile_out: 1, cus: 1 },
            moe_params: None,
            latency: LatencyReport::compose(1, 2, 0, 0, 1, 300.0),
            resources: ResourceReport::compose(1, 1, 1, 1),
            fit_score: f64::INFINITY,
            total_ops: 10,
            throughput_gops: 1.0,
            formulas: Formulas::default(),
            trace: vec![],
        };
        let json = report.to_json();
        assert!(json.contains("\"no-moe\""), "{json}");
        let back: SearchReport = serde_json::from_str(&json).unwrap();
        assert!(back.fit_score.is_infinite());

        report.fit_score = 0.75;
        let back: SearchReport = serde_json::from_str(&report.to_json()).unwrap();
        assert_eq!(back.fit_score, 0.75);
    }

    #[test]
    fn params_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("params.toml");
        let params = ParamsFile {
            msa: HardwareParams { num: 2, tile_a: 8, pes_a: 7, tile_in: 4, tile_out: 4, cus: 2 },
            moe: Some(LinearKernelParams { tile_in: 2, tile_out: 8, cus: 4 }),
        };
        params.to_file(&path).unwrap();
        assert_eq!(ParamsFile::from_file(&path).unwrap(), params);
        let no_moe = ParamsFile { moe: None, ..params };
        no_moe.to_file(&path).unwrap();
        assert_eq!(ParamsFile::from_file(&path).unwrap(), no_moe);
    }

    #[test]
    fn manifest_respects_source_date_epoch() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.toml");
        std::fs::write(&input, "x = 1\n").unwrap();
        std::env::set_var("SOURCE_DATE_EPOCH", "1700000000");
        let m = RunManifest::new(&[input.clone()], 4, "zcu102", vec![]).unwrap();
        std::env::remove_var("SOURCE_DATE_EPOCH");
        assert_eq!(m.timestamp, 1700000000);
        assert_eq!(m.inputs.len(), 1);
        assert_eq!(m.inputs[0].sha256.len(), 64);
        let m2 = RunManifest::new(&[input], 4, "zcu102", vec![]).unwrap();
        assert_eq!(m.inputs, m2.inputs);
    }
}
