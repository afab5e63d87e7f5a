//! Command-line front end: `search`, `simulate`, `verify` and `report`
//! subcommands over the library, plus the stable exit-code contract.
//!
//! Exit codes: 0 success; 2 unreadable/invalid input (parse or domain); 3
//! infeasible design; 4 search terminated without a result; 5 a validation
//! or verification check failed.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::costmodel::{
    check_budget, latency_attention, latency_moe, latency_msa, PlatformProfile,
};
use crate::dse::{
    best_moe_latency, binary_search_moe, exhaustive_search, has_search, linear_scan_moe,
    GaConfig, SearchConfig, SearchDomain,
};
use crate::error::{Error, Result};
use crate::kernels::{
    attention_forward, fused_softmax_weighted_sum, moe_forward, router_round_robin,
    AttentionKernelParams, LinearKernelParams,
};
use crate::report::{
    render_search_table, trace_csv, ParamsFile, RunManifest, SearchReport, SimulateReport,
};
use crate::simtime::{simulate_layer_pipeline, validate_cost_model, BlockKind, PipelineSpec};
use crate::workload::{
    reference_attention, reference_moe, safe_softmax_3pass, ExpertWeights, ModelConfig,
    RoutingTable, TokenMatrix,
};

/// Stable mapping from error class to process exit code.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Domain(_) | Error::Parse { .. } | Error::Io(_) => 2,
        Error::Infeasible(_) => 3,
        Error::Search(_) => 4,
        Error::Validation(_) | Error::Contract(_) => 5,
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "moesim",
    version,
    about = "Model, simulate and search streaming-attention MoE accelerator designs"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the 2-stage hardware search and write report.json, trace.csv and
    /// params.toml.
    Search(SearchArgs),
    /// Re-derive latency for a fixed parameter set, emit the pipeline
    /// timeline and cross-validate the cost model against simulation.
    Simulate(SimulateArgs),
    /// Run the oracle cross-check suite and report per-property pass/fail.
    Verify(VerifyArgs),
    /// Render a search report as a table plus plot-data CSV.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct SearchArgs {
    /// Platform profile TOML file.
    #[arg(long)]
    platform: PathBuf,
    /// Model configuration TOML file.
    #[arg(long)]
    model: PathBuf,
    /// Search configuration TOML file (domain, GA knobs, seed). Defaults
    /// apply when omitted.
    #[arg(long)]
    search: Option<PathBuf>,
    /// Routing table file; a seeded uniform table is generated when omitted.
    #[arg(long)]
    routing: Option<PathBuf>,
    /// Master seed, overriding the search file.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (flag beats MOESIM_OUT_DIR beats current dir).
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    platform: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// Hardware parameters TOML ([msa] table, optional [moe] table).
    #[arg(long)]
    params: PathBuf,
    #[arg(long)]
    routing: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long)]
    seed: Option<u64>,
    /// Run only properties whose name contains this substring.
    #[arg(long)]
    property: Option<String>,
    /// Plant a failing property to prove the harness reports failures.
    #[arg(long)]
    inject_failure: bool,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// report.json produced by `search`.
    #[arg(long)]
    result: PathBuf,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Search(args) => cmd_search(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Report(args) => cmd_report(args),
    }
}

fn resolve_out_dir(flag: Option<PathBuf>) -> Result<PathBuf> {
    let dir = flag
        .or_else(|| std::env::var_os("MOESIM_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn load_routing(
    path: Option<&Path>,
    cfg: &ModelConfig,
    seed: u64,
) -> Result<(RoutingTable, bool)> {
    match path {
        Some(p) => Ok((RoutingTable::from_file(p, cfg.experts)?, false)),
        None => Ok((
            RoutingTable::synthetic_uniform(cfg.patches, cfg.experts, cfg.top_k, seed)?,
            true,
        )),
    }
}

fn cmd_search(args: SearchArgs) -> Result<()> {
    let pf = PlatformProfile::from_file(&args.platform)?;
    let cfg = ModelConfig::from_file(&args.model)?;
    let mut search = match &args.search {
        Some(p) => SearchConfig::from_file(p)?,
        None => SearchConfig::default(),
    };
    if let Some(seed) = args.seed {
        search.seed = seed;
    }
    let (routing, synthetic) = load_routing(args.routing.as_deref(), &cfg, search.seed)?;

    let ga = GaConfig { seed: search.seed, ..search.ga.clone() };
    let result = has_search(&pf, &cfg, &routing, &search.domain, &ga)?;
    let verdict = check_budget(&result.resources, &pf);
    if !verdict.feasible {
        return Err(Error::Infeasible(format!(
            "search returned a design violating {}",
            verdict.violations.join(", ")
        )));
    }

    let mut inputs = vec![args.platform.clone(), args.model.clone()];
    inputs.extend(args.search.iter().cloned());
    inputs.extend(args.routing.iter().cloned());
    let manifest = RunManifest::new(&inputs, search.seed, &pf.name, result.stage_log.clone())?;
    let report = SearchReport::new(manifest, &result, &cfg);

    let out_dir = resolve_out_dir(args.out_dir)?;
    std::fs::write(out_dir.join("report.json"), report.to_json())?;
    std::fs::write(out_dir.join("trace.csv"), trace_csv(&report.trace))?;
    ParamsFile { msa: result.params, moe: result.moe_params }
        .to_file(&out_dir.join("params.toml"))?;
    if synthetic && cfg.has_moe() {
        routing.to_file(&out_dir.join("routing.txt"))?;
    }

    print!("{}", render_search_table(&report));
    println!("artifacts written to {}", out_dir.display());
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let pf = PlatformProfile::from_file(&args.platform)?;
    let cfg = ModelConfig::from_file(&args.model)?;
    let params = ParamsFile::from_file(&args.params)?;
    let seed = args.seed.unwrap_or(1);
    let (routing, _) = load_routing(args.routing.as_deref(), &cfg, seed)?;

    let moe_lp = match (&params.moe, cfg.has_moe()) {
        (Some(lp), true) => Some(*lp),
        (None, true) => {
            return Err(Error::domain(
                "model has an MoE block but the params file has no [moe] table",
            ))
        }
        (_, false) => None,
    };

    let resources = crate::dse::full_design_resources(&params.msa, moe_lp.as_ref(), &cfg, &pf)?;
    let verdict = check_budget(&resources, &pf);
    if !verdict.feasible {
        return Err(Error::Infeasible(format!(
            "params violate the {} budget: {} (dsp slack {}, bram slack {})",
            pf.name,
            verdict.violations.join(", "),
            verdict.dsp_slack,
            verdict.bram_slack
        )));
    }

    let l_msa = latency_msa(&params.msa, &cfg);
    let l_moe = moe_lp.map(|lp| latency_moe(&cfg, &routing, &lp)).unwrap_or(0);
    let latency = crate::costmodel::LatencyReport::compose(
        latency_attention(&params.msa, &cfg),
        l_msa,
        l_moe,
        cfg.non_encoder_cycles,
        cfg.layer_pairs(),
        pf.clock_mhz,
    );
    let validation = validate_cost_model(
        &cfg,
        &params.msa,
        &moe_lp.unwrap_or(params.msa.linear()),
        &routing,
    )?;
    let spec = PipelineSpec {
        layer_pairs: cfg.layer_pairs(),
        l_msa,
        l_moe,
        non_encoder_cycles: cfg.non_encoder_cycles,
    };
    let (total, timeline) = simulate_layer_pipeline(&spec);
    timeline.check_invariants()?;
    debug_assert_eq!(total, latency.cycles_total);

    let mut inputs = vec![args.platform.clone(), args.model.clone(), args.params.clone()];
    inputs.extend(args.routing.iter().cloned());
    let manifest = RunManifest::new(
        &inputs,
        seed,
        &pf.name,
        vec![format!("simulated {} pipeline pairs", cfg.layer_pairs())],
    )?;
    let report = SimulateReport {
        manifest,
        params: params.msa,
        moe_params: moe_lp,
        latency,
        validation,
    };

    let out_dir = resolve_out_dir(args.out_dir)?;
    std::fs::write(out_dir.join("timeline.txt"), timeline.render())?;
    std::fs::write(out_dir.join("report.json"), report.to_json())?;

    println!(
        "total {} cycles ({:.4} ms at {} MHz), {} msa / {} moe blocks",
        latency.cycles_total,
        latency.total_ms,
        pf.clock_mhz,
        timeline.blocks_of(BlockKind::Msa).len(),
        timeline.blocks_of(BlockKind::Moe).len(),
    );
    println!("artifacts written to {}", out_dir.display());
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let report = SearchReport::from_file(&args.result)?;
    let out_dir = resolve_out_dir(args.out_dir)?;
    std::fs::write(out_dir.join("plot.csv"), trace_csv(&report.trace))?;
    print!("{}", render_search_table(&report));
    println!("plot data written to {}", out_dir.join("plot.csv").display());
    Ok(())
}

fn cmd_verify(args: VerifyArgs) -> Result<()> {
    let seed = args.seed.unwrap_or(1);
    type Prop = (&'static str, fn(u64) -> Result<String>);
    let mut properties: Vec<Prop> = vec![
        ("fused-softmax", prop_fused_softmax),
        ("attention-kernel", prop_attention_kernel),
        ("moe-kernel", prop_moe_kernel),
        ("round-robin", prop_round_robin),
        ("cost-vs-sim", prop_cost_vs_sim),
        ("pipeline", prop_pipeline),
        ("binary-search", prop_binary_search),
        ("ga-vs-exhaustive", prop_ga_vs_exhaustive),
    ];
    if args.inject_failure {
        properties.push(("injected-failure", |_| {
            Err(Error::Validation("planted failure for harness self-test".into()))
        }));
    }
    if let Some(filter) = &args.property {
        properties.retain(|(name, _)| name.contains(filter.as_str()));
        if properties.is_empty() {
            return Err(Error::domain(format!("no property matches \"{filter}\"")));
        }
    }

    let mut failures = Vec::new();
    for (name, prop) in &properties {
        match prop(seed) {
            Ok(detail) => println!("pass {name}: {detail}"),
            Err(e) => {
                println!("FAIL {name}: {e}");
                failures.push(*name);
            }
        }
    }
    println!(
        "{} of {} properties passed",
        properties.len() - failures.len(),
        properties.len()
    );
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Error::Validation(format!(
            "{} propert{} failed: {}",
            failures.len(),
            if failures.len() == 1 { "y" } else { "ies" },
            failures.join(", ")
        )))
    }
}

fn prop_fused_softmax(seed: u64) -> Result<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = 500;
    for i in 0..rows {
        let n = rng.gen_range(1..=256);
        let scale = [1.0, 32.0, 1e3][i % 3];
        let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(-scale..scale)).collect();
        let dim = rng.gen_range(1..12);
        let v = TokenMatrix::random(n, dim, 1.0, &mut rng);
        let row_max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let fused = fused_softmax_weighted_sum(&scores, row_max, &v)?;
        if fused.divisions != 1 {
            return Err(Error::Validation(format!(
                "row {i}: {} divisions instead of 1",
                fused.divisions
            )));
        }
        let weights = safe_softmax_3pass(&scores)?;
        for c in 0..dim {
            let want: f64 = (0..n).map(|r| weights[r] * v.get(r, c)).sum();
            if (fused.values[c] - want).abs() > 1e-6 {
                return Err(Error::Validation(format!(
                    "row {i} col {c}: fused {} vs 3-pass {}",
                    fused.values[c], want
                )));
            }
        }
    }
    Ok(format!("{rows} random rows match the 3-pass oracle within 1e-6"))
}

fn prop_attention_kernel(seed: u64) -> Result<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cases = 30;
    for i in 0..cases {
        let heads = [1, 2, 4][i % 3];
        let hd = rng.gen_range(1..=8);
        let n = rng.gen_range(1..=24);
        let f = heads * hd;
        let q = TokenMatrix::random(n, f, 1.0, &mut rng);
        let k = TokenMatrix::random(n, f, 1.0, &mut rng);
        let v = TokenMatrix::random(n, f, 1.0, &mut rng);
        let want = reference_attention(&q, &k, &v, heads)?;
        let params = AttentionKernelParams {
            tile_a: rng.gen_range(1..=f),
            pes_a: rng.gen_range(1..=n + 2),
        };
        let (got, trace) = attention_forward(&q, &k, &v, heads, &params)?;
        trace.check_unit_monotonic()?;
        let diff = got.max_abs_diff(&want);
        if diff > 1e-5 {
            return Err(Error::Validation(format!(
                "case {i}: kernel diverges from the reference by {diff:.3e}"
            )));
        }
    }
    Ok(format!("{cases} random configurations match the reference within 1e-5"))
}

fn prop_moe_kernel(seed: u64) -> Result<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cases = 20;
    for i in 0..cases {
        let tokens = rng.gen_range(1..=24);
        let experts = rng.gen_range(1..=6);
        let top_k = rng.gen_range(1..=experts);
        let f = rng.gen_range(1..=12);
        let h = rng.gen_range(1..=16);
        let x = TokenMatrix::random(tokens, f, 1.0, &mut rng);
        let routing = RoutingTable::synthetic_uniform(tokens, experts, top_k, rng.gen())?;
        let weights: Vec<ExpertWeights> = (0..experts)
            .map(|_| {
                ExpertWeights::new(
                    TokenMatrix::random(f, h, 1.0, &mut rng),
                    TokenMatrix::random(h, f, 1.0, &mut rng),
                )
            })
            .collect::<Result<_>>()?;
        let params = LinearKernelParams {
            tile_in: rng.gen_range(1..=4),
            tile_out: rng.gen_range(1..=4),
            cus: rng.gen_range(1..=4),
        };
        let want = reference_moe(&x, &routing, &weights)?;
        let (got, _) = moe_forward(&x, &routing, &weights, &params)?;
        let diff = got.max_abs_diff(&want);
        if diff > 1e-5 {
            return Err(Error::Validation(format!(
                "case {i}: kernel diverges from the reference by {diff:.3e}"
            )));
        }
    }
    Ok(format!("{cases} random MoE instances match the reference within 1e-5"))
}

fn prop_round_robin(_seed: u64) -> Result<String> {
    for len in 0..=64usize {
        let pending: Vec<usize> = (0..len).collect();
        for cus in 1..=8 {
            let groups = router_round_robin(&pending, cus);
            let max = groups.iter().map(Vec::len).max().unwrap_or(0);
            let min = groups.iter().map(Vec::len).min().unwrap_or(0);
            if max - min > 1 {
                return Err(Error::Validation(format!(
                    "len {len}, cus {cus}: group sizes differ by {}",
                    max - min
                )));
            }
            let mut rebuilt = Vec::with_capacity(len);
            for wave in 0..max {
                for g in &groups {
                    if let Some(&t) = g.get(wave) {
                        rebuilt.push(t);
                    }
                }
            }
            if rebuilt != pending {
                return Err(Error::Validation(format!(
                    "len {len}, cus {cus}: interleaved reconstruction broke order"
                )));
            }
        }
    }
    Ok("balance and order hold for all lengths <= 64, cus <= 8".to_string())
}

fn prop_cost_vs_sim(seed: u64) -> Result<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cases = 30;
    for _ in 0..cases {
        let patches = rng.gen_range(2..32);
        let experts = rng.gen_range(1..6);
        let top_k = rng.gen_range(1..=experts);
        let cfg = ModelConfig {
            layers: rng.gen_range(1..8),
            patches,
            feat_dim: rng.gen_range(2..48),
            hidden_dim: rng.gen_range(2..64),
            heads: 1,
            experts,
            top_k,
            bitwidth: 16,
            moe_alternate: true,
            non_encoder_cycles: rng.gen_range(0..100),
        };
        let hp = crate::costmodel::HardwareParams {
            num: rng.gen_range(0..5),
            tile_a: rng.gen_range(1..9),
            pes_a: rng.gen_range(1..9),
            tile_in: rng.gen_range(1..6),
            tile_out: rng.gen_range(1..6),
            cus: rng.gen_range(1..5),
        };
        let moe_lp = LinearKernelParams {
            tile_in: rng.gen_range(1..6),
            tile_out: rng.gen_range(1..6),
            cus: rng.gen_range(1..5),
        };
        let routing = RoutingTable::synthetic_uniform(patches, experts, top_k, rng.gen())?;
        validate_cost_model(&cfg, &hp, &moe_lp, &routing)?;
    }
    Ok(format!(
        "{cases} random instances: attention/moe exact, msa/total within 1%"
    ))
}

fn prop_pipeline(seed: u64) -> Result<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cases = 200;
    for _ in 0..cases {
        let spec = PipelineSpec {
            layer_pairs: rng.gen_range(1..12),
            l_msa: rng.gen_range(1..1000),
            l_moe: rng.gen_range(1..1000),
            non_encoder_cycles: rng.gen_range(0..200),
        };
        let (total, timeline) = simulate_layer_pipeline(&spec);
        timeline.check_invariants()?;
        let want = crate::costmodel::pipeline_total_cycles(
            spec.layer_pairs,
            spec.l_msa,
            spec.l_moe,
            spec.non_encoder_cycles,
        );
        if total != want {
            return Err(Error::Validation(format!(
                "pipeline total {total} != closed form {want} for {spec:?}"
            )));
        }
        if spec.layer_pairs >= 3 {
            let starts: Vec<u64> = timeline
                .blocks_of(BlockKind::Msa)
                .iter()
                .map(|iv| iv.start)
                .collect();
            for w in starts[1..].windows(2) {
                if w[1] - w[0] != spec.l_msa.max(spec.l_moe) {
                    return Err(Error::Validation(format!(
                        "steady-state period {} != max {}",
                        w[1] - w[0],
                        spec.l_msa.max(spec.l_moe)
                    )));
                }
            }
        }
    }
    Ok(format!("{cases} random schedules match the closed form exactly"))
}

fn verify_model() -> ModelConfig {
    ModelConfig {
        layers: 4,
        patches: 16,
        feat_dim: 32,
        hidden_dim: 64,
        heads: 2,
        experts: 4,
        top_k: 2,
        bitwidth: 16,
        moe_alternate: true,
        non_encoder_cycles: 0,
    }
}

fn verify_domain() -> SearchDomain {
    SearchDomain {
        num: vec![0, 1, 2],
        tile_a: vec![1, 2, 4],
        pes_a: vec![1, 2, 4],
        tile_in: vec![1, 2],
        tile_out: vec![1, 2],
        cus: vec![1, 2],
    }
}

fn prop_binary_search(seed: u64) -> Result<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pf = PlatformProfile::zcu102();
    let cfg = verify_model();
    let domain = verify_domain();
    let cases = 50;
    for i in 0..cases {
        let routing =
            RoutingTable::synthetic_uniform(cfg.patches, cfg.experts, cfg.top_k, rng.gen())?;
        let part1 = best_moe_latency(&pf, &cfg, &routing, &domain)?;
        let bound = if i % 5 == 0 { part1.0 } else { rng.gen_range(1..4 * part1.0) };
        let bisect = binary_search_moe(bound, &pf, &cfg, &routing, &domain, part1)?;
        let scan = linear_scan_moe(bound, &pf, &cfg, &routing, &domain, part1)?;
        if bisect != scan {
            return Err(Error::Validation(format!(
                "bound {bound}: bisection picked {bisect:?}, linear scan {scan:?}"
            )));
        }
    }
    Ok(format!("{cases} bounds: bisection equals the linear scan"))
}

fn prop_ga_vs_exhaustive(seed: u64) -> Result<String> {
    let pf = PlatformProfile::zcu102();
    let cfg = verify_model();
    let domain = verify_domain();
    let routing = RoutingTable::synthetic_uniform(cfg.patches, cfg.experts, cfg.top_k, seed)?;
    let oracle = exhaustive_search(&pf, &cfg, &routing, &domain, None)?;
    let mut within = 0;
    let runs = 3;
    for s in 0..runs {
        let ga = GaConfig {
            population_size: 24,
            generations: 40,
            seed: seed.wrapping_add(s),
            ..Default::default()
        };
        let result = has_search(&pf, &cfg, &routing, &domain, &ga)?;
        let ratio = result.latency.cycles_total as f64 / oracle.latency.cycles_total as f64;
        if ratio < 1.0 - 1e-12 {
            return Err(Error::Validation(format!(
                "seed {s}: GA total beat the exhaustive optimum (ratio {ratio})"
            )));
        }
        if ratio <= 1.05 {
            within += 1;
        }
    }
    if within * 3 < runs * 2 {
        return Err(Error::Validation(format!(
            "only {within} of {runs} GA runs within 5% of the exhaustive optimum"
        )));
    }
    Ok(format!(
        "{within} of {runs} GA runs within 5% of the exhaustive optimum, none better"
    ))
}
