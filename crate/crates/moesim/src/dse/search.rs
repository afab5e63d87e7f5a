use serde::{Deserialize, Serialize};

use crate::costmodel::{
    bram_linear, check_budget, dsp_linear, latency_attention, latency_moe, latency_msa,
    resources_total, HardwareParams, LatencyReport, PlatformProfile, ResourceReport,
};
use crate::dse::{ga_search_msa, FitnessCtx, GaConfig, GenerationTrace, SearchDomain};
use crate::error::{Error, Result};
use crate::kernels::LinearKernelParams;
use crate::workload::{ModelConfig, RoutingTable};

/// Final search output: the chosen parameter vector for the MSA side, the
/// (separately sized) MoE kernel, and the latency/resource picture of the
/// whole design.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchResult {
    pub params: HardwareParams,
    pub moe_params: Option<LinearKernelParams>,
    pub latency: LatencyReport,
    pub resources: ResourceReport,
    /// l_moe / l_msa of the final design; +inf for models without MoE.
    pub fit_score: f64,
    /// GA trace of the winning `num` sweep entry.
    pub trace: Vec<GenerationTrace>,
    pub stage_log: Vec<String>,
}

/// Resource usage of the complete design: MSA block plus the MoE kernel
/// instance when the model has one.
pub fn full_design_resources(
    hp: &HardwareParams,
    moe_lp: Option<&LinearKernelParams>,
    cfg: &ModelConfig,
    pf: &PlatformProfile,
) -> Result<ResourceReport> {
    let base = resources_total(hp, cfg, pf)?;
    match moe_lp {
        Some(lp) => Ok(base.with_extra_linear(
            dsp_linear(lp, cfg.bitwidth, pf)?,
            bram_linear(lp, cfg, pf),
        )),
        None => Ok(base),
    }
}

/// Stage MoE part 1: scan the whole (T_in, T_out, N_L) domain and return the
/// lowest MoE latency whose kernel DSP usage alone fits the full device
/// budget. Ties keep the earliest domain point.
pub fn best_moe_latency(
    pf: &PlatformProfile,
    cfg: &ModelConfig,
    routing: &RoutingTable,
    domain: &SearchDomain,
) -> Result<(u64, LinearKernelParams)> {
    let mut best: Option<(u64, LinearKernelParams)> = None;
    for lp in domain.moe_points() {
        if dsp_linear(&lp, cfg.bitwidth, pf)? > pf.dsp_total {
            continue;
        }
        let latency = latency_moe(cfg, routing, &lp);
        if best.map(|(b, _)| latency < b).unwrap_or(true) {
            best = Some((latency, lp));
        }
    }
    best.ok_or_else(|| {
        Error::Search(format!(
            "no MoE kernel candidate fits the DSP budget ({} available)",
            pf.dsp_total
        ))
    })
}

/// Stage MoE part 2: among DSP-feasible kernel candidates, find the smallest
/// DSP usage whose latency still meets `bound`, bisecting over the
/// dsp-ordered candidate list via its running latency minimum (monotone by
/// construction). Falls back to the part-1 optimum when nothing meets the
/// bound or the shrunk design would break the full budget.
pub fn binary_search_moe(
    bound: u64,
    pf: &PlatformProfile,
    cfg: &ModelConfig,
    routing: &RoutingTable,
    domain: &SearchDomain,
    part1: (u64, LinearKernelParams),
) -> Result<(u64, LinearKernelParams)> {
    let mut candidates: Vec<(u64, u64, LinearKernelParams)> = Vec::new();
    for lp in domain.moe_points() {
        let dsp = dsp_linear(&lp, cfg.bitwidth, pf)?;
        if dsp <= pf.dsp_total {
            candidates.push((dsp, latency_moe(cfg, routing, &lp), lp));
        }
    }
    candidates.sort_by_key(|&(dsp, lat, lp)| (dsp, lat, lp.tile_in, lp.tile_out, lp.cus));

    let mut prefix_min = Vec::with_capacity(candidates.len());
    let mut running = u64::MAX;
    for &(_, lat, _) in &candidates {
        running = running.min(lat);
        prefix_min.push(running);
    }
    let idx = prefix_min.partition_point(|&m| m > bound);
    Ok(candidates
        .get(idx)
        .map(|&(_, lat, lp)| (lat, lp))
        .unwrap_or(part1))
}

/// Reference linear scan for the part-2 objective; the bisection must agree
/// with this on every instance.
pub fn linear_scan_moe(
    bound: u64,
    pf: &PlatformProfile,
    cfg: &ModelConfig,
    routing: &RoutingTable,
    domain: &SearchDomain,
    part1: (u64, LinearKernelParams),
) -> Result<(u64, LinearKernelParams)> {
    let mut best: Option<(u64, u64, LinearKernelParams)> = None;
    for lp in domain.moe_points() {
        let dsp = dsp_linear(&lp, cfg.bitwidth, pf)?;
        if dsp > pf.dsp_total {
            continue;
        }
        let lat = latency_moe(cfg, routing, &lp);
        if lat > bound {
            continue;
        }
        let key = (dsp, lat, lp.tile_in, lp.tile_out, lp.cus);
        if best
            .map(|(d, l, b)| key < (d, l, b.tile_in, b.tile_out, b.cus))
            .unwrap_or(true)
        {
            best = Some((dsp, lat, lp));
        }
    }
    Ok(best.map(|(_, lat, lp)| (lat, lp)).unwrap_or(part1))
}

/// MSA-side brute force at fixed `num`: the feasibility-respecting minimum
/// of l_msa, used as the GA oracle.
pub fn exhaustive_msa_best(
    ctx: &FitnessCtx,
    domain: &SearchDomain,
    num: usize,
) -> Result<Option<(HardwareParams, u64)>> {
    let mut best: Option<(HardwareParams, u64)> = None;
    for hp in domain.msa_points(num) {
        let eval = ctx.evaluate(&hp)?;
        if !eval.feasible {
            continue;
        }
        if best.map(|(_, l)| eval.l_msa < l).unwrap_or(true) {
            best = Some((hp, eval.l_msa));
        }
    }
    Ok(best)
}

fn compose_result(
    hp: &HardwareParams,
    moe: Option<(u64, LinearKernelParams)>,
    l_msa: u64,
    cfg: &ModelConfig,
    pf: &PlatformProfile,
) -> Result<(LatencyReport, ResourceReport, f64)> {
    let (l_moe, moe_lp) = match moe {
        Some((lat, lp)) => (lat, Some(lp)),
        None => (0, None),
    };
    let latency = LatencyReport::compose(
        latency_attention(hp, cfg),
        l_msa,
        l_moe,
        cfg.non_encoder_cycles,
        cfg.layer_pairs(),
        pf.clock_mhz,
    );
    let resources = full_design_resources(hp, moe_lp.as_ref(), cfg, pf)?;
    let fit_score = if moe_lp.is_some() { l_moe as f64 / l_msa as f64 } else { f64::INFINITY };
    Ok((latency, resources, fit_score))
}

/// The 2-stage hardware accelerator search. Part 1 bounds the MoE latency
/// under the full DSP budget; a GA then searches the MSA genome per `num`
/// against fitness l_moe/l_msa (early stop at >= 1); part 2 shrinks the MoE
/// kernel to the cheapest candidate still meeting the l_msa bound. The `num`
/// sweep runs ascending and keeps the lowest pipeline total.
pub fn has_search(
    pf: &PlatformProfile,
    cfg: &ModelConfig,
    routing: &RoutingTable,
    domain: &SearchDomain,
    ga: &GaConfig,
) -> Result<SearchResult> {
    pf.validate()?;
    cfg.validate()?;
    domain.validate()?;
    ga.validate()?;

    let mut stage_log = Vec::new();
    let part1 = if cfg.has_moe() {
        let (latency, lp) = best_moe_latency(pf, cfg, routing, domain)?;
        stage_log.push(format!(
            "moe-part1: best latency {latency} cycles with tile_in={} tile_out={} cus={} under full dsp budget {}",
            lp.tile_in, lp.tile_out, lp.cus, pf.dsp_total
        ));
        Some((latency, lp))
    } else {
        stage_log.push("moe-part1: skipped (model has no MoE block)".to_string());
        None
    };

    let ctx = FitnessCtx {
        cfg,
        pf,
        l_moe: part1.map(|(l, _)| l).unwrap_or(0),
        moe_dsp: match part1 {
            Some((_, lp)) => dsp_linear(&lp, cfg.bitwidth, pf)?,
            None => 0,
        },
        moe_bram: match part1 {
            Some((_, lp)) => bram_linear(&lp, cfg, pf),
            None => 0,
        },
        no_moe: part1.is_none(),
    };

    // The num loop is interpreted as an ascending sweep keeping the best
    // pipeline total; each num gets a decorrelated GA seed.
    let mut best: Option<(u64, SearchResult)> = None;
    let mut failures = Vec::new();
    for &num in &domain.num {
        let ga_num = GaConfig { seed: ga.seed.wrapping_add(num as u64), ..ga.clone() };
        let outcome = match ga_search_msa(&ctx, domain, num, &ga_num) {
            Ok(o) => o,
            Err(e) => {
                failures.push(format!("num={num}: {e}"));
                stage_log.push(format!("msa-ga num={num}: failed ({e})"));
                continue;
            }
        };
        let mut log = vec![format!(
            "msa-ga num={num}: best fitness {:.6}, l_msa {}, {} generation(s){}",
            outcome.best_fitness,
            outcome.l_msa,
            outcome.trace.len(),
            if outcome.early_stopped { ", early stop at fitness >= 1" } else { "" }
        )];

        let moe_final = match part1 {
            Some(p1) => {
                let (lat, lp) = binary_search_moe(outcome.l_msa, pf, cfg, routing, domain, p1)?;
                let shrunk = full_design_resources(&outcome.best, Some(&lp), cfg, pf)?;
                if check_budget(&shrunk, pf).feasible {
                    if lat <= outcome.l_msa {
                        log.push(format!(
                            "moe-part2 num={num}: shrunk to tile_in={} tile_out={} cus={} at {lat} cycles under bound {}",
                            lp.tile_in, lp.tile_out, lp.cus, outcome.l_msa
                        ));
                    } else {
                        log.push(format!(
                            "moe-part2 num={num}: no kernel meets bound {}, kept part-1 kernel at {lat} cycles",
                            outcome.l_msa
                        ));
                    }
                    Some((lat, lp))
                } else {
                    log.push(format!(
                        "moe-part2 num={num}: shrunk kernel broke the full budget, kept part-1 kernel"
                    ));
                    Some(p1)
                }
            }
            None => None,
        };

        let (latency, resources, fit_score) =
            compose_result(&outcome.best, moe_final, outcome.l_msa, cfg, pf)?;
        let verdict = check_budget(&resources, pf);
        if !verdict.feasible {
            failures.push(format!(
                "num={num}: final design infeasible ({})",
                verdict.violations.join(", ")
            ));
            log.push(format!(
                "num={num}: dropped, final design infeasible ({})",
                verdict.violations.join(", ")
            ));
            stage_log.extend(log);
            continue;
        }
        log.push(format!(
            "num={num}: pipeline total {} cycles",
            latency.cycles_total
        ));
        stage_log.extend(log);

        if best
            .as_ref()
            .map(|(t, _)| latency.cycles_total < *t)
            .unwrap_or(true)
        {
            best = Some((
                latency.cycles_total,
                SearchResult {
                    params: outcome.best,
                    moe_params: moe_final.map(|(_, lp)| lp),
                    latency,
                    resources,
                    fit_score,
                    trace: outcome.trace,
                    stage_log: Vec::new(),
                },
            ));
        }
    }

    match best {
        Some((_, mut result)) => {
            stage_log.push(format!(
                "num sweep complete: kept num={} with total {} cycles",
                result.params.num, result.latency.cycles_total
            ));
            result.stage_log = stage_log;
            Ok(result)
        }
        None => Err(Error::Search(format!(
            "every num candidate failed: {}",
            failures.join("; ")
        ))),
    }
}

/// Joint brute-force oracle over the full MSA x MoE space. Refuses domains
/// larger than `cap` points (pass `None` for the default 10^6).
pub fn exhaustive_search(
    pf: &PlatformProfile,
    cfg: &ModelConfig,
    routing: &RoutingTable,
    domain: &SearchDomain,
    cap: Option<u128>,
) -> Result<SearchResult> {
    pf.validate()?;
    cfg.validate()?;
    domain.validate()?;
    let cap = cap.unwrap_or(1_000_000);
    if domain.joint_size() > cap {
        return Err(Error::Search(format!(
            "joint domain has {} points, above the cap of {cap}",
            domain.joint_size()
        )));
    }

    let moe_points: Vec<(u64, LinearKernelParams)> = if cfg.has_moe() {
        domain
            .moe_points()
            .into_iter()
            .map(|lp| (latency_moe(cfg, routing, &lp), lp))
            .collect()
    } else {
        Vec::new()
    };

    let mut best: Option<(u64, SearchResult)> = None;
    for &num in &domain.num {
        for hp in domain.msa_points(num) {
            let l_msa = latency_msa(&hp, cfg);
            let moe_choices: Vec<Option<(u64, LinearKernelParams)>> = if cfg.has_moe() {
                moe_points.iter().map(|&p| Some(p)).collect()
            } else {
                vec![None]
            };
            for moe in moe_choices {
                let (latency, resources, fit_score) =
                    compose_result(&hp, moe, l_msa, cfg, pf)?;
                if !check_budget(&resources, pf).feasible {
                    continue;
                }
                if best
                    .as_ref()
                    .map(|(t, _)| latency.cycles_total < *t)
                    .unwrap_or(true)
                {
                    best = Some((
                        latency.cycles_total,
                        SearchResult {
                            params: hp,
                            moe_params: moe.map(|(_, lp)| lp),
                            latency,
                            resources,
                            fit_score,
                            trace: Vec::new(),
                            stage_log: vec!["exhaustive enumeration".to_string()],
                        },
                    ));
                }
            }
        }
    }
    best.map(|(_, r)| r).ok_or_else(|| {
        Error::Search("no feasible design point in the joint domain".to_string())
    })
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn cfg() -> ModelConfig {
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

    fn small_domain() -> SearchDomain {
        SearchDomain {
            num: vec![0, 1, 2],
            tile_a: vec![1, 2, 4],
            pes_a: vec![1, 2, 4],
            tile_in: vec![1, 2],
            tile_out: vec![1, 2],
            cus: vec![1, 2],
        }
    }

    fn routing() -> RoutingTable {
        RoutingTable::synthetic_uniform(16, 4, 2, 11).unwrap()
    }

    #[test]
    fn part1_singleton_domain() {
        let d = SearchDomain {
            tile_in: vec![2],
            tile_out: vec![2],
            cus: vec![2],
            ..small_domain()
        };
        let (lat, lp) = best_moe_latency(&PlatformProfile::zcu102(), &cfg(), &routing(), &d).unwrap();
        assert_eq!(lp, LinearKernelParams { tile_in: 2, tile_out: 2, cus: 2 });
        assert_eq!(lat, latency_moe(&cfg(), &routing(), &lp));
    }

    #[test]
    fn part1_unbounded_budget_takes_domain_maximum() {
        let mut pf = PlatformProfile::zcu102();
        pf.dsp_total = u64::MAX;
        let (_, lp) = best_moe_latency(&pf, &cfg(), &routing(), &small_domain()).unwrap();
        assert_eq!(lp, LinearKernelParams { tile_in: 2, tile_out: 2, cus: 2 });
    }

    #[test]
    fn part1_matches_independent_brute_force() {
        let pf = PlatformProfile::zcu102();
        let c = cfg();
        let r = routing();
        let d = SearchDomain {
            tile_in: vec![1, 2, 3, 4, 8],
            tile_out: vec![1, 2, 5, 7, 16],
            cus: vec![1, 3, 4, 6],
            ..small_domain()
        };
        let (lat, _) = best_moe_latency(&pf, &c, &r, &d).unwrap();
        let mut want = u64::MAX;
        for &ti in &d.tile_in {
            for &to in &d.tile_out {
                for &cu in &d.cus {
                    let lp = LinearKernelParams { tile_in: ti, tile_out: to, cus: cu };
                    if dsp_linear(&lp, c.bitwidth, &pf).unwrap() <= pf.dsp_total {
                        want = want.min(latency_moe(&c, &r, &lp));
                    }
                }
            }
        }
        assert_eq!(lat, want);
    }

    #[test]
    fn part1_tiny_budget_names_dsp() {
        let mut pf = PlatformProfile::zcu102();
        pf.dsp_total = 0;
        // psi(16) = 1 so every candidate needs at least one DSP
        let err = best_moe_latency(&pf, &cfg(), &routing(), &small_domain()).unwrap_err();
        assert!(err.to_string().to_lowercase().contains("dsp"), "{err}");
    }

    #[test]
    fn part2_infinite_bound_returns_cheapest() {
        let pf = PlatformProfile::zcu102();
        let c = cfg();
        let r = routing();
        let d = small_domain();
        let part1 = best_moe_latency(&pf, &c, &r, &d).unwrap();
        let (_, lp) = binary_search_moe(u64::MAX, &pf, &c, &r, &d, part1).unwrap();
        // cheapest dsp candidate: 1x1 tile, one CU
        assert_eq!(lp, LinearKernelParams { tile_in: 1, tile_out: 1, cus: 1 });
    }

    #[test]
    fn part2_matches_linear_scan_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let pf = PlatformProfile::zcu102();
        for trial in 0..100 {
            let patches = rng.gen_range(4..24);
            let experts = rng.gen_range(1..5);
            let c = ModelConfig {
                patches,
                experts,
                top_k: rng.gen_range(1..=experts),
                feat_dim: rng.gen_range(4..32),
                hidden_dim: rng.gen_range(4..48),
                ..cfg()
            };
            let r = RoutingTable::synthetic_uniform(patches, experts, c.top_k, rng.gen()).unwrap();
            let d = SearchDomain {
                tile_in: vec![1, 2, 3, 5],
                tile_out: vec![1, 4, 6],
                cus: vec![1, 2, 5],
                ..small_domain()
            };
            let part1 = best_moe_latency(&pf, &c, &r, &d).unwrap();
            let bound = if trial % 3 == 0 {
                part1.0
            } else {
                rng.gen_range(1..4 * part1.0.max(2))
            };
            let via_bisect = binary_search_moe(bound, &pf, &c, &r, &d, part1).unwrap();
            let via_scan = linear_scan_moe(bound, &pf, &c, &r, &d, part1).unwrap();
            assert_eq!(via_bisect, via_scan, "trial {trial} bound {bound}");
        }
    }

    #[test]
    fn part2_bound_at_part1_latency_returns_cheapest_achiever() {
        let pf = PlatformProfile::zcu102();
        let c = cfg();
        let r = routing();
        let d = small_domain();
        let part1 = best_moe_latency(&pf, &c, &r, &d).unwrap();
        let (lat, lp) = binary_search_moe(part1.0, &pf, &c, &r, &d, part1).unwrap();
        assert!(lat <= part1.0);
        assert!(dsp_linear(&lp, c.bitwidth, &pf).unwrap() <= dsp_linear(&part1.1, c.bitwidth, &pf).unwrap());
    }

    #[test]
    fn has_search_end_to_end_feasible_and_bounded() {
        let pf = PlatformProfile::zcu102();
        let c = cfg();
        let r = routing();
        let ga = GaConfig { population_size: 16, generations: 30, seed: 1, ..Default::default() };
        let result = has_search(&pf, &c, &r, &small_domain(), &ga).unwrap();
        assert!(check_budget(&result.resources, &pf).feasible);
        assert!(result.moe_params.is_some());
        // after a fit >= 1 run, the shrunk MoE block fits under the MSA bound
        if result.fit_score <= 1.0 {
            assert!(result.latency.cycles_moe <= result.latency.cycles_msa);
        }
        let expect_fit = result.latency.cycles_moe as f64 / result.latency.cycles_msa as f64;
        assert!((result.fit_score - expect_fit).abs() < 1e-12);
        assert!(!result.trace.is_empty());
        assert!(result.stage_log.iter().any(|l| l.contains("num sweep complete")));
    }

    #[test]
    fn has_search_no_moe_model() {
        let pf = PlatformProfile::zcu102();
        let c = ModelConfig { moe_alternate: false, ..cfg() };
        let r = routing();
        let ga = GaConfig { population_size: 16, generations: 20, seed: 5, ..Default::default() };
        let result = has_search(&pf, &c, &r, &small_domain(), &ga).unwrap();
        assert!(result.moe_params.is_none());
        assert!(result.fit_score.is_infinite());
        assert_eq!(result.latency.cycles_moe, 0);
        assert_eq!(
            result.latency.cycles_total,
            c.non_encoder_cycles + c.layer_pairs() * result.latency.cycles_msa
        );
    }

    #[test]
    fn has_search_tiny_platform_errors() {
        let mut pf = PlatformProfile::zcu102();
        pf.dsp_total = 0;
        pf.bram_total = 1;
        let err = has_search(&pf, &cfg(), &routing(), &small_domain(), &GaConfig::default())
            .unwrap_err();
        assert!(err.to_string().to_lowercase().contains("dsp"), "{err}");
    }

    #[test]
    fn has_search_deterministic() {
        let pf = PlatformProfile::zcu102();
        let c = cfg();
        let r = routing();
        let ga = GaConfig { population_size: 8, generations: 10, seed: 9, ..Default::default() };
        let a = has_search(&pf, &c, &r, &small_domain(), &ga).unwrap();
        let b = has_search(&pf, &c, &r, &small_domain(), &ga).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.moe_params, b.moe_params);
        assert_eq!(a.latency, b.latency);
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.stage_log, b.stage_log);
    }

    #[test]
    fn exhaustive_refuses_oversized_domain() {
        let pf = PlatformProfile::zcu102();
        let err =
            exhaustive_search(&pf, &cfg(), &routing(), &small_domain(), Some(10)).unwrap_err();
        assert!(err.to_string().contains("cap"), "{err}");
    }

    #[test]
    fn exhaustive_is_never_worse_than_has_search() {
        let pf = PlatformProfile::zcu102();
        let c = cfg();
        let r = routing();
        let d = small_domain();
        let ga = GaConfig { population_size: 16, generations: 25, seed: 2, ..Default::default() };
        let ga_result = has_search(&pf, &c, &r, &d, &ga).unwrap();
        let oracle = exhaustive_search(&pf, &c, &r, &d, None).unwrap();
        assert!(oracle.latency.cycles_total <= ga_result.latency.cycles_total);
    }

    #[test]
    fn ga_close_to_exhaustive_on_small_domains() {
        let pf = PlatformProfile::zcu102();
        let c = cfg();
        let r = routing();
        let d = small_domain();
        let oracle = exhaustive_search(&pf, &c, &r, &d, None).unwrap();
        let mut hits = 0;
        for seed in [1, 2, 3] {
            let ga = GaConfig { population_size: 24, generations: 40, seed, ..Default::default() };
            let result = has_search(&pf, &c, &r, &d, &ga).unwrap();
            let ratio =
                result.latency.cycles_total as f64 / oracle.latency.cycles_total as f64;
            assert!(ratio >= 1.0 - 1e-12, "seed {seed} beat the oracle: {ratio}");
            if ratio <= 1.05 {
                hits += 1;
            }
        }
        assert!(hits >= 2, "only {hits} of 3 seeds within 5% of the oracle");
    }

    #[test]
    fn exhaustive_msa_minimizes_l_msa() {
        let pf = PlatformProfile::zcu102();
        let c = cfg();
        let ctx = FitnessCtx { cfg: &c, pf: &pf, l_moe: 100, moe_dsp: 0, moe_bram: 0, no_moe: false };
        let d = small_domain();
        let best = exhaustive_msa_best(&ctx, &d, 1).unwrap().unwrap();
        // brute force minimizes l_msa among feasible points
        let every_l_msa: Vec<u64> = d
            .msa_points(1)
            .iter()
            .map(|hp| latency_msa(hp, &c))
            .collect();
        assert_eq!(best.1, *every_l_msa.iter().min().unwrap());
    }
}
