use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::costmodel::{
    check_budget, latency_msa, resources_total, HardwareParams, PlatformProfile, ResourceReport,
};
use crate::dse::SearchDomain;
use crate::error::{Error, Result};
use crate::workload::ModelConfig;

/// Knobs for the traditional GA over the MSA parameter genome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaConfig {
    pub population_size: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub tournament_size: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population_size: 64,
            generations: 200,
            crossover_rate: 0.8,
            mutation_rate: 0.1,
            tournament_size: 4,
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 2 {
            return Err(Error::domain("population_size must be >= 2"));
        }
        if self.generations < 1 {
            return Err(Error::domain("generations must be >= 1"));
        }
        for (name, rate) in [
            ("crossover_rate", self.crossover_rate),
            ("mutation_rate", self.mutation_rate),
        ] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(Error::domain(format!("{name} must be in [0, 1]")));
            }
        }
        if self.tournament_size < 1 || self.tournament_size > self.population_size {
            return Err(Error::domain(
                "tournament_size must be in [1, population_size]",
            ));
        }
        Ok(())
    }
}

/// Everything a fitness evaluation needs besides the candidate itself;
/// shared read-only across the population, so evaluations parallelize.
#[derive(Debug, Clone, Copy)]
pub struct FitnessCtx<'a> {
    pub cfg: &'a ModelConfig,
    pub pf: &'a PlatformProfile,
    /// Part-1 MoE latency; the fitness target is l_moe / l_msa.
    pub l_moe: u64,
    /// Part-1 MoE kernel resources, reserved before the budget check.
    pub moe_dsp: u64,
    pub moe_bram: u64,
    /// Model without an MoE block: maximize 1/l_msa instead of l_moe/l_msa.
    pub no_moe: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct Evaluation {
    pub fitness: f64,
    pub l_msa: u64,
    pub resources: ResourceReport,
    pub feasible: bool,
}

impl FitnessCtx<'_> {
    /// Candidate score: l_moe / l_msa, with infeasible designs scored 0 so
    /// selection pressure alone enforces the budget.
    pub fn evaluate(&self, hp: &HardwareParams) -> Result<Evaluation> {
        let resources = resources_total(hp, self.cfg, self.pf)?
            .with_extra_linear(self.moe_dsp, self.moe_bram);
        let l_msa = latency_msa(hp, self.cfg);
        let feasible = check_budget(&resources, self.pf).feasible;
        let fitness = if !feasible {
            0.0
        } else if self.no_moe {
            1.0 / l_msa as f64
        } else {
            self.l_moe as f64 / l_msa as f64
        };
        Ok(Evaluation { fitness, l_msa, resources, feasible })
    }
}

/// Best-of-generation snapshot, one row per evaluated generation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationTrace {
    pub generation: usize,
    pub best_fitness: f64,
    pub best_l_msa: u64,
    pub dsp_used: u64,
    pub bram_used: u64,
}

#[derive(Debug, Clone)]
pub struct GaOutcome {
    pub best: HardwareParams,
    pub best_fitness: f64,
    pub l_msa: u64,
    pub resources: ResourceReport,
    pub trace: Vec<GenerationTrace>,
    pub early_stopped: bool,
}

type Genome = [usize; 5];

fn random_genome(lists: &[&[usize]; 5], rng: &mut ChaCha8Rng) -> Genome {
    let mut g = [0; 5];
    for (slot, list) in g.iter_mut().zip(lists.iter()) {
        *slot = rng.gen_range(0..list.len());
    }
    g
}

/// Index of the tournament winner; ties keep the earlier sample so the
/// result is a pure function of the RNG stream.
fn tournament(fitness: &[f64], size: usize, rng: &mut ChaCha8Rng) -> usize {
    let mut best = rng.gen_range(0..fitness.len());
    for _ in 1..size {
        let challenger = rng.gen_range(0..fitness.len());
        if fitness[challenger] > fitness[best] {
            best = challenger;
        }
    }
    best
}

fn crossover(a: &Genome, b: &Genome, rate: f64, rng: &mut ChaCha8Rng) -> (Genome, Genome) {
    if !rng.gen_bool(rate) {
        return (*a, *b);
    }
    let point = rng.gen_range(1..5);
    let mut c = *a;
    let mut d = *b;
    c[point..].copy_from_slice(&b[point..]);
    d[point..].copy_from_slice(&a[point..]);
    (c, d)
}

fn mutate(g: &mut Genome, lists: &[&[usize]; 5], rate: f64, rng: &mut ChaCha8Rng) {
    for (slot, list) in g.iter_mut().zip(lists.iter()) {
        if rng.gen_bool(rate) {
            *slot = rng.gen_range(0..list.len());
        }
    }
}

/// Seeded GA over the five MSA genome fields with `num` held fixed:
/// tournament selection, one-point crossover, per-field resampling mutation,
/// one elite. Stops at the first generation containing fitness >= 1.
pub fn ga_search_msa(
    ctx: &FitnessCtx,
    domain: &SearchDomain,
    num: usize,
    ga: &GaConfig,
) -> Result<GaOutcome> {
    ga.validate()?;
    domain.validate()?;
    let lists = domain.genome_lists();
    let mut rng = ChaCha8Rng::seed_from_u64(ga.seed);

    let mut population: Vec<Genome> = (0..ga.population_size)
        .map(|_| random_genome(&lists, &mut rng))
        .collect();

    let mut trace = Vec::new();
    let mut overall: Option<(f64, Genome, Evaluation)> = None;
    let mut early_stopped = false;

    for generation in 0..ga.generations {
        let evals: Vec<Evaluation> = population
            .par_iter()
            .map(|g| ctx.evaluate(&domain.decode(num, g)))
            .collect::<Result<_>>()?;

        let best_idx = (0..evals.len())
            .max_by(|&a, &b| evals[a].fitness.total_cmp(&evals[b].fitness))
            .expect("population is never empty");
        let best = &evals[best_idx];
        trace.push(GenerationTrace {
            generation,
            best_fitness: best.fitness,
            best_l_msa: best.l_msa,
            dsp_used: best.resources.dsp_total_used,
            bram_used: best.resources.bram_total_used,
        });
        let improved = overall
            .as_ref()
            .map(|(f, _, _)| best.fitness > *f)
            .unwrap_or(true);
        if improved {
            overall = Some((best.fitness, population[best_idx], *best));
        }

        if best.fitness >= 1.0 {
            early_stopped = true;
            break;
        }
        if generation + 1 == ga.generations {
            break;
        }

        let fitness: Vec<f64> = evals.iter().map(|e| e.fitness).collect();
        let elite = population[best_idx];
        let mut next = Vec::with_capacity(ga.population_size);
        next.push(elite);
        while next.len() < ga.population_size {
            let pa = population[tournament(&fitness, ga.tournament_size, &mut rng)];
            let pb = population[tournament(&fitness, ga.tournament_size, &mut rng)];
            let (mut ca, mut cb) = crossover(&pa, &pb, ga.crossover_rate, &mut rng);
            mutate(&mut ca, &lists, ga.mutation_rate, &mut rng);
            mutate(&mut cb, &lists, ga.mutation_rate, &mut rng);
            next.push(ca);
            if next.len() < ga.population_size {
                next.push(cb);
            }
        }
        population = next;
    }

    let (best_fitness, genome, eval) = overall.expect("at least one generation ran");
    if !eval.feasible {
        let worst_dsp = eval.resources.dsp_total_used as i64 - ctx.pf.dsp_total as i64;
        let worst_bram = eval.resources.bram_total_used as i64 - ctx.pf.bram_total as i64;
        return Err(Error::Search(format!(
            "no feasible MSA design at num={num}: closest candidate exceeds budget by \
             {} DSP, {} BRAM",
            worst_dsp.max(0),
            worst_bram.max(0)
        )));
    }
    Ok(GaOutcome {
        best: domain.decode(num, &genome),
        best_fitness,
        l_msa: eval.l_msa,
        resources: eval.resources,
        trace,
        early_stopped,
    })
}
