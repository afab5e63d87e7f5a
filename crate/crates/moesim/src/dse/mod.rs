//! The 2-stage hardware accelerator search: an exhaustive MoE-kernel bound,
//! a seeded GA over the MSA genome per `num` with early stop at fitness
//! l_moe/l_msa >= 1, and a dsp-ordered bisection shrinking the MoE kernel
//! under the resulting l_msa bound. A joint brute-force oracle backs the
//! whole thing in tests and `verify`.

mod domain;
mod ga;
mod search;

pub use domain::{SearchConfig, SearchDomain};
pub use ga::{ga_search_msa, Evaluation, FitnessCtx, GaConfig, GaOutcome, GenerationTrace};
pub use search::{
    best_moe_latency, binary_search_moe, exhaustive_msa_best, exhaustive_search,
    full_design_resources, has_search, linear_scan_moe, SearchResult,
};
