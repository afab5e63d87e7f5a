use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const WEIGHT_SUM_TOL: f64 = 1e-6;

/// Token-to-expert assignment: per token an ordered list of
/// `(expert_id, gate_weight)` pairs, one list entry per activated expert.
///
/// Text form, one line per token: `token_id expert_id:weight ...`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingTable {
    experts: usize,
    assignments: Vec<Vec<(usize, f64)>>,
}

impl RoutingTable {
    pub fn new(experts: usize, assignments: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        if assignments.is_empty() {
            return Err(Error::domain("routing table has no tokens"));
        }
        let k = assignments[0].len();
        for (tok, row) in assignments.iter().enumerate() {
            if row.is_empty() || row.len() != k {
                return Err(Error::domain(format!(
                    "token {tok}: expected {k} assignments, found {}",
                    row.len()
                )));
            }
            let mut seen = Vec::with_capacity(row.len());
            let mut sum = 0.0;
            for &(e, w) in row {
                if e >= experts {
                    return Err(Error::domain(format!(
                        "token {tok}: expert id {e} out of range (experts = {experts})"
                    )));
                }
                if seen.contains(&e) {
                    return Err(Error::domain(format!(
                        "token {tok}: duplicate expert id {e}"
                    )));
                }
                if !(w.is_finite() && w > 0.0) {
                    return Err(Error::domain(format!(
                        "token {tok}: gate weight {w} must be positive"
                    )));
                }
                seen.push(e);
                sum += w;
            }
            if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
                return Err(Error::domain(format!(
                    "token {tok}: gate weights sum to {sum}, expected 1"
                )));
            }
        }
        Ok(RoutingTable {
            experts,
            assignments,
        })
    }

    /// Seeded synthetic routing: every token activates `top_k` distinct
    /// experts drawn uniformly, each with weight `1/top_k`.
    pub fn synthetic_uniform(tokens: usize, experts: usize, top_k: usize, seed: u64) -> Result<Self> {
        if top_k < 1 || top_k > experts {
            return Err(Error::domain(format!(
                "top_k {top_k} must satisfy 1 <= top_k <= experts {experts}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ids: Vec<usize> = (0..experts).collect();
        let w = 1.0 / top_k as f64;
        let assignments = (0..tokens)
            .map(|_| {
                let mut picks: Vec<usize> =
                    ids.choose_multiple(&mut rng, top_k).copied().collect();
                picks.sort_unstable();
                picks.into_iter().map(|e| (e, w)).collect()
            })
            .collect();
        RoutingTable::new(experts, assignments)
    }

    pub fn tokens(&self) -> usize {
        self.assignments.len()
    }

    pub fn experts(&self) -> usize {
        self.experts
    }

    pub fn top_k(&self) -> usize {
        self.assignments[0].len()
    }

    pub fn assignment(&self, token: usize) -> &[(usize, f64)] {
        &self.assignments[token]
    }

    /// Tokens routed to `expert`, in token order.
    pub fn tokens_for_expert(&self, expert: usize) -> Vec<usize> {
        self.assignments
            .iter()
            .enumerate()
            .filter(|(_, row)| row.iter().any(|&(e, _)| e == expert))
            .map(|(tok, _)| tok)
            .collect()
    }

    pub fn expert_token_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.experts];
        for row in &self.assignments {
            for &(e, _) in row {
                counts[e] += 1;
            }
        }
        counts
    }

    pub fn activated_experts(&self) -> usize {
        self.expert_token_counts().iter().filter(|&&c| c > 0).count()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (tok, row) in self.assignments.iter().enumerate() {
            write!(out, "{tok}").unwrap();
            for &(e, w) in row {
                write!(out, " {e}:{w}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str, experts: usize) -> Result<Self> {
        let mut assignments = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let tok: usize = fields
                .next()
                .unwrap()
                .parse()
                .map_err(|_| Error::domain(format!("line {}: bad token id", i + 1)))?;
            if tok != assignments.len() {
                return Err(Error::domain(format!(
                    "line {}: token ids must be consecutive from 0 (found {tok})",
                    i + 1
                )));
            }
            let mut row = Vec::new();
            for f in fields {
                let (e, w) = f.split_once(':').ok_or_else(|| {
                    Error::domain(format!("line {}: expected expert:weight, found {f:?}", i + 1))
                })?;
                let e: usize = e
                    .parse()
                    .map_err(|_| Error::domain(format!("line {}: bad expert id", i + 1)))?;
                let w: f64 = w
                    .parse()
                    .map_err(|_| Error::domain(format!("line {}: bad weight", i + 1)))?;
                row.push((e, w));
            }
            assignments.push(row);
        }
        RoutingTable::new(experts, assignments)
    }

    pub fn from_file(path: &Path, experts: usize) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::parse(path, e.to_string()))?;
        Self::parse(&text, experts).map_err(|e| Error::parse(path, e.to_string()))
    }

    pub fn to_file(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render())?;
        Ok(())
    }
}
