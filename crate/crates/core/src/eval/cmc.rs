use std::io::Write;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::EvalError;
use crate::exec;
use crate::model::Label;

use super::FusedScores;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmcCurve {
    /// `accuracy[k - 1]` is the rank-k identification rate.
    pub accuracy: Vec<f64>,
    pub n_probes: usize,
}

impl CmcCurve {
    pub fn at(&self, rank: usize) -> f64 {
        self.accuracy[rank - 1]
    }
}

enum Outcome {
    Rank(usize),
    NoMate,
    ManyMates,
}

/// Rank of each probe's genuine mate, probes in first-appearance order.
/// Impostors tying the genuine score rank ahead of it.
fn probe_ranks(fused: &FusedScores) -> Vec<(String, Outcome)> {
    let mut groups: IndexMap<&str, Vec<usize>> = IndexMap::new();
    for (i, row) in fused.rows.iter().enumerate() {
        groups.entry(&row.probe_id).or_default().push(i);
    }
    let groups: Vec<(&str, Vec<usize>)> = groups.into_iter().collect();
    exec::map_slice(&groups, |(probe, rows)| {
        let mut mates = rows.iter().filter(|&&i| fused.rows[i].label == Label::Genuine);
        let outcome = match (mates.next(), mates.next()) {
            (None, _) => Outcome::NoMate,
            (Some(_), Some(_)) => Outcome::ManyMates,
            (Some(&g), None) => {
                let genuine = fused.rows[g].score;
                let ahead = rows
                    .iter()
                    .filter(|&&i| fused.rows[i].label == Label::Impostor && fused.rows[i].score >= genuine)
                    .count();
                Outcome::Rank(1 + ahead)
            }
        };
        (probe.to_string(), outcome)
    })
}

fn curve(ranks: impl Iterator<Item = usize>, n_probes: usize, max_rank: usize) -> CmcCurve {
    let mut hits = vec![0usize; max_rank];
    for rank in ranks {
        if rank <= max_rank {
            hits[rank - 1] += 1;
        }
    }
    let mut cumulative = 0;
    let accuracy = hits
        .into_iter()
        .map(|h| {
            cumulative += h;
            cumulative as f64 / n_probes as f64
        })
        .collect();
    CmcCurve { accuracy, n_probes }
}

/// Identification accuracy at ranks `1..=max_rank`.
pub fn cmc(fused: &FusedScores, max_rank: usize) -> Result<CmcCurve, EvalError> {
    if max_rank == 0 {
        return Err(EvalError::InvalidMaxRank);
    }
    let outcomes = probe_ranks(fused);
    let mut ranks = Vec::with_capacity(outcomes.len());
    for (probe, outcome) in outcomes {
        match outcome {
            Outcome::Rank(r) => ranks.push(r),
            Outcome::NoMate => return Err(EvalError::ProbeWithoutMate(probe)),
            Outcome::ManyMates => return Err(EvalError::ProbeWithMultipleMates(probe)),
        }
    }
    if ranks.is_empty() {
        return Err(EvalError::OneClassOnly { genuine: 0, impostor: fused.len() });
    }
    let n = ranks.len();
    Ok(curve(ranks.into_iter(), n, max_rank))
}

/// Like [`cmc`], but a probe whose mate row is absent counts as a miss, and
/// the denominator is at least `total_probes`. Used after listwise deletion,
/// which can remove mates or whole probes.
pub fn cmc_lenient(fused: &FusedScores, max_rank: usize, total_probes: usize) -> Result<CmcCurve, EvalError> {
    if max_rank == 0 {
        return Err(EvalError::InvalidMaxRank);
    }
    let outcomes = probe_ranks(fused);
    let n = outcomes.len().max(total_probes);
    if n == 0 {
        return Err(EvalError::OneClassOnly { genuine: 0, impostor: 0 });
    }
    let mut ranks = Vec::with_capacity(outcomes.len());
    for (probe, outcome) in outcomes {
        match outcome {
            Outcome::Rank(r) => ranks.push(r),
            Outcome::NoMate => {}
            Outcome::ManyMates => return Err(EvalError::ProbeWithMultipleMates(probe)),
        }
    }
    Ok(curve(ranks.into_iter(), n, max_rank))
}

/// `rank,accuracy`, one line per rank.
pub fn write_cmc_csv<W: Write>(curve: &CmcCurve, mut w: W) -> std::io::Result<()> {
    writeln!(w, "rank,accuracy")?;
    for (i, a) in curve.accuracy.iter().enumerate() {
        writeln!(w, "{},{}", i + 1, a)?;
    }
    Ok(())
}
