//! Synthetic multimodal score tables with known genuine and impostor
//! distributions.
//!
//! Every row draws one latent factor shared by its modalities plus one
//! independent noise term per modality:
//!
//! ```text
//! score_m = clip(mu + sd * (sqrt(rho) * z_row + sqrt(1 - rho) * z_m), 0, 1)
//! ```
//!
//! so `rho` is the within-class correlation between modalities before
//! clipping. Each row's generator is seeded from `(seed, row index)`, which
//! makes the table independent of thread count.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::SynthError;
use crate::exec;
use crate::model::{build_table, Label, ModalitySet, RawRow, ScoreTable};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreDist {
    pub mean: f64,
    pub sd: f64,
}

impl ScoreDist {
    pub const fn new(mean: f64, sd: f64) -> Self {
        Self { mean, sd }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub n_identities: usize,
    pub modalities: ModalitySet,
    pub genuine: Vec<ScoreDist>,
    pub impostor: Vec<ScoreDist>,
    pub rho: f64,
    pub seed: u64,
}

impl SynthSpec {
    /// Same distributions for every modality.
    pub fn uniform(
        n_identities: usize,
        modalities: ModalitySet,
        genuine: ScoreDist,
        impostor: ScoreDist,
        rho: f64,
        seed: u64,
    ) -> Self {
        let n = modalities.len();
        Self {
            n_identities,
            modalities,
            genuine: vec![genuine; n],
            impostor: vec![impostor; n],
            rho,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |msg: String| Err(SynthError::InvalidSpec(msg));
        if self.n_identities == 0 {
            return bad("n_identities must be positive".into());
        }
        let n = self.modalities.len();
        if self.genuine.len() != n || self.impostor.len() != n {
            return bad(format!(
                "need {n} genuine and impostor distributions, got {} and {}",
                self.genuine.len(),
                self.impostor.len()
            ));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return bad(format!("rho {} is outside [0, 1)", self.rho));
        }
        for (m, (g, i)) in self.genuine.iter().zip(&self.impostor).enumerate() {
            let name = self.modalities.name(m);
            for d in [g, i] {
                if !d.mean.is_finite() || !d.sd.is_finite() || d.sd < 0.0 {
                    return bad(format!("modality `{name}`: invalid distribution {d:?}"));
                }
            }
            if g.mean <= i.mean {
                return bad(format!(
                    "modality `{name}`: genuine mean {} must exceed impostor mean {}",
                    g.mean, i.mean
                ));
            }
        }
        Ok(())
    }
}

/// Generate an `n_identities^2`-row table, probe-major, with ids `"0".."n-1"`.
pub fn generate(spec: &SynthSpec) -> Result<ScoreTable, SynthError> {
    spec.validate()?;
    let n = spec.n_identities;
    let shared = spec.rho.sqrt();
    let own = (1.0 - spec.rho).sqrt();
    let ids: Vec<String> = (0..n).map(|i| i.to_string()).collect();
    let rows = exec::map_range(n * n, |k| {
        let (p, g) = (k / n, k % n);
        let dists = match Label::from_ids(&ids[p], &ids[g]) {
            Label::Genuine => &spec.genuine,
            Label::Impostor => &spec.impostor,
        };
        let mut rng = seed::rng(seed::mix(spec.seed, seed::SYNTH_STREAM, k as u64));
        let z_row: f64 = StandardNormal.sample(&mut rng);
        let scores = dists
            .iter()
            .map(|d| {
                let z: f64 = StandardNormal.sample(&mut rng);
                Some((d.mean + d.sd * (shared * z_row + own * z)).clamp(0.0, 1.0))
            })
            .collect();
        RawRow::new(ids[p].clone(), ids[g].clone(), scores)
    });
    build_table(spec.modalities.clone(), rows).map_err(|e| SynthError::InvalidSpec(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn four() -> ModalitySet {
        ModalitySet::new(["a", "b", "c", "d"]).unwrap()
    }

    fn pearson(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
        let mut sxy = 0.0;
        let mut sxx = 0.0;
        let mut syy = 0.0;
        for (a, b) in x.iter().zip(y) {
            sxy += (a - mx) * (b - my);
            sxx += (a - mx) * (a - mx);
            syy += (b - my) * (b - my);
        }
        sxy / (sxx * syy).sqrt()
    }

    #[test]
    fn counts_and_means() {
        let spec = SynthSpec::uniform(200, four(), ScoreDist::new(0.8, 0.1), ScoreDist::new(0.3, 0.1), 0.5, 9);
        let t = generate(&spec).unwrap();
        assert_eq!(t.len(), 40_000);
        assert_eq!(t.genuine_count(), 200);
        assert!(t.is_complete());
        let se = 0.1 / (200f64).sqrt();
        for m in 0..4 {
            let genuine: Vec<f64> = t
                .rows()
                .iter()
                .filter(|r| r.label == Label::Genuine)
                .map(|r| r.scores[m].unwrap())
                .collect();
            let mean = genuine.iter().sum::<f64>() / genuine.len() as f64;
            assert!((mean - 0.8).abs() < 3.0 * se, "modality {m}: mean {mean}");
        }
        assert!(t.rows().iter().flat_map(|r| &r.scores).all(|s| (0.0..=1.0).contains(&s.unwrap())));
    }

    #[test]
    fn deterministic() {
        let spec = SynthSpec::uniform(20, four(), ScoreDist::new(0.7, 0.1), ScoreDist::new(0.3, 0.1), 0.3, 1);
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
        let other = SynthSpec { seed: 2, ..spec.clone() };
        assert_ne!(generate(&spec).unwrap(), generate(&other).unwrap());
    }

    #[test]
    fn degenerate_distributions_separate_perfectly() {
        let spec = SynthSpec::uniform(10, four(), ScoreDist::new(1.0, 0.0), ScoreDist::new(0.0, 0.0), 0.0, 1);
        let t = generate(&spec).unwrap();
        for r in t.rows() {
            let want = if r.label == Label::Genuine { 1.0 } else { 0.0 };
            assert!(r.scores.iter().all(|s| *s == Some(want)));
        }
    }

    #[test]
    fn correlation_increases_with_rho() {
        let mut corr = Vec::new();
        for rho in [0.0, 0.5, 0.9] {
            let spec =
                SynthSpec::uniform(200, four(), ScoreDist::new(0.8, 0.1), ScoreDist::new(0.3, 0.1), rho, 5);
            let t = generate(&spec).unwrap();
            let impostors: Vec<_> = t.rows().iter().filter(|r| r.label == Label::Impostor).collect();
            let a: Vec<f64> = impostors.iter().map(|r| r.scores[0].unwrap()).collect();
            let b: Vec<f64> = impostors.iter().map(|r| r.scores[1].unwrap()).collect();
            corr.push(pearson(&a, &b));
        }
        assert!(corr[0].abs() < 0.03, "{corr:?}");
        assert!(corr[1] > 0.0 && corr[1] < corr[2], "{corr:?}");
    }

    #[test]
    fn validation() {
        let ok = SynthSpec::uniform(5, four(), ScoreDist::new(0.8, 0.1), ScoreDist::new(0.3, 0.1), 0.5, 1);
        assert!(ok.validate().is_ok());
        let inverted = SynthSpec::uniform(5, four(), ScoreDist::new(0.3, 0.1), ScoreDist::new(0.8, 0.1), 0.5, 1);
        assert!(generate(&inverted).is_err());
        let bad_rho = SynthSpec { rho: 1.0, ..ok.clone() };
        assert!(bad_rho.validate().is_err());
        let zero = SynthSpec { n_identities: 0, ..ok };
        assert!(zero.validate().is_err());
    }
}
