use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::EvalError;
use crate::model::Label;

use super::FusedScores;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// Interpolated operating point where `fpr == 1 - tpr`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EerPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// Ordered by descending threshold, from `(0, 0)` to `(1, 1)`.
    pub points: Vec<RocPoint>,
    pub auc: f64,
    pub eer: f64,
    pub eer_point: EerPoint,
    pub n_genuine: usize,
    pub n_impostor: usize,
}

impl RocCurve {
    /// Highest tpr among stored points whose fpr does not exceed `fpr`.
    pub fn tpr_at_fpr(&self, fpr: f64) -> f64 {
        self.points
            .iter()
            .filter(|p| p.fpr <= fpr)
            .map(|p| p.tpr)
            .fold(0.0, f64::max)
    }
}

/// Verification ROC: a comparison is accepted when its fused score is at
/// least the threshold.
pub fn roc(fused: &FusedScores) -> Result<RocCurve, EvalError> {
    let n_genuine = fused.genuine_count();
    let n_impostor = fused.impostor_count();
    if n_genuine == 0 || n_impostor == 0 {
        return Err(EvalError::OneClassOnly {
            genuine: n_genuine,
            impostor: n_impostor,
        });
    }
    let mut scored: Vec<(f64, bool)> = fused
        .rows
        .iter()
        .map(|r| (r.score, r.label == Label::Genuine))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (max, min) = (scored[0].0, scored[scored.len() - 1].0);
    let (ng, ni) = (n_genuine as f64, n_impostor as f64);

    let mut points = Vec::with_capacity(scored.len() + 2);
    points.push(RocPoint {
        threshold: max + 1.0,
        fpr: 0.0,
        tpr: 0.0,
    });
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < scored.len() {
        let t = scored[i].0;
        while i < scored.len() && scored[i].0 == t {
            if scored[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            threshold: t,
            fpr: fp as f64 / ni,
            tpr: tp as f64 / ng,
        });
    }
    points.push(RocPoint {
        threshold: min - 1.0,
        fpr: 1.0,
        tpr: 1.0,
    });

    let auc = points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum();

    // g = fpr - (1 - tpr) runs from -1 to +1 along the curve
    let g = |p: &RocPoint| p.fpr + p.tpr - 1.0;
    let k = points.iter().position(|p| g(p) >= 0.0).expect("last point has g = 1");
    let eer_point = if g(&points[k]) == 0.0 || k == 0 {
        let p = points[k];
        EerPoint {
            threshold: p.threshold,
            fpr: p.fpr,
            tpr: p.tpr,
        }
    } else {
        let (a, b) = (points[k - 1], points[k]);
        let s = -g(&a) / (g(&b) - g(&a));
        EerPoint {
            threshold: a.threshold + s * (b.threshold - a.threshold),
            fpr: a.fpr + s * (b.fpr - a.fpr),
            tpr: a.tpr + s * (b.tpr - a.tpr),
        }
    };
    let eer = (eer_point.fpr + 1.0 - eer_point.tpr) / 2.0;

    Ok(RocCurve {
        points,
        auc,
        eer,
        eer_point,
        n_genuine,
        n_impostor,
    })
}

/// `threshold,fpr,tpr`, one line per stored point.
pub fn write_roc_csv<W: Write>(curve: &RocCurve, mut w: W) -> std::io::Result<()> {
    writeln!(w, "threshold,fpr,tpr")?;
    for p in &curve.points {
        writeln!(w, "{},{},{}", p.threshold, p.fpr, p.tpr)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{FusedRow, Provenance};

    pub(crate) fn fused(genuine: &[f64], impostor: &[f64]) -> FusedScores {
        let mut rows = Vec::new();
        for (i, &s) in genuine.iter().enumerate() {
            rows.push(FusedRow {
                probe_id: format!("g{i}").into(),
                gallery_id: format!("g{i}").into(),
                label: Label::Genuine,
                score: s,
            });
        }
        for (i, &s) in impostor.iter().enumerate() {
            rows.push(FusedRow {
                probe_id: format!("i{i}").into(),
                gallery_id: format!("x{i}").into(),
                label: Label::Impostor,
                score: s,
            });
        }
        FusedScores {
            rows,
            provenance: Provenance::Complete,
        }
    }

    #[test]
    fn perfect_separation() {
        let c = roc(&fused(&[0.9, 0.8], &[0.1, 0.2])).unwrap();
        assert_eq!(c.auc, 1.0);
        assert_eq!(c.eer, 0.0);
        assert_eq!(c.points.first().map(|p| (p.fpr, p.tpr)), Some((0.0, 0.0)));
        assert_eq!(c.points.last().map(|p| (p.fpr, p.tpr)), Some((1.0, 1.0)));
    }

    #[test]
    fn identical_distributions() {
        let c = roc(&fused(&[0.1, 0.5, 0.5, 0.9], &[0.9, 0.5, 0.1, 0.5])).unwrap();
        assert!((c.auc - 0.5).abs() < 1e-15);
    }

    #[test]
    fn three_of_four_pairs() {
        let c = roc(&fused(&[0.8, 0.4], &[0.6, 0.2])).unwrap();
        assert!((c.auc - 0.75).abs() < 1e-15);
        assert!((c.eer_point.fpr - (1.0 - c.eer_point.tpr)).abs() < 1e-12);
        assert!((c.eer - 0.5).abs() < 1e-12);
    }

    #[test]
    fn monotone_points() {
        let c = roc(&fused(&[0.3, 0.7, 0.7, 0.9], &[0.1, 0.3, 0.5, 0.7, 0.2])).unwrap();
        for w in c.points.windows(2) {
            assert!(w[0].threshold > w[1].threshold);
            assert!(w[0].fpr <= w[1].fpr && w[0].tpr <= w[1].tpr);
        }
        assert_eq!(c.tpr_at_fpr(0.0), 0.25);
        assert_eq!(c.tpr_at_fpr(1.0), 1.0);
    }

    #[test]
    fn one_class() {
        assert_eq!(
            roc(&fused(&[0.3], &[])).unwrap_err(),
            EvalError::OneClassOnly { genuine: 1, impostor: 0 }
        );
    }

    #[test]
    fn csv() {
        let c = roc(&fused(&[0.75], &[0.25])).unwrap();
        let mut buf = Vec::new();
        write_roc_csv(&c, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "threshold,fpr,tpr\n1.75,0,0\n0.75,0,1\n0.25,1,1\n-0.75,1,1\n"
        );
    }
}
