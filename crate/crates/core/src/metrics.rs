//! ISO/IEC 30107-3 style detection metrics over differential scores.
//!
//! A threshold `t` declares a sample an attack when `score >= t`. At each
//! threshold:
//!
//! * APCER is the fraction of attacks with `score < t`,
//! * BPCER is the fraction of bona-fide samples with `score >= t`.
//!
//! Candidate thresholds are the distinct observed scores plus `+inf`.
//! There is no interpolation between operating points.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::ScoreRecord;
use crate::embedding::Label;

/// Fixed operating points, in percent.
pub const FIXED_TARGETS: [f64; 3] = [1.0, 10.0, 20.0];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("need at least one bona-fide and one attack score, got {n_bf} and {n_attack}")]
    DegenerateClassCounts { n_bf: usize, n_attack: usize },
    #[error("score for {0:?} is not finite")]
    NonFiniteScore(String),
    #[error("no reports to aggregate")]
    EmptyList,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub threshold: f64,
    pub apcer: f64,
    pub bpcer: f64,
}

/// Which error rate is held fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixedMetric {
    /// Report APCER at a fixed BPCER.
    Bpcer,
    /// Report BPCER at a fixed APCER.
    Apcer,
}

/// Bona-fide and attack scores split out of a record list.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSplit {
    pub bona_fide: Vec<f64>,
    pub attack: Vec<f64>,
}

impl ScoreSplit {
    pub fn from_records<'a>(
        records: impl IntoIterator<Item = &'a ScoreRecord>,
    ) -> Result<Self, MetricError> {
        let mut split = ScoreSplit {
            bona_fide: Vec::new(),
            attack: Vec::new(),
        };
        for r in records {
            if !r.score.is_finite() {
                return Err(MetricError::NonFiniteScore(r.sample_id.clone()));
            }
            match r.truth {
                Label::BonaFide => split.bona_fide.push(r.score),
                Label::Attack => split.attack.push(r.score),
            }
        }
        if split.bona_fide.is_empty() || split.attack.is_empty() {
            return Err(MetricError::DegenerateClassCounts {
                n_bf: split.bona_fide.len(),
                n_attack: split.attack.len(),
            });
        }
        Ok(split)
    }

    /// Operating points in increasing threshold order, ending at `+inf`.
    pub fn sweep(&self) -> Vec<OperatingPoint> {
        let mut bf = self.bona_fide.clone();
        let mut ma = self.attack.clone();
        bf.sort_by(f64::total_cmp);
        ma.sort_by(f64::total_cmp);
        let mut thresholds: Vec<f64> = bf.iter().chain(&ma).copied().collect();
        thresholds.sort_by(f64::total_cmp);
        thresholds.dedup();

        let (n_bf, n_ma) = (bf.len(), ma.len());
        let (mut bf_below, mut ma_below) = (0usize, 0usize);
        let mut points = Vec::with_capacity(thresholds.len() + 1);
        for t in thresholds {
            while bf_below < n_bf && bf[bf_below] < t {
                bf_below += 1;
            }
            while ma_below < n_ma && ma[ma_below] < t {
                ma_below += 1;
            }
            points.push(OperatingPoint {
                threshold: t,
                apcer: ma_below as f64 / n_ma as f64,
                bpcer: (n_bf - bf_below) as f64 / n_bf as f64,
            });
        }
        points.push(OperatingPoint {
            threshold: f64::INFINITY,
            apcer: 1.0,
            bpcer: 0.0,
        });
        points
    }
}

pub fn sweep(records: &[ScoreRecord]) -> Result<Vec<OperatingPoint>, MetricError> {
    Ok(ScoreSplit::from_records(records)?.sweep())
}

/// The operating point closest to APCER = BPCER. Ties prefer the smaller
/// total error, then the smaller threshold.
pub fn eer_point(points: &[OperatingPoint]) -> OperatingPoint {
    *points
        .iter()
        .min_by(|a, b| {
            let gap = |p: &OperatingPoint| (p.apcer - p.bpcer).abs();
            gap(a)
                .total_cmp(&gap(b))
                .then((a.apcer + a.bpcer).total_cmp(&(b.apcer + b.bpcer)))
                .then(a.threshold.total_cmp(&b.threshold))
        })
        .expect("a sweep always contains the +inf point")
}

/// Equal error rate in percent: mean of APCER and BPCER at [`eer_point`].
pub fn eer(records: &[ScoreRecord]) -> Result<f64, MetricError> {
    Ok(eer_from_points(&sweep(records)?))
}

pub fn eer_from_points(points: &[OperatingPoint]) -> f64 {
    let p = eer_point(points);
    (p.apcer + p.bpcer) / 2.0 * 100.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedResult {
    /// The reported error rate, in percent.
    pub percent: f64,
    /// False when no operating point satisfies the constraint and the
    /// nearest feasible point was used instead.
    pub constraint_met: bool,
}

/// Error rate at a fixed value of the other error rate.
///
/// Among operating points whose fixed metric is at most `target_percent`,
/// reports the smallest value of the other metric. When none qualifies,
/// falls back to the point with the smallest fixed metric.
pub fn error_at_fixed_points(
    points: &[OperatingPoint],
    fix: FixedMetric,
    target_percent: f64,
) -> FixedResult {
    let split = |p: &OperatingPoint| match fix {
        FixedMetric::Bpcer => (p.bpcer, p.apcer),
        FixedMetric::Apcer => (p.apcer, p.bpcer),
    };
    let limit = target_percent / 100.0;
    let feasible = points
        .iter()
        .map(split)
        .filter(|(fixed, _)| *fixed <= limit)
        .map(|(_, reported)| reported)
        .min_by(f64::total_cmp);
    match feasible {
        Some(reported) => FixedResult {
            percent: reported * 100.0,
            constraint_met: true,
        },
        None => {
            let (_, reported) = points
                .iter()
                .map(split)
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)))
                .expect("a sweep always contains the +inf point");
            FixedResult {
                percent: reported * 100.0,
                constraint_met: false,
            }
        }
    }
}

pub fn error_at_fixed(
    records: &[ScoreRecord],
    fix: FixedMetric,
    target_percent: f64,
) -> Result<f64, MetricError> {
    Ok(error_at_fixed_points(&sweep(records)?, fix, target_percent).percent)
}

/// Values at the 1%, 10% and 20% operating points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtTargets<T> {
    #[serde(rename = "1")]
    pub at_1: T,
    #[serde(rename = "10")]
    pub at_10: T,
    #[serde(rename = "20")]
    pub at_20: T,
}

impl<T: Copy> AtTargets<T> {
    pub fn from_fn(mut f: impl FnMut(f64) -> T) -> Self {
        Self {
            at_1: f(FIXED_TARGETS[0]),
            at_10: f(FIXED_TARGETS[1]),
            at_20: f(FIXED_TARGETS[2]),
        }
    }

    pub fn values(&self) -> [T; 3] {
        [self.at_1, self.at_10, self.at_20]
    }

    pub fn map<U>(&self, f: impl Fn(T) -> U) -> AtTargets<U> {
        AtTargets {
            at_1: f(self.at_1),
            at_10: f(self.at_10),
            at_20: f(self.at_20),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintFlags {
    pub apcer_at_bpcer: AtTargets<bool>,
    pub bpcer_at_apcer: AtTargets<bool>,
}

/// One row of a results table. All error values are percentages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub subset: String,
    pub n_bf: usize,
    pub n_attack: usize,
    pub eer: f64,
    pub apcer_at_bpcer: AtTargets<f64>,
    pub bpcer_at_apcer: AtTargets<f64>,
    pub constraint_flags: ConstraintFlags,
}

impl MetricReport {
    pub fn from_split(subset: impl Into<String>, split: &ScoreSplit) -> Self {
        let points = split.sweep();
        let apcer = AtTargets::from_fn(|t| error_at_fixed_points(&points, FixedMetric::Bpcer, t));
        let bpcer = AtTargets::from_fn(|t| error_at_fixed_points(&points, FixedMetric::Apcer, t));
        Self {
            subset: subset.into(),
            n_bf: split.bona_fide.len(),
            n_attack: split.attack.len(),
            eer: eer_from_points(&points),
            apcer_at_bpcer: apcer.map(|r| r.percent),
            bpcer_at_apcer: bpcer.map(|r| r.percent),
            constraint_flags: ConstraintFlags {
                apcer_at_bpcer: apcer.map(|r| r.constraint_met),
                bpcer_at_apcer: bpcer.map(|r| r.constraint_met),
            },
        }
    }

    pub fn from_records(
        subset: impl Into<String>,
        records: &[ScoreRecord],
    ) -> Result<Self, MetricError> {
        Ok(Self::from_split(
            subset,
            &ScoreSplit::from_records(records)?,
        ))
    }

    /// The seven error values in table column order.
    pub fn columns(&self) -> [f64; 7] {
        let [a1, a10, a20] = self.apcer_at_bpcer.values();
        let [b1, b10, b20] = self.bpcer_at_apcer.values();
        [self.eer, a1, a10, a20, b1, b10, b20]
    }
}

fn combine_rows(
    name: &str,
    reports: &[MetricReport],
    f: impl Fn(&mut dyn Iterator<Item = f64>) -> f64,
) -> MetricReport {
    let column = |get: &dyn Fn(&MetricReport) -> f64| f(&mut reports.iter().map(get));
    let all = |get: &dyn Fn(&MetricReport) -> bool| reports.iter().all(get);
    MetricReport {
        subset: name.to_owned(),
        n_bf: reports.iter().map(|r| r.n_bf).max().unwrap_or(0),
        n_attack: reports.iter().map(|r| r.n_attack).sum(),
        eer: column(&|r| r.eer),
        apcer_at_bpcer: AtTargets {
            at_1: column(&|r| r.apcer_at_bpcer.at_1),
            at_10: column(&|r| r.apcer_at_bpcer.at_10),
            at_20: column(&|r| r.apcer_at_bpcer.at_20),
        },
        bpcer_at_apcer: AtTargets {
            at_1: column(&|r| r.bpcer_at_apcer.at_1),
            at_10: column(&|r| r.bpcer_at_apcer.at_10),
            at_20: column(&|r| r.bpcer_at_apcer.at_20),
        },
        constraint_flags: ConstraintFlags {
            apcer_at_bpcer: AtTargets {
                at_1: all(&|r| r.constraint_flags.apcer_at_bpcer.at_1),
                at_10: all(&|r| r.constraint_flags.apcer_at_bpcer.at_10),
                at_20: all(&|r| r.constraint_flags.apcer_at_bpcer.at_20),
            },
            bpcer_at_apcer: AtTargets {
                at_1: all(&|r| r.constraint_flags.bpcer_at_apcer.at_1),
                at_10: all(&|r| r.constraint_flags.bpcer_at_apcer.at_10),
                at_20: all(&|r| r.constraint_flags.bpcer_at_apcer.at_20),
            },
        },
    }
}

/// The `Average` (per-metric mean) and `Worst` (per-metric maximum) rows.
///
/// Their `n_bf` is the largest bona-fide count (the pool is shared) and
/// `n_attack` the total attack count.
pub fn aggregate_rows(
    reports: &[MetricReport],
) -> Result<(MetricReport, MetricReport), MetricError> {
    if reports.is_empty() {
        return Err(MetricError::EmptyList);
    }
    let n = reports.len() as f64;
    let average = combine_rows("Average", reports, |it: &mut dyn Iterator<Item = f64>| {
        it.fold(0.0, |acc, v| acc + v) / n
    });
    let worst = combine_rows("Worst", reports, |it: &mut dyn Iterator<Item = f64>| {
        it.fold(f64::NEG_INFINITY, f64::max)
    });
    Ok((average, worst))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn records(bf: &[f64], ma: &[f64]) -> Vec<ScoreRecord> {
        let mk = |(i, &score): (usize, &f64), truth: Label| ScoreRecord {
            sample_id: format!("{truth:?}{i}"),
            subset: "s".into(),
            truth,
            score,
            decision: crate::classifier::decide(score),
        };
        bf.iter()
            .enumerate()
            .map(|x| mk(x, Label::BonaFide))
            .chain(ma.iter().enumerate().map(|x| mk(x, Label::Attack)))
            .collect()
    }

    #[test]
    fn perfect_separation() {
        let r = records(&[-1.0], &[1.0]);
        let pts = sweep(&r).unwrap();
        assert!(pts
            .iter()
            .any(|p| p.apcer == 0.0 && p.bpcer == 0.0 && p.threshold == 1.0));
        assert_eq!(eer(&r).unwrap(), 0.0);
        assert_eq!(error_at_fixed(&r, FixedMetric::Bpcer, 10.0).unwrap(), 0.0);
    }

    #[test]
    fn inverted_labels_give_total_confusion() {
        assert_eq!(eer(&records(&[1.0], &[-1.0])).unwrap(), 100.0);
    }

    #[test]
    fn four_score_example() {
        let r = records(&[0.1, 0.4], &[0.3, 0.6]);
        let pts = sweep(&r).unwrap();
        let at = pts.iter().find(|p| p.threshold == 0.4).unwrap();
        assert_eq!((at.apcer, at.bpcer), (0.5, 0.5));
        assert_eq!(eer(&r).unwrap(), 50.0);
    }

    #[test]
    fn all_scores_equal() {
        let pts = sweep(&records(&[0.2, 0.2], &[0.2])).unwrap();
        assert_eq!(
            pts,
            vec![
                OperatingPoint {
                    threshold: 0.2,
                    apcer: 0.0,
                    bpcer: 1.0
                },
                OperatingPoint {
                    threshold: f64::INFINITY,
                    apcer: 1.0,
                    bpcer: 0.0
                },
            ]
        );
    }

    #[test]
    fn staircase_example() {
        // BF 0.1..1.0, MA 0.55..1.45. Brute-force enumeration of the 21
        // thresholds: BPCER <= 20% first holds at t = 0.85 (bona-fides 0.9
        // and 1.0 above it), where attacks 0.55, 0.65, 0.75 fall below.
        let bf: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
        let ma: Vec<f64> = (0..10).map(|i| 0.55 + i as f64 / 10.0).collect();
        let r = records(&bf, &ma);
        assert_eq!(sweep(&r).unwrap().len(), 21);
        assert_eq!(error_at_fixed(&r, FixedMetric::Bpcer, 20.0).unwrap(), 30.0);
    }

    #[test]
    fn single_pair_bpcer_at_apcer() {
        let r = records(&[0.0], &[1.0]);
        assert_eq!(error_at_fixed(&r, FixedMetric::Apcer, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn degenerate_inputs() {
        assert_eq!(
            sweep(&records(&[0.1], &[])),
            Err(MetricError::DegenerateClassCounts {
                n_bf: 1,
                n_attack: 0
            })
        );
        assert!(matches!(
            eer(&records(&[f64::NAN], &[0.0])),
            Err(MetricError::NonFiniteScore(_))
        ));
        assert_eq!(aggregate_rows(&[]), Err(MetricError::EmptyList));
    }

    #[test]
    fn infeasible_constraint_falls_back() {
        let pts = [
            OperatingPoint {
                threshold: 0.0,
                apcer: 0.5,
                bpcer: 0.5,
            },
            OperatingPoint {
                threshold: 1.0,
                apcer: 0.75,
                bpcer: 0.25,
            },
        ];
        let r = error_at_fixed_points(&pts, FixedMetric::Bpcer, 10.0);
        assert_eq!(
            r,
            FixedResult {
                percent: 75.0,
                constraint_met: false
            }
        );
    }

    #[test]
    fn sweep_is_monotone() {
        let r = records(&[0.3, -0.2, 0.3, 0.9], &[0.3, 0.5, -0.7]);
        let pts = sweep(&r).unwrap();
        for w in pts.windows(2) {
            assert!(w[0].threshold < w[1].threshold);
            assert!(w[0].apcer <= w[1].apcer);
            assert!(w[0].bpcer >= w[1].bpcer);
        }
    }

    fn report_with_eer(name: &str, eer: f64) -> MetricReport {
        let mut r = MetricReport::from_records(name, &records(&[0.0], &[1.0])).unwrap();
        r.eer = eer;
        r
    }

    #[test]
    fn aggregate_rows_examples() {
        let one = report_with_eer("a", 12.5);
        let (avg, worst) = aggregate_rows(std::slice::from_ref(&one)).unwrap();
        assert_eq!(avg.columns(), one.columns());
        assert_eq!(worst.columns(), one.columns());

        let (avg, worst) =
            aggregate_rows(&[report_with_eer("a", 10.0), report_with_eer("b", 20.0)]).unwrap();
        assert_eq!(avg.eer, 15.0);
        assert_eq!(worst.eer, 20.0);
        assert_eq!(avg.subset, "Average");
        assert_eq!(worst.subset, "Worst");
        assert_eq!(avg.n_attack, 2);
    }

    #[test]
    fn report_json_shape() {
        let r = MetricReport::from_records("MorDIFF", &records(&[0.1, 0.4], &[0.3, 0.6])).unwrap();
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        assert_eq!(v["subset"], "MorDIFF");
        assert_eq!(v["eer"], 50.0);
        assert!(v["apcer_at_bpcer"]["10"].is_number());
        assert!(v["bpcer_at_apcer"]["20"].is_number());
        assert_eq!(v["constraint_flags"]["apcer_at_bpcer"]["1"], true);
    }
}
