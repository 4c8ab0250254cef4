//! Confusion counting, sensitivity/specificity, multi-seed statistics and
//! the experiment/sweep harness.

mod pipeline;
mod pool;
mod sweep;

pub use pipeline::{
    evaluate_detector, prepare, run_experiment, train_detector, Detector, DetectorKind, JobResult,
    PipelineConfig, PreparedData, PreparedRecord, QResult,
};
pub use pool::run_pool;
pub use sweep::{
    aggregate, job_file_name, parse_job_file, sweep, write_job_file, write_plot_csv,
    write_sweep_csv, write_table_csv, SweepOutcome, SweepSpec,
};

use crate::error::{Error, Result};
use crate::signal::{Label, LabelMask};
use crate::stats::{mean, population_std};

/// Sample-level confusion counts with ARTIFACT as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

impl std::ops::Add for ConfusionCounts {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            tn: self.tn + o.tn,
            fn_: self.fn_ + o.fn_,
        }
    }
}

impl std::iter::Sum for ConfusionCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), |a, b| a + b)
    }
}

/// Counts over samples where both prediction and truth are defined.
pub fn confusion(pred: &LabelMask, truth: &LabelMask) -> Result<ConfusionCounts> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch {
            expected: truth.len(),
            actual: pred.len(),
        });
    }
    let mut c = ConfusionCounts::default();
    for (&p, &t) in pred.labels.iter().zip(&truth.labels) {
        match (p, t) {
            (Label::Unknown, _) | (_, Label::Unknown) => {}
            (Label::Artifact, Label::Artifact) => c.tp += 1,
            (Label::Artifact, Label::Valid) => c.fp += 1,
            (Label::Valid, Label::Valid) => c.tn += 1,
            (Label::Valid, Label::Artifact) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// `tp / (tp + fn)`; `None` when there are no positives.
pub fn sensitivity(c: &ConfusionCounts) -> Option<f64> {
    let d = c.tp + c.fn_;
    (d > 0).then(|| c.tp as f64 / d as f64)
}

/// `tn / (tn + fp)`; `None` when there are no negatives.
pub fn specificity(c: &ConfusionCounts) -> Option<f64> {
    let d = c.tn + c.fp;
    (d > 0).then(|| c.tn as f64 / d as f64)
}

/// Mean and population σ over the iterations where the metric is defined.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Summary {
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub defined: usize,
}

pub fn summarize(values: &[Option<f64>]) -> Summary {
    let defined: Vec<f64> = values.iter().flatten().copied().collect();
    Summary {
        mean: mean(&defined),
        std: population_std(&defined),
        defined: defined.len(),
    }
}

/// One setup of the sweep: a detector at one Q, aggregated over seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentStats {
    pub kind: DetectorKind,
    pub q: f64,
    pub iterations: usize,
    pub sensitivity: Summary,
    pub specificity: Summary,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prng::Rng;
    use crate::signal::LabelSource;
    use proptest::prelude::*;
    use Label::{Artifact as A, Unknown as U, Valid as V};

    fn mask(l: &[Label]) -> LabelMask {
        LabelMask::new(l.to_vec(), LabelSource::Fused)
    }

    #[test]
    fn confusion_examples() {
        let c = confusion(&mask(&[A, V, A, V]), &mask(&[A, V, V, A])).unwrap();
        assert_eq!(
            c,
            ConfusionCounts {
                tp: 1,
                fp: 1,
                tn: 1,
                fn_: 1
            }
        );
        let same = mask(&[A, A, V, V, V]);
        assert_eq!(
            confusion(&same, &same).unwrap(),
            ConfusionCounts {
                tp: 2,
                fp: 0,
                tn: 3,
                fn_: 0
            }
        );
        assert_eq!(
            confusion(&same, &mask(&[U; 5])).unwrap(),
            ConfusionCounts::default()
        );
        assert!(confusion(&same, &mask(&[A])).is_err());
    }

    #[test]
    fn metric_examples() {
        let c = ConfusionCounts {
            tp: 9,
            fp: 0,
            tn: 0,
            fn_: 1,
        };
        assert_eq!(sensitivity(&c), Some(0.9));
        let c = ConfusionCounts {
            tp: 0,
            fp: 74,
            tn: 926,
            fn_: 0,
        };
        assert_eq!(specificity(&c), Some(0.926));
        assert_eq!(sensitivity(&c), None);
        assert_eq!(specificity(&ConfusionCounts::default()), None);
    }

    #[test]
    fn summary_examples() {
        let s = summarize(&[Some(0.9); 5]);
        assert_eq!((s.mean, s.std, s.defined), (Some(0.9), Some(0.0), 5));
        let s = summarize(&[Some(0.8), Some(1.0)]);
        assert!((s.mean.unwrap() - 0.9).abs() < 1e-15);
        assert!((s.std.unwrap() - 0.1).abs() < 1e-15);
        let s = summarize(&[None, Some(0.5)]);
        assert_eq!((s.mean, s.defined), (Some(0.5), 1));
        assert_eq!(summarize(&[None]).mean, None);
    }

    fn brute_confusion(p: &[Label], t: &[Label]) -> [u64; 4] {
        let count = |pl: Label, tl: Label| {
            p.iter()
                .zip(t)
                .filter(|(a, b)| **a == pl && **b == tl)
                .count() as u64
        };
        [count(A, A), count(A, V), count(V, V), count(V, A)]
    }

    fn random_labels(rng: &mut Rng, n: usize) -> Vec<Label> {
        (0..n).map(|_| [A, V, U][rng.next_below(3)]).collect()
    }

    #[test]
    fn confusion_matches_brute_force() {
        let mut rng = Rng::new(44);
        for _ in 0..1000 {
            let n = rng.int_range(0, 40);
            let p = random_labels(&mut rng, n);
            let t = random_labels(&mut rng, n);
            let c = confusion(&mask(&p), &mask(&t)).unwrap();
            assert_eq!([c.tp, c.fp, c.tn, c.fn_], brute_confusion(&p, &t));
        }
    }

    proptest! {
        #[test]
        fn pooling_is_order_invariant(seed in 0u64..1000) {
            let mut rng = Rng::new(seed);
            let pairs: Vec<(LabelMask, LabelMask)> = (0..5)
                .map(|_| {
                    let n = rng.int_range(1, 20);
                    (mask(&random_labels(&mut rng, n)), mask(&random_labels(&mut rng, n)))
                })
                .collect();
            let forward: ConfusionCounts = pairs.iter().map(|(p, t)| confusion(p, t).unwrap()).sum();
            let backward: ConfusionCounts = pairs.iter().rev().map(|(p, t)| confusion(p, t).unwrap()).sum();
            let concat_p: Vec<Label> = pairs.iter().flat_map(|(p, _)| p.labels.clone()).collect();
            let concat_t: Vec<Label> = pairs.iter().flat_map(|(_, t)| t.labels.clone()).collect();
            prop_assert_eq!(forward, backward);
            prop_assert_eq!(forward, confusion(&mask(&concat_p), &mask(&concat_t)).unwrap());
        }
    }
}
