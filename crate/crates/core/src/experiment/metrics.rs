use std::ops::Add;

use crate::error::{Error, Result};

/// Confusion counts with anomalous as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

impl Add for Confusion {
    type Output = Confusion;
    fn add(self, o: Confusion) -> Confusion {
        Confusion {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
            tn: self.tn + o.tn,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionMetrics {
    pub counts: Confusion,
    pub precision: f64,
    pub recall: f64,
    pub accuracy: f64,
    pub f1: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl DetectionMetrics {
    /// Zero denominators give 0 rather than NaN.
    pub fn from_counts(c: Confusion) -> Self {
        let precision = ratio(c.tp, c.tp + c.fp);
        let recall = ratio(c.tp, c.tp + c.fn_);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        DetectionMetrics {
            counts: c,
            precision,
            recall,
            accuracy: ratio(c.tp + c.tn, c.total()),
            f1,
        }
    }

    /// Elementwise mean of several metric sets (counts are summed).
    pub fn mean(all: &[DetectionMetrics]) -> Option<DetectionMetrics> {
        if all.is_empty() {
            return None;
        }
        let n = all.len() as f64;
        Some(DetectionMetrics {
            counts: all.iter().fold(Confusion::default(), |a, m| a + m.counts),
            precision: all.iter().map(|m| m.precision).sum::<f64>() / n,
            recall: all.iter().map(|m| m.recall).sum::<f64>() / n,
            accuracy: all.iter().map(|m| m.accuracy).sum::<f64>() / n,
            f1: all.iter().map(|m| m.f1).sum::<f64>() / n,
        })
    }
}

pub fn confusion(labels: &[bool], predictions: &[bool]) -> Result<Confusion> {
    if labels.len() != predictions.len() {
        return Err(Error::shape("predictions", labels.len(), predictions.len()));
    }
    let mut c = Confusion::default();
    for (&y, &p) in labels.iter().zip(predictions) {
        match (y, p) {
            (true, true) => c.tp += 1,
            (false, true) => c.fp += 1,
            (true, false) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

/// `true` = anomalous, for both labels and predictions.
pub fn compute_metrics(labels: &[bool], predictions: &[bool]) -> Result<DetectionMetrics> {
    if labels.is_empty() {
        return Err(Error::config("metrics need at least one labelled sample"));
    }
    Ok(DetectionMetrics::from_counts(confusion(labels, predictions)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn build(tp: usize, fp: usize, fn_: usize, tn: usize) -> (Vec<bool>, Vec<bool>) {
        let mut y = Vec::new();
        let mut p = Vec::new();
        for (n, a, b) in [(tp, true, true), (fp, false, true), (fn_, true, false), (tn, false, false)] {
            y.extend(std::iter::repeat_n(a, n));
            p.extend(std::iter::repeat_n(b, n));
        }
        (y, p)
    }

    #[test]
    fn hand_computed_case() {
        let (y, p) = build(8, 2, 4, 86);
        let m = compute_metrics(&y, &p).unwrap();
        assert!((m.precision - 0.8).abs() < 1e-4);
        assert!((m.recall - 0.6667).abs() < 1e-4);
        assert!((m.f1 - 0.7273).abs() < 1e-4);
        assert!((m.accuracy - 0.94).abs() < 1e-4);
    }

    #[test]
    fn degenerate_cases() {
        let (y, p) = build(3, 0, 0, 5);
        let m = compute_metrics(&y, &p).unwrap();
        assert_eq!((m.precision, m.recall, m.f1, m.accuracy), (1.0, 1.0, 1.0, 1.0));
        let (y, p) = build(0, 0, 4, 5);
        let m = compute_metrics(&y, &p).unwrap();
        assert_eq!(m.precision, 0.0);
        assert_eq!(m.f1, 0.0);
        assert!(compute_metrics(&[], &[]).is_err());
        assert!(compute_metrics(&[true], &[]).is_err());
    }

    proptest! {
        #[test]
        fn counts_pool_additively(pairs in prop::collection::vec((any::<bool>(), any::<bool>()), 1..200), cut in 0usize..200) {
            let cut = cut.min(pairs.len());
            let (y, p): (Vec<bool>, Vec<bool>) = pairs.iter().copied().unzip();
            let whole = confusion(&y, &p).unwrap();
            let pooled = confusion(&y[..cut], &p[..cut]).unwrap() + confusion(&y[cut..], &p[cut..]).unwrap();
            prop_assert_eq!(whole, pooled);
            let m = DetectionMetrics::from_counts(whole);
            if m.precision > 0.0 && m.recall > 0.0 {
                let h = 2.0 / (1.0 / m.precision + 1.0 / m.recall);
                prop_assert!((m.f1 - h).abs() < 1e-12);
            }
            for v in [m.precision, m.recall, m.accuracy, m.f1] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}
