//! Confusion matrix and the four summary metrics.

use serde::{Deserialize, Serialize};

use crate::{Error, Result, NUM_CLASSES};

/// Counts with rows = true class and columns = predicted class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion(pub [[u64; NUM_CLASSES]; NUM_CLASSES]);

impl Confusion {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs(truth: &[usize], pred: &[usize]) -> Result<Self> {
        if truth.len() != pred.len() {
            return Err(Error::Shape(format!(
                "{} labels vs {} predictions",
                truth.len(),
                pred.len()
            )));
        }
        let mut c = Self::new();
        for (&t, &p) in truth.iter().zip(pred) {
            c.add(t, p)?;
        }
        Ok(c)
    }

    pub fn add(&mut self, truth: usize, pred: usize) -> Result<()> {
        if truth >= NUM_CLASSES || pred >= NUM_CLASSES {
            return Err(Error::Shape(format!("class pair ({truth}, {pred}) out of range")));
        }
        self.0[truth][pred] += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &Confusion) {
        for (r, o) in self.0.iter_mut().zip(&other.0) {
            for (a, b) in r.iter_mut().zip(o) {
                *a += b;
            }
        }
    }

    pub fn total(&self) -> u64 {
        self.0.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..NUM_CLASSES).map(|k| self.0[k][k]).sum()
    }

    pub fn support(&self, k: usize) -> u64 {
        self.0[k].iter().sum()
    }

    pub fn predicted(&self, k: usize) -> u64 {
        self.0.iter().map(|r| r[k]).sum()
    }

    pub fn metrics(&self) -> Result<Metrics> {
        metrics_from_confusion(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub acc: f64,
    pub kappa: f64,
    pub f1_weighted: f64,
    pub f1_macro: f64,
}

impl Metrics {
    pub fn as_array(&self) -> [f64; 4] {
        [self.acc, self.kappa, self.f1_weighted, self.f1_macro]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self {
            acc: a[0],
            kappa: a[1],
            f1_weighted: a[2],
            f1_macro: a[3],
        }
    }
}

/// Per-class F1, or `None` for a class absent from both truth and
/// predictions.
pub fn per_class_f1(c: &Confusion) -> [Option<f64>; NUM_CLASSES] {
    let mut out = [None; NUM_CLASSES];
    for (k, slot) in out.iter_mut().enumerate() {
        let tp = c.0[k][k] as f64;
        let support = c.support(k);
        let predicted = c.predicted(k);
        if support == 0 && predicted == 0 {
            continue;
        }
        let precision = if predicted > 0 { tp / predicted as f64 } else { 0.0 };
        let recall = if support > 0 { tp / support as f64 } else { 0.0 };
        *slot = Some(if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        });
    }
    out
}

/// Accuracy, Cohen's kappa, support-weighted F1 and macro F1.
///
/// When chance agreement is total (one class in both truth and
/// predictions) kappa is 1 for perfect agreement and 0 otherwise. Macro F1
/// averages only over classes present in truth or predictions.
pub fn metrics_from_confusion(c: &Confusion) -> Result<Metrics> {
    let total = c.total();
    if total == 0 {
        return Err(Error::EmptyEval);
    }
    let n = total as f64;
    let acc = c.trace() as f64 / n;

    let chance_num: u128 = (0..NUM_CLASSES)
        .map(|k| c.support(k) as u128 * c.predicted(k) as u128)
        .sum();
    let kappa = if chance_num == (total as u128) * (total as u128) {
        if c.trace() == total {
            1.0
        } else {
            0.0
        }
    } else {
        let p_e = (0..NUM_CLASSES)
            .map(|k| (c.support(k) as f64 / n) * (c.predicted(k) as f64 / n))
            .sum::<f64>();
        (acc - p_e) / (1.0 - p_e)
    };

    let f1 = per_class_f1(c);
    let f1_weighted = (0..NUM_CLASSES)
        .map(|k| f1[k].unwrap_or(0.0) * c.support(k) as f64)
        .sum::<f64>()
        / n;
    let present: Vec<f64> = f1.iter().flatten().copied().collect();
    let f1_macro = present.iter().sum::<f64>() / present.len() as f64;

    Ok(Metrics {
        acc,
        kappa,
        f1_weighted,
        f1_macro,
    })
}

/// Mean and population standard deviation of each metric across folds.
pub fn mean_std(values: &[Metrics]) -> (Metrics, Metrics) {
    if values.is_empty() {
        return (Metrics::default(), Metrics::default());
    }
    let n = values.len() as f64;
    let mut mean = [0.0; 4];
    for v in values {
        for (m, x) in mean.iter_mut().zip(v.as_array()) {
            *m += x / n;
        }
    }
    let mut var = [0.0; 4];
    for v in values {
        for ((s, x), m) in var.iter_mut().zip(v.as_array()).zip(mean) {
            *s += (x - m) * (x - m) / n;
        }
    }
    (Metrics::from_array(mean), Metrics::from_array(var.map(f64::sqrt)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_is_perfect() {
        let c = Confusion([[3, 0, 0, 0], [0, 5, 0, 0], [0, 0, 2, 0], [0, 0, 0, 7]]);
        let m = c.metrics().unwrap();
        assert_eq!(m.as_array(), [1.0; 4]);
    }

    #[test]
    fn chance_level() {
        let truth: Vec<usize> = (0..100).map(|i| if i < 60 { 1 } else { 0 }).collect();
        let pred = vec![1; 100];
        let m = Confusion::from_pairs(&truth, &pred).unwrap().metrics().unwrap();
        assert!((m.acc - 0.6).abs() < 1e-12);
        assert!(m.kappa.abs() < 1e-12);
    }

    #[test]
    fn degenerate_recall() {
        let mut c = Confusion::new();
        c.0[0][0] = 5;
        c.0[1][0] = 5;
        let m = c.metrics().unwrap();
        assert!((m.acc - 0.5).abs() < 1e-12);
        assert_eq!(per_class_f1(&c)[1], Some(0.0));
        assert_eq!(per_class_f1(&c)[2], None);
        // classes 2 and 3 absent: macro over {0, 1}
        let f0 = 2.0 * 0.5 * 1.0 / 1.5;
        assert!((m.f1_macro - f0 / 2.0).abs() < 1e-12);
    }

    #[test]
    fn single_class_agreement() {
        let c = Confusion::from_pairs(&[2; 10], &[2; 10]).unwrap();
        let m = c.metrics().unwrap();
        assert_eq!(m.kappa, 1.0);
        assert_eq!(m.f1_macro, 1.0);
    }

    #[test]
    fn empty_is_error() {
        assert!(matches!(Confusion::new().metrics(), Err(Error::EmptyEval)));
    }

    #[test]
    fn fold_stats() {
        let a = Metrics::from_array([0.8, 0.6, 0.7, 0.5]);
        let b = Metrics::from_array([0.6, 0.4, 0.5, 0.3]);
        let (m, s) = mean_std(&[a, b]);
        assert!((m.acc - 0.7).abs() < 1e-12);
        assert!((s.acc - 0.1).abs() < 1e-12);
    }
}
