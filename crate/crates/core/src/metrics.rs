//! Confusion counts and the six reported metrics. `Bot` is the positive class.

use crate::data::Class;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn record(&mut self, predicted: Class, actual: Class) {
        match (predicted, actual) {
            (Class::Bot, Class::Bot) => self.tp += 1,
            (Class::Human, Class::Human) => self.tn += 1,
            (Class::Bot, Class::Human) => self.fp += 1,
            (Class::Human, Class::Bot) => self.fn_ += 1,
        }
    }
}

pub fn tally(predictions: &[Class], labels: &[Class]) -> Result<ConfusionCounts> {
    if predictions.len() != labels.len() || predictions.is_empty() {
        return Err(Error::LengthMismatch {
            predictions: predictions.len(),
            labels: labels.len(),
        });
    }
    let mut c = ConfusionCounts::default();
    for (&p, &l) in predictions.iter().zip(labels) {
        c.record(p, l);
    }
    Ok(c)
}

/// Metrics whose denominator was zero; each is reported as 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct UndefinedMetrics {
    pub precision: bool,
    pub recall: bool,
    pub specificity: bool,
    pub f_measure: bool,
    pub mcc: bool,
}

impl UndefinedMetrics {
    pub fn any(&self) -> bool {
        self.precision || self.recall || self.specificity || self.f_measure || self.mcc
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricsReport {
    pub precision: f64,
    pub recall: f64,
    pub specificity: f64,
    pub accuracy: f64,
    pub f_measure: f64,
    pub mcc: f64,
    pub undefined: UndefinedMetrics,
}

fn ratio(num: u64, den: u64, undefined: &mut bool) -> f64 {
    if den == 0 {
        *undefined = true;
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn compute_metrics(c: &ConfusionCounts) -> Result<MetricsReport> {
    let total = c.total();
    if total == 0 {
        return Err(Error::NoSamples);
    }
    let mut undefined = UndefinedMetrics::default();
    let precision = ratio(c.tp, c.tp + c.fp, &mut undefined.precision);
    let recall = ratio(c.tp, c.tp + c.fn_, &mut undefined.recall);
    let specificity = ratio(c.tn, c.tn + c.fp, &mut undefined.specificity);
    let accuracy = (c.tp + c.tn) as f64 / total as f64;
    let f_measure = if precision + recall == 0.0 {
        undefined.f_measure = true;
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    let den =
        (c.tp + c.fn_) as f64 * (c.tp + c.fp) as f64 * (c.tn + c.fp) as f64 * (c.tn + c.fn_) as f64;
    let mcc = if den == 0.0 {
        undefined.mcc = true;
        0.0
    } else {
        let num = c.tp as f64 * c.tn as f64 - c.fp as f64 * c.fn_ as f64;
        (num / libm::sqrt(den)).clamp(-1.0, 1.0)
    };
    Ok(MetricsReport {
        precision,
        recall,
        specificity,
        accuracy,
        f_measure,
        mcc,
        undefined,
    })
}
