use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Macro-averaged top-1 accuracy and its per-class breakdown.
#[derive(Clone, Debug, PartialEq)]
pub struct PerClassAccuracy {
    pub mean: f64,
    pub per_class: BTreeMap<u32, f64>,
}

/// Mean over `classes` of each class's fraction of correct predictions.
///
/// Tallies are exact rationals; only the final values are rounded.
pub fn per_class_top1(predictions: &[u32], labels: &[u32], classes: &BTreeSet<u32>) -> Result<PerClassAccuracy> {
    if predictions.len() != labels.len() {
        return Err(Error::Length {
            expected: labels.len(),
            actual: predictions.len(),
        });
    }
    if classes.is_empty() {
        return Err(Error::Config("class set is empty".into()));
    }
    let mut tally: BTreeMap<u32, (u64, u64)> = classes.iter().map(|&c| (c, (0, 0))).collect();
    for (&pred, &label) in predictions.iter().zip(labels) {
        let entry = tally.get_mut(&label).ok_or_else(|| Error::Validation {
            class_id: label,
            reason: "sample label is outside the evaluated class set".into(),
        })?;
        entry.1 += 1;
        if pred == label {
            entry.0 += 1;
        }
    }

    let mut sum = BigRational::zero();
    let mut per_class = BTreeMap::new();
    for (&class_id, &(correct, total)) in &tally {
        if total == 0 {
            return Err(Error::Validation {
                class_id,
                reason: "class has no evaluation samples".into(),
            });
        }
        let acc = BigRational::new(BigInt::from(correct), BigInt::from(total));
        per_class.insert(class_id, to_f64(&acc));
        sum += acc;
    }
    let mean = sum / BigRational::from_integer(BigInt::from(tally.len()));
    Ok(PerClassAccuracy {
        mean: to_f64(&mean),
        per_class,
    })
}

fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().expect("accuracy ratio lies in [0, 1]")
}

/// `2SU / (S + U)`, or 0 when both are 0.
pub fn harmonic_mean(s: f64, u: f64) -> Result<f64> {
    if !(s >= 0.0 && u >= 0.0) || !s.is_finite() || !u.is_finite() {
        return Err(Error::Config(format!(
            "harmonic mean needs finite non-negative inputs, got S={s}, U={u}"
        )));
    }
    if s + u == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * s * u / (s + u))
}
