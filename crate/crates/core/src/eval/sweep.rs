use serde::{Deserialize, Serialize};

use super::report::{EvalReport, HeadPredictions};
use crate::data::{ClassSplit, SemanticMatrix};
use crate::error::{Error, Result};
use crate::inference::CombineConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    /// `β1` over the grid with `β2 = 1 − β1`.
    Beta,
    Gamma,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Beta => "beta1",
            SweepAxis::Gamma => "gamma",
        }
    }

    pub fn default_grid(self) -> Vec<f64> {
        match self {
            SweepAxis::Beta => (0..=10).map(|i| i as f64 / 10.0).collect(),
            SweepAxis::Gamma => DEFAULT_GAMMA_GRID.to_vec(),
        }
    }
}

pub const DEFAULT_GAMMA_GRID: [f64; 12] = [0.0, 0.1, 0.2, 0.3, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 5.0, 1e9];

#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub report: EvalReport,
}

/// Re-scores fixed predictions at every grid value.
pub fn sweep(
    preds: &HeadPredictions,
    sm: &SemanticMatrix,
    split: &ClassSplit,
    base: &CombineConfig,
    axis: SweepAxis,
    grid: &[f64],
    lambda: f64,
    seed: u64,
) -> Result<Vec<SweepPoint>> {
    if grid.is_empty() {
        return Err(Error::Config("sweep grid is empty".into()));
    }
    grid.iter()
        .map(|&value| {
            let combine = match axis {
                SweepAxis::Beta => {
                    if !(0.0..=1.0).contains(&value) {
                        return Err(Error::Config(format!("beta1 grid value {value} outside [0, 1]")));
                    }
                    CombineConfig {
                        beta1: value,
                        beta2: 1.0 - value,
                        ..*base
                    }
                }
                SweepAxis::Gamma => CombineConfig { gamma: value, ..*base },
            };
            Ok(SweepPoint {
                value,
                report: preds.report(sm, split, &combine, lambda, seed)?,
            })
        })
        .collect()
}

pub fn sweep_csv(axis: SweepAxis, points: &[SweepPoint]) -> String {
    let mut out = format!("{},U,S,H,acc\n", axis.name());
    for p in points {
        let r = &p.report;
        out.push_str(&format!(
            "{},{:.4},{:.4},{:.4},{:.4}\n",
            p.value, r.gzsl_u, r.gzsl_s, r.gzsl_h, r.czsl_acc
        ));
    }
    out
}
