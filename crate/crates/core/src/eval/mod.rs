//! Per-class metrics, evaluation reports, ablation tables and coefficient sweeps.

mod ablation;
mod metrics;
mod report;
mod sweep;

pub use ablation::{ablation_csv, run_ablation, AblationRow, AblationVariant, LOSS_PLAN, MODULE_PLAN};
pub use metrics::{harmonic_mean, per_class_top1, PerClassAccuracy};
pub use report::{evaluate, EvalContext, EvalReport, HeadPredictions, ReportConfig};
pub use sweep::{sweep, sweep_csv, SweepAxis, SweepPoint, DEFAULT_GAMMA_GRID};

#[cfg(test)]
mod tests;
