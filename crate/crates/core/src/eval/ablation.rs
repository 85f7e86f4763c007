use super::report::{evaluate, EvalContext, EvalReport};
use crate::data::{FeatureDataset, LabelSpace};
use crate::error::{Error, Result};
use crate::inference::CombineConfig;
use crate::model::Variant;
use crate::train::{train, TrainConfig};

/// Module table: shared map, two maps, plus bias learner, plus cosine loss.
pub const MODULE_PLAN: [&str; 4] = ["single-predictor", "two-predictors", "two-predictors+bias", "full"];
/// Loss table: class loss, attribute loss, both, both plus cosine loss.
pub const LOSS_PLAN: [&str; 4] = ["cls", "attr", "cls+attr", "all"];

/// A named row of an ablation plan.
#[derive(Clone, Debug, PartialEq)]
pub struct AblationVariant {
    pub name: String,
    pub variant: Variant,
    pub lambda: f64,
    /// Fixed `(β1, β2)` for variants that train only one predictor.
    pub betas: Option<(f64, f64)>,
}

impl AblationVariant {
    /// `lambda` is the cosine weight of the rows that keep the cosine loss.
    pub fn resolve(name: &str, lambda: f64) -> Result<Self> {
        let all = Variant::default();
        let no_cos = Variant { use_cos: false, ..all };
        let (variant, betas) = match name {
            "single-predictor" => (
                Variant {
                    shared_predictor: true,
                    bias_learner: false,
                    ..no_cos
                },
                None,
            ),
            "two-predictors" => (
                Variant {
                    bias_learner: false,
                    ..no_cos
                },
                None,
            ),
            "two-predictors+bias" | "cls+attr" => (no_cos, None),
            "full" | "all" => (all, None),
            "cls" => (
                Variant {
                    use_attr: false,
                    ..no_cos
                },
                Some((0.0, 1.0)),
            ),
            "attr" => (
                Variant {
                    use_cls: false,
                    ..no_cos
                },
                Some((1.0, 0.0)),
            ),
            other => return Err(Error::Config(format!("unknown ablation variant '{other}'"))),
        };
        let lambda = if variant.use_cos { lambda } else { 0.0 };
        if variant.use_cos && !(lambda > 0.0) {
            return Err(Error::Config(format!("variant '{name}' needs lambda > 0")));
        }
        Ok(Self {
            name: name.to_string(),
            variant,
            lambda,
            betas,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationRow {
    pub variant: String,
    pub report: EvalReport,
}

/// Trains and evaluates every plan entry in order with the same seed and data.
pub fn run_ablation(
    plan: &[&str],
    train_set: &FeatureDataset,
    ctx: &EvalContext<'_>,
    base: &TrainConfig,
    combine: &CombineConfig,
) -> Result<Vec<AblationRow>> {
    let resolved = plan
        .iter()
        .map(|name| AblationVariant::resolve(name, base.lambda))
        .collect::<Result<Vec<_>>>()?;
    let space = LabelSpace::new(ctx.semantic, ctx.split)?;
    let mut rows: Vec<AblationRow> = Vec::with_capacity(resolved.len());
    let mut done: Vec<(AblationVariant, EvalReport)> = Vec::new();
    for entry in resolved {
        // rows that differ only by name share one run
        if let Some((_, report)) = done
            .iter()
            .find(|(e, _)| (e.variant, e.lambda, e.betas) == (entry.variant, entry.lambda, entry.betas))
        {
            rows.push(AblationRow {
                variant: entry.name,
                report: report.clone(),
            });
            continue;
        }
        let cfg = TrainConfig {
            variant: entry.variant,
            lambda: entry.lambda,
            ..base.clone()
        };
        let out = train(train_set, ctx.semantic, &space, &cfg, |_| {})?;
        let combine = match entry.betas {
            Some((beta1, beta2)) => CombineConfig { beta1, beta2, ..*combine },
            None => *combine,
        };
        let report = evaluate(&out.params, &entry.variant, ctx, &combine, entry.lambda, cfg.seed)?;
        done.push((entry.clone(), report.clone()));
        rows.push(AblationRow {
            variant: entry.name,
            report,
        });
    }
    Ok(rows)
}

pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut out = String::from("variant,U,S,H,acc\n");
    for r in rows {
        let rep = &r.report;
        out.push_str(&format!(
            "{},{:.4},{:.4},{:.4},{:.4}\n",
            r.variant, rep.gzsl_u, rep.gzsl_s, rep.gzsl_h, rep.czsl_acc
        ));
    }
    out
}
