use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::metrics::{harmonic_mean, per_class_top1};
use crate::data::{ClassSplit, FeatureDataset, LabelSpace, Role, SemanticMatrix};
use crate::error::{Error, Result};
use crate::inference::{class_scores, czsl_predict, gzsl_predict, CombineConfig};
use crate::model::{predict, DfanParams, HeadOutputs, Variant};

/// Settings echoed into every report.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub seed: u64,
}

/// Accuracies as percentages.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub czsl_acc: f64,
    pub gzsl_u: f64,
    pub gzsl_s: f64,
    pub gzsl_h: f64,
    /// GZSL accuracy of every evaluated class.
    pub per_class: BTreeMap<u32, f64>,
    pub config: ReportConfig,
}

/// Frozen-model attribute predictions for both test sets.
#[derive(Clone, Debug)]
pub struct HeadPredictions {
    pub(crate) seen: Vec<(u32, HeadOutputs)>,
    pub(crate) unseen: Vec<(u32, HeadOutputs)>,
}

fn expect_role(ds: &FeatureDataset, role: Role) -> Result<()> {
    if ds.role != role {
        return Err(Error::Config(format!("expected {role:?} features, got {:?}", ds.role)));
    }
    Ok(())
}

impl HeadPredictions {
    pub fn compute(
        params: &DfanParams<f32>,
        variant: &Variant,
        test_seen: &FeatureDataset,
        test_unseen: &FeatureDataset,
    ) -> Result<Self> {
        expect_role(test_seen, Role::TestSeen)?;
        expect_role(test_unseen, Role::TestUnseen)?;
        let run = |ds: &FeatureDataset| {
            ds.records()
                .iter()
                .map(|r| Ok((r.label, predict(params, variant, &r.local, &r.global)?)))
                .collect::<Result<Vec<_>>>()
        };
        Ok(Self {
            seen: run(test_seen)?,
            unseen: run(test_unseen)?,
        })
    }

    /// Builds the report for one combination setting; cheap relative to `compute`.
    pub fn report(
        &self,
        sm: &SemanticMatrix,
        split: &ClassSplit,
        combine: &CombineConfig,
        lambda: f64,
        seed: u64,
    ) -> Result<EvalReport> {
        combine.validate()?;
        let space = LabelSpace::new(sm, split)?;
        let mut czsl = Vec::with_capacity(self.unseen.len());
        let mut gzsl_unseen = Vec::with_capacity(self.unseen.len());
        for (_, out) in &self.unseen {
            let scores = class_scores(&out.a_local, &out.a_global, sm, combine)?;
            czsl.push(czsl_predict(&scores, &space));
            gzsl_unseen.push(gzsl_predict(&scores, &space, combine.gamma));
        }
        let mut gzsl_seen = Vec::with_capacity(self.seen.len());
        for (_, out) in &self.seen {
            let scores = class_scores(&out.a_local, &out.a_global, sm, combine)?;
            gzsl_seen.push(gzsl_predict(&scores, &space, combine.gamma));
        }
        let unseen_labels: Vec<u32> = self.unseen.iter().map(|(l, _)| *l).collect();
        let seen_labels: Vec<u32> = self.seen.iter().map(|(l, _)| *l).collect();

        let acc = per_class_top1(&czsl, &unseen_labels, &split.unseen)?;
        let u = per_class_top1(&gzsl_unseen, &unseen_labels, &split.unseen)?;
        let s = per_class_top1(&gzsl_seen, &seen_labels, &split.seen)?;
        let h = harmonic_mean(s.mean, u.mean)?;
        let per_class = u
            .per_class
            .iter()
            .chain(&s.per_class)
            .map(|(&c, &a)| (c, 100.0 * a))
            .collect();
        Ok(EvalReport {
            czsl_acc: 100.0 * acc.mean,
            gzsl_u: 100.0 * u.mean,
            gzsl_s: 100.0 * s.mean,
            gzsl_h: 100.0 * h,
            per_class,
            config: ReportConfig {
                beta1: combine.beta1,
                beta2: combine.beta2,
                gamma: combine.gamma,
                lambda,
                seed,
            },
        })
    }
}

/// Inputs and settings of one evaluation.
#[derive(Clone, Copy, Debug)]
pub struct EvalContext<'a> {
    pub semantic: &'a SemanticMatrix,
    pub split: &'a ClassSplit,
    pub test_seen: &'a FeatureDataset,
    pub test_unseen: &'a FeatureDataset,
}

pub fn evaluate(
    params: &DfanParams<f32>,
    variant: &Variant,
    ctx: &EvalContext<'_>,
    combine: &CombineConfig,
    lambda: f64,
    seed: u64,
) -> Result<EvalReport> {
    HeadPredictions::compute(params, variant, ctx.test_seen, ctx.test_unseen)?.report(
        ctx.semantic,
        ctx.split,
        combine,
        lambda,
        seed,
    )
}
