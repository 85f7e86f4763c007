//! Forward graph of the head.
//!
//! Shapes: region features `Z` are N×D, the pooled feature `p` is 1×D,
//! predictor weights are D×M, attribute features `Ẑ` are D×M (column j is
//! the feature of attribute j) and attribute predictions are 1×M rows.

use serde::{Deserialize, Serialize};

use super::params::{AttentionAxis, DfanParams, PHI_NAMES, W_GLOBAL, W_LOCAL};
use crate::error::{Error, Result};
use crate::numeric::{Scalar, Tape, Tensor, Var};

/// Column-normalization guard for the cosine loss.
pub const COSINE_EPS: f64 = 1e-12;

/// Which architectural pieces and loss terms are active.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Variant {
    /// One linear map serves both the local and the global predictor.
    pub shared_predictor: bool,
    pub bias_learner: bool,
    pub use_attr: bool,
    pub use_cls: bool,
    pub use_cos: bool,
}

impl Default for Variant {
    fn default() -> Self {
        Self {
            shared_predictor: false,
            bias_learner: true,
            use_attr: true,
            use_cls: true,
            use_cos: true,
        }
    }
}

impl Variant {
    /// Names of the parameters this variant trains, in declaration order.
    pub fn trainable(&self) -> Vec<&'static str> {
        let local_map = if self.shared_predictor { W_GLOBAL } else { W_LOCAL };
        let mut names = Vec::new();
        if (self.use_attr || self.use_cos) && local_map == W_LOCAL {
            names.push(W_LOCAL);
        }
        if self.use_cls || ((self.use_attr || self.use_cos) && local_map == W_GLOBAL) {
            names.push(W_GLOBAL);
        }
        if self.bias_learner && (self.use_attr || self.use_cls) {
            names.extend(PHI_NAMES);
        }
        names
    }
}

/// Tape handles for every parameter. Frozen parameters enter as constants.
#[derive(Clone, Debug)]
pub struct ParamVars {
    pub w_local: Var,
    pub w_global: Var,
    pub phi: [Var; 6],
}

impl ParamVars {
    pub fn register<T: Scalar>(tape: &mut Tape<T>, params: &DfanParams<T>, trainable: &[&str]) -> Self {
        let mut reg = |p: &crate::numeric::Param<T>| {
            if trainable.contains(&p.name.as_str()) {
                tape.param(p.value.clone())
            } else {
                tape.constant(p.value.clone())
            }
        };
        let w_local = reg(&params.w_local);
        let w_global = reg(&params.w_global);
        let phi = [
            reg(&params.phi[0]),
            reg(&params.phi[1]),
            reg(&params.phi[2]),
            reg(&params.phi[3]),
            reg(&params.phi[4]),
            reg(&params.phi[5]),
        ];
        Self {
            w_local,
            w_global,
            phi,
        }
    }

    pub fn all(&self) -> [Var; 8] {
        let [a, b, c, d, e, f] = self.phi;
        [self.w_local, self.w_global, a, b, c, d, e, f]
    }
}

/// `A_l = Z · W_l` (N×M).
pub fn local_scores<T: Scalar>(tape: &mut Tape<T>, z: Var, w_local: Var) -> Result<Var> {
    tape.matmul(z, w_local)
}

/// Softmax of the local scores; with [`AttentionAxis::Region`] each column
/// is a distribution over the N regions.
pub fn attention_weights<T: Scalar>(tape: &mut Tape<T>, scores: Var, axis: AttentionAxis) -> Result<Var> {
    tape.softmax(scores, axis.tensor_axis())
}

/// `Ẑ = Zᵀ · W_R` (D×M): column j is the weighted sum of regions for attribute j.
pub fn attribute_features<T: Scalar>(tape: &mut Tape<T>, z: Var, weights: Var) -> Result<Var> {
    let zt = tape.transpose(z)?;
    tape.matmul(zt, weights)
}

/// `‖ N̂ᵀN̂ − I ‖_F` where `N̂` is `Ẑ` with unit-norm columns.
pub fn cosine_loss<T: Scalar>(tape: &mut Tape<T>, zhat: Var) -> Result<Var> {
    let m = tape.value(zhat).dims2("cosine_loss")?.1;
    let unit = tape.l2_normalize_columns(zhat, T::from_f64_lossy(COSINE_EPS))?;
    let unit_t = tape.transpose(unit)?;
    let gram = tape.matmul(unit_t, unit)?;
    let eye = tape.constant(Tensor::identity(m));
    let diff = tape.sub(gram, eye)?;
    Ok(tape.frobenius_norm(diff))
}

/// Bias learner on a batch of row vectors (K×D → K×M):
/// linear, ReLU, linear, ReLU, linear.
pub fn phi_forward<T: Scalar>(tape: &mut Tape<T>, x: Var, phi: &[Var; 6]) -> Result<Var> {
    let h = tape.matmul(x, phi[0])?;
    let h = tape.add_row(h, phi[1])?;
    let h = tape.relu(h);
    let h = tape.matmul(h, phi[2])?;
    let h = tape.add_row(h, phi[3])?;
    let h = tape.relu(h);
    let h = tape.matmul(h, phi[4])?;
    tape.add_row(h, phi[5])
}

/// `â_l[j] = ⟨W_l[:,j], ẑ_j⟩ + (1/M) Σ_k φ(ẑ_k)[j]` as a 1×M row.
pub fn local_prediction<T: Scalar>(
    tape: &mut Tape<T>,
    zhat: Var,
    w_local: Var,
    phi: Option<&[Var; 6]>,
) -> Result<Var> {
    let prod = tape.mul(w_local, zhat)?;
    let linear = tape.sum_axis(prod, 0)?;
    let Some(phi) = phi else { return Ok(linear) };
    let m = tape.value(zhat).dims2("local_prediction")?.1;
    let rows = tape.transpose(zhat)?;
    let offsets = phi_forward(tape, rows, phi)?;
    let total = tape.sum_axis(offsets, 0)?;
    let mean = tape.scale(total, T::from_f64_lossy(1.0 / m as f64));
    tape.add(linear, mean)
}

/// `â_g = p · W_g + φ(p)` as a 1×M row.
pub fn global_prediction<T: Scalar>(
    tape: &mut Tape<T>,
    p: Var,
    w_global: Var,
    phi: Option<&[Var; 6]>,
) -> Result<Var> {
    let linear = tape.matmul(p, w_global)?;
    let Some(phi) = phi else { return Ok(linear) };
    let offset = phi_forward(tape, p, phi)?;
    tape.add(linear, offset)
}

/// Cross-entropy over seen-class logits `⟨â, a_k⟩`. `seen_t` is the M×C_s
/// transpose of the seen rows of the semantic matrix; `target` indexes
/// its columns. Serves as both the attribute loss and the class loss.
pub fn semantic_loss<T: Scalar>(tape: &mut Tape<T>, a_hat: Var, seen_t: Var, target: usize) -> Result<Var> {
    let logits = tape.matmul(a_hat, seen_t)?;
    tape.cross_entropy(logits, target)
}

/// `attr + cls + λ·cos`.
pub fn total_loss<T: Scalar>(tape: &mut Tape<T>, attr: Var, cls: Var, cos: Var, lambda: f64) -> Result<Var> {
    if !(lambda >= 0.0) {
        return Err(Error::Config(format!("lambda must be >= 0, got {lambda}")));
    }
    let base = tape.add(attr, cls)?;
    let weighted = tape.scale(cos, T::from_f64_lossy(lambda));
    tape.add(base, weighted)
}

/// Per-sample graph outputs.
#[derive(Clone, Copy, Debug)]
pub struct SampleVars {
    pub scores: Var,
    pub weights: Var,
    pub zhat: Var,
    pub a_local: Var,
    pub a_global: Var,
}

/// Builds the forward graph for one sample.
pub fn sample_forward<T: Scalar>(
    tape: &mut Tape<T>,
    vars: &ParamVars,
    axis: AttentionAxis,
    variant: &Variant,
    z: Var,
    p: Var,
) -> Result<SampleVars> {
    let local_map = if variant.shared_predictor {
        vars.w_global
    } else {
        vars.w_local
    };
    let phi = variant.bias_learner.then_some(&vars.phi);
    let scores = local_scores(tape, z, local_map)?;
    let weights = attention_weights(tape, scores, axis)?;
    let zhat = attribute_features(tape, z, weights)?;
    let a_local = local_prediction(tape, zhat, local_map, phi)?;
    let a_global = global_prediction(tape, p, vars.w_global, phi)?;
    Ok(SampleVars {
        scores,
        weights,
        zhat,
        a_local,
        a_global,
    })
}

/// Objective weights.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Objective {
    pub lambda: f64,
    pub variant: Variant,
}

impl Objective {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::Config(format!("lambda must be finite and >= 0, got {}", self.lambda)));
        }
        let v = &self.variant;
        if !v.use_attr && !v.use_cls && !(v.use_cos && self.lambda > 0.0) {
            return Err(Error::Config("objective has no active loss term".into()));
        }
        Ok(())
    }
}

/// Batch-mean loss components on the tape.
#[derive(Clone, Copy, Debug)]
pub struct LossVars {
    pub attr: Var,
    pub cls: Var,
    pub cos: Var,
    pub total: Var,
}

/// One sample's inputs: region features, pooled feature, seen-class target index.
pub struct SampleInput<'a, T> {
    pub local: &'a Tensor<T>,
    pub global: &'a Tensor<T>,
    pub target: usize,
}

/// Mean losses over `batch`. Every component is computed for logging;
/// disabled terms are left out of `total`.
pub fn batch_loss<T: Scalar>(
    tape: &mut Tape<T>,
    vars: &ParamVars,
    axis: AttentionAxis,
    objective: &Objective,
    seen_t: Var,
    batch: &[SampleInput<'_, T>],
) -> Result<LossVars> {
    objective.validate()?;
    if batch.is_empty() {
        return Err(Error::Config("empty batch".into()));
    }
    let v = objective.variant;
    let mut sums: Option<[Var; 3]> = None;
    for s in batch {
        let z = tape.constant(s.local.clone());
        let p = tape.constant(s.global.clone());
        let out = sample_forward(tape, vars, axis, &v, z, p)?;
        let attr = semantic_loss(tape, out.a_local, seen_t, s.target)?;
        let cls = semantic_loss(tape, out.a_global, seen_t, s.target)?;
        let cos = cosine_loss(tape, out.zhat)?;
        sums = Some(match sums {
            None => [attr, cls, cos],
            Some([a, c, k]) => [tape.add(a, attr)?, tape.add(c, cls)?, tape.add(k, cos)?],
        });
    }
    let [a, c, k] = sums.expect("non-empty batch");
    let inv = T::from_f64_lossy(1.0 / batch.len() as f64);
    let attr = tape.scale(a, inv);
    let cls = tape.scale(c, inv);
    let cos = tape.scale(k, inv);

    let zero = tape.constant(Tensor::scalar(T::zero()));
    let attr_term = if v.use_attr { attr } else { zero };
    let cls_term = if v.use_cls { cls } else { zero };
    let lambda = if v.use_cos { objective.lambda } else { 0.0 };
    let total = total_loss(tape, attr_term, cls_term, cos, lambda)?;
    Ok(LossVars {
        attr,
        cls,
        cos,
        total,
    })
}

/// Attribute predictions of a frozen model for one record.
#[derive(Clone, Debug, PartialEq)]
pub struct HeadOutputs {
    pub a_local: Vec<f32>,
    pub a_global: Vec<f32>,
}

pub fn predict(
    params: &DfanParams<f32>,
    variant: &Variant,
    local: &Tensor<f32>,
    global: &Tensor<f32>,
) -> Result<HeadOutputs> {
    let mut tape = Tape::new();
    let vars = ParamVars::register(&mut tape, params, &[]);
    let z = tape.constant(local.clone());
    let p = tape.constant(global.clone());
    let out = sample_forward(&mut tape, &vars, params.config.attention_axis, variant, z, p)?;
    Ok(HeadOutputs {
        a_local: tape.value(out.a_local).data().to_vec(),
        a_global: tape.value(out.a_global).data().to_vec(),
    })
}
