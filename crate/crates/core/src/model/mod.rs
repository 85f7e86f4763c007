//! The zero-shot head: attribute attention, attribute features, the
//! cosine disentanglement loss, the bias learner and the two predictors.

mod checkpoint;
mod head;
mod params;

pub use checkpoint::{
    checkpoint_bytes, checkpoint_from_bytes, load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC,
};
pub use head::{
    attention_weights, attribute_features, batch_loss, cosine_loss, global_prediction,
    local_prediction, local_scores, phi_forward, predict, sample_forward, semantic_loss,
    total_loss, HeadOutputs, LossVars, Objective, ParamVars, SampleInput, SampleVars, Variant,
    COSINE_EPS,
};
pub use params::{AttentionAxis, DfanParams, ModelConfig, PHI_NAMES, W_GLOBAL, W_LOCAL};
