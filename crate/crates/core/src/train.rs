//! Minibatch Adam training of the head on precomputed features.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{FeatureDataset, LabelSpace, SemanticMatrix};
use crate::error::{Error, Result};
use crate::model::{batch_loss, DfanParams, ModelConfig, Objective, ParamVars, SampleInput, Variant};
use crate::numeric::{Adam, AdamConfig, Param, Tape};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub variant: Variant,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub lambda: f64,
    pub seed: u64,
}

impl TrainConfig {
    pub const DEFAULT_EPOCHS: usize = 80;
    pub const DEFAULT_BATCH: usize = 32;
    pub const DEFAULT_LR: f64 = 1e-3;
    pub const DEFAULT_WD: f64 = 1e-5;
    pub const DEFAULT_LAMBDA: f64 = 0.1;

    pub fn new(model: ModelConfig) -> Self {
        Self {
            model,
            variant: Variant::default(),
            epochs: Self::DEFAULT_EPOCHS,
            batch_size: Self::DEFAULT_BATCH,
            lr: Self::DEFAULT_LR,
            weight_decay: Self::DEFAULT_WD,
            lambda: Self::DEFAULT_LAMBDA,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch size must be positive".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.lr)));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::Config(format!("weight decay must be >= 0, got {}", self.weight_decay)));
        }
        self.objective().validate()
    }

    pub fn objective(&self) -> Objective {
        Objective {
            lambda: self.lambda,
            variant: self.variant,
        }
    }
}

/// Sample-weighted epoch means of each loss component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub steps: usize,
    pub attr: f64,
    pub cls: f64,
    pub cos: f64,
    pub total: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutput {
    pub params: DfanParams<f32>,
    pub log: Vec<EpochLog>,
}

/// Trains from a fresh seeded initialization. `on_epoch` sees each log line
/// as soon as the epoch ends.
pub fn train(
    data: &FeatureDataset,
    sm: &SemanticMatrix,
    space: &LabelSpace,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutput> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    if data.dim() != cfg.model.dim || sm.num_attributes() != cfg.model.attributes {
        return Err(Error::shape(
            "train",
            &[data.dim(), sm.num_attributes()],
            &[cfg.model.dim, cfg.model.attributes],
        ));
    }
    let targets = data
        .records()
        .iter()
        .map(|r| space.seen_index(r.label))
        .collect::<Result<Vec<_>>>()?;
    let seen_t = sm.select_rows(space.seen_rows()).transpose()?;

    let mut params = DfanParams::<f32>::init(cfg.model, cfg.seed)?;
    let trainable = cfg.variant.trainable();
    let adam_cfg = AdamConfig {
        lr: cfg.lr,
        weight_decay: cfg.weight_decay,
        ..AdamConfig::default()
    };
    let mut adam = {
        let tracked: Vec<&Param<f32>> = params
            .params()
            .into_iter()
            .filter(|p| trainable.contains(&p.name.as_str()))
            .collect();
        Adam::new(adam_cfg, &tracked)
    };
    let objective = cfg.objective();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut log = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut sums = [0.0f64; 4];
        let mut steps = 0;
        for chunk in order.chunks(cfg.batch_size) {
            let mut tape = Tape::new();
            let vars = ParamVars::register(&mut tape, &params, &trainable);
            let seen = tape.constant(seen_t.clone());
            let batch: Vec<SampleInput<'_, f32>> = chunk
                .iter()
                .map(|&i| {
                    let r = &data.records()[i];
                    SampleInput {
                        local: &r.local,
                        global: &r.global,
                        target: targets[i],
                    }
                })
                .collect();
            let loss = batch_loss(&mut tape, &vars, cfg.model.attention_axis, &objective, seen, &batch)?;
            let n = chunk.len() as f64;
            for (s, v) in sums.iter_mut().zip([loss.attr, loss.cls, loss.cos, loss.total]) {
                *s += n * tape.value(v).item() as f64;
            }

            let mut grads = tape.backward(loss.total)?;
            let mut stepped: Vec<&mut Param<f32>> = Vec::with_capacity(trainable.len());
            for (p, var) in params.params_mut().into_iter().zip(vars.all()) {
                if trainable.contains(&p.name.as_str()) {
                    p.grad = grads.take(var);
                    stepped.push(p);
                }
            }
            adam.step(&mut stepped)?;
            steps += 1;
        }
        let n = data.len() as f64;
        let entry = EpochLog {
            epoch,
            steps,
            attr: sums[0] / n,
            cls: sums[1] / n,
            cos: sums[2] / n,
            total: sums[3] / n,
        };
        if !entry.total.is_finite() {
            return Err(Error::Consistency(format!("non-finite loss at epoch {epoch}")));
        }
        on_epoch(&entry);
        log.push(entry);
    }
    Ok(TrainOutput { params, log })
}
