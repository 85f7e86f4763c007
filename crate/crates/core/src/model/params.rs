use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{Param, Scalar, Tensor};

/// Axis the attention softmax normalizes over.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum AttentionAxis {
    /// Each attribute's weights form a distribution over regions.
    #[default]
    Region,
    /// Each region's weights form a distribution over attributes.
    Attribute,
}

impl AttentionAxis {
    pub(crate) fn tensor_axis(self) -> usize {
        match self {
            AttentionAxis::Region => 0,
            AttentionAxis::Attribute => 1,
        }
    }
}

/// Architecture of the head.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub dim: usize,
    pub attributes: usize,
    pub hidden1: usize,
    pub hidden2: usize,
    pub attention_axis: AttentionAxis,
}

impl ModelConfig {
    /// Default hidden widths `max(D/2, 16)` and `max(D/4, 16)`.
    pub fn new(dim: usize, attributes: usize) -> Self {
        Self {
            dim,
            attributes,
            hidden1: (dim / 2).max(16),
            hidden2: (dim / 4).max(16),
            attention_axis: AttentionAxis::Region,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.attributes == 0 || self.hidden1 == 0 || self.hidden2 == 0 {
            return Err(Error::Config(format!("all model widths must be positive: {self:?}")));
        }
        Ok(())
    }
}

pub const W_LOCAL: &str = "w_local";
pub const W_GLOBAL: &str = "w_global";
pub const PHI_NAMES: [&str; 6] = ["phi.w1", "phi.b1", "phi.w2", "phi.b2", "phi.w3", "phi.b3"];

/// Local and global predictor weights plus the three-layer bias learner.
///
/// Declaration order (also the checkpoint order): `w_local`, `w_global`,
/// then `phi.w1, phi.b1, phi.w2, phi.b2, phi.w3, phi.b3`.
#[derive(Clone, Debug, PartialEq)]
pub struct DfanParams<T = f32> {
    pub config: ModelConfig,
    pub w_local: Param<T>,
    pub w_global: Param<T>,
    pub phi: [Param<T>; 6],
}

impl<T: Scalar> DfanParams<T> {
    /// Fan-in scaled uniform initialization `U(-1/√fan_in, 1/√fan_in)`.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ModelConfig {
            dim: d,
            attributes: m,
            hidden1: h1,
            hidden2: h2,
            ..
        } = config;
        let mut uniform = |name: &str, shape: &[usize], fan_in: usize| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            let t = Tensor::from_fn(shape, |_| T::from_f64_lossy(rng.random_range(-bound..bound)));
            Param::new(name, t)
        };
        let w_local = uniform(W_LOCAL, &[d, m], d);
        let w_global = uniform(W_GLOBAL, &[d, m], d);
        let phi = [
            uniform(PHI_NAMES[0], &[d, h1], d),
            uniform(PHI_NAMES[1], &[1, h1], d),
            uniform(PHI_NAMES[2], &[h1, h2], h1),
            uniform(PHI_NAMES[3], &[1, h2], h1),
            uniform(PHI_NAMES[4], &[h2, m], h2),
            uniform(PHI_NAMES[5], &[1, m], h2),
        ];
        Ok(Self {
            config,
            w_local,
            w_global,
            phi,
        })
    }

    pub fn expected_shapes(config: &ModelConfig) -> [Vec<usize>; 8] {
        let ModelConfig {
            dim: d,
            attributes: m,
            hidden1: h1,
            hidden2: h2,
            ..
        } = *config;
        [
            vec![d, m],
            vec![d, m],
            vec![d, h1],
            vec![1, h1],
            vec![h1, h2],
            vec![1, h2],
            vec![h2, m],
            vec![1, m],
        ]
    }

    pub fn params(&self) -> [&Param<T>; 8] {
        let [a, b, c, d, e, f] = &self.phi;
        [&self.w_local, &self.w_global, a, b, c, d, e, f]
    }

    pub fn params_mut(&mut self) -> [&mut Param<T>; 8] {
        let [a, b, c, d, e, f] = &mut self.phi;
        [&mut self.w_local, &mut self.w_global, a, b, c, d, e, f]
    }

    pub fn get(&self, name: &str) -> Option<&Param<T>> {
        self.params().into_iter().find(|p| p.name == name)
    }

    pub fn cast<U: Scalar>(&self) -> DfanParams<U> {
        DfanParams {
            config: self.config,
            w_local: self.w_local.cast(),
            w_global: self.w_global.cast(),
            phi: [
                self.phi[0].cast(),
                self.phi[1].cast(),
                self.phi[2].cast(),
                self.phi[3].cast(),
                self.phi[4].cast(),
                self.phi[5].cast(),
            ],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_hidden_widths() {
        let c = ModelConfig::new(32, 20);
        assert_eq!((c.hidden1, c.hidden2), (16, 16));
        let c = ModelConfig::new(2048, 312);
        assert_eq!((c.hidden1, c.hidden2), (1024, 512));
    }

    #[test]
    fn init_shapes_and_bounds() {
        let cfg = ModelConfig::new(8, 4);
        let p = DfanParams::<f32>::init(cfg, 1).unwrap();
        let shapes = DfanParams::<f32>::expected_shapes(&cfg);
        for (param, shape) in p.params().iter().zip(&shapes) {
            assert_eq!(param.value.shape(), shape.as_slice(), "{}", param.name);
        }
        let bound = 1.0 / 8f32.sqrt();
        assert!(p.w_local.value.data().iter().all(|v| v.abs() <= bound));
        assert_ne!(p.w_local.value, p.w_global.value);
        assert_eq!(p.phi[5].value.shape(), &[1, 4]);
    }

    #[test]
    fn init_is_seeded() {
        let cfg = ModelConfig::new(8, 4);
        assert_eq!(
            DfanParams::<f32>::init(cfg, 9).unwrap(),
            DfanParams::<f32>::init(cfg, 9).unwrap()
        );
    }
}
