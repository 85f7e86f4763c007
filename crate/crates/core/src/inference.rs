//! Class scoring and conventional / generalized zero-shot prediction.

use serde::{Deserialize, Serialize};

use crate::data::{LabelSpace, SemanticMatrix};
use crate::error::{Error, Result};

/// Weights on the local and global attribute predictions, and the
/// calibration penalty applied to seen classes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CombineConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub gamma: f64,
}

impl CombineConfig {
    /// Preset for fine-grained data (attribute-level evidence matters).
    pub const FINE_GRAINED: (f64, f64) = (0.5, 0.5);
    /// Preset for coarse-grained data (class-level evidence dominates).
    pub const COARSE_GRAINED: (f64, f64) = (0.0, 1.0);

    pub fn new(beta1: f64, beta2: f64, gamma: f64) -> Result<Self> {
        let cfg = Self { beta1, beta2, gamma };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta1 >= 0.0 && self.beta2 >= 0.0) {
            return Err(Error::Config(format!(
                "beta coefficients must be >= 0, got ({}, {})",
                self.beta1, self.beta2
            )));
        }
        if self.beta1 == 0.0 && self.beta2 == 0.0 {
            return Err(Error::Config("beta1 and beta2 cannot both be zero".into()));
        }
        if !(self.gamma >= 0.0) {
            return Err(Error::Config(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        Ok(())
    }
}

/// `score_j = a_jᵀ (β1·â_l + β2·â_g)` for every class row of `sm`.
pub fn class_scores(
    a_local: &[f32],
    a_global: &[f32],
    sm: &SemanticMatrix,
    cfg: &CombineConfig,
) -> Result<Vec<f64>> {
    let m = sm.num_attributes();
    if a_local.len() != m || a_global.len() != m {
        return Err(Error::shape(
            "class_scores",
            &[a_local.len(), a_global.len()],
            &[m, m],
        ));
    }
    let combined: Vec<f64> = a_local
        .iter()
        .zip(a_global)
        .map(|(&l, &g)| cfg.beta1 * l as f64 + cfg.beta2 * g as f64)
        .collect();
    Ok((0..sm.num_classes())
        .map(|row| {
            sm.row(row)
                .iter()
                .zip(&combined)
                .map(|(&a, &c)| a as f64 * c)
                .sum()
        })
        .collect())
}

/// Index of the maximum over `rows`; ties go to the earliest row.
fn argmax(rows: impl Iterator<Item = usize>, value: impl Fn(usize) -> f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for r in rows {
        let v = value(r);
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((r, v));
        }
    }
    best.map(|(r, _)| r)
}

/// Prediction restricted to unseen classes.
pub fn czsl_predict(scores: &[f64], space: &LabelSpace) -> u32 {
    let row = argmax(space.unseen_rows().iter().copied(), |r| scores[r])
        .expect("label space has unseen classes");
    space.class_id(row)
}

/// Prediction over all classes with `gamma` subtracted from seen-class scores.
pub fn gzsl_predict(scores: &[f64], space: &LabelSpace, gamma: f64) -> u32 {
    let rows = space.seen_rows().iter().chain(space.unseen_rows()).copied();
    let mut ordered: Vec<usize> = rows.collect();
    ordered.sort_unstable();
    let row = argmax(ordered.into_iter(), |r| {
        if space.row_is_seen(r) {
            scores[r] - gamma
        } else {
            scores[r]
        }
    })
    .expect("label space is non-empty");
    space.class_id(row)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ClassSplit;
    use crate::numeric::Tensor;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Rows 0..4 orthonormal; classes 0,1 seen, 2,3 unseen.
    fn setup() -> (SemanticMatrix, LabelSpace) {
        let sm = SemanticMatrix::new(Tensor::identity(4), vec![0, 1, 2, 3]).unwrap();
        let space = LabelSpace::new(&sm, &ClassSplit::new([0, 1], [2, 3])).unwrap();
        (sm, space)
    }

    #[test]
    fn global_only_ignores_local() {
        let (sm, _) = setup();
        let cfg = CombineConfig::new(0.0, 1.0, 0.0).unwrap();
        let g = [0.1, 0.4, -0.2, 0.3];
        let a = class_scores(&[1.0, 2.0, 3.0, 4.0], &g, &sm, &cfg).unwrap();
        let b = class_scores(&[-9.0, 0.0, 7.0, 1.0], &g, &sm, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn orthonormal_rows_pick_matching_class() {
        let (sm, space) = setup();
        let cfg = CombineConfig::new(0.5, 0.5, 0.0).unwrap();
        let v = [0.0, 0.0, 0.0, 1.0];
        let s = class_scores(&v, &v, &sm, &cfg).unwrap();
        assert_eq!(gzsl_predict(&s, &space, 0.0), 3);
        assert_eq!(czsl_predict(&s, &space), 3);
    }

    #[test]
    fn scores_match_dot_product_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let sm = SemanticMatrix::new(
            Tensor::from_fn(&[5, 3], |_| rng.random_range(0.0..1.0)),
            (0..5).collect(),
        )
        .unwrap();
        let l: Vec<f32> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g: Vec<f32> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let cfg = CombineConfig::new(0.3, 0.7, 0.0).unwrap();
        let s = class_scores(&l, &g, &sm, &cfg).unwrap();
        for (j, &sj) in s.iter().enumerate() {
            let a = sm.row(j);
            let expected: f64 = (0..3)
                .map(|k| a[k] as f64 * (0.3 * l[k] as f64 + 0.7 * g[k] as f64))
                .sum();
            assert!((sj - expected).abs() < 1e-6);
        }
    }

    #[test]
    fn dimension_mismatch_errors() {
        let (sm, _) = setup();
        let cfg = CombineConfig::new(0.5, 0.5, 0.0).unwrap();
        assert!(class_scores(&[1.0; 3], &[1.0; 4], &sm, &cfg).is_err());
    }

    #[test]
    fn czsl_examples() {
        let (_, space) = setup();
        // seen class 0 holds the global max but is never returned
        assert_eq!(czsl_predict(&[9.0, 1.0, 5.0, 2.0], &space), 2);
        assert_eq!(czsl_predict(&[9.0, 1.0, 2.0, 2.0], &space), 2);

        let sm = SemanticMatrix::new(Tensor::identity(5), vec![0, 1, 2, 3, 4]).unwrap();
        let space = LabelSpace::new(&sm, &ClassSplit::new([0, 1], [2, 3, 4])).unwrap();
        assert_eq!(czsl_predict(&[0.0, 0.0, 1.0, 5.0, 2.0], &space), 3);
    }

    #[test]
    fn gzsl_examples() {
        let (_, space) = setup();
        let s = [5.0, 1.0, 4.5, 0.0];
        assert_eq!(gzsl_predict(&s, &space, 0.0), 0);
        // 5.0 - 1 = 4.0 < 4.5
        assert_eq!(gzsl_predict(&s, &space, 1.0), 2);
        assert_eq!(gzsl_predict(&s, &space, 1e9), 2);
        assert_eq!(gzsl_predict(&s, &space, f64::INFINITY), 2);
    }

    #[test]
    fn invalid_configs() {
        assert!(CombineConfig::new(0.0, 0.0, 0.0).is_err());
        assert!(CombineConfig::new(-0.1, 1.0, 0.0).is_err());
        assert!(CombineConfig::new(0.5, 0.5, -1.0).is_err());
    }

    fn random_space(rng: &mut ChaCha8Rng, c: usize) -> LabelSpace {
        let sm = SemanticMatrix::new(Tensor::identity(c), (0..c as u32).collect()).unwrap();
        let mut ids: Vec<u32> = (0..c as u32).collect();
        let cut = rng.random_range(1..c);
        for i in (1..ids.len()).rev() {
            ids.swap(i, rng.random_range(0..=i));
        }
        LabelSpace::new(&sm, &ClassSplit::new(ids[..cut].to_vec(), ids[cut..].to_vec())).unwrap()
    }

    proptest! {
        #[test]
        fn calibrated_stacking_properties(seed in 0u64..2000, c in 2usize..9, scale in 0.01f64..100.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let space = random_space(&mut rng, c);
            let scores: Vec<f64> = (0..c).map(|_| rng.random_range(-3.0..3.0)).collect();

            // gamma = 0 is the plain argmax
            let plain = (0..c).fold(0, |b, r| if scores[r] > scores[b] { r } else { b });
            prop_assert_eq!(gzsl_predict(&scores, &space, 0.0), space.class_id(plain));

            // positive rescaling (gamma scaled alike) never changes predictions
            let scaled: Vec<f64> = scores.iter().map(|s| s * scale).collect();
            prop_assert_eq!(czsl_predict(&scores, &space), czsl_predict(&scaled, &space));
            prop_assert_eq!(gzsl_predict(&scores, &space, 0.7), gzsl_predict(&scaled, &space, 0.7 * scale));

            // once unseen, always unseen as gamma grows
            let mut was_unseen = false;
            for gamma in [0.0, 0.1, 0.5, 1.0, 2.0, 4.0, 8.0, 1e9] {
                let id = gzsl_predict(&scores, &space, gamma);
                let unseen = !space.row_is_seen(space.row_of(id).unwrap());
                prop_assert!(!was_unseen || unseen);
                was_unseen = unseen;
            }
            prop_assert_eq!(gzsl_predict(&scores, &space, f64::INFINITY), czsl_predict(&scores, &space));
        }
    }
}
