//! Seeded synthetic zero-shot datasets.
//!
//! Attributes are represented by mutually orthonormal prototype directions in
//! feature space. A region of a class-`c` image is the class's attribute
//! mixture `Σ_j a_c[j] P_j`, with one attribute (sampled in proportion to its
//! likelihood) amplified, plus isotropic Gaussian noise. The pooled feature
//! is the mean over regions.
//!
//! Seen signatures are sparse; every unseen signature is a convex blend of
//! two seen ones, so the attribute directions an unseen class needs are all
//! exercised during training.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::features::{FeatureDataset, FeatureRecord, Role};
use super::semantic::SemanticMatrix;
use super::split::ClassSplit;
use crate::error::{Error, Result};
use crate::numeric::Tensor;

const ACTIVE_PROB: f64 = 0.35;
const EMPHASIS: f32 = 1.0;
/// Weight range of the first parent when blending an unseen signature.
const BLEND: (f32, f32) = (0.4, 0.6);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub seen_classes: usize,
    pub unseen_classes: usize,
    pub samples_per_class: usize,
    pub attributes: usize,
    pub regions: usize,
    pub dim: usize,
    pub sigma: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            seen_classes: 10,
            unseen_classes: 5,
            samples_per_class: 30,
            attributes: 20,
            regions: 9,
            dim: 32,
            sigma: 0.05,
            seed: 7,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("seen classes", self.seen_classes),
            ("unseen classes", self.unseen_classes),
            ("samples per class", self.samples_per_class),
            ("attributes", self.attributes),
            ("regions", self.regions),
            ("dim", self.dim),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!("sigma must be finite and >= 0, got {}", self.sigma)));
        }
        if self.attributes > self.dim {
            return Err(Error::Config(format!(
                "attribute count {} exceeds feature dimension {}",
                self.attributes, self.dim
            )));
        }
        Ok(())
    }

    /// Held-out test samples per seen class.
    pub fn test_seen_per_class(&self) -> usize {
        if self.samples_per_class < 2 {
            0
        } else {
            (self.samples_per_class / 5).max(1)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticData {
    pub semantic: SemanticMatrix,
    pub split: ClassSplit,
    pub train: FeatureDataset,
    pub test_seen: FeatureDataset,
    pub test_unseen: FeatureDataset,
    /// Orthonormal attribute prototypes as rows (M×D).
    pub prototypes: Tensor<f32>,
}

pub fn generate_synthetic(spec: &SynthSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (m, d, n) = (spec.attributes, spec.dim, spec.regions);
    let classes = spec.seen_classes + spec.unseen_classes;

    let prototypes = orthonormal_rows(&mut rng, m, d);
    let mut ids: Vec<u32> = (0..classes as u32).collect();
    ids.shuffle(&mut rng);
    let split = ClassSplit::new(
        ids[..spec.seen_classes].iter().copied(),
        ids[spec.seen_classes..].iter().copied(),
    );
    let by_role = class_semantics(&mut rng, spec.seen_classes, spec.unseen_classes, m);
    let mut semantics = vec![Vec::new(); classes];
    for (&id, row) in ids.iter().zip(by_role) {
        semantics[id as usize] = row;
    }

    let noise = Normal::new(0.0, spec.sigma).expect("validated sigma");
    let held_out = spec.test_seen_per_class();
    let (mut train, mut test_seen, mut test_unseen) = (Vec::new(), Vec::new(), Vec::new());
    for class in 0..classes {
        let label = class as u32;
        let a = &semantics[class];
        for s in 0..spec.samples_per_class {
            let rec = sample(&mut rng, &noise, a, &prototypes, n, d, label)?;
            if !split.is_seen(label) {
                test_unseen.push(rec);
            } else if s < spec.samples_per_class - held_out {
                train.push(rec);
            } else {
                test_seen.push(rec);
            }
        }
    }

    let values = Tensor::new(vec![classes, m], semantics.concat())?;
    Ok(SyntheticData {
        semantic: SemanticMatrix::new(values, (0..classes as u32).collect())?,
        split,
        train: FeatureDataset::new(Role::Train, n, d, train)?,
        test_seen: FeatureDataset::new(Role::TestSeen, n, d, test_seen)?,
        test_unseen: FeatureDataset::new(Role::TestUnseen, n, d, test_unseen)?,
        prototypes,
    })
}

/// `m` orthonormal rows in R^d by Gram-Schmidt on Gaussian draws.
fn orthonormal_rows(rng: &mut ChaCha8Rng, m: usize, d: usize) -> Tensor<f32> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(m);
    while rows.len() < m {
        let mut v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        for r in &rows {
            let dot: f64 = v.iter().zip(r).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(r).for_each(|(a, b)| *a -= dot * b);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            rows.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    Tensor::new(vec![m, d], rows.concat().into_iter().map(|x| x as f32).collect())
        .expect("m×d prototypes")
}

/// Seen rows first, then unseen rows; all unit L2 norm and distinct.
///
/// Seen classes get sparse non-negative attribute likelihoods. Each unseen
/// class blends two seen classes, so its signature recombines attributes
/// that seen classes exhibit.
fn class_semantics(rng: &mut ChaCha8Rng, seen: usize, unseen: usize, m: usize) -> Vec<Vec<f32>> {
    let mut out: Vec<Vec<f32>> = Vec::with_capacity(seen + unseen);
    let mut patterns: Vec<Vec<bool>> = Vec::with_capacity(seen);
    while out.len() < seen {
        let active: Vec<bool> = (0..m).map(|_| rng.random_bool(ACTIVE_PROB)).collect();
        // activity patterns stay unique until every non-empty pattern is taken
        let exhausted = m < 20 && patterns.len() + 1 >= 1 << m;
        let fresh = active.iter().any(|&b| b) && (exhausted || !patterns.contains(&active));
        let row: Vec<f32> = active
            .iter()
            .map(|&on| {
                if on {
                    rng.random_range(0.5f32..1.0)
                } else {
                    rng.random_range(0.0f32..0.1)
                }
            })
            .collect();
        if !fresh {
            continue;
        }
        let row = unit(row);
        if out.contains(&row) {
            continue;
        }
        patterns.push(active);
        out.push(row);
    }
    // disjoint parent pairs first, then any remaining pairs
    let mut parents: Vec<usize> = (0..seen).collect();
    parents.shuffle(rng);
    let mut pairs: Vec<(usize, usize)> = parents.chunks_exact(2).map(|c| (c[0], c[1])).collect();
    let mut rest: Vec<(usize, usize)> = (0..seen)
        .flat_map(|i| (i + 1..seen).map(move |j| (i, j)))
        .filter(|&(i, j)| !pairs.contains(&(i, j)) && !pairs.contains(&(j, i)))
        .collect();
    rest.shuffle(rng);
    pairs.extend(rest);
    let mut next = 0;
    while out.len() < seen + unseen {
        let row = if pairs.is_empty() {
            unit((0..m).map(|_| rng.random_range(0.0f32..1.0)).collect())
        } else {
            let (i, j) = pairs[next % pairs.len()];
            next += 1;
            let w = rng.random_range(BLEND.0..BLEND.1);
            unit(out[i].iter().zip(&out[j]).map(|(a, b)| w * a + (1.0 - w) * b).collect())
        };
        if !out.contains(&row) {
            out.push(row);
        }
    }
    out
}

fn unit(row: Vec<f32>) -> Vec<f32> {
    let norm = row.iter().map(|v| v * v).sum::<f32>().sqrt();
    row.into_iter().map(|v| v / norm).collect()
}

fn sample(
    rng: &mut ChaCha8Rng,
    noise: &Normal<f64>,
    a: &[f32],
    prototypes: &Tensor<f32>,
    n: usize,
    d: usize,
    label: u32,
) -> Result<FeatureRecord> {
    let m = a.len();
    let total: f32 = a.iter().sum();
    let mut local = Tensor::zeros(&[n, d]);
    for r in 0..n {
        // emphasized attribute, drawn proportional to likelihood
        let mut u = rng.random_range(0.0..total);
        let mut pick = m - 1;
        for (j, &w) in a.iter().enumerate() {
            if u < w {
                pick = j;
                break;
            }
            u -= w;
        }
        for j in 0..m {
            let coef = if j == pick { a[j] * (1.0 + EMPHASIS) } else { a[j] };
            for k in 0..d {
                local.set(r, k, local.at(r, k) + coef * prototypes.at(j, k));
            }
        }
        for k in 0..d {
            local.set(r, k, local.at(r, k) + noise.sample(rng) as f32);
        }
    }
    let mut global = Tensor::zeros(&[1, d]);
    for k in 0..d {
        let mean = (0..n).map(|r| local.at(r, k)).sum::<f32>() / n as f32;
        global.set(0, k, mean);
    }
    FeatureRecord::new(local, global, label)
}
