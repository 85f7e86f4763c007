use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::bytes::{read_file, write_file};
use super::features::FeatureDataset;
use super::semantic::SemanticMatrix;
use crate::error::{Error, Result};

/// Disjoint seen / unseen class sets.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassSplit {
    pub seen: BTreeSet<u32>,
    pub unseen: BTreeSet<u32>,
}

impl ClassSplit {
    pub fn new(seen: impl IntoIterator<Item = u32>, unseen: impl IntoIterator<Item = u32>) -> Self {
        Self {
            seen: seen.into_iter().collect(),
            unseen: unseen.into_iter().collect(),
        }
    }

    pub fn is_seen(&self, class_id: u32) -> bool {
        self.seen.contains(&class_id)
    }
}

pub fn write_split(split: &ClassSplit, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(split).expect("split serializes");
    write_file(path, text.as_bytes())
}

pub fn read_split(path: &Path) -> Result<ClassSplit> {
    let bytes = read_file(path)?;
    serde_json::from_slice(&bytes)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

/// Checks the split against the semantic matrix and the training set.
pub fn validate_split(split: &ClassSplit, sm: &SemanticMatrix, train: &FeatureDataset) -> Result<()> {
    if let Some(&id) = split.seen.intersection(&split.unseen).next() {
        return Err(Error::Validation {
            class_id: id,
            reason: "listed as both seen and unseen".into(),
        });
    }
    if split.seen.is_empty() || split.unseen.is_empty() {
        return Err(Error::Config("seen and unseen class sets must both be non-empty".into()));
    }
    for &id in split.seen.iter().chain(&split.unseen) {
        if sm.row_of(id).is_none() {
            return Err(Error::Validation {
                class_id: id,
                reason: "not present in the semantic matrix".into(),
            });
        }
    }
    for rec in train.records() {
        if !split.is_seen(rec.label) {
            return Err(Error::Validation {
                class_id: rec.label,
                reason: "training record labeled with a non-seen class".into(),
            });
        }
    }
    Ok(())
}

/// Row-index view of a split over a semantic matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelSpace {
    class_ids: Vec<u32>,
    seen_rows: Vec<usize>,
    unseen_rows: Vec<usize>,
    is_seen: Vec<bool>,
}

impl LabelSpace {
    pub fn new(sm: &SemanticMatrix, split: &ClassSplit) -> Result<Self> {
        let class_ids = sm.class_ids().to_vec();
        let mut seen_rows = Vec::new();
        let mut unseen_rows = Vec::new();
        let mut is_seen = vec![false; class_ids.len()];
        for (row, &id) in class_ids.iter().enumerate() {
            match (split.seen.contains(&id), split.unseen.contains(&id)) {
                (true, true) => {
                    return Err(Error::Validation {
                        class_id: id,
                        reason: "listed as both seen and unseen".into(),
                    })
                }
                (true, false) => {
                    seen_rows.push(row);
                    is_seen[row] = true;
                }
                (false, true) => unseen_rows.push(row),
                (false, false) => {}
            }
        }
        if seen_rows.len() != split.seen.len() || unseen_rows.len() != split.unseen.len() {
            let missing = split
                .seen
                .iter()
                .chain(&split.unseen)
                .find(|id| !class_ids.contains(id))
                .copied()
                .unwrap_or_default();
            return Err(Error::Validation {
                class_id: missing,
                reason: "not present in the semantic matrix".into(),
            });
        }
        Ok(Self {
            class_ids,
            seen_rows,
            unseen_rows,
            is_seen,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.class_ids.len()
    }

    pub fn class_id(&self, row: usize) -> u32 {
        self.class_ids[row]
    }

    pub fn row_of(&self, class_id: u32) -> Option<usize> {
        self.class_ids.iter().position(|&c| c == class_id)
    }

    /// Matrix rows of seen classes, ascending.
    pub fn seen_rows(&self) -> &[usize] {
        &self.seen_rows
    }

    pub fn unseen_rows(&self) -> &[usize] {
        &self.unseen_rows
    }

    pub fn row_is_seen(&self, row: usize) -> bool {
        self.is_seen[row]
    }

    /// Position of a seen class among [`Self::seen_rows`]; the training target.
    pub fn seen_index(&self, class_id: u32) -> Result<usize> {
        self.row_of(class_id)
            .and_then(|row| self.seen_rows.iter().position(|&r| r == row))
            .ok_or_else(|| Error::Validation {
                class_id,
                reason: "training target is not a seen class".into(),
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{FeatureRecord, Role};
    use crate::numeric::Tensor;

    fn matrix() -> SemanticMatrix {
        SemanticMatrix::new(Tensor::from_fn(&[4, 2], |i| i as f32), vec![10, 11, 12, 13]).unwrap()
    }

    fn train(labels: &[u32]) -> FeatureDataset {
        let recs = labels
            .iter()
            .map(|&l| FeatureRecord::new(Tensor::zeros(&[1, 2]), Tensor::zeros(&[1, 2]), l).unwrap())
            .collect();
        FeatureDataset::new(Role::Train, 1, 2, recs).unwrap()
    }

    fn valid() -> ClassSplit {
        ClassSplit::new([10, 12], [11, 13])
    }

    fn offending(err: Error) -> u32 {
        match err {
            Error::Validation { class_id, .. } => class_id,
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn valid_split_passes() {
        validate_split(&valid(), &matrix(), &train(&[10, 12, 10])).unwrap();
    }

    #[test]
    fn overlap_names_class() {
        let split = ClassSplit::new([10, 12], [12, 13]);
        let err = validate_split(&split, &matrix(), &train(&[10])).unwrap_err();
        assert_eq!(offending(err), 12);
    }

    #[test]
    fn unseen_training_label_rejected() {
        let err = validate_split(&valid(), &matrix(), &train(&[10, 11])).unwrap_err();
        assert_eq!(offending(err), 11);
    }

    /// Every single-violation mutation of a valid split is rejected.
    #[test]
    fn single_mutations_rejected() {
        let sm = matrix();
        let ds = train(&[10, 12]);
        let mut mutations = Vec::new();
        for &id in &[11u32, 13] {
            let mut s = valid();
            s.seen.insert(id);
            mutations.push(s);
        }
        for &id in &[10u32, 12] {
            let mut s = valid();
            s.unseen.insert(id);
            mutations.push(s);
        }
        let mut s = valid();
        s.seen.insert(99);
        mutations.push(s);
        let mut s = valid();
        s.unseen.insert(42);
        mutations.push(s);
        mutations.push(ClassSplit::new([10, 12], []));
        mutations.push(ClassSplit::new([], [11, 13]));
        let mut s = valid();
        s.seen.remove(&12);
        mutations.push(s); // train label 12 no longer seen
        for m in mutations {
            assert!(validate_split(&m, &sm, &ds).is_err(), "{m:?}");
        }
    }

    #[test]
    fn label_space_indices() {
        let ls = LabelSpace::new(&matrix(), &valid()).unwrap();
        assert_eq!(ls.seen_rows(), &[0, 2]);
        assert_eq!(ls.unseen_rows(), &[1, 3]);
        assert_eq!(ls.seen_index(12).unwrap(), 1);
        assert!(ls.seen_index(11).is_err());
    }

    #[test]
    fn split_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("split.json");
        write_split(&valid(), &p).unwrap();
        assert_eq!(read_split(&p).unwrap(), valid());
    }
}
