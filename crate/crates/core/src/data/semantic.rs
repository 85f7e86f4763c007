use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::bytes::{expect_len, put_f32s, put_u32, read_file, to_u32, write_file, Reader};
use crate::error::{Error, Result};
use crate::numeric::Tensor;

/// Class-by-attribute matrix of attribute likelihoods.
#[derive(Clone, Debug, PartialEq)]
pub struct SemanticMatrix {
    values: Tensor<f32>,
    class_ids: Vec<u32>,
}

impl SemanticMatrix {
    pub fn new(values: Tensor<f32>, class_ids: Vec<u32>) -> Result<Self> {
        let (c, _) = values.dims2("semantic matrix")?;
        if c != class_ids.len() {
            return Err(Error::Consistency(format!(
                "matrix has {c} rows but {} class ids",
                class_ids.len()
            )));
        }
        if values.data().iter().any(|v| v.is_nan()) {
            return Err(Error::Consistency("semantic matrix contains NaN".into()));
        }
        let mut seen = HashSet::new();
        for &id in &class_ids {
            if !seen.insert(id) {
                return Err(Error::Validation {
                    class_id: id,
                    reason: "duplicate class id".into(),
                });
            }
        }
        Ok(Self { values, class_ids })
    }

    pub fn num_classes(&self) -> usize {
        self.class_ids.len()
    }

    pub fn num_attributes(&self) -> usize {
        self.values.shape()[1]
    }

    pub fn values(&self) -> &Tensor<f32> {
        &self.values
    }

    pub fn class_ids(&self) -> &[u32] {
        &self.class_ids
    }

    /// Semantic vector `a_j` of row `row`.
    pub fn row(&self, row: usize) -> &[f32] {
        self.values.row_slice(row)
    }

    pub fn row_of(&self, class_id: u32) -> Option<usize> {
        self.class_ids.iter().position(|&c| c == class_id)
    }

    /// Matrix of the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Tensor<f32> {
        let m = self.num_attributes();
        let data = rows.iter().flat_map(|&r| self.row(r).iter().copied()).collect();
        Tensor::new(vec![rows.len(), m], data).expect("row selection shape")
    }
}

/// Sidecar manifest path for a semantic matrix file.
pub fn manifest_path(path: &Path) -> PathBuf {
    path.with_extension("manifest")
}

/// Writes the binary matrix to `path` and the manifest alongside it.
pub fn write_semantic_matrix(sm: &SemanticMatrix, path: &Path) -> Result<()> {
    let (c, m) = (sm.num_classes(), sm.num_attributes());
    let mut out = Vec::with_capacity(8 + c * m * 4);
    put_u32(&mut out, to_u32(c, "class count")?);
    put_u32(&mut out, to_u32(m, "attribute count")?);
    put_f32s(&mut out, sm.values.data());
    write_file(path, &out)?;

    let mut manifest = String::new();
    for (i, id) in sm.class_ids.iter().enumerate() {
        writeln!(manifest, "{i}\t{id}").expect("string write");
    }
    write_file(&manifest_path(path), manifest.as_bytes())
}

pub fn load_semantic_matrix(path: &Path) -> Result<SemanticMatrix> {
    let buf = read_file(path)?;
    let mut r = Reader::new(&buf);
    let c = r.u32()? as usize;
    let m = r.u32()? as usize;
    expect_len(&buf, 8 + c * m * 4)?;
    let values = Tensor::new(vec![c, m], r.f32s(c * m)?)?;

    let mpath = manifest_path(path);
    let text = String::from_utf8(read_file(&mpath)?)
        .map_err(|_| Error::Format(format!("{}: manifest is not UTF-8", mpath.display())))?;
    let class_ids = parse_manifest(&text)?;
    if class_ids.len() != c {
        return Err(Error::Consistency(format!(
            "manifest lists {} classes, matrix has {c} rows",
            class_ids.len()
        )));
    }
    SemanticMatrix::new(values, class_ids)
}

/// Parses `index<TAB>class_id` lines; indices must run 0, 1, 2, ...
pub fn parse_manifest(text: &str) -> Result<Vec<u32>> {
    let mut ids = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = || Error::Format(format!("manifest line {}: `{line}`", lineno + 1));
        let (idx, id) = line.split_once('\t').ok_or_else(bad)?;
        let idx: usize = idx.trim().parse().map_err(|_| bad())?;
        let id: u32 = id.trim().parse().map_err(|_| bad())?;
        if idx != ids.len() {
            return Err(Error::Consistency(format!(
                "manifest index {idx} out of order, expected {}",
                ids.len()
            )));
        }
        if ids.contains(&id) {
            return Err(Error::Validation {
                class_id: id,
                reason: "duplicate class id in manifest".into(),
            });
        }
        ids.push(id);
    }
    Ok(ids)
}
