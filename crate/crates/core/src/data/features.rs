//! Feature files.
//!
//! Layout (little-endian):
//! - magic `DFZ1`
//! - u32 version (1), u32 record count, u32 N, u32 D
//! - per record: u32 label, D×f32 global feature, N×D×f32 region features (row-major)

use std::path::Path;

use super::bytes::{expect_len, put_f32s, put_u32, read_file, to_u32, write_file, Reader};
use crate::error::{Error, Result};
use crate::numeric::Tensor;

pub const FEATURE_MAGIC: &[u8; 4] = b"DFZ1";
pub const FEATURE_VERSION: u32 = 1;
const HEADER_BYTES: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Train,
    TestSeen,
    TestUnseen,
}

/// One sample: region features `Z` (N×D), pooled feature `p` (1×D), label.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureRecord {
    pub local: Tensor<f32>,
    pub global: Tensor<f32>,
    pub label: u32,
}

impl FeatureRecord {
    pub fn new(local: Tensor<f32>, global: Tensor<f32>, label: u32) -> Result<Self> {
        let (_, d) = local.dims2("feature record")?;
        if global.shape() != [1, d] {
            return Err(Error::shape("feature record", local.shape(), global.shape()));
        }
        if !local.is_finite() || !global.is_finite() {
            return Err(Error::Consistency(format!(
                "record with label {label} has non-finite values"
            )));
        }
        Ok(Self {
            local,
            global,
            label,
        })
    }

    pub fn regions(&self) -> usize {
        self.local.shape()[0]
    }

    pub fn dim(&self) -> usize {
        self.local.shape()[1]
    }

    /// Copy with every region row and the global vector scaled to unit L2 norm.
    pub fn l2_normalized(&self) -> Self {
        let normalize = |t: &Tensor<f32>| {
            let (r, c) = (t.shape()[0], t.shape()[1]);
            let mut out = t.clone();
            for i in 0..r {
                let norm = t.row_slice(i).iter().map(|v| v * v).sum::<f32>().sqrt();
                if norm > 0.0 {
                    for j in 0..c {
                        out.set(i, j, t.at(i, j) / norm);
                    }
                }
            }
            out
        };
        Self {
            local: normalize(&self.local),
            global: normalize(&self.global),
            label: self.label,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureDataset {
    pub role: Role,
    regions: usize,
    dim: usize,
    records: Vec<FeatureRecord>,
}

impl FeatureDataset {
    pub fn new(role: Role, regions: usize, dim: usize, records: Vec<FeatureRecord>) -> Result<Self> {
        for r in &records {
            if r.regions() != regions || r.dim() != dim {
                return Err(Error::shape(
                    "feature dataset",
                    &[regions, dim],
                    r.local.shape(),
                ));
            }
        }
        Ok(Self {
            role,
            regions,
            dim,
            records,
        })
    }

    pub fn regions(&self) -> usize {
        self.regions
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn records(&self) -> &[FeatureRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn l2_normalized(&self) -> Self {
        Self {
            records: self.records.iter().map(FeatureRecord::l2_normalized).collect(),
            ..self.clone()
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let (n, d) = (self.regions, self.dim);
        let mut out = Vec::with_capacity(HEADER_BYTES + self.records.len() * record_bytes(n, d));
        out.extend_from_slice(FEATURE_MAGIC);
        put_u32(&mut out, FEATURE_VERSION);
        put_u32(&mut out, to_u32(self.records.len(), "record count")?);
        put_u32(&mut out, to_u32(n, "region count")?);
        put_u32(&mut out, to_u32(d, "dimension")?);
        for r in &self.records {
            put_u32(&mut out, r.label);
            put_f32s(&mut out, r.global.data());
            put_f32s(&mut out, r.local.data());
        }
        Ok(out)
    }

    pub fn from_bytes(buf: &[u8], role: Role) -> Result<Self> {
        let mut r = Reader::new(buf);
        r.magic(FEATURE_MAGIC)?;
        let version = r.u32()?;
        if version != FEATURE_VERSION {
            return Err(Error::Format(format!("unsupported feature file version {version}")));
        }
        let count = r.u32()? as usize;
        let n = r.u32()? as usize;
        let d = r.u32()? as usize;
        expect_len(buf, HEADER_BYTES + count * record_bytes(n, d))?;

        let mut records = Vec::with_capacity(count);
        for _ in 0..count {
            let label = r.u32()?;
            let global = Tensor::new(vec![1, d], r.f32s(d)?)?;
            let local = Tensor::new(vec![n, d], r.f32s(n * d)?)?;
            records.push(FeatureRecord::new(local, global, label)?);
        }
        Self::new(role, n, d, records)
    }
}

fn record_bytes(n: usize, d: usize) -> usize {
    4 + 4 * d + 4 * n * d
}

pub fn write_feature_file(ds: &FeatureDataset, path: &Path) -> Result<()> {
    write_file(path, &ds.to_bytes()?)
}

pub fn read_feature_file(path: &Path, role: Role) -> Result<FeatureDataset> {
    FeatureDataset::from_bytes(&read_file(path)?, role)
}
