//! Checkpoint files: magic `DFC1`, little-endian u32 `{D, M, h1, h2}`,
//! then every parameter tensor in declaration order as f32.

use std::path::Path;

use super::params::{AttentionAxis, DfanParams, ModelConfig};
use crate::data::{expect_len, put_f32s, put_u32, read_file, to_u32, write_file, Reader};
use crate::error::{Error, Result};
use crate::numeric::{Param, Tensor};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"DFC1";

pub fn checkpoint_bytes(params: &DfanParams<f32>) -> Result<Vec<u8>> {
    let c = &params.config;
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    for v in [c.dim, c.attributes, c.hidden1, c.hidden2] {
        put_u32(&mut out, to_u32(v, "checkpoint header field")?);
    }
    for p in params.params() {
        put_f32s(&mut out, p.value.data());
    }
    Ok(out)
}

/// The attention axis is a run setting, not part of the file.
pub fn checkpoint_from_bytes(buf: &[u8], axis: AttentionAxis) -> Result<DfanParams<f32>> {
    let mut r = Reader::new(buf);
    r.magic(CHECKPOINT_MAGIC)?;
    let mut header = [0usize; 4];
    for h in &mut header {
        *h = r.u32()? as usize;
    }
    let config = ModelConfig {
        dim: header[0],
        attributes: header[1],
        hidden1: header[2],
        hidden2: header[3],
        attention_axis: axis,
    };
    config
        .validate()
        .map_err(|e| Error::Format(format!("checkpoint header: {e}")))?;
    let shapes = DfanParams::<f32>::expected_shapes(&config);
    let payload: usize = shapes.iter().map(|s| s.iter().product::<usize>()).sum();
    expect_len(buf, 20 + 4 * payload)?;

    let mut params = DfanParams::<f32>::init(config, 0)?;
    for (p, shape) in params.params_mut().into_iter().zip(shapes) {
        let numel = shape.iter().product();
        *p = Param::new(p.name.clone(), Tensor::new(shape, r.f32s(numel)?)?);
    }
    Ok(params)
}

pub fn save_checkpoint(params: &DfanParams<f32>, path: &Path) -> Result<()> {
    write_file(path, &checkpoint_bytes(params)?)
}

pub fn load_checkpoint(path: &Path, axis: AttentionAxis) -> Result<DfanParams<f32>> {
    checkpoint_from_bytes(&read_file(path)?, axis)
}
