//! Binary checkpoints.
//!
//! Layout (little-endian): magic `TCRN`, u32 version, u32 header length and
//! that many bytes of UTF-8 JSON header, then for each parameter in table
//! order: u32 name length, name bytes, u32 rank, rank x u32 dims, f32 payload.

use std::io::{Read, Write};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::instance::ModelInstance;
use super::spec::ModelSpec;
use crate::error::{Error, Result};
use crate::nn_core::{Mode, Tensor};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"TCRN";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    spec: ModelSpec,
    folded: bool,
}

pub fn save_checkpoint<W: Write>(instance: &ModelInstance<f32>, mut sink: W) -> Result<()> {
    let header = serde_json::to_vec(&Header {
        spec: *instance.spec(),
        folded: instance.is_folded(),
    })
    .map_err(|e| Error::Checkpoint(e.to_string()))?;
    sink.write_all(CHECKPOINT_MAGIC)?;
    sink.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    write_u32(&mut sink, header.len())?;
    sink.write_all(&header)?;
    for (name, tensor) in instance.params() {
        write_u32(&mut sink, name.len())?;
        sink.write_all(name.as_bytes())?;
        write_u32(&mut sink, tensor.rank())?;
        for &d in tensor.shape() {
            write_u32(&mut sink, d)?;
        }
        let mut payload = Vec::with_capacity(tensor.len() * 4);
        for v in tensor.data() {
            payload.extend_from_slice(&v.to_le_bytes());
        }
        sink.write_all(&payload)?;
    }
    sink.flush()?;
    Ok(())
}

pub fn checkpoint_bytes(instance: &ModelInstance<f32>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    save_checkpoint(instance, &mut buf)?;
    Ok(buf)
}

/// Loads a checkpoint; the instance comes back in infer mode.
pub fn load_checkpoint<R: Read>(mut source: R) -> Result<ModelInstance<f32>> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    let mut cur = Cursor { bytes: &bytes, pos: 0 };

    if cur.take(4)? != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("bad magic, not a TCRN checkpoint".into()));
    }
    let version = cur.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported version {version}, expected {CHECKPOINT_VERSION}"
        )));
    }
    let header_len = cur.u32()? as usize;
    let header: Header = serde_json::from_slice(cur.take(header_len)?)
        .map_err(|e| Error::Checkpoint(format!("bad header: {e}")))?;

    let mut params = IndexMap::new();
    while !cur.done() {
        let name_len = cur.u32()? as usize;
        let name = std::str::from_utf8(cur.take(name_len)?)
            .map_err(|_| Error::Checkpoint("parameter name is not UTF-8".into()))?
            .to_owned();
        let rank = cur.u32()? as usize;
        if rank > 8 {
            return Err(Error::Checkpoint(format!("{name}: implausible rank {rank}")));
        }
        let shape = (0..rank).map(|_| cur.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let count: usize = shape.iter().product();
        let data = cur
            .take(count.checked_mul(4).ok_or_else(|| Error::Checkpoint("size overflow".into()))?)?
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
            .collect();
        if params.insert(name.clone(), Tensor::new(shape, data)?).is_some() {
            return Err(Error::Checkpoint(format!("duplicate parameter {name}")));
        }
    }
    let mut instance = ModelInstance::from_parts(header.spec, params, header.folded)
        .map_err(|e| Error::Checkpoint(format!("parameters disagree with spec: {e}")))?;
    instance.set_mode(Mode::Infer)?;
    Ok(instance)
}

fn write_u32<W: Write>(sink: &mut W, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Checkpoint(format!("{v} does not fit in u32")))?;
    sink.write_all(&v.to_le_bytes())?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Checkpoint(format!("truncated: need {n} bytes at offset {}", self.pos))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn done(&self) -> bool {
        self.pos == self.bytes.len()
    }
}
