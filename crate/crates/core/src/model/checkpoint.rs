//! Binary checkpoint container.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! magic        4 bytes  "QCKP"
//! version      u32      CHECKPOINT_VERSION
//! header_len   u64
//! header       UTF-8 JSON {"kind": "...", "config": {ModelConfig}}
//! param_count  u64
//! per parameter, in registry order:
//!   name_len   u32, name (UTF-8)
//!   ndim       u32, dims (u64 x ndim)
//!   data       f64 x prod(dims)
//! ```
//!
//! Loading rebuilds the model from the header and then requires every
//! parameter name and shape to match the rebuilt registry.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{build_baseline, BaselineKind, Model, ModelConfig};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"QCKP";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    kind: BaselineKind,
    config: ModelConfig,
}

pub fn save_checkpoint(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = BufWriter::new(File::create(path).map_err(|e| Error::from(e).in_file(path))?);
    write_checkpoint(model, &mut out)
        .and_then(|_| out.flush().map_err(Error::from))
        .map_err(|e| e.in_file(path))
}

pub fn write_checkpoint(model: &Model, out: &mut impl Write) -> Result<()> {
    let header = serde_json::to_vec(&Header {
        kind: model.kind(),
        config: model.config().clone(),
    })
    .map_err(|e| Error::Format(e.to_string()))?;
    out.write_all(CHECKPOINT_MAGIC)?;
    out.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    out.write_all(&(header.len() as u64).to_le_bytes())?;
    out.write_all(&header)?;
    let params = model.params();
    out.write_all(&(params.len() as u64).to_le_bytes())?;
    for p in params {
        out.write_all(&(p.name.len() as u32).to_le_bytes())?;
        out.write_all(p.name.as_bytes())?;
        out.write_all(&(p.value.ndim() as u32).to_le_bytes())?;
        for &d in p.value.shape() {
            out.write_all(&(d as u64).to_le_bytes())?;
        }
        for v in p.value.data() {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Model> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::from(e).in_file(path))?;
    read_checkpoint(&mut BufReader::new(file)).map_err(|e| e.in_file(path))
}

fn truncated(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::Format("checkpoint is truncated".into())
    } else {
        Error::Io(e)
    }
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(u64::from_le_bytes(b))
}

fn read_len(r: &mut impl Read, limit: u64, what: &str) -> Result<usize> {
    let n = read_u64(r)?;
    if n > limit {
        return Err(Error::Format(format!("{what} {n} is implausibly large")));
    }
    Ok(n as usize)
}

pub fn read_checkpoint(r: &mut impl Read) -> Result<Model> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(truncated)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Format("not a checkpoint file (bad magic)".into()));
    }
    let version = read_u32(r)?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!(
            "unsupported checkpoint version {version}, expected {CHECKPOINT_VERSION}"
        )));
    }
    let header_len = read_len(r, 1 << 20, "header length")?;
    let mut header = vec![0u8; header_len];
    r.read_exact(&mut header).map_err(truncated)?;
    let header: Header = serde_json::from_slice(&header)
        .map_err(|e| Error::Format(format!("bad checkpoint header: {e}")))?;
    let mut model = build_baseline(header.kind, &header.config)
        .map_err(|e| Error::Format(format!("checkpoint config is invalid: {e}")))?;

    let expected: Vec<(String, Vec<usize>)> = model
        .params()
        .iter()
        .map(|p| (p.name.clone(), p.value.shape().to_vec()))
        .collect();
    let count = read_len(r, 1 << 16, "parameter count")?;
    if count != expected.len() {
        return Err(Error::Format(format!(
            "checkpoint has {count} parameters, model needs {}",
            expected.len()
        )));
    }
    for (name, shape) in expected {
        let name_len = read_u32(r)? as usize;
        if name_len > 4096 {
            return Err(Error::Format("parameter name too long".into()));
        }
        let mut raw = vec![0u8; name_len];
        r.read_exact(&mut raw).map_err(truncated)?;
        let got = String::from_utf8(raw).map_err(|_| Error::Format("non-UTF-8 name".into()))?;
        if got != name {
            return Err(Error::Format(format!(
                "parameter {got:?} found where {name:?} was expected"
            )));
        }
        let ndim = read_u32(r)? as usize;
        if ndim > 8 {
            return Err(Error::Format(format!("{name}: rank {ndim} is too large")));
        }
        let dims = (0..ndim)
            .map(|_| read_u64(r).map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        if dims != shape {
            return Err(Error::Format(format!(
                "{name}: stored shape {dims:?} does not match model shape {shape:?}"
            )));
        }
        let mut data = vec![0.0; shape.iter().product()];
        let mut buf = [0u8; 8];
        for v in &mut data {
            r.read_exact(&mut buf).map_err(truncated)?;
            *v = f64::from_le_bytes(buf);
        }
        model.set_param(&name, Tensor::new(shape, data)?)?;
    }
    Ok(model)
}
