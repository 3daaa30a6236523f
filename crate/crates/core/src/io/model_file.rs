//! CNN checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic      8 bytes  "CSOCNN01"
//! cfg_len    u32      length of the JSON network description
//! cfg        cfg_len bytes of UTF-8 JSON (CnnConfig)
//! n_tensors  u32
//! per tensor:
//!   ndim     u32
//!   dims     ndim × u64
//!   data     prod(dims) × f64
//! ```

use std::fs;
use std::path::Path;

use crate::cnn::{CnnConfig, CnnModel};
use crate::{Error, Result};

pub const CNN_MAGIC: &[u8; 8] = b"CSOCNN01";

pub fn encode_cnn(model: &CnnModel) -> Result<Vec<u8>> {
    let cfg = serde_json::to_vec(model.config())?;
    let mut out = Vec::with_capacity(16 + cfg.len() + model.n_params() * 8);
    out.extend_from_slice(CNN_MAGIC);
    out.extend_from_slice(&(cfg.len() as u32).to_le_bytes());
    out.extend_from_slice(&cfg);
    out.extend_from_slice(&(model.params().len() as u32).to_le_bytes());
    for (shape, data) in model.param_shapes().iter().zip(model.params()) {
        out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
        for &d in shape {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::ModelFormat(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
}

pub fn decode_cnn(bytes: &[u8]) -> Result<CnnModel> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(8)? != CNN_MAGIC {
        return Err(Error::ModelFormat("not a CNN checkpoint".into()));
    }
    let n = r.u32()? as usize;
    let config: CnnConfig = serde_json::from_slice(r.take(n)?)?;
    let expected = CnnModel::zeros(config.clone())?;
    let count = r.u32()? as usize;
    if count != expected.param_shapes().len() {
        return Err(Error::ModelFormat(format!(
            "{count} tensors, network needs {}",
            expected.param_shapes().len()
        )));
    }
    let mut params = Vec::with_capacity(count);
    for want in expected.param_shapes() {
        let ndim = r.u32()? as usize;
        let dims = (0..ndim)
            .map(|_| r.u64().map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        if &dims != want {
            return Err(Error::ModelFormat(format!(
                "tensor shape {dims:?}, expected {want:?}"
            )));
        }
        let len: usize = dims.iter().product();
        let raw = r.take(
            len.checked_mul(8)
                .ok_or_else(|| Error::ModelFormat("tensor too large".into()))?,
        )?;
        params.push(
            raw.chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
                .collect(),
        );
    }
    if r.pos != bytes.len() {
        return Err(Error::ModelFormat(format!(
            "{} trailing bytes",
            bytes.len() - r.pos
        )));
    }
    CnnModel::from_params(config, params)
}

pub fn save_cnn(path: &Path, model: &CnnModel) -> Result<()> {
    fs::write(path, encode_cnn(model)?).map_err(|e| Error::io(path, e))
}

pub fn load_cnn(path: &Path) -> Result<CnnModel> {
    decode_cnn(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::seed::stream;

    #[test]
    fn round_trip_is_exact() {
        let m = CnnModel::new(CnnConfig::desk(), &mut stream(1, "ckpt")).unwrap();
        let bytes = encode_cnn(&m).unwrap();
        assert_eq!(decode_cnn(&bytes).unwrap(), m);
        let tmp = tempfile::tempdir().unwrap();
        let p = tmp.path().join("m.ckpt");
        save_cnn(&p, &m).unwrap();
        assert_eq!(load_cnn(&p).unwrap(), m);
    }

    #[test]
    fn damaged_files_rejected() {
        let m = CnnModel::new(CnnConfig::tiny(), &mut stream(2, "ckpt")).unwrap();
        let bytes = encode_cnn(&m).unwrap();
        assert!(decode_cnn(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode_cnn(&extra).is_err());
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(matches!(decode_cnn(&magic), Err(Error::ModelFormat(_))));
    }
}
