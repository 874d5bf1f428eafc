//! Binary checkpoints.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! "DDGC"  version:u32=1
//! snapshot_len:u32  snapshot: JSON {"config": TrainConfig, "dims": ModelDims}
//! gamma:f64  lambda:f64  step:u64
//! count:u32  count x (name_len:u32 name rank:u32 dims:u32[rank] values:f64[prod(dims)])
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelBundle, ModelDims};
use crate::tensor::Tensor;
use crate::trainer::TrainConfig;

pub const MAGIC: &[u8; 4] = b"DDGC";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub gamma: f64,
    pub lambda: f64,
    pub step: u64,
    pub model: ModelBundle,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Snapshot {
    config: TrainConfig,
    dims: ModelDims,
}

fn put_u32(out: &mut Vec<u8>, v: usize, what: &str) -> Result<()> {
    let v =
        u32::try_from(v).map_err(|_| Error::Format(format!("{what} {v} does not fit in u32")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        let snap = serde_json::to_vec(&Snapshot {
            config: self.config.clone(),
            dims: self.model.dims,
        })
        .map_err(|e| Error::Format(format!("checkpoint snapshot: {e}")))?;
        put_u32(&mut out, snap.len(), "snapshot length")?;
        out.extend_from_slice(&snap);
        out.extend_from_slice(&self.gamma.to_le_bytes());
        out.extend_from_slice(&self.lambda.to_le_bytes());
        out.extend_from_slice(&self.step.to_le_bytes());
        let params = self.model.params();
        put_u32(&mut out, params.len(), "tensor count")?;
        for (_, p) in params {
            put_u32(&mut out, p.name.len(), "name length")?;
            out.extend_from_slice(p.name.as_bytes());
            put_u32(&mut out, p.value.rank(), "rank")?;
            for &d in p.value.shape() {
                put_u32(&mut out, d, "dimension")?;
            }
            for v in p.value.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Format("checkpoint magic is not DDGC".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Format(format!(
                "unsupported checkpoint version {version}"
            )));
        }
        let n = r.u32()? as usize;
        let snap: Snapshot = serde_json::from_slice(r.take(n)?)
            .map_err(|e| Error::Format(format!("checkpoint snapshot: {e}")))?;
        let gamma = r.f64()?;
        let lambda = r.f64()?;
        let step = r.u64()?;
        let mut model = ModelBundle::new(snap.dims, 0)?;
        let count = r.u32()? as usize;
        let mut params = model.params_mut();
        if count != params.len() {
            return Err(Error::Format(format!(
                "checkpoint has {count} tensors, model needs {}",
                params.len()
            )));
        }
        for (_, p) in params.iter_mut() {
            let len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(len)?)
                .map_err(|_| Error::Format("tensor name is not UTF-8".into()))?;
            if name != p.name {
                return Err(Error::Format(format!(
                    "expected tensor {}, found {name}",
                    p.name
                )));
            }
            let rank = r.u32()? as usize;
            let shape = (0..rank)
                .map(|_| r.u32().map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            if shape != p.value.shape() {
                return Err(Error::Format(format!(
                    "tensor {name} has shape {shape:?}, expected {:?}",
                    p.value.shape()
                )));
            }
            let data = (0..p.value.len())
                .map(|_| r.f64())
                .collect::<Result<Vec<_>>>()?;
            p.value = Tensor::new(shape, data)?;
        }
        drop(params);
        if r.pos != bytes.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes after checkpoint",
                bytes.len() - r.pos
            )));
        }
        Ok(Checkpoint {
            config: snap.config,
            gamma,
            lambda,
            step,
            model,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| {
                Error::Format(format!(
                    "checkpoint truncated: need {n} bytes at offset {}, {} left",
                    self.pos,
                    self.bytes.len() - self.pos
                ))
            })?;
        let s = &self.bytes[self.pos..end];
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

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trainer::Gamma;

    fn sample() -> Checkpoint {
        let dims = ModelDims {
            image_size: 4,
            classes: 3,
            s_dim: 2,
            v_dim: 2,
            hidden: 5,
        };
        Checkpoint {
            config: TrainConfig {
                gamma: Gamma::Fixed(f64::INFINITY),
                ..Default::default()
            },
            gamma: f64::INFINITY,
            lambda: 0.25,
            step: 17,
            model: ModelBundle::new(dims, 3).unwrap(),
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let c = sample();
        let bytes = c.to_bytes().unwrap();
        assert_eq!(&bytes[..4], b"DDGC");
        assert_eq!(&bytes[4..8], &1u32.to_le_bytes());
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_bytes().unwrap(), bytes);
    }

    #[test]
    fn corrupt_inputs() {
        let bytes = sample().to_bytes().unwrap();
        assert!(matches!(
            Checkpoint::from_bytes(&bytes[..bytes.len() - 1]),
            Err(Error::Format(_))
        ));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(
            Checkpoint::from_bytes(&bad),
            Err(Error::Format(_))
        ));
        let mut bad = bytes.clone();
        bad[4] = 2;
        assert!(matches!(
            Checkpoint::from_bytes(&bad),
            Err(Error::Format(_))
        ));
        let mut long = bytes;
        long.push(0);
        assert!(matches!(
            Checkpoint::from_bytes(&long),
            Err(Error::Format(_))
        ));
    }
}
