//! Binary checkpoint layout (all integers and floats little-endian):
//!
//! ```text
//! magic        5 bytes  "ECGM1"
//! version      u32
//! mode         u8       0 dense, 1 lstm, 2 dense-lstm
//! dims         4 × u32  input_dim, kappa, nu, n_classes
//! seed         u64
//! n_models     u32
//! hash_len     u32, then config hash (UTF-8)
//! meta_len     u32, then metadata JSON (UTF-8)
//! per model:
//!   parameters f64 × n  dense W, dense b, LSTM W, LSTM b, head W
//! per model:
//!   step u64, lr f64, β₁ f64, β₂ f64, ε f64
//!   first moments  f64 × n (same order)
//!   second moments f64 × n
//! ```
//!
//! Matrices are row-major; LSTM rows are the i, f, o, c̄ gate blocks and
//! columns are input then recurrent.

use std::fs;
use std::path::Path;

use super::{ModelDims, ModelError, ModelMode, ModelParams, OptimizerState};

pub const CHECKPOINT_MAGIC: &[u8; 5] = b"ECGM1";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub mode: ModelMode,
    pub dims: ModelDims,
    pub seed: u64,
    pub config_hash: String,
    /// Free-form JSON metadata (fusion, task, backend, ...).
    pub meta: String,
    /// One model, or one per lead for decision fusion.
    pub models: Vec<ModelParams<f64>>,
    pub optimizers: Vec<OptimizerState<f64>>,
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelError> {
        if self.pos + n > self.buf.len() {
            return Err(ModelError::InvalidCheckpoint("truncated".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8, ModelError> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32, ModelError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64, ModelError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64, ModelError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn string(&mut self) -> Result<String, ModelError> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| ModelError::InvalidCheckpoint("non UTF-8 string".into()))
    }
    fn params(&mut self, p: &mut ModelParams<f64>) -> Result<(), ModelError> {
        for t in p.tensors_mut() {
            for v in t.iter_mut() {
                *v = self.f64()?;
            }
        }
        Ok(())
    }
}

fn put_params(out: &mut Vec<u8>, p: &ModelParams<f64>) {
    for t in p.tensors() {
        for v in t {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.push(self.mode.code());
        for d in [self.dims.input_dim, self.dims.kappa, self.dims.nu, self.dims.n_classes] {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&(self.models.len() as u32).to_le_bytes());
        put_str(&mut out, &self.config_hash);
        put_str(&mut out, &self.meta);
        for m in &self.models {
            put_params(&mut out, m);
        }
        for o in &self.optimizers {
            out.extend_from_slice(&o.step.to_le_bytes());
            for v in [o.lr, o.beta1, o.beta2, o.eps] {
                out.extend_from_slice(&v.to_le_bytes());
            }
            put_params(&mut out, &o.m);
            put_params(&mut out, &o.v);
        }
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self, ModelError> {
        let mut r = Reader { buf, pos: 0 };
        if r.take(5)? != CHECKPOINT_MAGIC {
            return Err(ModelError::InvalidCheckpoint("bad magic".into()));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(ModelError::InvalidCheckpoint(format!("unsupported version {version}")));
        }
        let code = r.u8()?;
        let mode = ModelMode::from_code(code)
            .ok_or_else(|| ModelError::InvalidCheckpoint(format!("unknown mode {code}")))?;
        let dims = ModelDims {
            input_dim: r.u32()? as usize,
            kappa: r.u32()? as usize,
            nu: r.u32()? as usize,
            n_classes: r.u32()? as usize,
        };
        let seed = r.u64()?;
        let n_models = r.u32()? as usize;
        let config_hash = r.string()?;
        let meta = r.string()?;
        let template = ModelParams::<f64>::zeros(mode, dims);
        if template.n_params() * n_models * 3 > buf.len() {
            return Err(ModelError::InvalidCheckpoint("truncated".into()));
        }
        let mut models = Vec::with_capacity(n_models);
        for _ in 0..n_models {
            let mut p = template.clone();
            r.params(&mut p)?;
            models.push(p);
        }
        let mut optimizers = Vec::with_capacity(n_models);
        for _ in 0..n_models {
            let step = r.u64()?;
            let (lr, beta1, beta2, eps) = (r.f64()?, r.f64()?, r.f64()?, r.f64()?);
            let mut m = template.clone();
            r.params(&mut m)?;
            let mut v = template.clone();
            r.params(&mut v)?;
            optimizers.push(OptimizerState { lr, beta1, beta2, eps, step, m, v });
        }
        if r.pos != buf.len() {
            return Err(ModelError::InvalidCheckpoint("trailing bytes".into()));
        }
        Ok(Self {
            mode,
            dims,
            seed,
            config_hash,
            meta,
            models,
            optimizers,
        })
    }

    pub fn write(&self, path: &Path) -> Result<(), ModelError> {
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, self.to_bytes()).map_err(|e| ModelError::Io(format!("{}: {e}", tmp.display())))?;
        fs::rename(&tmp, path).map_err(|e| ModelError::Io(format!("{}: {e}", path.display())))
    }

    pub fn read(path: &Path) -> Result<Self, ModelError> {
        let buf = fs::read(path).map_err(|e| ModelError::Io(format!("{}: {e}", path.display())))?;
        Self::from_bytes(&buf)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{adam_step, init_params};

    fn sample() -> Checkpoint {
        let dims = ModelDims::new(7, 4);
        let mut p = init_params::<f64>(ModelMode::Joint, dims, 5);
        let mut g = p.zeros_like();
        let n = g.n_params();
        g.load_flat(&(0..n).map(|k| (k as f64).cos()).collect::<Vec<_>>()).unwrap();
        let mut o = OptimizerState::new(&p);
        adam_step(&mut p, &g, &mut o).unwrap();
        Checkpoint {
            mode: ModelMode::Joint,
            dims,
            seed: 5,
            config_hash: "abc123".into(),
            meta: r#"{"fusion":"feature_concat"}"#.into(),
            models: vec![p],
            optimizers: vec![o],
        }
    }

    #[test]
    fn round_trip() {
        let c = sample();
        let bytes = c.to_bytes();
        assert_eq!(&bytes[..5], b"ECGM1");
        assert_eq!(Checkpoint::from_bytes(&bytes).unwrap(), c);
    }

    #[test]
    fn rejects_corruption() {
        let c = sample();
        let mut bytes = c.to_bytes();
        bytes[0] = b'X';
        assert!(Checkpoint::from_bytes(&bytes).is_err());
        let bytes = c.to_bytes();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        let mut bytes = c.to_bytes();
        bytes.push(0);
        assert!(Checkpoint::from_bytes(&bytes).is_err());
    }
}
