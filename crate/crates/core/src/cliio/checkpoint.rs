//! Model checkpoints.
//!
//! Layout (all little-endian): magic `SPNW`, u16 version, u32-prefixed JSON
//! model spec, u64 seed, u64 completed epochs, u64 optimizer step, four f64
//! Adam hyper-parameters, u32 tensor count; then per tensor a u32-prefixed
//! name, u8 rank, u64 dims, and value / first moment / second moment as f32.

use std::path::Path;

use super::binfmt::{read_file, write_file, Reader, Writer};
use crate::model::{check_params, ModelSpec};
use crate::tensorcore::{AdamConfig, ParamStore, Tensor};
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"SPNW";
pub const CHECKPOINT_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub spec: ModelSpec,
    pub params: ParamStore<f32>,
    pub adam: AdamConfig,
    pub seed: u64,
    pub epoch: u64,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new(CHECKPOINT_MAGIC, CHECKPOINT_VERSION);
        w.str(&serde_json::to_string(&self.spec).expect("spec serializes"));
        w.u64(self.seed);
        w.u64(self.epoch);
        w.u64(self.params.step());
        for h in [self.adam.lr, self.adam.beta1, self.adam.beta2, self.adam.eps] {
            w.f64(h);
        }
        w.u32(self.params.len() as u32);
        for p in self.params.params() {
            w.str(&p.name);
            w.u8(p.value.rank() as u8);
            for &d in p.value.shape() {
                w.u64(d as u64);
            }
            w.f32s(p.value.data());
            w.f32s(p.m.data());
            w.f32s(p.v.data());
        }
        w.buf
    }

    pub fn from_bytes(data: &[u8], path: &Path) -> Result<Self> {
        let (mut r, _) = Reader::open(data, path, CHECKPOINT_MAGIC, &[CHECKPOINT_VERSION])?;
        let spec_json = r.str("model spec")?;
        let spec: ModelSpec =
            serde_json::from_str(&spec_json).map_err(|e| r.parse(format!("model spec: {e}")))?;
        let seed = r.u64("seed")?;
        let epoch = r.u64("epoch")?;
        let step = r.u64("optimizer step")?;
        let adam = AdamConfig {
            lr: r.f64("lr")?,
            beta1: r.f64("beta1")?,
            beta2: r.f64("beta2")?,
            eps: r.f64("eps")?,
        };
        let count = r.u32("tensor count")?;
        let mut params = ParamStore::new();
        for _ in 0..count {
            let name = r.str("tensor name")?;
            let rank = r.u8("rank")? as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(r.u64("dimension")? as usize);
            }
            let n = shape
                .iter()
                .try_fold(1usize, |a, &d| a.checked_mul(d))
                .ok_or_else(|| r.parse(format!("{name}: shape {shape:?} overflows")))?;
            let mut take = |what: &str| -> Result<Tensor<f32>> {
                Tensor::new(shape.clone(), r.f32s(n, &format!("{name} {what}"))?)
            };
            let value = take("value")?;
            let m = take("first moment")?;
            let v = take("second moment")?;
            params.insert_with_state(name, value, m, v)?;
        }
        r.finish()?;
        params.set_step(step);
        Ok(Self {
            spec,
            params,
            adam,
            seed,
            epoch,
        })
    }
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    write_file(path, &ckpt.to_bytes())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::from_bytes(&read_file(path)?, path)
}

/// Loads a checkpoint and requires it to match `expected` exactly.
pub fn load_checkpoint_for(path: &Path, expected: &ModelSpec) -> Result<Checkpoint> {
    let ckpt = load_checkpoint(path)?;
    if &ckpt.spec != expected {
        return Err(Error::SpecMismatch(format!(
            "{} was written for {:?}, expected {:?}",
            path.display(),
            ckpt.spec,
            expected
        )));
    }
    check_params(expected, &ckpt.params)?;
    Ok(ckpt)
}
