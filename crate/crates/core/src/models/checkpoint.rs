//! Binary checkpoint layout, all integers and floats little-endian:
//!
//! ```text
//! offset  size  field
//! 0       4     magic "CRCK"
//! 4       4     u32 format version (1)
//! 8       1     kind: 1 = MLP, 2 = RBM
//! 9       1     activation: 0 = sigmoid, 1 = relu (RBM: 0)
//! 10      1     head: 0 = softmax classifier, 1 = reconstruction (RBM: 0)
//! 11      1     reserved, 0
//! 12      4     u32 epoch at which the snapshot was taken
//! 16      4     u32 number of dims n
//! 20      4n    u32 dims
//! ...           f64 parameters
//! ```
//!
//! MLP parameters: for each layer `l`, the `dims[l] × dims[l+1]` weight matrix
//! row-major, then its `dims[l+1]` biases. RBM (`dims = [n_visible,
//! n_hidden]`): weights `n_visible × n_hidden` row-major, visible biases,
//! hidden biases.

use super::{Activation, MlpModel, ModelError, OutputHead, RbmModel};
use crate::linalg::Matrix;
use std::path::Path;

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"CRCK";

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Mlp(MlpModel),
    Rbm(RbmModel),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub epoch: usize,
    pub model: Model,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        let (kind, act, head, dims): (u8, u8, u8, Vec<usize>) = match &self.model {
            Model::Mlp(m) => (
                1,
                match m.activation {
                    Activation::Sigmoid => 0,
                    Activation::Relu => 1,
                },
                match m.output_head {
                    OutputHead::SoftmaxClassifier => 0,
                    OutputHead::Reconstruction => 1,
                },
                m.layer_dims.clone(),
            ),
            Model::Rbm(r) => (2, 0, 0, vec![r.n_visible, r.n_hidden]),
        };
        out.extend_from_slice(&[kind, act, head, 0]);
        out.extend_from_slice(&(self.epoch as u32).to_le_bytes());
        out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
        for d in &dims {
            out.extend_from_slice(&(*d as u32).to_le_bytes());
        }
        let mut put = |vals: &[f64]| {
            for v in vals {
                out.extend_from_slice(&v.to_le_bytes());
            }
        };
        match &self.model {
            Model::Mlp(m) => {
                for (w, b) in m.weights.iter().zip(&m.biases) {
                    put(w.as_slice());
                    put(b);
                }
            }
            Model::Rbm(r) => {
                put(r.weights.as_slice());
                put(&r.visible_bias);
                put(&r.hidden_bias);
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Checkpoint, ModelError> {
        let mut rd = Reader { bytes, pos: 0 };
        if rd.take(4)? != MAGIC {
            return Err(ModelError::Checkpoint("bad magic".into()));
        }
        let version = rd.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(ModelError::Checkpoint(format!(
                "unsupported version {version}"
            )));
        }
        let flags = rd.take(4)?;
        let (kind, act, head) = (flags[0], flags[1], flags[2]);
        let epoch = rd.u32()? as usize;
        let n_dims = rd.u32()? as usize;
        if n_dims > 1024 {
            return Err(ModelError::Checkpoint(format!(
                "implausible layer count {n_dims}"
            )));
        }
        let dims = (0..n_dims)
            .map(|_| rd.u32().map(|d| d as usize))
            .collect::<Result<Vec<_>, _>>()?;
        let model = match kind {
            1 => {
                let activation = match act {
                    0 => Activation::Sigmoid,
                    1 => Activation::Relu,
                    a => return Err(ModelError::Checkpoint(format!("unknown activation {a}"))),
                };
                let output_head = match head {
                    0 => OutputHead::SoftmaxClassifier,
                    1 => OutputHead::Reconstruction,
                    h => return Err(ModelError::Checkpoint(format!("unknown head {h}"))),
                };
                let mut m = MlpModel::zeros(dims.clone(), activation, output_head)?;
                for l in 0..dims.len() - 1 {
                    m.weights[l] =
                        Matrix::from_vec(dims[l], dims[l + 1], rd.f64s(dims[l] * dims[l + 1])?)?;
                    m.biases[l] = rd.f64s(dims[l + 1])?;
                }
                Model::Mlp(m)
            }
            2 => {
                if dims.len() != 2 {
                    return Err(ModelError::Checkpoint("RBM needs exactly two dims".into()));
                }
                let (nv, nh) = (dims[0], dims[1]);
                Model::Rbm(RbmModel {
                    n_visible: nv,
                    n_hidden: nh,
                    weights: Matrix::from_vec(nv, nh, rd.f64s(nv * nh)?)?,
                    visible_bias: rd.f64s(nv)?,
                    hidden_bias: rd.f64s(nh)?,
                })
            }
            k => return Err(ModelError::Checkpoint(format!("unknown model kind {k}"))),
        };
        if rd.pos != bytes.len() {
            return Err(ModelError::Checkpoint(format!(
                "{} trailing bytes",
                bytes.len() - rd.pos
            )));
        }
        Ok(Checkpoint { epoch, model })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| ModelError::Checkpoint("truncated".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, ModelError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, ModelError> {
        let raw = self.take(
            n.checked_mul(8)
                .ok_or_else(|| ModelError::Checkpoint("overflow".into()))?,
        )?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn write_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<(), ModelError> {
    std::fs::write(path, ckpt.to_bytes())?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint, ModelError> {
    Checkpoint::from_bytes(&std::fs::read(path)?)
}
