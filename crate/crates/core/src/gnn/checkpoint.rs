//! Binary checkpoint format.
//!
//! ```text
//! "ZGNN" | u32 version | u32 tensor count
//! per tensor: u32 name len | name | u32 rank | u64 dims.. | f64 data.. | u32 crc32
//! ```
//!
//! All integers and floats are little-endian. The CRC covers the tensor
//! record from the name length through the data.

use std::collections::HashMap;
use std::path::Path;

use super::params::{Hyper, ModelParams, Weights};
use super::train::AdamState;
use super::ModelError;
use crate::tensor::Matrix;

pub const MAGIC: &[u8; 4] = b"ZGNN";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub adam: Option<AdamState>,
}

fn put_tensor(out: &mut Vec<u8>, name: &str, shape: &[usize], data: &[f64]) {
    let start = out.len();
    out.extend((name.len() as u32).to_le_bytes());
    out.extend(name.as_bytes());
    out.extend((shape.len() as u32).to_le_bytes());
    for &d in shape {
        out.extend((d as u64).to_le_bytes());
    }
    for x in data {
        out.extend(x.to_le_bytes());
    }
    let crc = crc32fast::hash(&out[start..]);
    out.extend(crc.to_le_bytes());
}

pub fn encode(params: &ModelParams, adam: Option<&AdamState>) -> Vec<u8> {
    let mut body = Vec::new();
    let mut count = 0u32;
    let mut put = |name: &str, shape: &[usize], data: &[f64]| {
        put_tensor(&mut body, name, shape, data);
        count += 1;
    };
    let h = params.hyper;
    put(
        "meta.hyper",
        &[3],
        &[h.margin, h.learning_rate, h.weight_decay],
    );
    put("meta.steps", &[1], &[params.steps as f64]);
    let names = Weights::names();
    for (name, m) in names.iter().zip(params.weights.tensors()) {
        put(name, &[m.rows(), m.cols()], m.data());
    }
    if let Some(a) = adam {
        put("adam.step", &[1], &[a.step as f64]);
        for (name, m) in names.iter().zip(a.m.tensors()) {
            put(&format!("adam.m.{name}"), &[m.rows(), m.cols()], m.data());
        }
        for (name, m) in names.iter().zip(a.v.tensors()) {
            put(&format!("adam.v.{name}"), &[m.rows(), m.cols()], m.data());
        }
    }
    let mut out = Vec::with_capacity(body.len() + 12);
    out.extend(MAGIC);
    out.extend(VERSION.to_le_bytes());
    out.extend(count.to_le_bytes());
    out.extend(body);
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelError> {
        if self.buf.len() - self.pos < n {
            return Err(ModelError::CorruptFile("unexpected end of file".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, ModelError> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64, ModelError> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
}

pub fn decode(buf: &[u8]) -> Result<Checkpoint, ModelError> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(4).ok() != Some(MAGIC.as_slice()) {
        return Err(ModelError::CorruptFile("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(ModelError::VersionMismatch {
            found: version,
            expected: VERSION,
        });
    }
    let count = r.u32()?;
    let mut tensors: HashMap<String, Matrix> = HashMap::new();
    for _ in 0..count {
        let start = r.pos;
        let name_len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| ModelError::CorruptFile("tensor name is not UTF-8".into()))?
            .to_string();
        let rank = r.u32()? as usize;
        if rank == 0 || rank > 2 {
            return Err(ModelError::CorruptFile(format!(
                "{name}: unsupported rank {rank}"
            )));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u64()? as usize);
        }
        let n = shape
            .iter()
            .try_fold(1usize, |a, &b| a.checked_mul(b))
            .filter(|&n| n <= (buf.len() - r.pos) / 8)
            .ok_or_else(|| ModelError::CorruptFile(format!("{name}: tensor larger than file")))?;
        let raw = r.take(n * 8)?;
        let data: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let end = r.pos;
        let crc = r.u32()?;
        if crc != crc32fast::hash(&buf[start..end]) {
            return Err(ModelError::CorruptFile(format!(
                "{name}: checksum mismatch"
            )));
        }
        let (rows, cols) = if rank == 1 {
            (1, shape[0])
        } else {
            (shape[0], shape[1])
        };
        tensors.insert(name, Matrix::from_vec(rows, cols, data));
    }
    if r.pos != buf.len() {
        return Err(ModelError::CorruptFile("trailing bytes".into()));
    }

    let mut take = |name: &str| {
        tensors
            .remove(name)
            .ok_or_else(|| ModelError::CorruptFile(format!("missing tensor {name}")))
    };
    let hyper = take("meta.hyper")?;
    let steps = take("meta.steps")?;
    if hyper.data().len() != 3 || steps.data().len() != 1 {
        return Err(ModelError::CorruptFile("bad metadata".into()));
    }
    let hyper = Hyper {
        margin: hyper.data()[0],
        learning_rate: hyper.data()[1],
        weight_decay: hyper.data()[2],
    };
    let names = Weights::names();
    let read_weights = |prefix: &str, take: &mut dyn FnMut(&str) -> Result<Matrix, ModelError>| {
        let mut mats = Vec::with_capacity(names.len());
        for n in &names {
            mats.push(take(&format!("{prefix}{n}"))?);
        }
        weights_from(mats)
    };
    let weights = read_weights("", &mut take)?;
    let adam = match take("adam.step") {
        Ok(step) => {
            let m = read_weights("adam.m.", &mut take)?;
            let v = read_weights("adam.v.", &mut take)?;
            Some(AdamState {
                step: step.data()[0] as u64,
                m,
                v,
            })
        }
        Err(_) => None,
    };
    Ok(Checkpoint {
        params: ModelParams {
            weights,
            hyper,
            steps: steps.data()[0] as u64,
        },
        adam,
    })
}

fn weights_from(mats: Vec<Matrix>) -> Result<Weights, ModelError> {
    let d = mats.last().map_or(0, |m| m.rows());
    let dims = super::params::FeatureDims {
        user: mats[0].rows(),
        listing: mats[1].rows(),
        city: mats[2].rows(),
    };
    let mut w = Weights::zeros(dims, d);
    for (slot, m) in w.tensors_mut().into_iter().zip(mats) {
        if slot.shape() != m.shape() {
            return Err(ModelError::CorruptFile(format!(
                "tensor shape {:?} does not fit expected {:?}",
                m.shape(),
                slot.shape()
            )));
        }
        *slot = m;
    }
    Ok(w)
}

pub fn save_checkpoint(
    path: &Path,
    params: &ModelParams,
    adam: Option<&AdamState>,
) -> Result<(), ModelError> {
    std::fs::write(path, encode(params, adam))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, ModelError> {
    decode(&std::fs::read(path)?)
}

/// Content identifier of a checkpoint file: the first 8 bytes of its
/// SHA-256, hex. A whole-file CRC32 would be constant here, since every
/// block already ends in its own CRC.
pub fn checkpoint_id(path: &Path) -> Result<String, ModelError> {
    use sha2::{Digest, Sha256};
    let digest = Sha256::digest(std::fs::read(path)?);
    Ok(digest[..8].iter().map(|b| format!("{b:02x}")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gnn::params::{init_params, FeatureDims};

    fn params() -> ModelParams {
        let dims = FeatureDims {
            user: 3,
            listing: 4,
            city: 5,
        };
        let mut p = init_params(dims, 6, Hyper::default(), 8).unwrap();
        p.steps = 12;
        p
    }

    #[test]
    fn roundtrip_bitwise() {
        let p = params();
        let mut adam = AdamState::new(&p.weights);
        adam.step = 12;
        adam.m.scorer.set(1, 1, -0.125);
        let back = decode(&encode(&p, Some(&adam))).unwrap();
        assert_eq!(back.params, p);
        assert_eq!(back.adam, Some(adam));
        let plain = decode(&encode(&p, None)).unwrap();
        assert_eq!(plain.adam, None);
    }

    #[test]
    fn version_and_corruption() {
        let p = params();
        let mut buf = encode(&p, None);
        buf[4] = 2;
        assert!(matches!(
            decode(&buf),
            Err(ModelError::VersionMismatch {
                found: 2,
                expected: 1
            })
        ));
        let mut buf = encode(&p, None);
        let n = buf.len();
        buf[n - 20] ^= 0xff;
        assert!(matches!(decode(&buf), Err(ModelError::CorruptFile(_))));
        assert!(matches!(
            decode(&buf[..n - 3]),
            Err(ModelError::CorruptFile(_))
        ));
        assert!(matches!(decode(b"NOPE"), Err(ModelError::CorruptFile(_))));
    }

    #[test]
    fn id_tracks_content() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a"), dir.path().join("b"));
        let p = params();
        save_checkpoint(&a, &p, None).unwrap();
        let mut q = p.clone();
        q.steps += 1;
        save_checkpoint(&b, &q, None).unwrap();
        assert_ne!(checkpoint_id(&a).unwrap(), checkpoint_id(&b).unwrap());
        save_checkpoint(&b, &p, None).unwrap();
        assert_eq!(checkpoint_id(&a).unwrap(), checkpoint_id(&b).unwrap());
        assert_eq!(checkpoint_id(&a).unwrap().len(), 16);
    }
}
