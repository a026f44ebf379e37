//! JSON and `MLRBM1` binary persistence.
//!
//! Binary layout (all little-endian):
//!
//! ```text
//! b"MLRBM1" | u64 d | u64 u | u64 seed | f64[d*u] W (row-major) | f64[d] b_vis | f64[u] b_hid
//! ```

use std::io::{Read, Write};

use ndarray::{Array1, Array2};

use super::Rbm;
use crate::error::{Error, Result};

pub const RBM_MAGIC: &[u8; 6] = b"MLRBM1";

fn io_err(e: std::io::Error) -> Error {
    Error::Serde(format!("binary RBM stream: {e}"))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(io_err)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64s(r: &mut impl Read, n: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; n * 8];
    r.read_exact(&mut buf).map_err(io_err)?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

impl Rbm {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let rbm: Rbm = serde_json::from_str(s)?;
        Rbm::from_parts(
            rbm.weights.clone(),
            rbm.visible_bias.clone(),
            rbm.hidden_bias.clone(),
        )?;
        Ok(rbm)
    }

    pub fn write_binary(&self, w: &mut impl Write) -> Result<()> {
        let (d, u) = (self.n_visible(), self.n_hidden());
        let mut buf = Vec::with_capacity(6 + 24 + 8 * (d * u + d + u));
        buf.extend_from_slice(RBM_MAGIC);
        for v in [d as u64, u as u64, self.seed] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for v in self
            .weights
            .iter()
            .chain(&self.visible_bias)
            .chain(&self.hidden_bias)
        {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf).map_err(io_err)
    }

    pub fn read_binary(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 6];
        r.read_exact(&mut magic).map_err(io_err)?;
        if &magic != RBM_MAGIC {
            return Err(Error::Serde("not an MLRBM1 stream".into()));
        }
        let d = read_u64(r)? as usize;
        let u = read_u64(r)? as usize;
        let seed = read_u64(r)?;
        let weights = Array2::from_shape_vec((d, u), read_f64s(r, d * u)?)
            .map_err(|e| Error::Serde(e.to_string()))?;
        let visible_bias = Array1::from(read_f64s(r, d)?);
        let hidden_bias = Array1::from(read_f64s(r, u)?);
        let mut rbm = Rbm::from_parts(weights, visible_bias, hidden_bias)?;
        rbm.seed = seed;
        Ok(rbm)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut v = Vec::new();
        self.write_binary(&mut v)
            .expect("writing to a Vec cannot fail");
        v
    }

    pub fn from_bytes(mut bytes: &[u8]) -> Result<Self> {
        Self::read_binary(&mut bytes)
    }
}
