//! Versioned stack container.
//!
//! ```text
//! b"MLDBN1" | u64 header_len | header JSON | per block: u64 len | block bytes
//! ```
//!
//! RBM blocks are `MLRBM1` streams. The label-layer block is
//! `u64 rows | u64 cols | f64[rows*cols] W | f64[cols] bias`, little-endian.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{DbnStack, OutputLayer};
use crate::error::{Error, Result};
use crate::rbm::Rbm;

pub const DBN_MAGIC: &[u8; 6] = b"MLDBN1";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContainerHeader {
    pub format_version: u32,
    /// Input width followed by each hidden width.
    pub layer_dims: Vec<usize>,
    pub n_labels: Option<usize>,
    /// `"rbm"` or `"output"`, in storage order.
    pub blocks: Vec<String>,
}

struct Cursor<'a> {
    bytes: &'a [u8],
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() < n {
            return Err(Error::Serde("truncated DBN container".into()));
        }
        let (head, tail) = self.bytes.split_at(n);
        self.bytes = tail;
        Ok(head)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        Ok(self
            .take(n * 8)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

impl DbnStack {
    pub fn header(&self) -> ContainerHeader {
        let mut layer_dims = vec![self.input_dim()];
        layer_dims.extend(self.layers.iter().map(Rbm::n_hidden));
        let mut blocks = vec!["rbm".to_string(); self.layers.len()];
        if self.output.is_some() {
            blocks.push("output".into());
        }
        ContainerHeader {
            format_version: FORMAT_VERSION,
            layer_dims,
            n_labels: self.n_labels(),
            blocks,
        }
    }

    pub fn to_container_bytes(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_vec(&self.header())?;
        let mut out = Vec::new();
        out.extend_from_slice(DBN_MAGIC);
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for rbm in &self.layers {
            let b = rbm.to_bytes();
            out.extend_from_slice(&(b.len() as u64).to_le_bytes());
            out.extend_from_slice(&b);
        }
        if let Some(o) = &self.output {
            let mut b = Vec::new();
            b.extend_from_slice(&(o.weights.nrows() as u64).to_le_bytes());
            b.extend_from_slice(&(o.weights.ncols() as u64).to_le_bytes());
            for v in o.weights.iter().chain(&o.bias) {
                b.extend_from_slice(&v.to_le_bytes());
            }
            out.extend_from_slice(&(b.len() as u64).to_le_bytes());
            out.extend_from_slice(&b);
        }
        Ok(out)
    }

    /// Read only the JSON header of a container.
    pub fn read_header(bytes: &[u8]) -> Result<ContainerHeader> {
        let mut cur = Cursor { bytes };
        if cur.take(6)? != DBN_MAGIC {
            return Err(Error::Serde("not an MLDBN1 container".into()));
        }
        let len = cur.u64()? as usize;
        let header: ContainerHeader = serde_json::from_slice(cur.take(len)?)?;
        if header.format_version != FORMAT_VERSION {
            return Err(Error::Serde(format!(
                "unsupported container version {}",
                header.format_version
            )));
        }
        Ok(header)
    }

    pub fn from_container_bytes(bytes: &[u8]) -> Result<Self> {
        let header = Self::read_header(bytes)?;
        let mut cur = Cursor { bytes };
        cur.take(6)?;
        let len = cur.u64()? as usize;
        cur.take(len)?;
        let mut layers = Vec::new();
        let mut output = None;
        for kind in &header.blocks {
            let n = cur.u64()? as usize;
            let mut block = Cursor {
                bytes: cur.take(n)?,
            };
            match kind.as_str() {
                "rbm" => layers.push(Rbm::from_bytes(block.bytes)?),
                "output" => {
                    let rows = block.u64()? as usize;
                    let cols = block.u64()? as usize;
                    let weights = Array2::from_shape_vec((rows, cols), block.f64s(rows * cols)?)
                        .map_err(|e| Error::Serde(e.to_string()))?;
                    let bias = Array1::from(block.f64s(cols)?);
                    output = Some(OutputLayer { weights, bias });
                }
                other => return Err(Error::Serde(format!("unknown block kind `{other}`"))),
            }
        }
        DbnStack::new(layers, output)
    }
}
