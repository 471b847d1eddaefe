//! Binary checkpoint: `RGCK` magic, `u32` format version, `u64` header
//! length, a JSON header, then every weight array as little-endian `f64`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Model, ModelSpec};
use crate::data::FeatureScaler;
use crate::error::{Error, Result};
use crate::graph::GraphFile;
use crate::numerics::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"RGCK";
pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArrayEntry {
    name: String,
    shape: Vec<usize>,
    /// Offset in `f64` elements from the start of the data section.
    offset: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format_version: u32,
    spec: ModelSpec,
    scaler: FeatureScaler,
    graph: GraphFile,
    arrays: Vec<ArrayEntry>,
}

/// A trained model together with the scaling constants and graph it was
/// trained against.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelCheckpoint {
    pub spec: ModelSpec,
    pub scaler: FeatureScaler,
    pub graph: GraphFile,
    pub weights: Vec<(String, Tensor)>,
}

impl ModelCheckpoint {
    pub fn from_model(model: &Model, scaler: &FeatureScaler, graph: GraphFile) -> Self {
        ModelCheckpoint {
            spec: model.spec().clone(),
            scaler: scaler.clone(),
            graph,
            weights: model
                .params()
                .iter()
                .map(|p| (p.name.clone(), p.value.clone()))
                .collect(),
        }
    }

    /// Rebuilds the model and overwrites every parameter with the stored
    /// weights. The stored names and shapes must match the layout exactly.
    pub fn to_model(&self) -> Result<Model> {
        let mut model = Model::new(self.spec.clone())?;
        let stored: BTreeMap<&str, &Tensor> = self.weights.iter().map(|(n, t)| (n.as_str(), t)).collect();
        if stored.len() != self.weights.len() || stored.len() != model.params().len() {
            return Err(Error::Checkpoint(format!(
                "checkpoint has {} arrays, model expects {}",
                self.weights.len(),
                model.params().len()
            )));
        }
        for p in model.params_mut().iter_mut() {
            let t = stored
                .get(p.name.as_str())
                .ok_or_else(|| Error::Checkpoint(format!("missing array {}", p.name)))?;
            if t.shape() != p.value.shape() {
                return Err(Error::Checkpoint(format!(
                    "array {} has shape {:?}, expected {:?}",
                    p.name,
                    t.shape(),
                    p.value.shape()
                )));
            }
            p.value = (*t).clone();
        }
        Ok(model)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut arrays = Vec::with_capacity(self.weights.len());
        let mut offset = 0;
        for (name, t) in &self.weights {
            arrays.push(ArrayEntry {
                name: name.clone(),
                shape: t.shape().to_vec(),
                offset,
            });
            offset += t.len();
        }
        let header = Header {
            format_version: CHECKPOINT_FORMAT_VERSION,
            spec: self.spec.clone(),
            scaler: self.scaler.clone(),
            graph: self.graph.clone(),
            arrays,
        };
        let json = serde_json::to_vec(&header)?;
        let mut out = Vec::with_capacity(16 + json.len() + offset * 8);
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for (_, t) in &self.weights {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |msg: &str| Error::Checkpoint(msg.to_owned());
        if bytes.len() < 16 || &bytes[..4] != CHECKPOINT_MAGIC {
            return Err(bad("not a checkpoint file"));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != CHECKPOINT_FORMAT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported checkpoint version {version}")));
        }
        let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let data_start = 16usize
            .checked_add(header_len)
            .filter(|&end| end <= bytes.len())
            .ok_or_else(|| bad("truncated header"))?;
        let header: Header = serde_json::from_slice(&bytes[16..data_start])?;
        if header.format_version != version {
            return Err(bad("header and preamble disagree on the format version"));
        }
        let data = &bytes[data_start..];
        if !data.len().is_multiple_of(8) {
            return Err(bad("data section is not a whole number of f64 values"));
        }
        let values: Vec<f64> = data
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let mut weights = Vec::with_capacity(header.arrays.len());
        for entry in header.arrays {
            let len: usize = entry.shape.iter().product();
            let slice = entry
                .offset
                .checked_add(len)
                .and_then(|end| values.get(entry.offset..end))
                .ok_or_else(|| Error::Checkpoint(format!("array {} out of bounds", entry.name)))?;
            weights.push((entry.name, Tensor::new(entry.shape, slice.to_vec())?));
        }
        Ok(ModelCheckpoint {
            spec: header.spec,
            scaler: header.scaler,
            graph: header.graph,
            weights,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{decompose_regional, Strategy};
    use crate::models::tests::toy_graph;
    use crate::models::{Architecture, GraphContext};

    fn checkpoint() -> (ModelCheckpoint, GraphContext) {
        let g = toy_graph();
        let p = decompose_regional(&g).unwrap();
        let ctx = GraphContext::new(&g, Some(&p)).unwrap();
        let spec = ModelSpec::new(Architecture::RegTGCN, 2, vec![1, 3], 11)
            .with_hidden(4)
            .with_regions_from(&ctx);
        let model = Model::new(spec).unwrap();
        let file = GraphFile::new(Strategy::Regional, 40.0, &g, Some(&p));
        (
            ModelCheckpoint::from_model(&model, &FeatureScaler::identity(), file),
            ctx,
        )
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let (ck, ctx) = checkpoint();
        let bytes = ck.to_bytes().unwrap();
        let back = ModelCheckpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, ck);
        let x = vec![Tensor::filled(&[4, 8], 0.3), Tensor::filled(&[4, 8], 0.7)];
        let a = ck.to_model().unwrap().predict(&ctx, &x).unwrap();
        let b = back.to_model().unwrap().predict(&ctx, &x).unwrap();
        assert_eq!(
            a.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let (ck, _) = checkpoint();
        let bytes = ck.to_bytes().unwrap();
        assert!(ModelCheckpoint::from_bytes(&bytes[..10]).is_err());
        assert!(ModelCheckpoint::from_bytes(&bytes[..bytes.len() - 8]).is_err());
        let mut wrong_magic = bytes.clone();
        wrong_magic[0] = b'X';
        assert!(ModelCheckpoint::from_bytes(&wrong_magic).is_err());
        let mut wrong_version = bytes;
        wrong_version[4] = 9;
        assert!(matches!(
            ModelCheckpoint::from_bytes(&wrong_version),
            Err(Error::Checkpoint(_))
        ));
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let (mut ck, _) = checkpoint();
        ck.weights[0].1 = Tensor::zeros(&[1]);
        assert!(ck.to_model().is_err());
        let (mut ck, _) = checkpoint();
        ck.weights.pop();
        assert!(ck.to_model().is_err());
    }
}
