use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{Activation, Dense, ModelError, ModelKind, ModelParams};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct LayerFile {
    /// One inner array per input unit.
    w: Vec<Vec<f64>>,
    b: Vec<f64>,
    act: Activation,
}

#[derive(Serialize, Deserialize)]
struct ParamsFile {
    version: u32,
    kind: ModelKind,
    d: usize,
    embeddings: Vec<Vec<f64>>,
    layers: Vec<LayerFile>,
}

fn to_rows(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn from_rows(rows: Vec<Vec<f64>>, what: &str) -> Result<Array2<f64>, ModelError> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(ModelError::Malformed(format!("{what} is ragged")));
    }
    let n = rows.len();
    Array2::from_shape_vec((n, cols), rows.into_iter().flatten().collect())
        .map_err(|e| ModelError::Malformed(format!("{what}: {e}")))
}

impl ModelParams {
    pub fn to_json(&self) -> Result<String, ModelError> {
        let file = ParamsFile {
            version: self.version,
            kind: self.kind,
            d: self.d,
            embeddings: to_rows(&self.embeddings),
            layers: self
                .layers
                .iter()
                .map(|l| LayerFile { w: to_rows(&l.w), b: l.b.to_vec(), act: l.act })
                .collect(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<ModelParams, ModelError> {
        let raw: serde_json::Value = serde_json::from_str(text)?;
        let found = raw.get("version").and_then(serde_json::Value::as_u64);
        if found != Some(u64::from(FORMAT_VERSION)) {
            return Err(ModelError::Version { found: found.unwrap_or(0) as u32 });
        }
        let file: ParamsFile = serde_json::from_value(raw)?;
        let mut layers = Vec::with_capacity(file.layers.len());
        for (i, l) in file.layers.into_iter().enumerate() {
            layers.push(Dense { w: from_rows(l.w, &format!("layer {i} weights"))?, b: Array1::from(l.b), act: l.act });
        }
        let params = ModelParams {
            kind: file.kind,
            d: file.d,
            embeddings: from_rows(file.embeddings, "embeddings")?,
            layers,
            version: file.version,
        };
        params.check()?;
        Ok(params)
    }
}

pub fn save_params(params: &ModelParams, path: impl AsRef<Path>) -> Result<(), ModelError> {
    fs::write(path, params.to_json()?)?;
    Ok(())
}

pub fn load_params(path: impl AsRef<Path>) -> Result<ModelParams, ModelError> {
    ModelParams::from_json(&fs::read_to_string(path)?)
}
