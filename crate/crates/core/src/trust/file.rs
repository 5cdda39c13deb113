use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{FilteringStrategy, TrustModel};
use crate::density::HighDensitySet;
use crate::error::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Serialized form of a [`TrustModel`]. Floats round-trip exactly through
/// JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub alpha: f64,
    pub k: usize,
    pub strategy: FilteringStrategy,
    pub dim: usize,
    pub classes: Vec<ClassRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRecord {
    /// Every training point of the class, row-major.
    pub points: Vec<Vec<f64>>,
    /// Rows of `points` kept by filtering.
    pub kept: Vec<usize>,
    pub density: Option<HighDensitySet>,
    #[serde(default)]
    pub warning: Option<String>,
}

impl TrustModel {
    pub fn to_file(&self) -> ModelFile {
        ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            alpha: self.alpha,
            k: self.k,
            strategy: self.strategy,
            dim: self.dim,
            classes: self
                .classes
                .iter()
                .map(|c| ClassRecord {
                    points: c.points.outer_iter().map(|r| r.to_vec()).collect(),
                    kept: c.kept.clone(),
                    density: c.density.clone(),
                    warning: c.warning.clone(),
                })
                .collect(),
        }
    }

    pub fn from_file(file: ModelFile) -> Result<Self> {
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::ModelFormat(format!(
                "format version {} (expected {MODEL_FORMAT_VERSION})",
                file.format_version
            )));
        }
        if file.classes.len() < 2 {
            return Err(Error::TooFewClasses {
                found: file.classes.len(),
            });
        }
        let mut parts = Vec::with_capacity(file.classes.len());
        for (class, rec) in file.classes.into_iter().enumerate() {
            let rows = rec.points.len();
            if rows == 0 || rec.kept.is_empty() {
                return Err(Error::EmptyClass { class });
            }
            if rec.points.iter().any(|p| p.len() != file.dim) {
                return Err(Error::ModelFormat(format!("class {class}: ragged point rows")));
            }
            if rec.kept.windows(2).any(|w| w[0] >= w[1]) || rec.kept.iter().any(|&i| i >= rows) {
                return Err(Error::ModelFormat(format!("class {class}: invalid kept indices")));
            }
            let flat: Vec<f64> = rec.points.into_iter().flatten().collect();
            let points = Array2::from_shape_vec((rows, file.dim), flat)
                .map_err(|e| Error::ModelFormat(e.to_string()))?;
            parts.push((points, rec.kept, rec.density, rec.warning));
        }
        TrustModel::from_parts(file.alpha, file.k, file.strategy, file.dim, parts)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_file())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_file(serde_json::from_str(s)?)
    }
}
