//! Model files, field artifacts and content hashes.
//!
//! Model files are JSON with 1-based velocity indices. Fields are written
//! as CSV (`x,y,component,value`, one row per cell and component) with a
//! JSON sidecar carrying the grid, hashes and mass.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{DvmError, Result};
use crate::fields::{Field, Grid, GridSpec};
use crate::model::{CollisionRule, VelocityModel};
use crate::Vec2;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of any serializable value through its JSON encoding.
pub fn json_hash<T: Serialize>(value: &T) -> Result<String> {
    Ok(sha256_hex(&serde_json::to_vec(value)?))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleEntry {
    pub i: usize,
    pub j: usize,
    pub l: usize,
    pub m: usize,
    pub gamma: f64,
}

/// On-disk model description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub velocities: Vec<[f64; 2]>,
    pub rules: Vec<RuleEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positive_direction: Option<[f64; 2]>,
}

impl ModelFile {
    pub fn from_model(model: &VelocityModel) -> Self {
        Self {
            velocities: model.velocities().iter().map(|v| [v.x, v.y]).collect(),
            rules: model
                .rules()
                .iter()
                .map(|r| RuleEntry { i: r.i + 1, j: r.j + 1, l: r.l + 1, m: r.m + 1, gamma: r.gamma })
                .collect(),
            positive_direction: model.positive_direction().map(|n| [n.x, n.y]),
        }
    }

    pub fn to_model(&self) -> Result<VelocityModel> {
        let rules = self
            .rules
            .iter()
            .enumerate()
            .map(|(k, r)| {
                if [r.i, r.j, r.l, r.m].contains(&0) {
                    return Err(DvmError::Structural(format!("rule {} uses index 0; indices are 1-based", k + 1)));
                }
                Ok(CollisionRule::new(r.i - 1, r.j - 1, r.l - 1, r.m - 1, r.gamma))
            })
            .collect::<Result<Vec<_>>>()?;
        VelocityModel::new(
            self.velocities.iter().map(|v| Vec2::new(v[0], v[1])).collect(),
            rules,
            self.positive_direction.map(|n| Vec2::new(n[0], n[1])),
        )
    }
}

pub fn parse_model(text: &str) -> Result<VelocityModel> {
    serde_json::from_str::<ModelFile>(text)?.to_model()
}

pub fn read_model(path: &Path) -> Result<VelocityModel> {
    parse_model(&fs::read_to_string(path)?)
}

pub fn model_to_json(model: &VelocityModel) -> Result<String> {
    Ok(serde_json::to_string_pretty(&ModelFile::from_model(model))?)
}

pub fn write_model(path: &Path, model: &VelocityModel) -> Result<()> {
    fs::write(path, model_to_json(model)?)?;
    Ok(())
}

/// Hash of the canonical model description.
pub fn model_hash(model: &VelocityModel) -> Result<String> {
    json_hash(&ModelFile::from_model(model))
}

/// Sidecar of a field CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldMeta {
    pub grid: GridSpec,
    pub p: usize,
    pub model_hash: String,
    /// Hash of the run configuration, when produced by a run.
    #[serde(default)]
    pub config_hash: Option<String>,
    /// Hash of the CSV bytes.
    pub data_hash: String,
    pub mass: f64,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub k: Option<f64>,
    #[serde(default)]
    pub label: String,
}

pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

fn field_csv(field: &Field) -> Result<Vec<u8>> {
    let grid = field.grid();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["x", "y", "component", "value"]).map_err(|e| DvmError::Parse(e.to_string()))?;
    for c in 0..grid.len() {
        let z = grid.center(c);
        for i in 0..field.p() {
            w.write_record([z.x.to_string(), z.y.to_string(), (i + 1).to_string(), field.get(i, c).to_string()])
                .map_err(|e| DvmError::Parse(e.to_string()))?;
        }
    }
    w.into_inner().map_err(|e| DvmError::Parse(e.to_string()))
}

/// Writes the CSV and its sidecar; fills in `data_hash`, `mass`, `grid` and `p`.
pub fn write_field(path: &Path, field: &Field, meta: FieldMeta) -> Result<FieldMeta> {
    let bytes = field_csv(field)?;
    let meta = FieldMeta {
        grid: field.grid().spec(),
        p: field.p(),
        data_hash: sha256_hex(&bytes),
        mass: field.mass(),
        ..meta
    };
    fs::write(path, &bytes)?;
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&meta)?)?;
    Ok(meta)
}

pub fn read_meta(path: &Path) -> Result<FieldMeta> {
    Ok(serde_json::from_str(&fs::read_to_string(sidecar_path(path))?)?)
}

/// Reads a field written by [`write_field`], rebuilding its grid from the
/// sidecar and checking the data hash.
pub fn read_field(path: &Path) -> Result<(Field, FieldMeta)> {
    let meta = read_meta(path)?;
    let bytes = fs::read(path)?;
    if sha256_hex(&bytes) != meta.data_hash {
        return Err(DvmError::Parse(format!("{} does not match the hash in its sidecar", path.display())));
    }
    let grid = Arc::new(Grid::new(&meta.grid.domain.build()?, meta.grid.n));
    let field = parse_field_csv(&bytes, grid, meta.p)?;
    Ok((field, meta))
}

/// Parses `x,y,component,value` rows onto `grid`; rows are matched to the
/// nearest cell centre.
pub fn parse_field_csv(bytes: &[u8], grid: Arc<Grid>, p: usize) -> Result<Field> {
    let mut data = vec![f64::NAN; p * grid.len()];
    let n = grid.len();
    let mut r = csv::Reader::from_reader(bytes);
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = || DvmError::Parse(format!("field row {}: expected x,y,component,value", line + 2));
        if rec.len() != 4 {
            return Err(bad());
        }
        let num = |k: usize| rec[k].trim().parse::<f64>().map_err(|_| bad());
        let z = Vec2::new(num(0)?, num(1)?);
        let comp: usize = rec[2].trim().parse().map_err(|_| bad())?;
        if comp == 0 || comp > p {
            return Err(DvmError::Parse(format!("field row {}: component {comp} out of 1..={p}", line + 2)));
        }
        let c = grid.owner_of(z);
        if (grid.center(c) - z).norm() > 1e-9 * grid.h() + 1e-12 {
            return Err(DvmError::Parse(format!("field row {}: ({}, {}) is not a cell centre", line + 2, z.x, z.y)));
        }
        let value = num(3)?;
        if !(value >= 0.0) || !value.is_finite() {
            return Err(DvmError::Parse(format!("field row {}: value {value} must be finite and ≥ 0", line + 2)));
        }
        data[(comp - 1) * n + c] = value;
    }
    if data.iter().any(|x| x.is_nan()) {
        return Err(DvmError::Parse("field file does not cover every cell and component".into()));
    }
    Ok(Field::from_data(grid, p, data))
}
