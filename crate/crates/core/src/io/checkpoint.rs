//! Checkpoint directory: `manifest.json` (structure, config, scalars) plus
//! `arrays.bin` (every filter and map coefficient as little-endian `f64`).

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::csc::{FeatureMaps, FilterBank, TrainConfig};
use crate::error::{Error, Result};
use crate::tensor::{Grid2, Shape};

pub const CHECKPOINT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const ARRAYS_FILE: &str = "arrays.bin";

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub format_version: u32,
    pub config: TrainConfig,
    pub gamma_used: Option<f64>,
    pub filters: FilterBank,
    /// Per-image maps keyed by image id, in dataset order.
    pub maps: Vec<(String, FeatureMaps)>,
    pub seed: u64,
    /// Free-form run notes (data source, preprocessing, ...).
    pub metadata: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct ArrayRef {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    image_id: Option<String>,
    count: usize,
    rows: usize,
    cols: usize,
    /// Offset into `arrays.bin`, in `f64` elements.
    offset: usize,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    seed: u64,
    gamma_used: Option<f64>,
    config: TrainConfig,
    metadata: BTreeMap<String, String>,
    filters: ArrayRef,
    maps: Vec<ArrayRef>,
    total_values: usize,
}

impl Checkpoint {
    pub fn new(
        config: TrainConfig,
        gamma_used: Option<f64>,
        filters: FilterBank,
        maps: Vec<(String, FeatureMaps)>,
    ) -> Self {
        let seed = config.seed;
        Checkpoint {
            format_version: CHECKPOINT_VERSION,
            config,
            gamma_used,
            filters,
            maps,
            seed,
            metadata: BTreeMap::new(),
        }
    }

    /// Manifest text and array bytes exactly as [`save_checkpoint`] writes them.
    pub fn encode(&self) -> Result<(String, Vec<u8>)> {
        let mut values: Vec<f64> = Vec::new();
        let mut push = |grids: &[Grid2], shape: Shape, image_id: Option<String>| {
            let offset = values.len();
            for g in grids {
                values.extend_from_slice(g.values());
            }
            ArrayRef {
                image_id,
                count: grids.len(),
                rows: shape.rows,
                cols: shape.cols,
                offset,
            }
        };
        let filters = push(self.filters.as_slice(), self.filters.shape(), None);
        let maps = self
            .maps
            .iter()
            .map(|(id, m)| push(m.as_slice(), m.shape(), Some(id.clone())))
            .collect();
        let manifest = Manifest {
            format_version: self.format_version,
            seed: self.seed,
            gamma_used: self.gamma_used,
            config: self.config.clone(),
            metadata: self.metadata.clone(),
            filters,
            maps,
            total_values: values.len(),
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        let mut bytes = Vec::with_capacity(values.len() * 8);
        for v in values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        Ok((text, bytes))
    }
}

pub fn save_checkpoint(ckpt: &Checkpoint, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let (manifest, arrays) = ckpt.encode()?;
    super::write_atomic(&dir.join(ARRAYS_FILE), &arrays)?;
    super::write_atomic(&dir.join(MANIFEST_FILE), manifest.as_bytes())
}

pub fn load_checkpoint(dir: impl AsRef<Path>) -> Result<Checkpoint> {
    let dir = dir.as_ref();
    let text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
    // gate on the version before trusting the rest of the schema
    let raw: serde_json::Value = serde_json::from_str(&text)?;
    let found = raw
        .get("format_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| Error::invalid("manifest lacks format_version"))?;
    if found != u64::from(CHECKPOINT_VERSION) {
        return Err(Error::IncompatibleVersion {
            found: u32::try_from(found).unwrap_or(u32::MAX),
            expected: CHECKPOINT_VERSION,
        });
    }
    let manifest: Manifest = serde_json::from_value(raw)?;
    let bytes = fs::read(dir.join(ARRAYS_FILE))?;
    if bytes.len() != manifest.total_values * 8 {
        return Err(Error::Parse {
            path: dir.join(ARRAYS_FILE),
            offset: bytes.len(),
            message: format!("expected {} bytes", manifest.total_values * 8),
        });
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();

    let read = |r: &ArrayRef| -> Result<Vec<Grid2>> {
        let shape = Shape::new(r.rows, r.cols);
        let end = r.offset + r.count * shape.len();
        if end > values.len() {
            return Err(Error::invalid("manifest array reference out of bounds"));
        }
        values[r.offset..end]
            .chunks_exact(shape.len().max(1))
            .map(|c| Grid2::new(shape.rows, shape.cols, c.to_vec()))
            .collect()
    };
    let filters = FilterBank::new(read(&manifest.filters)?)?;
    let maps = manifest
        .maps
        .iter()
        .map(|r| Ok((r.image_id.clone().unwrap_or_default(), FeatureMaps::new(read(r)?)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Checkpoint {
        format_version: manifest.format_version,
        config: manifest.config,
        gamma_used: manifest.gamma_used,
        filters,
        maps,
        seed: manifest.seed,
        metadata: manifest.metadata,
    })
}
