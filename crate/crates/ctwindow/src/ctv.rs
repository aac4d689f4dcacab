//! The CTV container: a JSON header `<stem>.ctv` next to a raw voxel file
//! `<stem>.raw`, little-endian, z-major with x fastest.
//!
//! ```json
//! {"schema": "ctv/1", "shape": [z, y, x], "spacing_mm": [z, y, x],
//!  "dtype": "i16", "byte_order": "le", "units": "hu"}
//! ```
//!
//! Masks use dtype `u8` and carry a `labels` map instead of `units`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use ctwindow_core::{Mask, Shape, Spacing, Units, Volume};
use serde::{Deserialize, Serialize};

use crate::error::{Context, Error, Result};

pub const SCHEMA: &str = "ctv/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    I16,
    F32,
    U8,
}

impl Dtype {
    pub fn size(self) -> usize {
        match self {
            Dtype::I16 => 2,
            Dtype::F32 => 4,
            Dtype::U8 => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub schema: String,
    pub shape: [usize; 3],
    pub spacing_mm: [f64; 3],
    pub dtype: Dtype,
    pub byte_order: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub units: Option<Units>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<BTreeMap<u8, String>>,
}

impl Header {
    pub fn is_mask(&self) -> bool {
        self.labels.is_some()
    }
}

pub fn raw_path(header: &Path) -> PathBuf {
    header.with_extension("raw")
}

/// Writes through a temporary sibling and renames into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn read_header(path: &Path) -> Result<Header> {
    let text = fs::read(path).map_err(|e| Error::io(path, e))?;
    let header: Header =
        serde_json::from_slice(&text).map_err(|e| Error::format(path, e.to_string()))?;
    if header.schema != SCHEMA {
        return Err(Error::format(
            path,
            format!("unsupported schema {:?}", header.schema),
        ));
    }
    if header.byte_order != "le" {
        return Err(Error::format(
            path,
            format!("unsupported byte order {:?}", header.byte_order),
        ));
    }
    Ok(header)
}

fn read_payload(path: &Path, header: &Header) -> Result<(Shape, Spacing, Vec<u8>)> {
    let shape = Shape::try_from(header.shape).context(|| path.display().to_string())?;
    let spacing = Spacing::try_from(header.spacing_mm).context(|| path.display().to_string())?;
    let raw = raw_path(path);
    let bytes = fs::read(&raw).map_err(|e| Error::io(&raw, e))?;
    let expected = shape.len() * header.dtype.size();
    if bytes.len() != expected {
        return Err(Error::format(
            &raw,
            format!("expected {expected} bytes, found {}", bytes.len()),
        ));
    }
    Ok((shape, spacing, bytes))
}

pub fn read_volume(path: &Path) -> Result<Volume> {
    let header = read_header(path)?;
    let units = header
        .units
        .ok_or_else(|| Error::format(path, "volume header lacks units"))?;
    let (shape, spacing, bytes) = read_payload(path, &header)?;
    let voxels: Vec<f32> = match header.dtype {
        Dtype::I16 => bytes
            .chunks_exact(2)
            .map(|b| f32::from(i16::from_le_bytes([b[0], b[1]])))
            .collect(),
        Dtype::F32 => bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect(),
        Dtype::U8 => return Err(Error::format(path, "u8 payload is reserved for masks")),
    };
    Volume::new(shape, spacing, units, voxels).context(|| path.display().to_string())
}

pub fn read_mask(path: &Path) -> Result<Mask> {
    let header = read_header(path)?;
    let labels = header
        .labels
        .clone()
        .ok_or_else(|| Error::format(path, "mask header lacks labels"))?;
    if header.dtype != Dtype::U8 {
        return Err(Error::format(path, "mask payload must be u8"));
    }
    let (shape, spacing, bytes) = read_payload(path, &header)?;
    Mask::new(shape, spacing, labels, bytes).context(|| path.display().to_string())
}

/// Writes a volume. `I16` is only accepted for integral HU volumes.
pub fn write_volume(path: &Path, v: &Volume, dtype: Dtype) -> Result<()> {
    let bytes: Vec<u8> = match dtype {
        Dtype::F32 => v.voxels().iter().flat_map(|x| x.to_le_bytes()).collect(),
        Dtype::I16 => {
            if v.units() != Units::Hu {
                return Err(Error::Usage(format!(
                    "{}: only HU volumes can be stored as i16",
                    path.display()
                )));
            }
            let mut out = Vec::with_capacity(v.len() * 2);
            for &x in v.voxels() {
                let i = x as i16;
                if f32::from(i) != x {
                    return Err(Error::Usage(format!(
                        "{}: voxel {x} is not representable as i16",
                        path.display()
                    )));
                }
                out.extend(i.to_le_bytes());
            }
            out
        }
        Dtype::U8 => return Err(Error::Usage("u8 payload is reserved for masks".into())),
    };
    let header = Header {
        schema: SCHEMA.into(),
        shape: v.shape().dims(),
        spacing_mm: v.spacing().mm(),
        dtype,
        byte_order: "le".into(),
        units: Some(v.units()),
        labels: None,
    };
    commit(path, &header, &bytes)
}

pub fn write_mask(path: &Path, m: &Mask) -> Result<()> {
    let header = Header {
        schema: SCHEMA.into(),
        shape: m.shape().dims(),
        spacing_mm: m.spacing().mm(),
        dtype: Dtype::U8,
        byte_order: "le".into(),
        units: None,
        labels: Some(m.label_names().clone()),
    };
    commit(path, &header, m.labels())
}

// the header is written last so a present header implies a complete payload
fn commit(path: &Path, header: &Header, payload: &[u8]) -> Result<()> {
    write_atomic(&raw_path(path), payload)?;
    let mut text = serde_json::to_vec_pretty(header).map_err(|e| Error::Internal(e.to_string()))?;
    text.push(b'\n');
    write_atomic(path, &text)
}
