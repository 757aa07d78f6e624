//! `FVOL0001` volume files.
//!
//! Layout: 8-byte magic, then little-endian `u32 kind` (0 label, 1 scalar,
//! 2 binary), `u32 nx, ny, nz`, `f32 sx, sy, sz`, then the x-fastest payload
//! (`u32`, `f32` or `u8` per voxel).

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use super::{BinaryGrid, Grid, GridKind, LabelGrid, ScalarGrid, Voxel};
use crate::error::{Error, Result};

pub const VOLUME_MAGIC: &[u8; 8] = b"FVOL0001";
const HEADER_LEN: usize = 8 + 4 * 7;

/// A volume of whichever kind a file held.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyGrid {
    Label(LabelGrid),
    Scalar(ScalarGrid),
    Binary(BinaryGrid),
}

impl AnyGrid {
    pub fn kind(&self) -> GridKind {
        match self {
            AnyGrid::Label(_) => GridKind::Label,
            AnyGrid::Scalar(_) => GridKind::Scalar,
            AnyGrid::Binary(_) => GridKind::Binary,
        }
    }

    pub fn into_label(self) -> Result<LabelGrid> {
        match self {
            AnyGrid::Label(g) => Ok(g),
            other => Err(wrong_kind(GridKind::Label, other.kind())),
        }
    }

    pub fn into_scalar(self) -> Result<ScalarGrid> {
        match self {
            AnyGrid::Scalar(g) => Ok(g),
            other => Err(wrong_kind(GridKind::Scalar, other.kind())),
        }
    }

    pub fn into_binary(self) -> Result<BinaryGrid> {
        match self {
            AnyGrid::Binary(g) => Ok(g),
            other => Err(wrong_kind(GridKind::Binary, other.kind())),
        }
    }
}

fn wrong_kind(want: GridKind, got: GridKind) -> Error {
    Error::MalformedHeader(format!("expected a {want:?} volume, found {got:?}"))
}

impl From<LabelGrid> for AnyGrid {
    fn from(g: LabelGrid) -> Self {
        AnyGrid::Label(g)
    }
}

impl From<ScalarGrid> for AnyGrid {
    fn from(g: ScalarGrid) -> Self {
        AnyGrid::Scalar(g)
    }
}

impl From<BinaryGrid> for AnyGrid {
    fn from(g: BinaryGrid) -> Self {
        AnyGrid::Binary(g)
    }
}

trait Payload: Voxel {
    const WIDTH: usize;
    fn put(self, out: &mut Vec<u8>);
    fn take(bytes: &[u8]) -> Self;
}

impl Payload for u32 {
    const WIDTH: usize = 4;
    fn put(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn take(b: &[u8]) -> Self {
        u32::from_le_bytes([b[0], b[1], b[2], b[3]])
    }
}

impl Payload for f32 {
    const WIDTH: usize = 4;
    fn put(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn take(b: &[u8]) -> Self {
        f32::from_le_bytes([b[0], b[1], b[2], b[3]])
    }
}

impl Payload for u8 {
    const WIDTH: usize = 1;
    fn put(self, out: &mut Vec<u8>) {
        out.push(self);
    }
    fn take(b: &[u8]) -> Self {
        b[0]
    }
}

fn encode<T: Payload>(g: &Grid<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + g.len() * T::WIDTH);
    out.extend_from_slice(VOLUME_MAGIC);
    out.extend_from_slice(&T::KIND.code().to_le_bytes());
    for d in g.dims() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for s in g.voxel_size() {
        out.extend_from_slice(&s.to_le_bytes());
    }
    for &v in g.data() {
        v.put(&mut out);
    }
    out
}

fn decode_payload<T: Payload>(dims: [usize; 3], voxel_size: [f32; 3], payload: &[u8]) -> Result<Grid<T>> {
    if !payload.len().is_multiple_of(T::WIDTH) {
        return Err(Error::TruncatedPayload {
            bytes: payload.len(),
            elem: T::WIDTH,
        });
    }
    let data: Vec<T> = payload.chunks_exact(T::WIDTH).map(T::take).collect();
    let expected = dims[0] * dims[1] * dims[2];
    if data.len() != expected {
        return Err(Error::LengthMismatch {
            expected,
            found: data.len(),
        });
    }
    Grid::from_vec(dims, voxel_size, data).map_err(|e| match e {
        Error::InvalidArgument(msg) => Error::MalformedHeader(msg),
        other => other,
    })
}

/// Serialize any volume to the writer.
pub fn write_volume(grid: &AnyGrid, mut w: impl Write) -> std::io::Result<()> {
    let bytes = match grid {
        AnyGrid::Label(g) => encode(g),
        AnyGrid::Scalar(g) => encode(g),
        AnyGrid::Binary(g) => encode(g),
    };
    w.write_all(&bytes)
}

pub fn read_volume(mut r: impl Read) -> Result<AnyGrid> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(|e| Error::io("<reader>", e))?;
    decode(&bytes)
}

fn decode(bytes: &[u8]) -> Result<AnyGrid> {
    if bytes.len() < 8 {
        return Err(Error::MalformedHeader(format!("{} bytes is too short", bytes.len())));
    }
    let magic: [u8; 8] = bytes[..8].try_into().expect("length checked");
    if &magic != VOLUME_MAGIC {
        return Err(Error::BadMagic(magic));
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::MalformedHeader(format!("header truncated at {} bytes", bytes.len())));
    }
    let word = |i: usize| {
        let o = 8 + 4 * i;
        [bytes[o], bytes[o + 1], bytes[o + 2], bytes[o + 3]]
    };
    let kind_code = u32::from_le_bytes(word(0));
    let kind = GridKind::from_code(kind_code)
        .ok_or_else(|| Error::MalformedHeader(format!("unknown kind code {kind_code}")))?;
    let dims = [1, 2, 3].map(|i| u32::from_le_bytes(word(i)) as usize);
    let voxel_size = [4, 5, 6].map(|i| f32::from_le_bytes(word(i)));
    if dims.contains(&0) || voxel_size.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
        return Err(Error::MalformedHeader(format!(
            "bad geometry: dims {dims:?}, voxel size {voxel_size:?}"
        )));
    }
    let payload = &bytes[HEADER_LEN..];
    Ok(match kind {
        GridKind::Label => AnyGrid::Label(decode_payload(dims, voxel_size, payload)?),
        GridKind::Scalar => AnyGrid::Scalar(decode_payload(dims, voxel_size, payload)?),
        GridKind::Binary => AnyGrid::Binary(decode_payload(dims, voxel_size, payload)?),
    })
}

pub fn save_volume(grid: impl Into<AnyGrid>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_volume(&grid.into(), &mut buf).map_err(|e| Error::io(path, e))?;
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn load_volume(path: impl AsRef<Path>) -> Result<AnyGrid> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

/// Write free-form provenance next to a volume as `<stem>.meta.json`.
pub fn save_meta(volume_path: impl AsRef<Path>, meta: &serde_json::Value) -> Result<PathBuf> {
    let volume_path = volume_path.as_ref();
    let stem = volume_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let path = volume_path.with_file_name(format!("{stem}.meta.json"));
    let text = serde_json::to_string_pretty(meta)?;
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
