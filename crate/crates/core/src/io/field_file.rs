//! Binary field files.
//!
//! Layout: the 4-byte magic `IFDM`, a little-endian `u32` format version, a
//! little-endian `u32` header length, a UTF-8 header of `key = value` lines,
//! then the payload as little-endian `f64`, component-slowest and `x1`
//! fastest within a component.

use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Field, PeriodicGrid};
use crate::primal::PrimalState;

pub const MAGIC: &[u8; 4] = b"IFDM";
pub const FORMAT_VERSION: u32 = 1;
const LAYOUT: &str = "component-slowest,x1-fastest";

#[derive(Debug, Clone, PartialEq)]
pub struct FieldFile {
    pub name: String,
    pub time: f64,
    pub field: Field,
}

impl FieldFile {
    pub fn to_bytes(&self) -> Vec<u8> {
        let header = format!(
            "n = {}\ntime = {:e}\nname = {}\ncomponents = {}\ndtype = f64le\nlayout = {}\n",
            self.field.grid().n(),
            self.time,
            self.name,
            self.field.components(),
            LAYOUT
        );
        let mut out = Vec::with_capacity(12 + header.len() + 8 * self.field.data().len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(header.as_bytes());
        for x in self.field.data() {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let bad = |message: String| Error::Format {
            path: path.to_path_buf(),
            message,
        };
        if bytes.len() < 12 || &bytes[0..4] != MAGIC {
            return Err(bad("missing IFDM magic".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(bad(format!("unsupported format version {version}")));
        }
        let header_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let header_end = 12usize
            .checked_add(header_len)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| bad("truncated header".into()))?;
        let header = std::str::from_utf8(&bytes[12..header_end]).map_err(|_| bad("header is not UTF-8".into()))?;
        let mut n = None;
        let mut time = 0.0;
        let mut name = String::new();
        let mut components = None;
        for line in header.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("malformed header line '{line}'")))?;
            let v = v.trim();
            match k.trim() {
                "n" => n = Some(v.parse::<usize>().map_err(|_| bad(format!("bad n '{v}'")))?),
                "time" => time = v.parse().map_err(|_| bad(format!("bad time '{v}'")))?,
                "name" => name = v.to_string(),
                "components" => {
                    components = Some(v.parse::<usize>().map_err(|_| bad(format!("bad components '{v}'")))?)
                }
                "dtype" if v != "f64le" => return Err(bad(format!("unsupported dtype '{v}'"))),
                "layout" if v != LAYOUT => return Err(bad(format!("unsupported layout '{v}'"))),
                "dtype" | "layout" => {}
                other => return Err(bad(format!("unknown header key '{other}'"))),
            }
        }
        let n = n.ok_or_else(|| bad("header lacks n".into()))?;
        let components = components.ok_or_else(|| bad("header lacks components".into()))?;
        let grid = PeriodicGrid::new(n).map_err(|e| bad(e.to_string()))?;
        let count = components * grid.points();
        let payload = &bytes[header_end..];
        if payload.len() != 8 * count {
            return Err(bad(format!(
                "payload has {} bytes, expected {} for {components} components on {n}^3",
                payload.len(),
                8 * count
            )));
        }
        let data = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let field = Field::from_vec(grid, components, data).map_err(|e| bad(e.to_string()))?;
        Ok(Self { name, time, field })
    }
}

pub fn write_field(path: &Path, file: &FieldFile) -> Result<()> {
    std::fs::write(path, file.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn read_field(path: &Path) -> Result<FieldFile> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    FieldFile::from_bytes(&bytes, path)
}

/// Writes a primal state as one packed 13-component field.
pub fn write_primal(path: &Path, name: &str, time: f64, state: &PrimalState) -> Result<()> {
    write_field(
        path,
        &FieldFile {
            name: name.to_string(),
            time,
            field: state.to_packed(),
        },
    )
}

pub fn read_primal(path: &Path) -> Result<(f64, PrimalState)> {
    let file = read_field(path)?;
    if file.field.components() != 13 {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: format!("expected 13 packed components, found {}", file.field.components()),
        });
    }
    Ok((file.time, PrimalState::from_packed(&file.field)?))
}
