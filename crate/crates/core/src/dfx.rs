//! Field file format, eight-byte magic `DFLXv001`.
//!
//! Layout: magic, u32 little-endian JSON header length, the JSON header,
//! then one raw little-endian f64 array per component in C order. The
//! header carries `{dims, domain_length, components, dtype, order}` with
//! `dtype` fixed to `"f64le"` and `order` to `"C"`. Read errors name the
//! part of the file that failed.

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::grid::GridSpec;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

pub const MAGIC: &[u8; 8] = b"DFLXv001";

/// Largest header this reader will accept; real headers are under 200 bytes.
const MAX_HEADER_LEN: u32 = 1 << 20;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Header {
    pub components: usize,
    pub dims: [usize; 3],
    pub domain_length: f64,
    pub dtype: String,
    pub order: String,
}

/// A field as stored on disk, one or three components.
#[derive(Clone, Debug)]
pub enum StoredField {
    Scalar(ScalarField<f64>),
    Vector(VectorField<f64>),
}

impl StoredField {
    pub fn grid(&self) -> &GridSpec<f64> {
        match self {
            StoredField::Scalar(f) => f.grid(),
            StoredField::Vector(v) => v.grid(),
        }
    }

    pub fn components(&self) -> usize {
        match self {
            StoredField::Scalar(_) => 1,
            StoredField::Vector(_) => 3,
        }
    }

    pub fn into_vector(self) -> Result<VectorField<f64>> {
        match self {
            StoredField::Vector(v) => Ok(v),
            StoredField::Scalar(_) => Err(Error::Format(
                "components: expected a 3-component field, file holds 1".into(),
            )),
        }
    }

    pub fn into_scalar(self) -> Result<ScalarField<f64>> {
        match self {
            StoredField::Scalar(f) => Ok(f),
            StoredField::Vector(_) => Err(Error::Format(
                "components: expected a 1-component field, file holds 3".into(),
            )),
        }
    }
}

fn header_for(grid: &GridSpec<f64>, components: usize) -> Header {
    Header {
        components,
        dims: grid.dims(),
        domain_length: grid.domain_length(),
        dtype: "f64le".into(),
        order: "C".into(),
    }
}

fn write_component(w: &mut impl Write, values: &[f64]) -> Result<()> {
    let mut buf = Vec::with_capacity(values.len() * 8);
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

fn write_parts(path: &Path, grid: &GridSpec<f64>, comps: &[&[f64]]) -> Result<()> {
    let header = header_for(grid, comps.len());
    let header_json = serde_json::to_vec(&header)
        .map_err(|e| Error::Format(format!("header serialization: {e}")))?;
    let tmp = path.with_extension(format!("tmp.{}", std::process::id()));
    let result = (|| -> Result<()> {
        let mut w = BufWriter::new(File::create(&tmp)?);
        w.write_all(MAGIC)?;
        w.write_all(&(header_json.len() as u32).to_le_bytes())?;
        w.write_all(&header_json)?;
        for c in comps {
            write_component(&mut w, c)?;
        }
        w.flush()?;
        Ok(())
    })();
    match result {
        Ok(()) => {
            std::fs::rename(&tmp, path)?;
            Ok(())
        }
        Err(e) => {
            let _ = std::fs::remove_file(&tmp);
            Err(e)
        }
    }
}

pub fn write_scalar(path: impl AsRef<Path>, f: &ScalarField<f64>) -> Result<()> {
    write_parts(path.as_ref(), f.grid(), &[f.values()])
}

pub fn write_vector(path: impl AsRef<Path>, v: &VectorField<f64>) -> Result<()> {
    write_parts(
        path.as_ref(),
        v.grid(),
        &[v.comp(0).values(), v.comp(1).values(), v.comp(2).values()],
    )
}

pub fn write(path: impl AsRef<Path>, f: &StoredField) -> Result<()> {
    match f {
        StoredField::Scalar(s) => write_scalar(path, s),
        StoredField::Vector(v) => write_vector(path, v),
    }
}

fn read_exact_named(r: &mut impl Read, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf)
        .map_err(|_| Error::Format(format!("{what}: file truncated")))
}

pub fn read(path: impl AsRef<Path>) -> Result<StoredField> {
    let mut r = BufReader::new(File::open(path.as_ref())?);

    let mut magic = [0u8; 8];
    read_exact_named(&mut r, &mut magic, "magic")?;
    if &magic != MAGIC {
        return Err(Error::Format(format!(
            "magic: expected {:?}, got {:?}",
            String::from_utf8_lossy(MAGIC),
            String::from_utf8_lossy(&magic)
        )));
    }

    let mut len = [0u8; 4];
    read_exact_named(&mut r, &mut len, "header length")?;
    let header_len = u32::from_le_bytes(len);
    if header_len == 0 || header_len > MAX_HEADER_LEN {
        return Err(Error::Format(format!(
            "header length: {header_len} outside 1..={MAX_HEADER_LEN}"
        )));
    }

    let mut header_json = vec![0u8; header_len as usize];
    read_exact_named(&mut r, &mut header_json, "header")?;
    let header: Header = serde_json::from_slice(&header_json)
        .map_err(|e| Error::Format(format!("header: {e}")))?;

    if header.dtype != "f64le" {
        return Err(Error::Format(format!(
            "dtype: expected \"f64le\", got {:?}",
            header.dtype
        )));
    }
    if header.order != "C" {
        return Err(Error::Format(format!(
            "order: expected \"C\", got {:?}",
            header.order
        )));
    }
    if header.components != 1 && header.components != 3 {
        return Err(Error::Format(format!(
            "components: expected 1 or 3, got {}",
            header.components
        )));
    }
    let grid = GridSpec::with_length(header.dims, header.domain_length)
        .map_err(|e| Error::Format(format!("dims/domain_length: {e}")))?;

    let n = grid.len();
    let mut comps = Vec::with_capacity(header.components);
    for c in 0..header.components {
        let mut bytes = vec![0u8; n * 8];
        read_exact_named(&mut r, &mut bytes, &format!("component {c} payload"))?;
        let values: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|ch| f64::from_le_bytes(ch.try_into().unwrap()))
            .collect();
        comps.push(
            ScalarField::from_values(grid, values)
                .map_err(|e| Error::Format(format!("component {c} payload: {e}")))?,
        );
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::Format(
            "payload: trailing bytes after the last component".into(),
        ));
    }

    if header.components == 1 {
        Ok(StoredField::Scalar(comps.pop().unwrap()))
    } else {
        let c2 = comps.pop().unwrap();
        let c1 = comps.pop().unwrap();
        let c0 = comps.pop().unwrap();
        Ok(StoredField::Vector(VectorField::new([c0, c1, c2])?))
    }
}
