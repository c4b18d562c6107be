//! Field files: one line of JSON header, then `n^d · N` little-endian `f64`
//! values, grid points in row-major order with the component index fastest.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Grid, PeriodicField};
use crate::error::{Error, Result};

const FORMAT: &str = "hicontrast-field";

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    dim: usize,
    n: usize,
    ncomp: usize,
    layout: String,
    dtype: String,
}

pub fn write_field<W: Write>(mut w: W, field: &PeriodicField) -> Result<()> {
    let grid = field.grid();
    let header = Header {
        format: FORMAT.into(),
        dim: grid.dim(),
        n: grid.n(),
        ncomp: field.ncomp(),
        layout: "row-major".into(),
        dtype: "f64-le".into(),
    };
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    let mut buf = Vec::with_capacity(grid.len() * field.ncomp() * 8);
    for idx in 0..grid.len() {
        for c in 0..field.ncomp() {
            buf.extend_from_slice(&field.component(c)[idx].to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_field<R: Read>(r: R) -> Result<PeriodicField> {
    let mut reader = BufReader::new(r);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    let header: Header =
        serde_json::from_str(line.trim_end()).map_err(|e| Error::Parse(e.to_string()))?;
    if header.format != FORMAT || header.layout != "row-major" || header.dtype != "f64-le" {
        return Err(Error::Parse(format!("unsupported field header: {line}")));
    }
    let grid = Grid::new(header.dim, header.n)?;
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    let expected = grid.len() * header.ncomp * 8;
    if bytes.len() != expected {
        return Err(Error::ShapeMismatch(format!(
            "field body has {} bytes, header implies {expected}",
            bytes.len()
        )));
    }
    let mut field = PeriodicField::zeros(grid, header.ncomp);
    for (k, chunk) in bytes.chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
        let (idx, c) = (k / header.ncomp, k % header.ncomp);
        field.component_mut(c)[idx] = v;
    }
    Ok(field)
}

pub fn save_field(path: impl AsRef<Path>, field: &PeriodicField) -> Result<()> {
    let f = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(f);
    write_field(&mut w, field)?;
    w.flush()?;
    Ok(())
}

pub fn load_field(path: impl AsRef<Path>) -> Result<PeriodicField> {
    read_field(std::fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_bit_exact() {
        let g = Grid::new(2, 8).unwrap();
        let u = PeriodicField::random(g, 3, 1);
        let mut buf = Vec::new();
        write_field(&mut buf, &u).unwrap();
        assert_eq!(read_field(&buf[..]).unwrap(), u);
    }

    #[test]
    fn component_is_fastest_on_disk() {
        let g = Grid::new(1, 2).unwrap();
        let u = PeriodicField::from_data(g, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let mut buf = Vec::new();
        write_field(&mut buf, &u).unwrap();
        let body = &buf[buf.iter().position(|&b| b == b'\n').unwrap() + 1..];
        let vals: Vec<f64> = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        assert_eq!(vals, vec![1.0, 3.0, 2.0, 4.0]);
    }

    #[test]
    fn truncated_body_is_rejected() {
        let g = Grid::new(1, 4).unwrap();
        let mut buf = Vec::new();
        write_field(&mut buf, &PeriodicField::zeros(g, 1)).unwrap();
        buf.pop();
        assert!(read_field(&buf[..]).is_err());
        assert!(read_field(&b"not json\n"[..]).is_err());
    }
}
