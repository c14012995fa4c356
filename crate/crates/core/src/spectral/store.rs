//! Field store: `<stem>.json` header plus `<stem>.bin` with little-endian
//! `(re, im)` f64 pairs, component-major, modes in row-major centered-k order
//! (`k = −n/2 … n/2 − 1` on each axis).

use super::{BoxGrid, SpectralField};
use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const LAYOUT: &str = "row-major-centered-k";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldHeader {
    #[serde(rename = "L")]
    pub side: f64,
    pub n: usize,
    pub components: usize,
    pub layout: String,
}

fn with_ext(stem: &Path, ext: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

/// FFT-order flat indices listed in centered order.
fn centered_order(grid: &BoxGrid) -> Vec<usize> {
    let n = grid.n() as i64;
    let ks: Vec<usize> = (-n / 2..n / 2).map(|k| grid.index_of_wavenumber(k)).collect();
    let mut out = Vec::with_capacity(grid.len());
    for &a in &ks {
        for &b in &ks {
            for &c in &ks {
                out.push(grid.flat([a, b, c]));
            }
        }
    }
    out
}

pub fn encode(field: &SpectralField) -> Vec<u8> {
    let order = centered_order(&field.grid);
    let mut bytes = Vec::with_capacity(field.grid.len() * 48);
    for comp in &field.comps {
        for &i in &order {
            bytes.extend_from_slice(&comp[i].re.to_le_bytes());
            bytes.extend_from_slice(&comp[i].im.to_le_bytes());
        }
    }
    bytes
}

pub fn decode(grid: BoxGrid, bytes: &[u8]) -> Result<SpectralField> {
    if bytes.len() != grid.len() * 48 {
        return Err(Error::Format(format!("field payload has {} bytes, expected {}", bytes.len(), grid.len() * 48)));
    }
    let order = centered_order(&grid);
    let mut f = SpectralField::zeros(grid);
    let mut chunks = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
    for comp in f.comps.iter_mut() {
        for &i in &order {
            let re = chunks.next().expect("length checked");
            let im = chunks.next().expect("length checked");
            comp[i] = Complex64::new(re, im);
        }
    }
    Ok(f)
}

pub fn header_of(field: &SpectralField) -> FieldHeader {
    FieldHeader { side: field.grid.side(), n: field.grid.n(), components: 3, layout: LAYOUT.to_string() }
}

/// Writes `<stem>.json` and `<stem>.bin`; returns both paths.
pub fn write_field(field: &SpectralField, stem: &Path) -> Result<(PathBuf, PathBuf)> {
    let h = with_ext(stem, "json");
    let b = with_ext(stem, "bin");
    std::fs::write(&h, serde_json::to_vec_pretty(&header_of(field))?)?;
    std::fs::write(&b, encode(field))?;
    Ok((h, b))
}

pub fn read_field(stem: &Path) -> Result<SpectralField> {
    let header: FieldHeader = serde_json::from_slice(&std::fs::read(with_ext(stem, "json"))?)?;
    if header.components != 3 || header.layout != LAYOUT {
        return Err(Error::Format(format!("unsupported field layout {:?}", header)));
    }
    let grid = BoxGrid::new(header.side, header.n)?;
    decode(grid, &std::fs::read(with_ext(stem, "bin"))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::tests::random_physical;
    use proptest::prelude::*;

    #[test]
    fn first_mode_in_payload_is_most_negative_corner() {
        let g = BoxGrid::new(32.0, 4).unwrap();
        let mut f = SpectralField::zeros(g);
        let corner = g.flat([2, 2, 2]);
        f.comps[0][corner] = Complex64::new(1.5, -0.25);
        let bytes = encode(&f);
        assert_eq!(f64::from_le_bytes(bytes[0..8].try_into().unwrap()), 1.5);
        assert_eq!(f64::from_le_bytes(bytes[8..16].try_into().unwrap()), -0.25);
    }

    #[test]
    fn store_round_trip_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        let g = BoxGrid::new(8.0, 8).unwrap();
        let f = SpectralField::from_physical(&random_physical(g, 4));
        write_field(&f, &dir.path().join("u")).unwrap();
        assert_eq!(read_field(&dir.path().join("u")).unwrap(), f);
        let bad = dir.path().join("u.bin");
        std::fs::write(&bad, [0u8; 10]).unwrap();
        assert!(read_field(&dir.path().join("u")).is_err());
    }

    proptest! {
        #[test]
        fn encode_decode_identity(seed in 0u64..1000) {
            let g = BoxGrid::new(32.0, 4).unwrap();
            let f = SpectralField::from_physical(&random_physical(g, seed));
            prop_assert_eq!(decode(g, &encode(&f)).unwrap(), f);
        }
    }
}
