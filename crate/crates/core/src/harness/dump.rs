//! Binary field dumps.
//!
//! Layout (little-endian): magic `HGF1`, version `u16`, `d` as `u16`, `d`
//! extents as `u32`, spacing `f64`, domain kind `u8`, then the cell values as
//! `f64` in grid index order. Grid offsets are not stored.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::pde::{DomainKind, Grid, ScalarField};

pub const MAGIC: &[u8; 4] = b"HGF1";
pub const VERSION: u16 = 1;

pub fn encode_field(field: &ScalarField, kind: DomainKind) -> Vec<u8> {
    let g = &field.grid;
    let d = g.dim();
    let mut out = Vec::with_capacity(4 + 4 + 4 * d + 9 + 8 * g.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(d as u16).to_le_bytes());
    for k in 0..d {
        out.extend_from_slice(&(g.extent(k) as u32).to_le_bytes());
    }
    out.extend_from_slice(&g.spacing().to_le_bytes());
    out.push(kind.code());
    for v in &field.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        let end = self.pos + N;
        let bytes = self.buf.get(self.pos..end).ok_or_else(|| {
            Error::Corrupt(format!("file ends inside the {what} at byte {}", self.pos))
        })?;
        self.pos = end;
        Ok(bytes.try_into().expect("slice of length N"))
    }
}

pub fn decode_field(buf: &[u8]) -> Result<(ScalarField, DomainKind)> {
    let mut r = Reader { buf, pos: 0 };
    if &r.take::<4>("magic")? != MAGIC {
        return Err(Error::Header("bad magic, not a field dump".into()));
    }
    let version = u16::from_le_bytes(r.take("version")?);
    if version != VERSION {
        return Err(Error::Header(format!(
            "version {version} (0x{version:04x}); expected {VERSION}, a byte-swapped value means a big-endian writer"
        )));
    }
    let d = u16::from_le_bytes(r.take("dimension")?) as usize;
    if d != 2 && d != 3 {
        return Err(Error::Header(format!("dimension {d}")));
    }
    let mut n = Vec::with_capacity(d);
    for _ in 0..d {
        n.push(u32::from_le_bytes(r.take("extents")?) as usize);
    }
    let h = f64::from_le_bytes(r.take("spacing")?);
    let code = r.take::<1>("domain kind")?[0];
    let kind = DomainKind::from_code(code)
        .ok_or_else(|| Error::Header(format!("unknown domain kind code {code}")))?;
    let grid = Grid::new(d, &n, h).map_err(|e| Error::Header(format!("grid: {e}")))?;
    let remaining = buf.len() - r.pos;
    if remaining != 8 * grid.len() {
        return Err(Error::Corrupt(format!(
            "payload of {remaining} bytes for {} cells",
            grid.len()
        )));
    }
    let data = buf[r.pos..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok((ScalarField { grid, data }, kind))
}

pub fn dump_field(field: &ScalarField, kind: DomainKind, path: &Path) -> Result<()> {
    fs::write(path, encode_field(field, kind))?;
    Ok(())
}

pub fn load_field(path: &Path) -> Result<(ScalarField, DomainKind)> {
    decode_field(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ScalarField {
        let g = Grid::new(2, &[5, 7], 0.125).unwrap();
        ScalarField::from_fn(g, |x| (13.0 * x[0]).sin() * 1e-300 + x[1] / 3.0)
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        let f = sample();
        let (g, kind) = decode_field(&encode_field(&f, DomainKind::CornerBox)).unwrap();
        assert_eq!(kind, DomainKind::CornerBox);
        assert_eq!(g.grid.extents(), f.grid.extents());
        assert!(g
            .data
            .iter()
            .zip(&f.data)
            .all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn truncated_and_foreign_headers_are_rejected() {
        let bytes = encode_field(&sample(), DomainKind::Torus);
        for cut in [2, 7, 12, 30, bytes.len() - 1] {
            assert!(
                matches!(decode_field(&bytes[..cut]), Err(Error::Corrupt(_))),
                "cut {cut}"
            );
        }
        // The same header as written by a big-endian machine.
        let mut be = bytes.clone();
        be[4..6].copy_from_slice(&VERSION.to_be_bytes());
        be[6..8].copy_from_slice(&2u16.to_be_bytes());
        assert!(matches!(decode_field(&be), Err(Error::Header(_))));
        let mut magic = bytes;
        magic[0] = b'X';
        assert!(matches!(decode_field(&magic), Err(Error::Header(_))));
    }
}
