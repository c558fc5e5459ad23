//! On-disk formats for [`MapField`].
//!
//! CSV: one `# smflow-map` metadata line, a header row, then one row per node
//! in index order (`i` fastest). Coordinates are written with 17 significant
//! digits so that reading back is bit-exact.
//!
//! ```text
//! # smflow-map dim=1 sizes=128x1 lengths=6.2831853071795862e0x1.0000000000000000e0
//! i,ux,uy,uz
//! 0,1.0000000000000000e0,0.0000000000000000e0,0.0000000000000000e0
//! ```
//!
//! Binary (all little-endian): magic `SMAP`, `u32` version (1), `u32` dim,
//! `u32` nx, `u32` ny, `f64` lx, `f64` ly, then `nx·ny` triples of `f64`.

use std::io::{BufRead, Read, Write};

use super::{FieldError, Grid, MapField};
use crate::sphere::{SpherePoint, Vec3};

const MAGIC: &[u8; 4] = b"SMAP";
const VERSION: u32 = 1;
const NORM_TOLERANCE: f64 = 1e-12;

fn unit_point(v: Vec3) -> Result<SpherePoint, FieldError> {
    if (v.norm() - 1.0).abs() > NORM_TOLERANCE {
        return Err(FieldError::Format(format!(
            "value {v:?} is not unit length"
        )));
    }
    Ok(SpherePoint::from_unit(v))
}

pub fn write_csv<W: Write>(u: &MapField, mut w: W) -> Result<(), FieldError> {
    let g = u.grid();
    writeln!(
        w,
        "# smflow-map dim={} sizes={}x{} lengths={:.16e}x{:.16e}",
        g.dim(),
        g.size(0),
        g.size(1),
        g.length(0),
        g.length(1)
    )?;
    if g.dim() == 1 {
        writeln!(w, "i,ux,uy,uz")?;
    } else {
        writeln!(w, "i,j,ux,uy,uz")?;
    }
    for (idx, p) in u.values().iter().enumerate() {
        let [i, j] = g.multi_index(idx);
        let c = p.coords();
        if g.dim() == 1 {
            writeln!(w, "{i},{:.16e},{:.16e},{:.16e}", c.x, c.y, c.z)?;
        } else {
            writeln!(w, "{i},{j},{:.16e},{:.16e},{:.16e}", c.x, c.y, c.z)?;
        }
    }
    Ok(())
}

fn parse_meta(line: &str) -> Result<Grid, FieldError> {
    let bad = || FieldError::Format(format!("bad metadata line: {line}"));
    let rest = line.strip_prefix("# smflow-map").ok_or_else(bad)?;
    let mut dim = None;
    let mut sizes = None;
    let mut lengths = None;
    for tok in rest.split_whitespace() {
        let (k, v) = tok.split_once('=').ok_or_else(bad)?;
        let pair = |v: &str| -> Result<(String, String), FieldError> {
            let (a, b) = v.split_once('x').ok_or_else(bad)?;
            Ok((a.to_string(), b.to_string()))
        };
        match k {
            "dim" => dim = Some(v.parse::<usize>().map_err(|_| bad())?),
            "sizes" => {
                let (a, b) = pair(v)?;
                sizes = Some([a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?]);
            }
            "lengths" => {
                let (a, b) = pair(v)?;
                lengths = Some([a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?]);
            }
            _ => return Err(bad()),
        }
    }
    Grid::new(
        dim.ok_or_else(bad)?,
        sizes.ok_or_else(bad)?,
        lengths.ok_or_else(bad)?,
    )
}

pub fn read_csv<R: BufRead>(r: R) -> Result<MapField, FieldError> {
    let mut lines = r.lines();
    let meta = lines
        .next()
        .ok_or_else(|| FieldError::Format("empty file".into()))??;
    let grid = parse_meta(meta.trim())?;
    let _header = lines
        .next()
        .ok_or_else(|| FieldError::Format("missing header row".into()))??;
    let mut values: Vec<Option<SpherePoint>> = vec![None; grid.len()];
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        let idx_cols = grid.dim();
        if cols.len() != idx_cols + 3 {
            return Err(FieldError::Format(format!("wrong column count: {line}")));
        }
        let parse_idx = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| FieldError::Format(format!("bad index in: {line}")))
        };
        let i = parse_idx(cols[0])?;
        let j = if grid.dim() == 2 {
            parse_idx(cols[1])?
        } else {
            0
        };
        if i >= grid.size(0) || j >= grid.size(1) {
            return Err(FieldError::Format(format!("index out of range: {line}")));
        }
        let mut c = [0.0; 3];
        for (k, slot) in c.iter_mut().enumerate() {
            *slot = cols[idx_cols + k]
                .parse::<f64>()
                .map_err(|_| FieldError::Format(format!("bad number in: {line}")))?;
        }
        values[grid.index(i, j)] = Some(unit_point(Vec3::new(c[0], c[1], c[2]))?);
    }
    let values = values
        .into_iter()
        .enumerate()
        .map(|(idx, v)| v.ok_or_else(|| FieldError::Format(format!("missing node {idx}"))))
        .collect::<Result<Vec<_>, _>>()?;
    MapField::new(grid, values)
}

pub fn write_binary<W: Write>(u: &MapField, mut w: W) -> Result<(), FieldError> {
    w.write_all(&encode_binary(u))?;
    Ok(())
}

pub fn encode_binary(u: &MapField) -> Vec<u8> {
    let g = u.grid();
    let mut buf = Vec::with_capacity(36 + 24 * g.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    for x in [g.dim(), g.size(0), g.size(1)] {
        buf.extend_from_slice(&(x as u32).to_le_bytes());
    }
    buf.extend_from_slice(&g.length(0).to_le_bytes());
    buf.extend_from_slice(&g.length(1).to_le_bytes());
    for p in u.values() {
        for c in p.coords().iter() {
            buf.extend_from_slice(&c.to_le_bytes());
        }
    }
    buf
}

pub fn read_binary<R: Read>(mut r: R) -> Result<MapField, FieldError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    decode_binary(&bytes)
}

pub fn decode_binary(bytes: &[u8]) -> Result<MapField, FieldError> {
    let short = || FieldError::Format("truncated binary map".into());
    if bytes.len() < 36 || &bytes[..4] != MAGIC {
        return Err(FieldError::Format("missing SMAP magic".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let version = u32_at(4);
    if version != VERSION {
        return Err(FieldError::Format(format!("unsupported version {version}")));
    }
    let grid = Grid::new(
        u32_at(8) as usize,
        [u32_at(12) as usize, u32_at(16) as usize],
        [f64_at(20), f64_at(28)],
    )?;
    let body = &bytes[36..];
    if body.len() != 24 * grid.len() {
        return Err(short());
    }
    let values = body
        .chunks_exact(24)
        .map(|c| {
            let f = |k: usize| f64::from_le_bytes(c[8 * k..8 * k + 8].try_into().unwrap());
            unit_point(Vec3::new(f(0), f(1), f(2)))
        })
        .collect::<Result<Vec<_>, _>>()?;
    MapField::new(grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(dim: usize) -> MapField {
        let g = Grid::cubic(dim, 9, 2.5).unwrap();
        MapField::from_fn(g, |[x, y]| {
            Vec3::new((3.0 * x).sin() + 0.1, (x * y).cos(), 0.3 + y)
        })
    }

    #[test]
    fn csv_roundtrip_is_bit_exact() {
        for dim in [1, 2] {
            let u = sample(dim);
            let mut buf = Vec::new();
            write_csv(&u, &mut buf).unwrap();
            let back = read_csv(buf.as_slice()).unwrap();
            assert_eq!(back, u);
        }
    }

    #[test]
    fn binary_roundtrip_is_bit_exact() {
        let u = sample(2);
        let back = decode_binary(&encode_binary(&u)).unwrap();
        assert_eq!(back, u);
    }

    #[test]
    fn rejects_garbage() {
        assert!(decode_binary(b"nope").is_err());
        let mut bytes = encode_binary(&sample(1));
        bytes.pop();
        assert!(decode_binary(&bytes).is_err());
        assert!(read_csv("# smflow-map dim=1\n".as_bytes()).is_err());
        let text = "# smflow-map dim=1 sizes=8x1 lengths=1e0x1e0\ni,ux,uy,uz\n0,2,0,0\n";
        assert!(read_csv(text.as_bytes()).is_err());
    }
}
