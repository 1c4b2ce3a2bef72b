//! Binary field files: `MGH1`, rank code, grid kind, dims, box metadata,
//! then little-endian `f64` samples (component-major, x fastest).

use super::field::{Field, Rank};
use super::grid::{BoxGrid, CellGrid, Grid};
use crate::error::{Error, Result};
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"MGH1";

pub fn write_field<W: Write>(mut out: W, field: &Field) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&field.rank().code().to_le_bytes())?;
    let (kind, dims) = match field.grid() {
        Grid::Cell(g) => (0u32, g.dims()),
        Grid::Box(g) => (1u32, g.dims()),
    };
    out.write_all(&kind.to_le_bytes())?;
    for d in dims {
        let d = u32::try_from(d).map_err(|_| Error::Format("dimension exceeds u32".into()))?;
        out.write_all(&d.to_le_bytes())?;
    }
    if let Grid::Box(g) = field.grid() {
        for v in g.origin().iter().chain(g.side_lengths().iter()) {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    for v in field.samples() {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_field<R: Read>(mut input: R) -> Result<Field> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}")));
    }
    let rank_code = read_u32(&mut input)?;
    let rank = Rank::from_code(rank_code)
        .ok_or_else(|| Error::Format(format!("unknown rank code {rank_code}")))?;
    let kind = read_u32(&mut input)?;
    let dims = [
        read_u32(&mut input)? as usize,
        read_u32(&mut input)? as usize,
        read_u32(&mut input)? as usize,
    ];
    let grid = match kind {
        0 => Grid::Cell(CellGrid::with_dims(dims)?),
        1 => {
            let origin = [
                read_f64(&mut input)?,
                read_f64(&mut input)?,
                read_f64(&mut input)?,
            ];
            let sides = [
                read_f64(&mut input)?,
                read_f64(&mut input)?,
                read_f64(&mut input)?,
            ];
            Grid::Box(BoxGrid::new(origin, sides, dims)?)
        }
        other => return Err(Error::Format(format!("unknown grid kind {other}"))),
    };
    let count = grid.n_points() * rank.components();
    let mut bytes = vec![0u8; count * 8];
    input.read_exact(&mut bytes)?;
    let samples = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    let mut rest = [0u8; 1];
    if input.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after samples".into()));
    }
    Field::new(grid, rank, samples)
}

pub fn save_field(path: &Path, field: &Field) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_field(&mut w, field)?;
    w.flush()?;
    Ok(())
}

pub fn load_field(path: &Path) -> Result<Field> {
    let file = std::fs::File::open(path)?;
    read_field(std::io::BufReader::new(file))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Vec3;
    use proptest::prelude::*;

    #[test]
    fn header_layout_is_fixed() {
        let g = Grid::Box(BoxGrid::new([0.5, 0.0, 0.0], [1.0, 2.0, 3.0], [2, 1, 1]).unwrap());
        let f = Field::new(g, Rank::Scalar, vec![1.0, -2.0]).unwrap();
        let mut buf = Vec::new();
        write_field(&mut buf, &f).unwrap();
        assert_eq!(&buf[0..4], b"MGH1");
        assert_eq!(&buf[4..8], &0u32.to_le_bytes());
        assert_eq!(&buf[8..12], &1u32.to_le_bytes());
        assert_eq!(&buf[12..16], &2u32.to_le_bytes());
        assert_eq!(&buf[24..32], &0.5f64.to_le_bytes());
        assert_eq!(&buf[56..64], &2.0f64.to_le_bytes());
        assert_eq!(&buf[72..80], &1.0f64.to_le_bytes());
        assert_eq!(&buf[80..88], &(-2.0f64).to_le_bytes());
        assert_eq!(buf.len(), 88);
    }

    #[test]
    fn rejects_truncated_and_bad_magic() {
        let g = Grid::Cell(CellGrid::new(2).unwrap());
        let f = Field::from_vector_fn(g, |y| Vec3::new(y[0], y[1], y[2])).unwrap();
        let mut buf = Vec::new();
        write_field(&mut buf, &f).unwrap();
        assert!(read_field(&buf[..buf.len() - 3]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_field(bad.as_slice()), Err(Error::Format(_))));
    }

    proptest! {
        #[test]
        fn round_trip(n0 in 1usize..4, n1 in 1usize..4, n2 in 1usize..4, rank in 0u32..3, cell in proptest::bool::ANY, seed in 0u64..100) {
            let dims = [n0, n1, n2];
            let grid = if cell {
                Grid::Cell(CellGrid::with_dims(dims).unwrap())
            } else {
                Grid::Box(BoxGrid::new([-0.25, 1.0, 3.0], [0.5, 2.0, 1.0], dims).unwrap())
            };
            let rank = Rank::from_code(rank).unwrap();
            let count = grid.n_points() * rank.components();
            let samples: Vec<f64> = (0..count).map(|i| ((i as u64 * 7919 + seed) % 97) as f64 * 0.13 - 5.0).collect();
            let f = Field::new(grid, rank, samples).unwrap();
            let mut buf = Vec::new();
            write_field(&mut buf, &f).unwrap();
            prop_assert_eq!(read_field(buf.as_slice()).unwrap(), f);
        }
    }
}
