//! Binary embedding cache.
//!
//! Little-endian layout:
//!
//! | bytes     | field                                              |
//! |-----------|----------------------------------------------------|
//! | 8         | magic `PSEMBED\0`                                  |
//! | 1         | version (currently 1)                              |
//! | 1         | coordinate kind: 0 principal, 1 standard           |
//! | 32        | SHA-256 of the configuration that produced it      |
//! | 8 × 3     | `N`, `M`, `K` as u64                               |
//! | 8 × K     | singular values (f64)                              |
//! | N entries | follower ids, each u32 byte length + UTF-8 bytes    |
//! | M entries | elite ids, same encoding                           |
//! | 8 × N × K | follower coordinates, row-major f64                |
//! | 8 × M × K | elite coordinates, row-major f64                   |

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use nalgebra::DMatrix;

use super::{CoordinateKind, LatentEmbedding};
use crate::error::{Error, Result};

pub const EMBEDDING_MAGIC: &[u8; 8] = b"PSEMBED\0";
pub const EMBEDDING_VERSION: u8 = 1;

fn io_err(e: std::io::Error) -> Error {
    Error::Cache(e.to_string())
}

pub fn write_embedding<W: Write>(
    mut w: W,
    emb: &LatentEmbedding,
    config_hash: &[u8; 32],
) -> Result<()> {
    let k = emb.k();
    w.write_all(EMBEDDING_MAGIC).map_err(io_err)?;
    w.write_u8(EMBEDDING_VERSION).map_err(io_err)?;
    w.write_u8(match emb.coordinate_kind {
        CoordinateKind::Principal => 0,
        CoordinateKind::Standard => 1,
    })
    .map_err(io_err)?;
    w.write_all(config_hash).map_err(io_err)?;
    for dim in [emb.follower_ids.len(), emb.elite_ids.len(), k] {
        w.write_u64::<LittleEndian>(dim as u64).map_err(io_err)?;
    }
    for &s in &emb.singular_values {
        w.write_f64::<LittleEndian>(s).map_err(io_err)?;
    }
    for id in emb.follower_ids.iter().chain(&emb.elite_ids) {
        w.write_u32::<LittleEndian>(id.len() as u32).map_err(io_err)?;
        w.write_all(id.as_bytes()).map_err(io_err)?;
    }
    for coords in [&emb.follower_coords, &emb.elite_coords] {
        for r in 0..coords.nrows() {
            for c in 0..k {
                w.write_f64::<LittleEndian>(coords[(r, c)]).map_err(io_err)?;
            }
        }
    }
    Ok(())
}

pub fn read_embedding<R: Read>(mut r: R) -> Result<(LatentEmbedding, [u8; 32])> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(io_err)?;
    if &magic != EMBEDDING_MAGIC {
        return Err(Error::Cache("bad magic".into()));
    }
    let version = r.read_u8().map_err(io_err)?;
    if version != EMBEDDING_VERSION {
        return Err(Error::Cache(format!("unsupported version {version}")));
    }
    let coordinate_kind = match r.read_u8().map_err(io_err)? {
        0 => CoordinateKind::Principal,
        1 => CoordinateKind::Standard,
        other => return Err(Error::Cache(format!("unknown coordinate kind {other}"))),
    };
    let mut hash = [0u8; 32];
    r.read_exact(&mut hash).map_err(io_err)?;
    let mut dims = [0usize; 3];
    for d in &mut dims {
        *d = r.read_u64::<LittleEndian>().map_err(io_err)? as usize;
    }
    let [n, m, k] = dims;
    let singular_values = (0..k)
        .map(|_| r.read_f64::<LittleEndian>().map_err(io_err))
        .collect::<Result<Vec<_>>>()?;
    let mut read_ids = |count: usize| -> Result<Vec<String>> {
        (0..count)
            .map(|_| {
                let len = r.read_u32::<LittleEndian>().map_err(io_err)? as usize;
                let mut buf = vec![0u8; len];
                r.read_exact(&mut buf).map_err(io_err)?;
                String::from_utf8(buf).map_err(|e| Error::Cache(e.to_string()))
            })
            .collect()
    };
    let follower_ids = read_ids(n)?;
    let elite_ids = read_ids(m)?;
    let mut read_matrix = |rows: usize| -> Result<DMatrix<f64>> {
        let mut data = vec![0.0; rows * k];
        r.read_f64_into::<LittleEndian>(&mut data).map_err(io_err)?;
        Ok(DMatrix::from_row_slice(rows, k, &data))
    };
    let follower_coords = read_matrix(n)?;
    let elite_coords = read_matrix(m)?;
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing).map_err(io_err)? != 0 {
        return Err(Error::Cache("trailing bytes".into()));
    }
    Ok((
        LatentEmbedding {
            follower_ids,
            elite_ids,
            follower_coords,
            elite_coords,
            singular_values,
            coordinate_kind,
        },
        hash,
    ))
}
