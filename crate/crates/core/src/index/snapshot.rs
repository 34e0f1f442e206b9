//! Binary index snapshots.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic "SCOUTIDX1"
//! dim u32 | count u32
//! m u32 | ef_construction u32 | ef_search u32 | seed u64
//! count x { id_len u32 | id bytes (UTF-8) | dim x f32 }
//! entry u32 (u32::MAX when empty) | max_level u32
//! count x { level u32 | (level + 1) x { n u32 | n x u32 } }
//! ```
//!
//! An index bundle is the dataset index snapshot immediately followed by
//! the attribute index snapshot.

use std::collections::HashMap;
use std::io::{self, Read, Write};
use std::path::Path;

use super::{HnswIndex, HnswParams, IndexError};

pub const INDEX_MAGIC: &[u8; 9] = b"SCOUTIDX1";

fn put_u32(w: &mut impl Write, v: u32) -> io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn get_u32(r: &mut impl Read) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn get_u64(r: &mut impl Read) -> io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn to_u32(v: usize, what: &str) -> Result<u32, IndexError> {
    u32::try_from(v).map_err(|_| IndexError::Format(format!("{what} {v} exceeds u32")))
}

impl HnswIndex {
    pub fn write_to(&self, w: &mut impl Write) -> Result<(), IndexError> {
        w.write_all(INDEX_MAGIC)?;
        put_u32(w, to_u32(self.dim, "dim")?)?;
        put_u32(w, to_u32(self.ids.len(), "count")?)?;
        put_u32(w, to_u32(self.params.m, "m")?)?;
        put_u32(w, to_u32(self.params.ef_construction, "ef_construction")?)?;
        put_u32(w, to_u32(self.params.ef_search, "ef_search")?)?;
        w.write_all(&self.params.seed.to_le_bytes())?;
        for (i, id) in self.ids.iter().enumerate() {
            put_u32(w, to_u32(id.len(), "id length")?)?;
            w.write_all(id.as_bytes())?;
            for x in &self.vectors[i * self.dim..(i + 1) * self.dim] {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        put_u32(w, self.entry.unwrap_or(u32::MAX))?;
        put_u32(w, to_u32(self.max_level, "max_level")?)?;
        for layers in &self.links {
            put_u32(w, to_u32(layers.len() - 1, "level")?)?;
            for adj in layers {
                put_u32(w, to_u32(adj.len(), "degree")?)?;
                for &n in adj {
                    put_u32(w, n)?;
                }
            }
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self, IndexError> {
        let mut magic = [0u8; 9];
        r.read_exact(&mut magic)?;
        if &magic != INDEX_MAGIC {
            return Err(IndexError::Format("bad magic".into()));
        }
        let dim = get_u32(r)? as usize;
        let count = get_u32(r)? as usize;
        let params = HnswParams {
            m: get_u32(r)? as usize,
            ef_construction: get_u32(r)? as usize,
            ef_search: get_u32(r)? as usize,
            seed: get_u64(r)?,
        };
        let mut idx = HnswIndex::new(dim, params)?;
        let mut lookup = HashMap::with_capacity(count);
        let mut ids = Vec::with_capacity(count);
        let mut vectors = Vec::with_capacity(count * dim);
        for i in 0..count {
            let len = get_u32(r)? as usize;
            let mut buf = vec![0u8; len];
            r.read_exact(&mut buf)?;
            let id = String::from_utf8(buf).map_err(|_| IndexError::Format(format!("entry {i}: id is not UTF-8")))?;
            for _ in 0..dim {
                let mut b = [0u8; 4];
                r.read_exact(&mut b)?;
                vectors.push(f32::from_le_bytes(b));
            }
            if lookup.insert(id.clone(), i as u32).is_some() {
                return Err(IndexError::Format(format!("duplicate id {id:?}")));
            }
            ids.push(id);
        }
        let entry = match get_u32(r)? {
            u32::MAX => None,
            e if (e as usize) < count => Some(e),
            e => return Err(IndexError::Format(format!("entry point {e} out of range"))),
        };
        let max_level = get_u32(r)? as usize;
        let mut links = Vec::with_capacity(count);
        for i in 0..count {
            let level = get_u32(r)? as usize;
            if level > max_level {
                return Err(IndexError::Format(format!("node {i} level {level} above max {max_level}")));
            }
            let mut layers = Vec::with_capacity(level + 1);
            for _ in 0..=level {
                let n = get_u32(r)? as usize;
                let mut adj = Vec::with_capacity(n);
                for _ in 0..n {
                    let x = get_u32(r)?;
                    if x as usize >= count {
                        return Err(IndexError::Format(format!("node {i} links to {x}, beyond {count}")));
                    }
                    adj.push(x);
                }
                layers.push(adj);
            }
            links.push(layers);
        }
        if entry.is_none() != (count == 0) {
            return Err(IndexError::Format("entry point inconsistent with count".into()));
        }
        idx.ids = ids;
        idx.lookup = lookup;
        idx.vectors = vectors;
        idx.links = links;
        idx.entry = entry;
        idx.max_level = max_level;
        idx.resync_rng();
        Ok(idx)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory cannot fail");
        buf
    }
}

/// The two indexes served together: datasets and attributes.
#[derive(Debug, Clone)]
pub struct IndexBundle {
    pub datasets: HnswIndex,
    pub attributes: HnswIndex,
}

pub fn write_bundle(bundle: &IndexBundle, path: impl AsRef<Path>) -> Result<(), IndexError> {
    let path = path.as_ref();
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    crate::catalog::make_readable(tmp.as_file())?;
    {
        let mut w = io::BufWriter::new(tmp.as_file_mut());
        bundle.datasets.write_to(&mut w)?;
        bundle.attributes.write_to(&mut w)?;
        w.flush()?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| IndexError::Io(e.error))?;
    Ok(())
}

pub fn read_bundle(path: impl AsRef<Path>) -> Result<IndexBundle, IndexError> {
    let mut r = io::BufReader::new(std::fs::File::open(path)?);
    let datasets = HnswIndex::read_from(&mut r)?;
    let attributes = HnswIndex::read_from(&mut r)?;
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(IndexError::Format("trailing bytes after bundle".into()));
    }
    Ok(IndexBundle { datasets, attributes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::EmbeddingVector;

    fn sample(n: usize) -> HnswIndex {
        let mut idx = HnswIndex::new(4, HnswParams { seed: 3, ..Default::default() }).unwrap();
        for i in 0..n {
            let v = EmbeddingVector::new(vec![i as f32 + 1.0, (i * 7 % 5) as f32, 1.0, -(i as f32)]).unwrap();
            idx.insert(format!("id-{i}"), &v).unwrap();
        }
        idx
    }

    #[test]
    fn header_layout_is_fixed() {
        let bytes = sample(2).to_bytes();
        assert_eq!(&bytes[..9], b"SCOUTIDX1");
        assert_eq!(u32::from_le_bytes(bytes[9..13].try_into().unwrap()), 4);
        assert_eq!(u32::from_le_bytes(bytes[13..17].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(bytes[17..21].try_into().unwrap()), 16);
        assert_eq!(u32::from_le_bytes(bytes[21..25].try_into().unwrap()), 64);
        assert_eq!(u32::from_le_bytes(bytes[25..29].try_into().unwrap()), 100);
        assert_eq!(u64::from_le_bytes(bytes[29..37].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(bytes[37..41].try_into().unwrap()), 4);
        assert_eq!(&bytes[41..45], b"id-0");
    }

    #[test]
    fn round_trip_preserves_graph_and_results() {
        let idx = sample(120);
        let back = HnswIndex::read_from(&mut idx.to_bytes().as_slice()).unwrap();
        assert_eq!(back.to_bytes(), idx.to_bytes());
        let q = EmbeddingVector::new(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(back.knn(&q, 5).unwrap(), idx.knn(&q, 5).unwrap());
    }

    #[test]
    fn inserts_after_load_match_uninterrupted_build() {
        let full = sample(60);
        let mut part = HnswIndex::read_from(&mut sample(59).to_bytes().as_slice()).unwrap();
        let v = EmbeddingVector::new(vec![60.0, (59 * 7 % 5) as f32, 1.0, -59.0]).unwrap();
        part.insert("id-59", &v).unwrap();
        assert_eq!(part.to_bytes(), full.to_bytes());
    }

    #[test]
    fn empty_round_trip() {
        let idx = HnswIndex::new(8, HnswParams::default()).unwrap();
        let back = HnswIndex::read_from(&mut idx.to_bytes().as_slice()).unwrap();
        assert!(back.is_empty());
    }

    #[test]
    fn rejects_corruption() {
        let mut bytes = sample(3).to_bytes();
        bytes[0] = b'X';
        assert!(matches!(HnswIndex::read_from(&mut bytes.as_slice()), Err(IndexError::Format(_))));
        let bytes = sample(3).to_bytes();
        assert!(HnswIndex::read_from(&mut &bytes[..bytes.len() - 2]).is_err());
    }

    #[test]
    fn bundle_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scout.idx");
        let bundle = IndexBundle { datasets: sample(10), attributes: sample(30) };
        write_bundle(&bundle, &path).unwrap();
        let back = read_bundle(&path).unwrap();
        assert_eq!(back.datasets.to_bytes(), bundle.datasets.to_bytes());
        assert_eq!(back.attributes.to_bytes(), bundle.attributes.to_bytes());
    }
}
