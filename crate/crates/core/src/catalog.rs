//! Catalog snapshots.
//!
//! File layout: magic `SCOUTCAT1`, format version (u32 LE), SHA-256 of the
//! body (32 bytes), body length (u64 LE), then the body: a deflate-compressed
//! bincode encoding of [`Catalog`]. Saves go through a temp file and an
//! atomic rename, under an advisory lock.

use std::fs::{File, OpenOptions};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::DeflateDecoder;
use flate2::write::DeflateEncoder;
use flate2::Compression;
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::RawDatasetRecord;
use crate::enrich::EnrichedDataset;

pub const CATALOG_MAGIC: &[u8; 9] = b"SCOUTCAT1";
pub const CATALOG_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("catalog i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a catalog snapshot")]
    BadMagic,
    #[error("unsupported catalog version {0}")]
    Version(u32),
    #[error("catalog checksum mismatch (file is corrupt)")]
    Checksum,
    #[error("catalog encoding: {0}")]
    Encoding(String),
    #[error("inconsistent catalog: {0}")]
    Invalid(String),
    #[error("catalog {0} is locked by another writer")]
    Locked(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub corpus_path: Option<String>,
    pub provider: Option<String>,
    pub model: Option<String>,
    pub embedding_model: Option<String>,
    /// Unix seconds.
    pub created_at: Option<u64>,
    pub enriched_at: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub version: u32,
    pub embedding_dim: usize,
    pub datasets: IndexMap<String, EnrichedDataset>,
    pub provenance: Provenance,
}

impl Catalog {
    pub fn new(embedding_dim: usize) -> Self {
        Self { version: CATALOG_VERSION, embedding_dim, datasets: IndexMap::new(), provenance: Provenance::default() }
    }

    /// Catalog of not-yet-enriched records, in corpus order.
    pub fn from_records(records: Vec<RawDatasetRecord>, embedding_dim: usize) -> Self {
        let mut c = Self::new(embedding_dim);
        for r in records {
            c.datasets.insert(r.id.clone(), EnrichedDataset::pending(r));
        }
        c
    }

    pub fn get(&self, id: &str) -> Option<&EnrichedDataset> {
        self.datasets.get(id)
    }

    pub fn len(&self) -> usize {
        self.datasets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.datasets.is_empty()
    }

    /// Replaces datasets by id, keeping their catalog position.
    pub fn upsert(&mut self, dataset: EnrichedDataset) {
        self.datasets.insert(dataset.record.id.clone(), dataset);
    }

    pub fn semantic(&self) -> impl Iterator<Item = &EnrichedDataset> {
        self.datasets.values().filter(|d| d.is_semantic())
    }

    pub fn validate(&self) -> Result<(), CatalogError> {
        let dim = self.embedding_dim;
        for (id, d) in &self.datasets {
            if id != d.id() {
                return Err(CatalogError::Invalid(format!("key {id:?} holds dataset {:?}", d.id())));
            }
            let vectors = d
                .dataset_embedding
                .iter()
                .chain(d.purpose_embedding.iter())
                .chain(d.attribute_embeddings.iter().map(|a| &a.vector));
            for v in vectors {
                if v.dim() != dim {
                    return Err(CatalogError::Invalid(format!("{id}: vector of dim {} in a dim-{dim} catalog", v.dim())));
                }
            }
            if d.is_semantic() && d.attribute_embeddings.len() != d.record.columns.len() {
                return Err(CatalogError::Invalid(format!("{id}: attribute embeddings do not match columns")));
            }
        }
        Ok(())
    }
}

fn encode(catalog: &Catalog) -> Result<Vec<u8>, CatalogError> {
    let raw = bincode::serialize(catalog).map_err(|e| CatalogError::Encoding(e.to_string()))?;
    let mut enc = DeflateEncoder::new(Vec::new(), Compression::fast());
    enc.write_all(&raw)?;
    let body = enc.finish()?;
    let mut out = Vec::with_capacity(body.len() + 64);
    out.extend_from_slice(CATALOG_MAGIC);
    out.extend_from_slice(&catalog.version.to_le_bytes());
    out.extend_from_slice(&Sha256::digest(&body));
    out.extend_from_slice(&(body.len() as u64).to_le_bytes());
    out.extend_from_slice(&body);
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<Catalog, CatalogError> {
    if bytes.len() < 9 + 4 + 32 + 8 || &bytes[..9] != CATALOG_MAGIC {
        return Err(CatalogError::BadMagic);
    }
    let version = u32::from_le_bytes(bytes[9..13].try_into().unwrap());
    if version != CATALOG_VERSION {
        return Err(CatalogError::Version(version));
    }
    let checksum = &bytes[13..45];
    let len = u64::from_le_bytes(bytes[45..53].try_into().unwrap()) as usize;
    let body = &bytes[53..];
    if body.len() != len || Sha256::digest(body).as_slice() != checksum {
        return Err(CatalogError::Checksum);
    }
    let mut raw = Vec::new();
    DeflateDecoder::new(body).read_to_end(&mut raw)?;
    let catalog: Catalog = bincode::deserialize(&raw).map_err(|e| CatalogError::Encoding(e.to_string()))?;
    if catalog.version != version {
        return Err(CatalogError::Version(catalog.version));
    }
    catalog.validate()?;
    Ok(catalog)
}

pub fn to_bytes(catalog: &Catalog) -> Result<Vec<u8>, CatalogError> {
    encode(catalog)
}

fn lock_path(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".lock");
    PathBuf::from(p)
}

/// Advisory single-writer lock, released on drop.
pub struct WriterLock {
    _file: File,
}

impl WriterLock {
    pub fn acquire(path: &Path) -> Result<Self, CatalogError> {
        let file = OpenOptions::new().create(true).truncate(false).write(true).open(lock_path(path))?;
        match file.try_lock() {
            Ok(()) => Ok(Self { _file: file }),
            Err(std::fs::TryLockError::WouldBlock) => Err(CatalogError::Locked(path.display().to_string())),
            Err(std::fs::TryLockError::Error(e)) => Err(CatalogError::Io(e)),
        }
    }
}

/// A fully written snapshot that is not yet visible at its destination.
pub struct StagedSnapshot {
    tmp: tempfile::NamedTempFile,
    dest: PathBuf,
}

impl StagedSnapshot {
    /// Atomically replaces the destination.
    pub fn commit(self) -> Result<(), CatalogError> {
        self.tmp.persist(&self.dest).map_err(|e| CatalogError::Io(e.error))?;
        Ok(())
    }
}

/// Writes the snapshot next to `path` without publishing it.
pub fn stage(catalog: &Catalog, path: impl AsRef<Path>) -> Result<StagedSnapshot, CatalogError> {
    catalog.validate()?;
    let path = path.as_ref();
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let bytes = encode(catalog)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    make_readable(tmp.as_file())?;
    tmp.write_all(&bytes)?;
    tmp.as_file().sync_all()?;
    Ok(StagedSnapshot { tmp, dest: path.to_path_buf() })
}

/// Temp files start owner-only; published files get the usual 0644.
pub(crate) fn make_readable(file: &File) -> std::io::Result<()> {
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        file.set_permissions(std::fs::Permissions::from_mode(0o644))?;
    }
    #[cfg(not(unix))]
    let _ = file;
    Ok(())
}

pub fn save(catalog: &Catalog, path: impl AsRef<Path>) -> Result<(), CatalogError> {
    let path = path.as_ref();
    let _lock = WriterLock::acquire(path)?;
    stage(catalog, path)?.commit()
}

pub fn load(path: impl AsRef<Path>) -> Result<Catalog, CatalogError> {
    decode(&std::fs::read(path)?)
}
