//! EMB1 embedding cache files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "EMB1"                     4-byte magic
//! dim: u32
//! repeated until EOF:
//!     key_len: u16
//!     key: key_len bytes of UTF-8
//!     values: dim x f32
//! ```
//!
//! Entries are kept in insertion order so writing the same cache twice
//! produces identical bytes.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use indexmap::IndexMap;
use thiserror::Error;

use crate::embedding::{Embedding, EmbeddingError};

pub const MAGIC: &[u8; 4] = b"EMB1";

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic {0:?}, expected \"EMB1\"")]
    BadMagic([u8; 4]),
    #[error("cache dimension must be positive")]
    ZeroDim,
    #[error("entry {key:?} has dimension {got}, cache dimension is {expected}")]
    DimMismatch {
        key: String,
        expected: usize,
        got: usize,
    },
    #[error("duplicate key {0:?}")]
    DuplicateKey(String),
    #[error("key is longer than 65535 bytes")]
    KeyTooLong,
    #[error("key is not valid UTF-8")]
    InvalidKey,
    #[error("truncated record after {0} complete entries")]
    Truncated(usize),
    #[error("entry {key:?}: {source}")]
    BadValues {
        key: String,
        #[source]
        source: EmbeddingError,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingCache {
    dim: usize,
    entries: IndexMap<String, Vec<f32>>,
}

impl EmbeddingCache {
    pub fn new(dim: usize) -> Result<Self, CacheError> {
        if dim == 0 || u32::try_from(dim).is_err() {
            return Err(CacheError::ZeroDim);
        }
        Ok(Self {
            dim,
            entries: IndexMap::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Inserts a new entry. Values are stored at single precision.
    pub fn insert(&mut self, key: impl Into<String>, values: &[f32]) -> Result<(), CacheError> {
        let key = key.into();
        if key.len() > usize::from(u16::MAX) {
            return Err(CacheError::KeyTooLong);
        }
        if values.len() != self.dim {
            return Err(CacheError::DimMismatch {
                key,
                expected: self.dim,
                got: values.len(),
            });
        }
        if self.entries.contains_key(&key) {
            return Err(CacheError::DuplicateKey(key));
        }
        self.entries.insert(key, values.to_vec());
        Ok(())
    }

    pub fn insert_embedding(
        &mut self,
        key: impl Into<String>,
        e: &Embedding,
    ) -> Result<(), CacheError> {
        self.insert(key, &e.to_f32())
    }

    pub fn get_raw(&self, key: &str) -> Option<&[f32]> {
        self.entries.get(key).map(Vec::as_slice)
    }

    /// Looks up `key` and widens the stored values to `f64`.
    pub fn get(&self, key: &str) -> Option<Result<Embedding, CacheError>> {
        self.entries.get(key).map(|v| {
            Embedding::from_f32(v).map_err(|source| CacheError::BadValues {
                key: key.to_owned(),
                source,
            })
        })
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), CacheError> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        for (key, values) in &self.entries {
            w.write_all(&(key.len() as u16).to_le_bytes())?;
            w.write_all(key.as_bytes())?;
            for v in values {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(8 + self.entries.len() * (2 + 16 + 4 * self.dim));
        self.write_to(&mut buf)
            .expect("writing to a Vec cannot fail");
        buf
    }

    pub fn save(&self, path: &Path) -> Result<(), CacheError> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, CacheError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(CacheError::BadMagic(magic));
        }
        let mut dim = [0u8; 4];
        r.read_exact(&mut dim)?;
        let mut cache = Self::new(u32::from_le_bytes(dim) as usize)?;

        let mut record = vec![0u8; 4 * cache.dim];
        loop {
            let mut len = [0u8; 2];
            match read_or_eof(&mut r, &mut len)? {
                Fill::Eof => break,
                Fill::Partial => return Err(CacheError::Truncated(cache.len())),
                Fill::Full => {}
            }
            let mut key = vec![0u8; usize::from(u16::from_le_bytes(len))];
            if !matches!(read_or_eof(&mut r, &mut key)?, Fill::Full) {
                return Err(CacheError::Truncated(cache.len()));
            }
            let key = String::from_utf8(key).map_err(|_| CacheError::InvalidKey)?;
            if !matches!(read_or_eof(&mut r, &mut record)?, Fill::Full) {
                return Err(CacheError::Truncated(cache.len()));
            }
            let values: Vec<f32> = record
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect();
            cache.insert(key, &values)?;
        }
        Ok(cache)
    }

    pub fn load(path: &Path) -> Result<Self, CacheError> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

enum Fill {
    Full,
    Partial,
    Eof,
}

fn read_or_eof<R: Read>(r: &mut R, buf: &mut [u8]) -> io::Result<Fill> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => {
                return Ok(if filled == 0 {
                    Fill::Eof
                } else {
                    Fill::Partial
                });
            }
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(Fill::Full)
}
