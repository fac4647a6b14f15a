//! Dataset manifests: CSV with header `id,path,label,subset[,x0,y0,x1,y1]`.
//!
//! All bona-fide rows form one shared pool that every attack subset is
//! evaluated against. Relative paths resolve against the manifest's
//! directory.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::embedding::Label;
pub use crate::preprocess::CropBox;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("cannot read manifest {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest row {row}: {source}")]
    Csv {
        row: usize,
        #[source]
        source: csv::Error,
    },
    #[error("manifest header must start with id,path,label,subset, got {0:?}")]
    Header(Vec<String>),
    #[error("duplicate sample id {0:?}")]
    DuplicateId(String),
    #[error("row {0}: empty id")]
    EmptyId(usize),
    #[error("sample {0:?}: empty subset")]
    EmptySubset(String),
    #[error("sample {0:?}: crop box needs all of x0,y0,x1,y1 with x0<x1 and y0<y1")]
    BadCrop(String),
    #[error("bona-fide samples span several subsets: {0:?}")]
    SeveralBonaFideSubsets(Vec<String>),
    #[error("subset {0:?} mixes bona-fide and attack samples")]
    MixedSubset(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleRef {
    pub id: String,
    pub path: PathBuf,
    pub label: Label,
    pub subset: String,
    pub crop: Option<CropBox>,
}

#[derive(Debug, Deserialize)]
struct Row {
    id: String,
    path: String,
    label: Label,
    subset: String,
    x0: Option<u32>,
    y0: Option<u32>,
    x1: Option<u32>,
    y1: Option<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    samples: Vec<SampleRef>,
}

impl DatasetManifest {
    /// Builds a manifest from already-resolved samples, checking the
    /// structural invariants.
    pub fn new(samples: Vec<SampleRef>) -> Result<Self, ManifestError> {
        let mut ids = HashSet::new();
        for s in &samples {
            if s.subset.is_empty() {
                return Err(ManifestError::EmptySubset(s.id.clone()));
            }
            if !ids.insert(s.id.as_str()) {
                return Err(ManifestError::DuplicateId(s.id.clone()));
            }
        }
        let mut bf_subsets: Vec<String> = samples
            .iter()
            .filter(|s| s.label == Label::BonaFide)
            .map(|s| s.subset.clone())
            .collect();
        bf_subsets.sort();
        bf_subsets.dedup();
        if bf_subsets.len() > 1 {
            return Err(ManifestError::SeveralBonaFideSubsets(bf_subsets));
        }
        if let Some(bf) = bf_subsets.first() {
            if samples
                .iter()
                .any(|s| s.label == Label::Attack && &s.subset == bf)
            {
                return Err(ManifestError::MixedSubset(bf.clone()));
            }
        }
        Ok(Self { samples })
    }

    pub fn from_reader<R: std::io::Read>(
        reader: R,
        base_dir: &Path,
    ) -> Result<Self, ManifestError> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|source| ManifestError::Csv { row: 0, source })?
            .clone();
        let names: Vec<String> = headers.iter().map(str::to_owned).collect();
        if names.len() < 4 || names[..4] != ["id", "path", "label", "subset"] {
            return Err(ManifestError::Header(names));
        }
        let mut samples = Vec::new();
        for (i, row) in rdr.deserialize::<Row>().enumerate() {
            let row = row.map_err(|source| ManifestError::Csv { row: i + 1, source })?;
            if row.id.is_empty() {
                return Err(ManifestError::EmptyId(i + 1));
            }
            let crop = match (row.x0, row.y0, row.x1, row.y1) {
                (None, None, None, None) => None,
                (Some(x0), Some(y0), Some(x1), Some(y1)) if x0 < x1 && y0 < y1 => {
                    Some(CropBox { x0, y0, x1, y1 })
                }
                _ => return Err(ManifestError::BadCrop(row.id)),
            };
            let path = PathBuf::from(&row.path);
            let path = if path.is_absolute() {
                path
            } else {
                base_dir.join(path)
            };
            samples.push(SampleRef {
                id: row.id,
                path,
                label: row.label,
                subset: row.subset,
                crop,
            });
        }
        Self::new(samples)
    }

    pub fn load(path: &Path) -> Result<Self, ManifestError> {
        let file = std::fs::File::open(path).map_err(|source| ManifestError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_reader(file, base)
    }

    pub fn samples(&self) -> &[SampleRef] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn bona_fide_subset(&self) -> Option<&str> {
        self.samples
            .iter()
            .find(|s| s.label == Label::BonaFide)
            .map(|s| s.subset.as_str())
    }

    /// Attack subset names in order of first appearance.
    pub fn attack_subsets(&self) -> Vec<&str> {
        let mut seen = Vec::new();
        for s in self.samples.iter().filter(|s| s.label == Label::Attack) {
            if !seen.contains(&s.subset.as_str()) {
                seen.push(s.subset.as_str());
            }
        }
        seen
    }

    /// Samples whose image file does not exist.
    pub fn missing_paths(&self) -> Vec<&SampleRef> {
        self.samples.iter().filter(|s| !s.path.is_file()).collect()
    }
}
