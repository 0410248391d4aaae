//! Directory-per-class image datasets and their stratified split manifests.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ClassLabel;
use crate::error::{Error, Result};
use crate::imaging::{read_pnm, Frame, PixelFormat};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::config(format!("unknown split {other:?}"))),
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Relative to the manifest root.
    pub path: PathBuf,
    pub class_id: usize,
    pub split: Split,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub root: PathBuf,
    /// Train, validation and test fractions.
    pub fractions: [f64; 3],
    pub seed: u64,
    pub labels: Vec<ClassLabel>,
    pub entries: Vec<ManifestEntry>,
}

pub const DEFAULT_FRACTIONS: [f64; 3] = [0.70, 0.15, 0.15];

/// Per-class split sizes: train and validation are rounded down, test takes
/// the remainder.
pub fn split_counts(n: usize, fractions: [f64; 3]) -> (usize, usize, usize) {
    // the epsilon absorbs representation error such as 0.7 * 2270 = 1588.999...
    let take = |f: f64| ((n as f64 * f) + 1e-9).floor() as usize;
    let train = take(fractions[0]).min(n);
    let val = take(fractions[1]).min(n - train);
    (train, val, n - train - val)
}

fn validate_fractions(f: [f64; 3]) -> Result<()> {
    if f.iter().any(|x| !(*x >= 0.0)) || (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::config(format!("split fractions {f:?} must be non-negative and sum to 1")));
    }
    Ok(())
}

fn is_image(p: &Path) -> bool {
    matches!(
        p.extension().and_then(|e| e.to_str()),
        Some("ppm") | Some("pgm")
    )
}

/// Scans `<root>/<class name>/*.ppm|*.pgm` and splits each class with a
/// seeded shuffle. Every registered class must have a non-empty directory;
/// any other directory is an error.
pub fn build_manifest(
    root: impl AsRef<Path>,
    labels: &[ClassLabel],
    fractions: [f64; 3],
    seed: u64,
) -> Result<DatasetManifest> {
    let root = root.as_ref();
    validate_fractions(fractions)?;
    let mut dirs = Vec::new();
    for entry in std::fs::read_dir(root).map_err(|e| Error::io(root, e))? {
        let entry = entry.map_err(|e| Error::io(root, e))?;
        if entry.path().is_dir() {
            dirs.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    dirs.sort();
    for d in &dirs {
        if !labels.iter().any(|l| &l.name == d) {
            return Err(Error::invalid(format!("unknown class directory {d:?}")));
        }
    }
    let mut entries = Vec::new();
    for label in labels {
        let dir = root.join(&label.name);
        if !dir.is_dir() {
            return Err(Error::invalid(format!("missing class directory {:?}", label.name)));
        }
        let mut files = Vec::new();
        for e in std::fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))? {
            let p = e.map_err(|e| Error::io(&dir, e))?.path();
            if p.is_file() && is_image(&p) {
                files.push(PathBuf::from(&label.name).join(p.file_name().expect("file has a name")));
            }
        }
        if files.is_empty() {
            return Err(Error::invalid(format!("class {:?} has no images", label.name)));
        }
        files.sort();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(label.id as u64);
        files.shuffle(&mut rng);
        let (train, val, _) = split_counts(files.len(), fractions);
        for (i, path) in files.into_iter().enumerate() {
            let split = if i < train {
                Split::Train
            } else if i < train + val {
                Split::Val
            } else {
                Split::Test
            };
            entries.push(ManifestEntry {
                path,
                class_id: label.id,
                split,
            });
        }
    }
    Ok(DatasetManifest {
        root: root.to_path_buf(),
        fractions,
        seed,
        labels: labels.to_vec(),
        entries,
    })
}

impl DatasetManifest {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: DatasetManifest = serde_json::from_str(&text)?;
        validate_fractions(m.fractions)?;
        if let Some(e) = m.entries.iter().find(|e| e.class_id >= m.labels.len()) {
            return Err(Error::invalid(format!("entry {:?} has unknown class id", e.path)));
        }
        Ok(m)
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    /// Number of entries per class in `split`.
    pub fn class_counts(&self, split: Split) -> Vec<usize> {
        let mut c = vec![0; self.labels.len()];
        for e in self.split(split) {
            c[e.class_id] += 1;
        }
        c
    }

    /// Loads every RGB image of `split`. A missing file is an error.
    pub fn load_split(&self, split: Split) -> Result<Vec<(Frame, usize)>> {
        let mut out = Vec::new();
        for e in self.split(split) {
            let path = self.root.join(&e.path);
            let frame = read_pnm(&path)?;
            if frame.format() != PixelFormat::Rgb8 {
                return Err(Error::invalid(format!("{} is not an RGB image", path.display())));
            }
            out.push((frame, e.class_id));
        }
        if out.is_empty() {
            return Err(Error::invalid(format!("split {split} is empty")));
        }
        Ok(out)
    }
}
