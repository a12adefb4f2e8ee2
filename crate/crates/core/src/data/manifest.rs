//! Dataset ingestion: deterministic directory scanning into a manifest.
//!
//! Layout contract: `root/<class-name>/<image files>`. Classes are sorted
//! lexicographically, files by name, so a manifest (and its checksum) is a
//! pure function of the file tree.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST_VERSION: u32 = 1;

/// The five species of the canonical dataset, in lexicographic order, with
/// the sample counts its published composition reports.
pub const CANONICAL_SPECIES: [(&str, usize); 5] = [
    ("Helicotylenchus dihystera", 556),
    ("Heterodera glycines (J2)", 605),
    ("Meloydogine incognita (J2)", 635),
    ("Pratylenchus brachyurus", 635),
    ("Rotylenchulus reniformis", 632),
];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleRecord {
    /// Path relative to the dataset root.
    pub path: PathBuf,
    pub class: usize,
    pub width: u32,
    pub height: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: u32,
    pub root: PathBuf,
    /// Class names in lexicographic order; `SampleRecord::class` indexes
    /// into this list.
    pub classes: Vec<String>,
    pub records: Vec<SampleRecord>,
    /// SHA-256 over the ordered relative paths and file contents, so two
    /// datasets with the same layout but different pixels never collide.
    pub checksum: String,
}

impl DatasetManifest {
    pub fn labels(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.class).collect()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.classes.len()];
        for r in &self.records {
            counts[r.class] += 1;
        }
        counts
    }

    pub fn absolute_path(&self, record: &SampleRecord) -> PathBuf {
        self.root.join(&record.path)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// A scanned manifest plus non-fatal observations (for example count
/// deviations from the canonical dataset composition).
#[derive(Clone, Debug)]
pub struct ScanOutcome {
    pub manifest: DatasetManifest,
    pub warnings: Vec<String>,
}

fn is_image_file(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()).as_deref(),
        Some("png" | "jpg" | "jpeg")
    )
}

/// Scan `root/<class>/<images>` into a deterministic manifest.
pub fn scan_dataset(root: impl AsRef<Path>) -> Result<ScanOutcome> {
    let root = root.as_ref();
    if !root.is_dir() {
        return Err(Error::Data(format!("dataset root `{}` is not a directory", root.display())));
    }
    let mut classes: Vec<String> = Vec::new();
    for entry in std::fs::read_dir(root)? {
        let entry = entry?;
        if entry.file_type()?.is_dir() {
            let name = entry.file_name().to_string_lossy().into_owned();
            if !name.starts_with('.') {
                classes.push(name);
            }
        }
    }
    if classes.is_empty() {
        return Err(Error::Data(format!(
            "dataset root `{}` contains no class directories",
            root.display()
        )));
    }
    classes.sort();

    let mut records = Vec::new();
    let mut hasher = Sha256::new();
    for (class_idx, class) in classes.iter().enumerate() {
        let dir = root.join(class);
        let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)?
            .collect::<std::io::Result<Vec<_>>>()?
            .into_iter()
            .map(|e| e.path())
            .filter(|p| p.is_file() && is_image_file(p))
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(Error::Data(format!("class directory `{}` contains no images", dir.display())));
        }
        for file in files {
            let bytes = std::fs::read(&file)?;
            let (width, height) = image::ImageReader::new(std::io::Cursor::new(&bytes))
                .with_guessed_format()?
                .into_dimensions()
                .map_err(|e| Error::Data(format!("unreadable image `{}`: {e}", file.display())))?;
            let rel = PathBuf::from(class).join(file.file_name().expect("file has a name"));
            hasher.update(rel.to_string_lossy().as_bytes());
            hasher.update(b"\n");
            hasher.update(&bytes);
            records.push(SampleRecord { path: rel, class: class_idx, width, height });
        }
    }
    let checksum = hex_string(&hasher.finalize());

    let manifest = DatasetManifest {
        version: MANIFEST_VERSION,
        root: root.to_path_buf(),
        classes,
        records,
        checksum,
    };

    let mut warnings = Vec::new();
    let canonical: Vec<&str> = CANONICAL_SPECIES.iter().map(|(name, _)| *name).collect();
    if manifest.classes == canonical {
        for ((name, expected), got) in CANONICAL_SPECIES.iter().zip(manifest.class_counts()) {
            if got != *expected {
                warnings.push(format!(
                    "class `{name}`: {got} images, canonical composition lists {expected}"
                ));
            }
        }
    }
    Ok(ScanOutcome { manifest, warnings })
}

fn hex_string(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        s.push_str(&format!("{b:02x}"));
    }
    s
}
