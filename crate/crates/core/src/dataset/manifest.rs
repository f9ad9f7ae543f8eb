use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgproc::io::{is_image_path, load_gray};
use crate::imgproc::{GrayImage, Resize};

/// Directory-of-class-directories dataset description.
///
/// Sample indices run over classes in order, then files in order; the class index is the
/// position in `classes`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub root: PathBuf,
    pub classes: Vec<String>,
    pub counts: Vec<usize>,
    /// File names relative to `root/<class>/`.
    pub files: BTreeMap<String, Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_size: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub index: usize,
    pub label: usize,
    pub path: PathBuf,
}

fn read_dir_sorted(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<Vec<_>>>()?;
    entries.sort();
    Ok(entries)
}

impl DatasetManifest {
    /// Builds a manifest from `(class, files)` pairs. Classes keep the given order.
    pub fn from_parts(root: impl Into<PathBuf>, classes: Vec<(String, Vec<String>)>) -> Result<Self> {
        let mut names = Vec::new();
        let mut counts = Vec::new();
        let mut files = BTreeMap::new();
        for (class, list) in classes {
            if files.contains_key(&class) {
                return Err(Error::Dataset(format!("duplicate class {class:?}")));
            }
            if list.is_empty() {
                return Err(Error::Dataset(format!("class {class:?} has no images")));
            }
            names.push(class.clone());
            counts.push(list.len());
            files.insert(class, list);
        }
        if names.is_empty() {
            return Err(Error::Dataset("dataset has no classes".into()));
        }
        Ok(Self { root: root.into(), classes: names, counts, files, image_size: None })
    }

    /// Scans `root/<class>/<image>`; classes and files are sorted lexicographically.
    pub fn ingest(root: &Path) -> Result<Self> {
        if !root.is_dir() {
            return Err(Error::MissingArtifact(root.to_path_buf()));
        }
        let mut classes = Vec::new();
        for dir in read_dir_sorted(root)?.into_iter().filter(|p| p.is_dir()) {
            let name = dir
                .file_name()
                .and_then(|n| n.to_str())
                .ok_or_else(|| Error::Dataset(format!("non UTF-8 class directory {}", dir.display())))?
                .to_string();
            let files: Vec<String> = read_dir_sorted(&dir)?
                .into_iter()
                .filter(|p| p.is_file() && is_image_path(p))
                .filter_map(|p| p.file_name().and_then(|n| n.to_str()).map(str::to_string))
                .collect();
            if files.is_empty() {
                return Err(Error::Dataset(format!("class directory {name:?} contains no readable images")));
            }
            classes.push((name, files));
        }
        if classes.is_empty() {
            return Err(Error::Dataset(format!("{} contains no class directories", root.display())));
        }
        Self::from_parts(root, classes)
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn len(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == name)
    }

    /// All samples in index order.
    pub fn samples(&self) -> Vec<Sample> {
        let mut out = Vec::with_capacity(self.len());
        for (label, class) in self.classes.iter().enumerate() {
            for f in &self.files[class] {
                out.push(Sample { index: out.len(), label, path: self.root.join(class).join(f) });
            }
        }
        out
    }

    /// Labels for every sample index.
    pub fn labels(&self) -> Vec<usize> {
        self.counts.iter().enumerate().flat_map(|(c, &n)| std::iter::repeat_n(c, n)).collect()
    }

    pub fn sample(&self, index: usize) -> Result<Sample> {
        let mut offset = index;
        for (label, class) in self.classes.iter().enumerate() {
            let files = &self.files[class];
            if offset < files.len() {
                return Ok(Sample { index, label, path: self.root.join(class).join(&files[offset]) });
            }
            offset -= files.len();
        }
        Err(Error::Dataset(format!("sample index {index} out of range ({} samples)", self.len())))
    }

    /// Loads samples as grayscale, resizing to `size` when given.
    pub fn load_images(&self, indices: &[usize], size: Option<(usize, usize)>) -> Result<(Vec<GrayImage>, Vec<usize>)> {
        let mut images = Vec::with_capacity(indices.len());
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            let s = self.sample(i)?;
            let mut img = load_gray(&s.path)?;
            if let Some((w, h)) = size {
                if img.dims() != (w, h) {
                    img = img.resize(w, h)?;
                }
            }
            images.push(img);
            labels.push(s.label);
        }
        Ok((images, labels))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingArtifact(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: Self = serde_json::from_str(&text)?;
        if m.classes.len() != m.counts.len() {
            return Err(Error::Dataset("classes and counts differ in length".into()));
        }
        for (c, &n) in m.classes.iter().zip(&m.counts) {
            if m.files.get(c).map(Vec::len) != Some(n) {
                return Err(Error::Dataset(format!("file list for {c:?} does not match its count")));
            }
        }
        Ok(m)
    }
}
