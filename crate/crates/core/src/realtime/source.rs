use std::collections::VecDeque;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::imgproc::io::{is_image_path, load_gray};
use crate::imgproc::GrayImage;

/// A stream of grayscale frames; `None` marks the end of the stream.
pub trait FrameSource {
    fn next_frame(&mut self) -> Result<Option<GrayImage>>;
}

/// Recorded frames read from a directory in file-name order.
#[derive(Debug, Clone)]
pub struct DirectorySource {
    paths: VecDeque<PathBuf>,
}

impl DirectorySource {
    pub fn open(dir: &Path) -> Result<Self> {
        if !dir.is_dir() {
            return Err(Error::MissingArtifact(dir.to_path_buf()));
        }
        let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && is_image_path(p))
            .collect();
        paths.sort();
        Ok(Self { paths: paths.into() })
    }

    pub fn remaining(&self) -> usize {
        self.paths.len()
    }
}

impl FrameSource for DirectorySource {
    fn next_frame(&mut self) -> Result<Option<GrayImage>> {
        self.paths.pop_front().map(|p| load_gray(&p)).transpose()
    }
}

/// Frames already held in memory.
#[derive(Debug, Clone, Default)]
pub struct MemorySource {
    frames: VecDeque<GrayImage>,
}

impl MemorySource {
    pub fn new(frames: impl IntoIterator<Item = GrayImage>) -> Self {
        Self { frames: frames.into_iter().collect() }
    }
}

impl FrameSource for MemorySource {
    fn next_frame(&mut self) -> Result<Option<GrayImage>> {
        Ok(self.frames.pop_front())
    }
}

/// Where live frames come from: a camera index or a directory of recorded frames.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SourceSpec {
    Camera(u32),
    Directory(PathBuf),
}

impl FromStr for SourceSpec {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.parse::<u32>() {
            Ok(i) => SourceSpec::Camera(i),
            Err(_) => SourceSpec::Directory(PathBuf::from(s)),
        })
    }
}

impl SourceSpec {
    pub fn open(&self) -> Result<Box<dyn FrameSource>> {
        match self {
            SourceSpec::Camera(i) => Err(Error::Parameter(format!(
                "camera {i}: device capture is not supported by this build; record frames to a directory and pass its path"
            ))),
            SourceSpec::Directory(d) => Ok(Box::new(DirectorySource::open(d)?)),
        }
    }
}
