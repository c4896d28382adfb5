use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::field::Aabb;
use crate::raster::Rgb8Image;
use crate::render::{Camera, Intrinsics};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetCamera {
    pub name: String,
    pub intrinsics: Intrinsics,
    /// World-from-camera transform, 4x4 row-major.
    pub pose: [f64; 16],
    pub split: Split,
}

impl DatasetCamera {
    pub fn camera(&self) -> Result<Camera> {
        Camera::from_matrix(self.intrinsics, &self.pose)
    }
}

/// Posed images of every frame from every camera, held in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub bounds: Aabb,
    pub background: [f64; 3],
    pub cameras: Vec<DatasetCamera>,
    /// `frames[f][c]`: frame `f` seen from camera `c`.
    pub frames: Vec<Vec<Rgb8Image>>,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    version: u32,
    bounds: Aabb,
    background: [f64; 3],
    cameras: Vec<DatasetCamera>,
    frames: Vec<ManifestFrame>,
}

#[derive(Serialize, Deserialize)]
struct ManifestFrame {
    /// Image paths relative to the manifest, one per camera.
    images: Vec<String>,
}

impl Dataset {
    pub fn new(
        bounds: Aabb,
        background: [f64; 3],
        cameras: Vec<DatasetCamera>,
        frames: Vec<Vec<Rgb8Image>>,
    ) -> Result<Self> {
        let d = Dataset {
            bounds,
            background,
            cameras,
            frames,
        };
        d.validate()?;
        Ok(d)
    }

    fn validate(&self) -> Result<()> {
        ensure!(
            !self.cameras.is_empty(),
            Structure,
            "dataset has no cameras"
        );
        for c in &self.cameras {
            c.camera()?;
        }
        for (f, imgs) in self.frames.iter().enumerate() {
            ensure!(
                imgs.len() == self.cameras.len(),
                Structure,
                "frame {f} has {} images for {} cameras",
                imgs.len(),
                self.cameras.len()
            );
            for (img, cam) in imgs.iter().zip(&self.cameras) {
                ensure!(
                    img.width == cam.intrinsics.width && img.height == cam.intrinsics.height,
                    Structure,
                    "frame {f}, camera {}: image is {}x{}, camera expects {}x{}",
                    cam.name,
                    img.width,
                    img.height,
                    cam.intrinsics.width,
                    cam.intrinsics.height
                );
            }
        }
        Ok(())
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn indices(&self, split: Split) -> Vec<usize> {
        (0..self.cameras.len())
            .filter(|&i| self.cameras[i].split == split)
            .collect()
    }

    /// Frames `range` as a new dataset sharing cameras.
    pub fn slice_frames(&self, range: std::ops::Range<usize>) -> Result<Dataset> {
        ensure!(
            range.end <= self.frames.len() && range.start < range.end,
            Structure,
            "frame range {range:?} outside dataset of {} frames",
            self.frames.len()
        );
        Ok(Dataset {
            bounds: self.bounds,
            background: self.background,
            cameras: self.cameras.clone(),
            frames: self.frames[range].to_vec(),
        })
    }

    fn image_name(frame: usize, cam: &DatasetCamera) -> String {
        format!("frame_{frame:03}/{}.png", cam.name)
    }

    /// Writes `manifest.json` and one PNG per (frame, camera) under `dir`.
    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        let mut frames = Vec::with_capacity(self.frames.len());
        for (f, imgs) in self.frames.iter().enumerate() {
            std::fs::create_dir_all(dir.join(format!("frame_{f:03}")))
                .map_err(|e| Error::io(dir, e))?;
            let mut names = Vec::with_capacity(imgs.len());
            for (img, cam) in imgs.iter().zip(&self.cameras) {
                let name = Self::image_name(f, cam);
                img.save(&dir.join(&name))?;
                names.push(name);
            }
            frames.push(ManifestFrame { images: names });
        }
        let manifest = Manifest {
            version: 1,
            bounds: self.bounds,
            background: self.background,
            cameras: self.cameras.clone(),
            frames,
        };
        let path = dir.join(MANIFEST_NAME);
        let text = serde_json::to_string_pretty(&manifest)?;
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    /// Loads a manifest file, or `manifest.json` inside a directory.
    pub fn load(path: &Path) -> Result<Self> {
        let path = if path.is_dir() {
            path.join(MANIFEST_NAME)
        } else {
            path.to_path_buf()
        };
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let m: Manifest = serde_json::from_str(&text)?;
        ensure!(
            m.version == 1,
            Format,
            "unsupported manifest version {}",
            m.version
        );
        let root = path.parent().unwrap_or(Path::new("."));
        let frames = m
            .frames
            .iter()
            .map(|f| {
                f.images
                    .iter()
                    .map(|name| Rgb8Image::load(&root.join(name)))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(m.bounds, m.background, m.cameras, frames)
    }
}
