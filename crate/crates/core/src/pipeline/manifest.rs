use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One frame's input files, as resolved paths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameEntry {
    pub id: String,
    pub dir: PathBuf,
    pub cloud: PathBuf,
    pub calib: PathBuf,
    pub image: PathBuf,
    pub meta: PathBuf,
    pub gt_class: Option<PathBuf>,
}

/// Ordered frames of a run.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FrameManifest {
    pub frames: Vec<FrameEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestFile {
    #[serde(default)]
    frame: Vec<EntryFile>,
}

/// Component paths are relative to `dir`, which is relative to the manifest.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntryFile {
    id: String,
    dir: PathBuf,
    #[serde(default = "names::cloud")]
    cloud: PathBuf,
    #[serde(default = "names::calib")]
    calib: PathBuf,
    #[serde(default = "names::image")]
    image: PathBuf,
    #[serde(default = "names::meta")]
    meta: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gt_class: Option<PathBuf>,
}

mod names {
    use std::path::PathBuf;
    pub fn cloud() -> PathBuf {
        "cloud.csv".into()
    }
    pub fn calib() -> PathBuf {
        "calib.toml".into()
    }
    pub fn image() -> PathBuf {
        "image.ppm".into()
    }
    pub fn meta() -> PathBuf {
        "meta.toml".into()
    }
}

impl FrameManifest {
    /// Parses a manifest and checks that ids are unique and every listed file exists.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingArtifact(path.to_path_buf()),
            _ => Error::io(path, e),
        })?;
        let file: ManifestFile =
            toml::from_str(&text).map_err(|e| Error::format(path.display().to_string(), e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let mut seen = BTreeSet::new();
        let mut frames = Vec::with_capacity(file.frame.len());
        for e in file.frame {
            if !seen.insert(e.id.clone()) {
                return Err(Error::format(
                    path.display().to_string(),
                    format!("duplicate frame id `{}`", e.id),
                ));
            }
            let dir = base.join(&e.dir);
            let entry = FrameEntry {
                cloud: dir.join(e.cloud),
                calib: dir.join(e.calib),
                image: dir.join(e.image),
                meta: dir.join(e.meta),
                gt_class: e.gt_class.map(|g| dir.join(g)),
                id: e.id,
                dir,
            };
            for p in [&entry.cloud, &entry.calib, &entry.image, &entry.meta]
                .into_iter()
                .chain(entry.gt_class.as_ref())
            {
                if !p.is_file() {
                    return Err(Error::MissingArtifact(p.clone()));
                }
            }
            frames.push(entry);
        }
        Ok(Self { frames })
    }

    /// Writes a manifest listing frame directories `dirs` (relative to the
    /// manifest) with the standard file names.
    pub fn write(path: &Path, frames: &[(String, PathBuf, bool)]) -> Result<()> {
        let file = ManifestFile {
            frame: frames
                .iter()
                .map(|(id, dir, has_gt)| EntryFile {
                    id: id.clone(),
                    dir: dir.clone(),
                    cloud: names::cloud(),
                    calib: names::calib(),
                    image: names::image(),
                    meta: names::meta(),
                    gt_class: has_gt.then(|| "gt_class.pgm".into()),
                })
                .collect(),
        };
        let text = toml::to_string(&file).map_err(|e| Error::format("manifest", e.to_string()))?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}
