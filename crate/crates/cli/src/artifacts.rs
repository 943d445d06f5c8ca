//! Artifact files and their `.meta` sidecars.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use selrel::explain::{MethodTag, RelevanceVolume};
use selrel::meta::Sidecar;
use selrel::volume::{decode_srvl, encode_srvl};
use selrel::Volume3;
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// `dir/r.srvl` → `dir/r.meta`.
pub fn meta_path(artifact: &Path) -> PathBuf {
    artifact.with_extension("meta")
}

/// Hash of the frame files in order, names excluded.
pub fn hash_files(paths: &[PathBuf]) -> Result<String> {
    let mut h = Sha256::new();
    for p in paths {
        h.update(fs::read(p).with_context(|| format!("reading {}", p.display()))?);
    }
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

/// PNG files of `dir`, sorted by name.
pub fn frame_paths(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    paths.retain(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")));
    paths.sort();
    Ok(paths)
}

/// Writes `bytes` and a sidecar carrying `artifact_sha256`.
pub fn write_artifact(path: &Path, bytes: &[u8], mut meta: Sidecar) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    meta.set("artifact_sha256", sha256_hex(bytes))?;
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
    meta.write(meta_path(path))?;
    Ok(())
}

pub fn write_volume(path: &Path, v: &Volume3, meta: Sidecar) -> Result<()> {
    write_artifact(path, &encode_srvl(v), meta)
}

/// A volume read from disk with its sidecar (empty if absent).
pub struct LoadedVolume {
    pub path: PathBuf,
    pub volume: Volume3,
    pub meta: Sidecar,
    pub sha256: String,
}

impl LoadedVolume {
    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        let volume = decode_srvl(&bytes).with_context(|| format!("decoding {}", path.display()))?;
        let mp = meta_path(path);
        let meta = if mp.exists() {
            Sidecar::read(&mp).with_context(|| format!("reading {}", mp.display()))?
        } else {
            Sidecar::new()
        };
        Ok(LoadedVolume {
            path: path.to_path_buf(),
            volume,
            meta,
            sha256: sha256_hex(&bytes),
        })
    }

    /// Method from `--method`, else from the sidecar.
    pub fn method(&self, flag: Option<&str>) -> Result<MethodTag> {
        let s = flag
            .or_else(|| self.meta.get("method"))
            .with_context(|| format!("{} has no method in its sidecar; pass --method", self.path.display()))?;
        Ok(s.parse()?)
    }

    pub fn relevance(&self, flag: Option<&str>) -> Result<RelevanceVolume> {
        let class = self.meta.get("class").and_then(|c| c.parse().ok()).unwrap_or(0);
        Ok(RelevanceVolume::new(self.volume.clone(), self.method(flag)?, class))
    }

    pub fn stem(&self) -> String {
        self.path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "volume".into())
    }

    /// Clip key from the sidecar, or `None`.
    pub fn clip(&self) -> Option<&str> {
        self.meta.get("clip")
    }
}

/// Copies provenance keys from a parent sidecar.
pub fn inherit(meta: &mut Sidecar, parent: &Sidecar, keys: &[&str]) -> Result<()> {
    for k in keys {
        if let Some(v) = parent.get(k) {
            meta.set(k, v)?;
        }
    }
    Ok(())
}

pub const PROVENANCE: &[&str] = &["class", "model", "model_sha256", "frames_sha256", "window_start", "clip"];

/// Frames of a directory plus their combined hash.
pub struct FrameSource {
    pub frames: Vec<image::RgbImage>,
    pub sha256: String,
}

impl FrameSource {
    pub fn load(dir: &Path) -> Result<Self> {
        let paths = frame_paths(dir)?;
        anyhow::ensure!(!paths.is_empty(), "no .png frames in {}", dir.display());
        let frames = paths
            .iter()
            .map(|p| Ok(image::open(p).with_context(|| format!("decoding {}", p.display()))?.to_rgb8()))
            .collect::<Result<Vec<_>>>()?;
        Ok(FrameSource {
            frames,
            sha256: hash_files(&paths)?,
        })
    }

    /// Identifies one window of this video across artifacts.
    pub fn clip_key(&self, start: usize) -> String {
        clip_key(&self.sha256, start)
    }
}

pub fn clip_key(frames_sha256: &str, start: usize) -> String {
    format!("{}@{start}", &frames_sha256[..16.min(frames_sha256.len())])
}
