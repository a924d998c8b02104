//! On-disk session layout:
//!
//! ```text
//! <data_dir>/sessions/<id>/image        uploaded bytes, unchanged
//!                         /session.json  metadata
//!                         /spec.json     last spec that produced a bundle
//!                         /bundle        symlink to the current version
//!                         /bundles/<v>/  immutable bundle versions
//! ```
//!
//! A new bundle is fully written under `bundles/` before the `bundle`
//! symlink is swapped with a rename, so readers never see a partial one.

use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use dragkit_formats::bundle::stage_files;
use serde::{Deserialize, Serialize};
use uuid::Uuid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMeta {
    pub id: String,
    pub width: usize,
    pub height: usize,
    pub created_ms: u64,
    pub updated_ms: u64,
}

#[derive(Debug, Clone)]
pub struct Store {
    sessions: PathBuf,
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

fn write_replace(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension(format!("tmp-{}", Uuid::new_v4().simple()));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)
}

/// Session ids are simple-format UUIDs; anything else never names a directory.
pub fn valid_id(id: &str) -> bool {
    id.len() == 32 && Uuid::try_parse(id).is_ok()
}

impl Store {
    pub fn open(data_dir: &Path) -> io::Result<Self> {
        let sessions = data_dir.join("sessions");
        std::fs::create_dir_all(&sessions)?;
        Ok(Self { sessions })
    }

    pub fn session_dir(&self, id: &str) -> Option<PathBuf> {
        let dir = self.sessions.join(id);
        (valid_id(id) && dir.join("session.json").is_file()).then_some(dir)
    }

    pub fn bundle_dir(&self, id: &str) -> Option<PathBuf> {
        self.session_dir(id).map(|d| d.join("bundle")).filter(|b| b.is_dir())
    }

    pub fn create(&self, image: &[u8], width: usize, height: usize) -> io::Result<SessionMeta> {
        let id = Uuid::new_v4().simple().to_string();
        let now = now_ms();
        let meta = SessionMeta { id: id.clone(), width, height, created_ms: now, updated_ms: now };
        let staging = self.sessions.join(format!(".new-{id}"));
        std::fs::create_dir(&staging)?;
        std::fs::write(staging.join("image"), image)?;
        std::fs::write(staging.join("session.json"), serde_json::to_vec_pretty(&meta)?)?;
        std::fs::rename(&staging, self.sessions.join(&id))?;
        Ok(meta)
    }

    pub fn image(&self, id: &str) -> io::Result<Vec<u8>> {
        let dir = self.session_dir(id).ok_or_else(|| io::Error::from(io::ErrorKind::NotFound))?;
        std::fs::read(dir.join("image"))
    }

    /// Publishes a new bundle version and records the spec that produced it.
    /// Keeps the previous version so in-flight reads of it can finish.
    pub fn publish(&self, id: &str, spec_json: &str, files: &BTreeMap<String, Vec<u8>>) -> io::Result<PathBuf> {
        let dir = self.session_dir(id).ok_or_else(|| io::Error::from(io::ErrorKind::NotFound))?;
        let versions = dir.join("bundles");
        let staged = stage_files(&versions, files).map_err(io::Error::other)?;
        let name = format!("v-{}", Uuid::new_v4().simple());
        std::fs::rename(&staged, versions.join(&name))?;

        let link = dir.join("bundle");
        let previous = std::fs::read_link(&link).ok();
        let tmp_link = dir.join(format!(".bundle-{}", Uuid::new_v4().simple()));
        std::os::unix::fs::symlink(Path::new("bundles").join(&name), &tmp_link)?;
        std::fs::rename(&tmp_link, &link)?;

        write_replace(&dir.join("spec.json"), spec_json.as_bytes())?;
        let meta_path = dir.join("session.json");
        let mut meta: SessionMeta = serde_json::from_slice(&std::fs::read(&meta_path)?)?;
        meta.updated_ms = now_ms();
        write_replace(&meta_path, &serde_json::to_vec_pretty(&meta)?)?;

        let keep: Vec<PathBuf> = [Some(PathBuf::from(&name)), previous.and_then(|p| p.file_name().map(PathBuf::from))]
            .into_iter()
            .flatten()
            .collect();
        for entry in std::fs::read_dir(&versions)?.flatten() {
            let n = PathBuf::from(entry.file_name());
            let is_version = n.to_string_lossy().starts_with("v-");
            if is_version && !keep.contains(&n) {
                let _ = std::fs::remove_dir_all(entry.path());
            }
        }
        Ok(versions.join(name))
    }
}
