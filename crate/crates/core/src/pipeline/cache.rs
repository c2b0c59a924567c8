//! Content-addressed storage of stage outputs.

use std::fs::{self, File};
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Environment variable overriding the cache location.
pub const CACHE_ENV: &str = "EMOCASCADE_CACHE_DIR";
const COMPLETE: &str = ".complete";

/// Accumulates everything a stage's output depends on into one digest.
pub struct KeyBuilder(Sha256);

impl KeyBuilder {
    pub fn new(stage: &str, version: u32) -> Self {
        let mut h = Sha256::new();
        h.update(format!("{stage}\0{version}\0"));
        Self(h)
    }

    pub fn text(mut self, label: &str, value: &str) -> Self {
        self.0.update(format!("{label}\0{}\0{value}\0", value.len()));
        self
    }

    pub fn json<T: Serialize>(self, label: &str, value: &T) -> Self {
        let text = serde_json::to_string(value).expect("parameters serialise");
        self.text(label, &text)
    }

    /// Hashes a file's bytes; an absent optional input hashes as `-`.
    pub fn file(self, label: &str, path: Option<&Path>) -> Result<Self> {
        let digest = match path {
            Some(p) => hash_file(p)?,
            None => "-".to_string(),
        };
        Ok(self.text(label, &digest))
    }

    pub fn finish(self) -> String {
        hex::encode(self.0.finalize())
    }
}

pub fn hash_file(path: &Path) -> Result<String> {
    let mut f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

/// Where a stage entry stands relative to the cache.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CacheState {
    /// An entry for the current key exists.
    Fresh,
    /// Only entries for other keys exist: some input changed.
    Stale,
    Missing,
}

#[derive(Debug, Clone)]
pub struct Cache {
    root: PathBuf,
}

impl Cache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn entry(&self, stage: &str, key: &str) -> PathBuf {
        self.root.join(stage).join(key)
    }

    pub fn lookup(&self, stage: &str, key: &str) -> Option<PathBuf> {
        let dir = self.entry(stage, key);
        dir.join(COMPLETE).is_file().then_some(dir)
    }

    pub fn state(&self, stage: &str, key: &str) -> CacheState {
        if self.lookup(stage, key).is_some() {
            return CacheState::Fresh;
        }
        let others = fs::read_dir(self.root.join(stage))
            .map(|rd| rd.filter_map(|e| e.ok()).any(|e| e.path().join(COMPLETE).is_file()))
            .unwrap_or(false);
        if others {
            CacheState::Stale
        } else {
            CacheState::Missing
        }
    }

    /// Runs `produce` in a scratch directory and publishes it under the key.
    pub fn store(&self, stage: &str, key: &str, produce: impl FnOnce(&Path) -> Result<()>) -> Result<PathBuf> {
        let dir = self.entry(stage, key);
        let scratch = self.root.join(stage).join(format!("{key}.partial-{}", std::process::id()));
        if scratch.exists() {
            fs::remove_dir_all(&scratch).map_err(|e| Error::io(&scratch, e))?;
        }
        fs::create_dir_all(&scratch).map_err(|e| Error::io(&scratch, e))?;
        if let Err(e) = produce(&scratch) {
            let _ = fs::remove_dir_all(&scratch);
            return Err(e);
        }
        fs::write(scratch.join(COMPLETE), key).map_err(|e| Error::io(&scratch, e))?;
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        fs::rename(&scratch, &dir).map_err(|e| Error::io(&dir, e))?;
        Ok(dir)
    }
}

/// Replaces `dst` with a copy of `src`, leaving out the cache marker.
pub fn copy_dir(src: &Path, dst: &Path) -> Result<()> {
    if dst.exists() {
        fs::remove_dir_all(dst).map_err(|e| Error::io(dst, e))?;
    }
    fs::create_dir_all(dst).map_err(|e| Error::io(dst, e))?;
    for entry in fs::read_dir(src).map_err(|e| Error::io(src, e))? {
        let entry = entry.map_err(|e| Error::io(src, e))?;
        let path = entry.path();
        let name = entry.file_name();
        if name == COMPLETE {
            continue;
        }
        let target = dst.join(&name);
        if path.is_dir() {
            copy_dir(&path, &target)?;
        } else {
            fs::copy(&path, &target).map_err(|e| Error::io(&target, e))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_depend_on_content() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("x");
        fs::write(&f, "a").unwrap();
        let k1 = KeyBuilder::new("s", 1).file("x", Some(&f)).unwrap().finish();
        let k2 = KeyBuilder::new("s", 1).file("x", Some(&f)).unwrap().finish();
        fs::write(&f, "b").unwrap();
        let k3 = KeyBuilder::new("s", 1).file("x", Some(&f)).unwrap().finish();
        assert_eq!(k1, k2);
        assert_ne!(k1, k3);
        assert_ne!(KeyBuilder::new("s", 1).text("a", "bc").finish(), KeyBuilder::new("s", 1).text("ab", "c").finish());
    }

    #[test]
    fn store_lookup_and_state() {
        let dir = tempfile::tempdir().unwrap();
        let cache = Cache::new(dir.path());
        assert_eq!(cache.state("s", "k1"), CacheState::Missing);
        assert!(cache.store("s", "k1", |_| Err(Error::invalid("boom"))).is_err());
        assert_eq!(cache.state("s", "k1"), CacheState::Missing);
        let d = cache.store("s", "k1", |p| fs::write(p.join("out.txt"), "x").map_err(|e| Error::io(p, e))).unwrap();
        assert_eq!(cache.lookup("s", "k1"), Some(d.clone()));
        assert_eq!(cache.state("s", "k2"), CacheState::Stale);
        let copy = dir.path().join("copy");
        copy_dir(&d, &copy).unwrap();
        assert_eq!(fs::read_to_string(copy.join("out.txt")).unwrap(), "x");
        assert!(!copy.join(COMPLETE).exists());
    }
}
