use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

use super::codec::{load_png, save_png, CodecError};
use super::RasterImage;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("{0} is not a 64-digit lowercase hex digest")]
    BadDigest(String),
    #[error("stored image {0} does not match its digest")]
    Corrupt(String),
}

/// Lowercase hex SHA-256 over the width and height (big-endian u32) followed
/// by the RGB pixel bytes.
pub fn content_digest(img: &RasterImage) -> String {
    let mut h = Sha256::new();
    h.update((img.width() as u32).to_be_bytes());
    h.update((img.height() as u32).to_be_bytes());
    h.update(img.pixels());
    hex::encode(h.finalize())
}

/// Directory of PNGs named `<digest>.png`.
#[derive(Debug, Clone)]
pub struct ImageStore {
    root: PathBuf,
}

impl ImageStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|source| StoreError::Io {
            path: root.clone(),
            source,
        })?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_of(&self, digest: &str) -> PathBuf {
        self.root.join(format!("{digest}.png"))
    }

    /// Stores `img` (idempotent) and returns its digest.
    pub fn put(&self, img: &RasterImage) -> Result<String, StoreError> {
        let digest = content_digest(img);
        let path = self.path_of(&digest);
        if !path.exists() {
            let bytes = save_png(img)?;
            let tmp = self.root.join(format!(".{digest}.tmp"));
            fs::write(&tmp, bytes).map_err(|source| StoreError::Io { path: tmp.clone(), source })?;
            fs::rename(&tmp, &path).map_err(|source| StoreError::Io { path: path.clone(), source })?;
        }
        Ok(digest)
    }

    pub fn get(&self, digest: &str) -> Result<RasterImage, StoreError> {
        if digest.len() != 64 || !digest.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b)) {
            return Err(StoreError::BadDigest(digest.to_string()));
        }
        let path = self.path_of(digest);
        let bytes = fs::read(&path).map_err(|source| StoreError::Io { path, source })?;
        let img = load_png(&bytes)?;
        if content_digest(&img) != digest {
            return Err(StoreError::Corrupt(digest.to_string()));
        }
        Ok(img)
    }
}
