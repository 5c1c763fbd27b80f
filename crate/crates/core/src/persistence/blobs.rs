use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

/// Content-addressed blob directory: `<root>/<first-2-hex>/<full-hash>`.
#[derive(Debug, Clone)]
pub struct BlobStore {
    root: PathBuf,
}

pub fn content_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl BlobStore {
    pub fn open(root: &Path) -> std::io::Result<Self> {
        fs::create_dir_all(root.join("tmp"))?;
        Ok(BlobStore { root: root.to_path_buf() })
    }

    pub fn path_for(&self, hash: &str) -> PathBuf {
        self.root.join(&hash[..2]).join(hash)
    }

    /// Writes the blob if it is not already present. The file appears under
    /// its final name only once fully written and synced.
    pub fn put(&self, bytes: &[u8]) -> std::io::Result<String> {
        let hash = content_hash(bytes);
        let dest = self.path_for(&hash);
        if dest.exists() {
            return Ok(hash);
        }
        fs::create_dir_all(dest.parent().expect("blob path has a parent"))?;
        let tmp = self.root.join("tmp").join(format!("{hash}.{}", rand::random::<u64>()));
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(bytes)?;
            f.sync_all()?;
        }
        fs::rename(&tmp, &dest)?;
        Ok(hash)
    }

    pub fn get(&self, hash: &str) -> std::io::Result<Vec<u8>> {
        fs::read(self.path_for(hash))
    }

    pub fn remove(&self, hash: &str) -> std::io::Result<()> {
        match fs::remove_file(self.path_for(hash)) {
            Err(e) if e.kind() != std::io::ErrorKind::NotFound => Err(e),
            _ => Ok(()),
        }
    }

    /// Hashes of every stored blob, sorted.
    pub fn list(&self) -> std::io::Result<Vec<String>> {
        let mut out = Vec::new();
        for shard in fs::read_dir(&self.root)? {
            let shard = shard?;
            if shard.file_name() == "tmp" || !shard.file_type()?.is_dir() {
                continue;
            }
            for entry in fs::read_dir(shard.path())? {
                out.push(entry?.file_name().to_string_lossy().into_owned());
            }
        }
        out.sort();
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn put_is_idempotent_and_sharded() {
        let dir = tempfile::tempdir().unwrap();
        let blobs = BlobStore::open(dir.path()).unwrap();
        let h1 = blobs.put(b"abc").unwrap();
        let h2 = blobs.put(b"abc").unwrap();
        assert_eq!(h1, h2);
        assert_eq!(h1, "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        assert!(dir.path().join("ba").join(&h1).is_file());
        assert_eq!(blobs.list().unwrap(), vec![h1.clone()]);
        assert_eq!(blobs.get(&h1).unwrap(), b"abc");
        assert_eq!(fs::read_dir(dir.path().join("tmp")).unwrap().count(), 0);
        blobs.remove(&h1).unwrap();
        blobs.remove(&h1).unwrap();
        assert!(blobs.list().unwrap().is_empty());
    }
}
