use std::collections::HashSet;

use rusqlite::{params, OptionalExtension};

use super::{enqueue_event, fetch_seminar, fetch_user, material_from_row, MaterialFile, Store, StoreError, StoreResult};
use crate::domain::{FileId, SeminarId, UserId};

const FILE_COLUMNS: &str = "id, seminar_id, uploader_id, name, media_type, size_bytes, content_hash, uploaded_at";

impl Store {
    /// Stores the bytes under their content hash and records the metadata.
    /// Identical content shares one blob. Queues the material notification.
    pub fn store_material(
        &self,
        seminar_id: SeminarId,
        uploader_id: UserId,
        name: &str,
        media_type: &str,
        bytes: &[u8],
    ) -> StoreResult<MaterialFile> {
        if bytes.is_empty() {
            return Err(StoreError::invalid("file", "required", "upload is empty"));
        }
        let size = bytes.len() as u64;
        if size > self.config.upload_limit {
            return Err(StoreError::TooLarge {
                size,
                limit: self.config.upload_limit,
            });
        }
        let name = name.trim();
        if name.is_empty() {
            return Err(StoreError::invalid("name", "required", "file name must not be empty"));
        }
        let now = self.now();
        self.write(|tx| {
            fetch_seminar(tx, seminar_id)?;
            fetch_user(tx, uploader_id)?;
            // Under the write lock so orphan collection cannot race the insert.
            let hash = self.blobs.put(bytes)?;
            tx.execute(
                "INSERT INTO files (seminar_id, uploader_id, name, media_type, size_bytes, content_hash, uploaded_at) \
                 VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7)",
                params![seminar_id.0, uploader_id.0, name, media_type, size, hash, now],
            )?;
            let id = tx.last_insert_rowid();
            enqueue_event(tx, "material", id, now)?;
            Ok(MaterialFile {
                id: FileId(id),
                seminar_id,
                uploader_id,
                name: name.to_string(),
                media_type: media_type.to_string(),
                size_bytes: size,
                content_hash: hash,
                uploaded_at: now,
            })
        })
    }

    /// Materials of a seminar, optionally filtered by a case-insensitive
    /// name substring.
    pub fn list_materials(&self, seminar_id: SeminarId, name_filter: Option<&str>) -> StoreResult<Vec<MaterialFile>> {
        let needle = name_filter.map(str::to_lowercase).unwrap_or_default();
        self.read(|tx| {
            fetch_seminar(tx, seminar_id)?;
            let mut stmt = tx.prepare(&format!(
                "SELECT {FILE_COLUMNS} FROM files WHERE seminar_id = ?1 AND instr(lower(name), ?2) > 0 \
                 ORDER BY uploaded_at, id"
            ))?;
            let rows = stmt.query_map(params![seminar_id.0, needle], material_from_row)?;
            Ok(rows.collect::<Result<_, _>>()?)
        })
    }

    pub fn get_material(&self, id: FileId) -> StoreResult<MaterialFile> {
        self.read(|tx| {
            tx.query_row(&format!("SELECT {FILE_COLUMNS} FROM files WHERE id = ?1"), [id.0], material_from_row)
                .optional()?
                .ok_or_else(|| StoreError::not_found("file", id))
        })
    }

    /// Metadata and content, with the content checked against both.
    pub fn read_material(&self, id: FileId) -> StoreResult<(MaterialFile, Vec<u8>)> {
        let meta = self.get_material(id)?;
        let bytes = self.blobs.get(&meta.content_hash)?;
        if bytes.len() as u64 != meta.size_bytes || super::blobs::content_hash(&bytes) != meta.content_hash {
            return Err(StoreError::Corrupt(format!("blob for file {id} does not match its metadata")));
        }
        Ok((meta, bytes))
    }

    /// Deletes blobs no metadata row points at.
    pub fn collect_orphan_blobs(&self) -> StoreResult<()> {
        self.write(|tx| {
            let referenced: HashSet<String> = {
                let mut stmt = tx.prepare("SELECT DISTINCT content_hash FROM files")?;
                let rows = stmt.query_map([], |r| r.get(0))?;
                rows.collect::<Result<_, _>>()?
            };
            for hash in self.blobs.list()? {
                if !referenced.contains(&hash) {
                    self.blobs.remove(&hash)?;
                }
            }
            Ok(())
        })
    }
}

#[cfg(test)]
mod tests {
    use super::super::blobs::content_hash;
    use super::super::testing::*;
    use super::*;
    use crate::domain::AccessLevel;

    #[test]
    fn upload_records_size_and_hash() {
        let f = fixture();
        let tutor = user(&f.store, "tutor", AccessLevel::Tutor);
        let s = seminar(&f.store, &tutor, "S", 5, 3);
        let m = f.store.store_material(s.id, tutor.id, "notes.pdf", "application/pdf", b"abc").unwrap();
        assert_eq!(m.size_bytes, 3);
        assert_eq!(m.content_hash, content_hash(b"abc"));
        let (meta, bytes) = f.store.read_material(m.id).unwrap();
        assert_eq!(meta, m);
        assert_eq!(bytes, b"abc");
    }

    #[test]
    fn identical_content_shares_a_blob() {
        let f = fixture();
        let tutor = user(&f.store, "tutor", AccessLevel::Tutor);
        let s = seminar(&f.store, &tutor, "S", 5, 3);
        let a = f.store.store_material(s.id, tutor.id, "a.txt", "text/plain", b"same").unwrap();
        let b = f.store.store_material(s.id, tutor.id, "b.txt", "text/plain", b"same").unwrap();
        assert_ne!(a.id, b.id);
        assert_eq!(f.store.list_materials(s.id, None).unwrap().len(), 2);
        assert_eq!(f.store.blobs().list().unwrap().len(), 1);
    }

    #[test]
    fn empty_and_oversized_uploads_rejected() {
        let f = fixture();
        let tutor = user(&f.store, "tutor", AccessLevel::Tutor);
        let s = seminar(&f.store, &tutor, "S", 5, 3);
        assert!(matches!(
            f.store.store_material(s.id, tutor.id, "x", "text/plain", b""),
            Err(StoreError::Validation(_))
        ));
        let big = vec![0u8; 1025];
        assert!(matches!(
            f.store.store_material(s.id, tutor.id, "x", "text/plain", &big),
            Err(StoreError::TooLarge { size: 1025, limit: 1024 })
        ));
        assert!(matches!(
            f.store.store_material(SeminarId(77), tutor.id, "x", "text/plain", b"1"),
            Err(StoreError::NotFound { .. })
        ));
        assert!(f.store.blobs().list().unwrap().is_empty());
    }

    #[test]
    fn name_filter_and_cascade_cleanup() {
        let f = fixture();
        let tutor = user(&f.store, "tutor", AccessLevel::Tutor);
        let s = seminar(&f.store, &tutor, "S", 5, 3);
        f.store.store_material(s.id, tutor.id, "Lecture-1.pdf", "application/pdf", b"l1").unwrap();
        f.store.store_material(s.id, tutor.id, "exercise.pdf", "application/pdf", b"e1").unwrap();
        let hits = f.store.list_materials(s.id, Some("LECT")).unwrap();
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].name, "Lecture-1.pdf");
        f.store.delete_seminar(s.id, true).unwrap();
        assert!(f.store.blobs().list().unwrap().is_empty());
    }

    #[test]
    fn tampered_blob_detected() {
        let f = fixture();
        let tutor = user(&f.store, "tutor", AccessLevel::Tutor);
        let s = seminar(&f.store, &tutor, "S", 5, 3);
        let m = f.store.store_material(s.id, tutor.id, "a", "text/plain", b"original").unwrap();
        std::fs::write(f.store.blobs().path_for(&m.content_hash), b"tampered").unwrap();
        assert!(matches!(f.store.read_material(m.id), Err(StoreError::Corrupt(_))));
    }
}
