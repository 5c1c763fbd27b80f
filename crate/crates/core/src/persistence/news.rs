use rusqlite::{params, OptionalExtension};

use super::{
    announcement_from_row, count, enqueue_event, fetch_seminar, fetch_user, Announcement, Page, Store, StoreError,
    StoreResult,
};
use crate::domain::{AnnouncementTarget, NewsId, User, UserId};

const NEWS_COLUMNS: &str = "id, title, body, sender_id, target_type, target_id, created_at";

impl Store {
    /// Persists an announcement and queues its e-mail fan-out in the same
    /// transaction.
    pub fn post_announcement(
        &self,
        sender: UserId,
        title: &str,
        body: &str,
        target: AnnouncementTarget,
    ) -> StoreResult<Announcement> {
        let title = title.trim();
        if title.is_empty() {
            return Err(StoreError::invalid("title", "required", "title must not be empty"));
        }
        let now = self.now();
        self.write(|tx| {
            fetch_user(tx, sender)?;
            match target {
                AnnouncementTarget::Seminar(id) => {
                    fetch_seminar(tx, id).map_err(|_| {
                        StoreError::invalid("target", "invalid_reference", format!("seminar {id} does not exist"))
                    })?;
                }
                AnnouncementTarget::User(id) => {
                    fetch_user(tx, id).map_err(|_| {
                        StoreError::invalid("target", "invalid_reference", format!("user {id} does not exist"))
                    })?;
                }
                AnnouncementTarget::Everyone | AnnouncementTarget::Role(_) => {}
            }
            let (kind, target_id) = target.to_columns();
            tx.execute(
                "INSERT INTO news (title, body, sender_id, target_type, target_id, created_at) \
                 VALUES (?1, ?2, ?3, ?4, ?5, ?6)",
                params![title, body, sender.0, kind, target_id, now],
            )?;
            let id = tx.last_insert_rowid();
            enqueue_event(tx, "announcement", id, now)?;
            Ok(Announcement {
                id: NewsId(id),
                title: title.to_string(),
                body: body.to_string(),
                sender_id: sender,
                target,
                created_at: now,
            })
        })
    }

    pub fn get_announcement(&self, id: NewsId) -> StoreResult<Announcement> {
        self.read(|tx| {
            tx.query_row(&format!("SELECT {NEWS_COLUMNS} FROM news WHERE id = ?1"), [id.0], announcement_from_row)
                .optional()?
                .ok_or_else(|| StoreError::not_found("announcement", id))
        })
    }

    /// Announcements addressed to the viewer: everyone, their access level,
    /// them personally, or a seminar they attend or teach. Newest first.
    pub fn list_announcements(&self, viewer: &User, page: Page) -> StoreResult<Vec<Announcement>> {
        self.read(|tx| {
            let mut stmt = tx.prepare(&format!(
                "SELECT {NEWS_COLUMNS} FROM news WHERE target_type = 'everyone' \
                 OR (target_type = 'role' AND target_id = ?2) \
                 OR (target_type = 'user' AND target_id = ?1) \
                 OR (target_type = 'seminar' AND (\
                     target_id IN (SELECT seminar_id FROM usersseminars WHERE user_id = ?1) \
                     OR target_id IN (SELECT id FROM seminars WHERE tutor_id = ?1))) \
                 ORDER BY created_at DESC, id DESC LIMIT ?3 OFFSET ?4"
            ))?;
            let rows = stmt.query_map(
                params![viewer.id.0, viewer.access_level.code(), i64::from(page.limit), i64::from(page.offset)],
                announcement_from_row,
            )?;
            Ok(rows.collect::<Result<_, _>>()?)
        })
    }

    pub fn all_announcements(&self) -> StoreResult<Vec<Announcement>> {
        self.read(|tx| {
            let mut stmt = tx.prepare(&format!("SELECT {NEWS_COLUMNS} FROM news ORDER BY id"))?;
            let rows = stmt.query_map([], announcement_from_row)?;
            Ok(rows.collect::<Result<_, _>>()?)
        })
    }

    pub fn announcement_count(&self) -> StoreResult<u32> {
        self.read(|tx| count(tx, "SELECT COUNT(*) FROM news", []))
    }
}
