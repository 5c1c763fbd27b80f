use rusqlite::{params, OptionalExtension, Transaction};

use super::{
    count, fetch_seminar, seminar_from_row, Page, SeminarListing, SeminarPatch, Store, StoreError, StoreResult,
    SEMINAR_COLUMNS, USER_COLUMNS,
};
use crate::domain::{
    validate_seminar, AnnouncementTarget, NewSeminar, Seminar, SeminarDraft, SeminarId, SeminarState, User, UserId,
    Violation,
};

fn lookup_tutor(tx: &Transaction<'_>, id: Option<UserId>) -> StoreResult<Option<User>> {
    let Some(id) = id else { return Ok(None) };
    Ok(tx
        .query_row(
            &format!("SELECT {USER_COLUMNS} FROM users WHERE id = ?1"),
            [id.0],
            super::user_from_row,
        )
        .optional()?)
}

fn listing_query(filter: &str) -> String {
    let cols = SEMINAR_COLUMNS
        .split(", ")
        .map(|c| format!("s.{c}"))
        .collect::<Vec<_>>()
        .join(", ");
    format!(
        "SELECT {cols}, (SELECT COUNT(*) FROM usersseminars e WHERE e.seminar_id = s.id) \
         FROM seminars s {filter} ORDER BY s.start_date, s.id LIMIT ?1 OFFSET ?2"
    )
}

impl Store {
    /// Validates the draft against the current tutor table and inserts it in
    /// state `Open`.
    pub fn create_seminar(&self, draft: &SeminarDraft) -> StoreResult<Seminar> {
        let default_threshold = self.config.default_threshold;
        self.write(|tx| {
            let tutor = lookup_tutor(tx, draft.tutor_id)?;
            let new = validate_seminar(draft, tutor.as_ref(), default_threshold).map_err(StoreError::Validation)?;
            insert_seminar(tx, &new)?;
            fetch_seminar(tx, SeminarId(tx.last_insert_rowid()))
        })
    }

    pub fn get_seminar(&self, id: SeminarId) -> StoreResult<Seminar> {
        self.read(|tx| fetch_seminar(tx, id))
    }

    /// Seminars accepting enrollment, each with its live participant count.
    pub fn list_open_seminars(&self, page: Page) -> StoreResult<Vec<SeminarListing>> {
        self.list_seminars(true, page)
    }

    pub fn list_seminars(&self, open_only: bool, page: Page) -> StoreResult<Vec<SeminarListing>> {
        let filter = if open_only { "WHERE s.state = 'open'" } else { "" };
        self.read(|tx| {
            let mut stmt = tx.prepare(&listing_query(filter))?;
            let rows = stmt.query_map(params![i64::from(page.limit), i64::from(page.offset)], |row| {
                Ok(SeminarListing {
                    seminar: seminar_from_row(row)?,
                    enrolled_count: row.get(11)?,
                })
            })?;
            Ok(rows.collect::<Result<_, _>>()?)
        })
    }

    pub fn enrolled_count(&self, id: SeminarId) -> StoreResult<u32> {
        self.read(|tx| {
            fetch_seminar(tx, id)?;
            count(tx, "SELECT COUNT(*) FROM usersseminars WHERE seminar_id = ?1", [id.0])
        })
    }

    /// Applies a partial update. Capacity cannot drop below the current
    /// enrollment, hours cannot drop below an already recorded hour, and the
    /// state only moves forward (finalization has its own operation).
    pub fn update_seminar(&self, id: SeminarId, patch: &SeminarPatch) -> StoreResult<Seminar> {
        let default_threshold = self.config.default_threshold;
        self.write(|tx| {
            let current = fetch_seminar(tx, id)?;
            if current.state == SeminarState::Finalized {
                return Err(StoreError::SeminarFinalized);
            }
            let draft = SeminarDraft {
                title: patch.title.clone().unwrap_or(current.title.clone()),
                description: patch.description.clone().unwrap_or(current.description.clone()),
                tutor_id: Some(patch.tutor_id.unwrap_or(current.tutor_id)),
                max_participants: patch.max_participants.unwrap_or(current.max_participants.into()),
                total_hours: patch.total_hours.unwrap_or(current.total_hours.into()),
                start_date: patch.start_date.unwrap_or(current.start_date),
                end_date: patch.end_date.unwrap_or(current.end_date),
                completion_threshold: Some(
                    patch
                        .completion_threshold
                        .clone()
                        .unwrap_or(current.completion_threshold.to_string()),
                ),
            };
            let tutor = lookup_tutor(tx, draft.tutor_id)?;
            let validated = validate_seminar(&draft, tutor.as_ref(), default_threshold);
            let mut errors = validated.clone().err().unwrap_or_default();

            let enrolled = count(tx, "SELECT COUNT(*) FROM usersseminars WHERE seminar_id = ?1", [id.0])?;
            if draft.max_participants >= 1 && draft.max_participants < i64::from(enrolled) {
                errors.push(Violation::new(
                    "max_participants",
                    "below_enrolled",
                    format!("{enrolled} participants are already enrolled"),
                ));
            }
            let max_hour: u32 =
                tx.query_row("SELECT COALESCE(MAX(hour), 0) FROM presenthours WHERE seminar_id = ?1", [id.0], |r| {
                    r.get(0)
                })?;
            if draft.total_hours >= 1 && draft.total_hours < i64::from(max_hour) {
                errors.push(Violation::new(
                    "total_hours",
                    "below_recorded",
                    format!("attendance is already recorded for hour {max_hour}"),
                ));
            }
            let next_state = match patch.state.as_deref() {
                None => current.state,
                Some(raw) => match SeminarState::parse(raw) {
                    Ok(SeminarState::Finalized) => {
                        errors.push(Violation::new("state", "transition", "use the finalize operation"));
                        current.state
                    }
                    Ok(s) if current.state.can_become(s) => s,
                    Ok(s) => {
                        errors.push(Violation::new(
                            "state",
                            "transition",
                            format!("cannot move from {} to {}", current.state.as_str(), s.as_str()),
                        ));
                        current.state
                    }
                    Err(e) => {
                        errors.push(Violation::new("state", "parse", e.to_string()));
                        current.state
                    }
                },
            };
            let new = match validated {
                Ok(new) if errors.is_empty() => new,
                _ => return Err(StoreError::Validation(errors)),
            };
            tx.execute(
                "UPDATE seminars SET title = ?1, description = ?2, tutor_id = ?3, max_participants = ?4, \
                 total_hours = ?5, start_date = ?6, end_date = ?7, threshold_num = ?8, threshold_den = ?9, \
                 state = ?10 WHERE id = ?11",
                params![
                    new.title,
                    new.description,
                    new.tutor_id.0,
                    new.max_participants,
                    new.total_hours,
                    new.start_date,
                    new.end_date,
                    new.completion_threshold.numerator(),
                    new.completion_threshold.denominator(),
                    next_state.as_str(),
                    id.0,
                ],
            )?;
            fetch_seminar(tx, id)
        })
    }

    /// Deletes a seminar. Seminars referenced by completion history are kept
    /// so certificates stay renderable; enrollments, materials and targeted
    /// news are removed only with `cascade`.
    pub fn delete_seminar(&self, id: SeminarId, cascade: bool) -> StoreResult<()> {
        self.write(|tx| {
            fetch_seminar(tx, id)?;
            if count(tx, "SELECT COUNT(*) FROM history WHERE seminar_id = ?1", [id.0])? > 0 {
                return Err(StoreError::Conflict("seminar has completion records".into()));
            }
            let (kind, target) = AnnouncementTarget::Seminar(id).to_columns();
            let dependents = count(
                tx,
                "SELECT (SELECT COUNT(*) FROM usersseminars WHERE seminar_id = ?1) \
                      + (SELECT COUNT(*) FROM files WHERE seminar_id = ?1) \
                      + (SELECT COUNT(*) FROM news WHERE target_type = ?2 AND target_id = ?1)",
                params![id.0, kind],
            )?;
            if dependents > 0 && !cascade {
                return Err(StoreError::HasDependents { entity: "seminar", id: id.0 });
            }
            tx.execute("DELETE FROM news WHERE target_type = ?1 AND target_id = ?2", params![kind, target])?;
            tx.execute("DELETE FROM seminars WHERE id = ?1", [id.0])?;
            Ok(())
        })?;
        self.collect_orphan_blobs()
    }
}

fn insert_seminar(tx: &Transaction<'_>, new: &NewSeminar) -> StoreResult<()> {
    tx.execute(
        "INSERT INTO seminars (title, description, tutor_id, max_participants, total_hours, start_date, end_date, \
         threshold_num, threshold_den, state) VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9, 'open')",
        params![
            new.title,
            new.description,
            new.tutor_id.0,
            new.max_participants,
            new.total_hours,
            new.start_date,
            new.end_date,
            new.completion_threshold.numerator(),
            new.completion_threshold.denominator(),
        ],
    )?;
    Ok(())
}
