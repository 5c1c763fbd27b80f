use rusqlite::{params, OptionalExtension, Transaction};

use super::{
    count, fetch_seminar, fetch_user, record_from_row, seminar_from_row, summary_from_row, user_from_row,
    AttendanceSummary, CompletionRecord, Enrollment, Participant, PresenceEntry, Refusal, Store, StoreError,
    StoreResult, UserEnrollment, SEMINAR_COLUMNS, USER_COLUMNS,
};
use crate::certificate::certificate_serial;
use crate::domain::{capacity_decision, determine_completion, AccessLevel, CapacityDecision, SeminarId, SeminarState, UserId};

fn fetch_summary(tx: &Transaction<'_>, seminar: SeminarId, user: UserId) -> StoreResult<AttendanceSummary> {
    tx.query_row(
        "SELECT seminar_id, user_id, present_count, absent_count, success_mark FROM attendancebook \
         WHERE seminar_id = ?1 AND user_id = ?2",
        [seminar.0, user.0],
        |r| summary_from_row(r, 0),
    )
    .optional()?
    .ok_or_else(|| StoreError::not_found("enrollment", format!("{seminar}/{user}")))
}

impl Store {
    /// Count-then-insert under the write lock: concurrent callers can never
    /// push a seminar past its capacity.
    pub fn enroll_atomic(&self, seminar_id: SeminarId, user_id: UserId) -> StoreResult<Enrollment> {
        let now = self.now();
        self.write(|tx| {
            let user = fetch_user(tx, user_id)?;
            if user.access_level != AccessLevel::Student || !user.active {
                return Err(StoreError::Conflict("only active student accounts can enroll".into()));
            }
            let seminar = fetch_seminar(tx, seminar_id)?;
            if seminar.state != SeminarState::Open {
                return Err(StoreError::Refused(Refusal::SeminarNotOpen));
            }
            if super::is_enrolled(tx, seminar_id, user_id)? {
                return Err(StoreError::Refused(Refusal::AlreadyEnrolled));
            }
            let enrolled = count(tx, "SELECT COUNT(*) FROM usersseminars WHERE seminar_id = ?1", [seminar_id.0])?;
            if capacity_decision(enrolled, seminar.max_participants)? == CapacityDecision::Refuse {
                return Err(StoreError::Refused(Refusal::CapacityFull));
            }
            tx.execute(
                "INSERT INTO usersseminars (seminar_id, user_id, enrolled_at) VALUES (?1, ?2, ?3)",
                params![seminar_id.0, user_id.0, now],
            )?;
            tx.execute(
                "INSERT INTO attendancebook (seminar_id, user_id, present_count, absent_count, success_mark) \
                 VALUES (?1, ?2, 0, 0, NULL)",
                [seminar_id.0, user_id.0],
            )?;
            Ok(Enrollment {
                seminar_id,
                user_id,
                enrolled_at: now,
            })
        })
    }

    /// Drops an enrollment together with its attendance. Self-service
    /// withdrawal (`only_while_open`) is allowed only before the seminar
    /// starts; staff removal is allowed until finalization.
    pub fn remove_enrollment(&self, seminar_id: SeminarId, user_id: UserId, only_while_open: bool) -> StoreResult<()> {
        self.write(|tx| {
            let seminar = fetch_seminar(tx, seminar_id)?;
            match seminar.state {
                SeminarState::Finalized => return Err(StoreError::SeminarFinalized),
                SeminarState::InProgress if only_while_open => {
                    return Err(StoreError::Refused(Refusal::SeminarNotOpen))
                }
                _ => {}
            }
            let removed = tx.execute(
                "DELETE FROM usersseminars WHERE seminar_id = ?1 AND user_id = ?2",
                [seminar_id.0, user_id.0],
            )?;
            if removed == 0 {
                return Err(StoreError::not_found("enrollment", format!("{seminar_id}/{user_id}")));
            }
            Ok(())
        })
    }

    pub fn is_enrolled(&self, seminar_id: SeminarId, user_id: UserId) -> StoreResult<bool> {
        self.read(|tx| super::is_enrolled(tx, seminar_id, user_id))
    }

    pub fn list_participants(&self, seminar_id: SeminarId) -> StoreResult<Vec<Participant>> {
        self.read(|tx| {
            fetch_seminar(tx, seminar_id)?;
            let cols = USER_COLUMNS.split(", ").map(|c| format!("u.{c}")).collect::<Vec<_>>().join(", ");
            let mut stmt = tx.prepare(&format!(
                "SELECT {cols}, e.enrolled_at, a.seminar_id, a.user_id, a.present_count, a.absent_count, \
                 a.success_mark FROM usersseminars e JOIN users u ON u.id = e.user_id \
                 JOIN attendancebook a ON a.seminar_id = e.seminar_id AND a.user_id = e.user_id \
                 WHERE e.seminar_id = ?1 ORDER BY u.last_name, u.first_name, u.id"
            ))?;
            let rows = stmt.query_map([seminar_id.0], |row| {
                Ok(Participant {
                    user: user_from_row(row)?,
                    enrolled_at: row.get(15)?,
                    attendance: summary_from_row(row, 16)?,
                })
            })?;
            Ok(rows.collect::<Result<_, _>>()?)
        })
    }

    /// Sets one hour's mark (insert or correct) and refreshes the aggregate
    /// in the same transaction.
    pub fn record_presence(
        &self,
        seminar_id: SeminarId,
        user_id: UserId,
        hour: u32,
        present: bool,
    ) -> StoreResult<PresenceEntry> {
        let now = self.now();
        self.write(|tx| {
            let seminar = fetch_seminar(tx, seminar_id)?;
            if !seminar.state.accepts_attendance() {
                return Err(StoreError::SeminarFinalized);
            }
            if hour < 1 || hour > seminar.total_hours {
                return Err(StoreError::invalid(
                    "hour",
                    "range",
                    format!("hour must be between 1 and {}", seminar.total_hours),
                ));
            }
            if !super::is_enrolled(tx, seminar_id, user_id)? {
                return Err(StoreError::not_found("enrollment", format!("{seminar_id}/{user_id}")));
            }
            tx.execute(
                "INSERT INTO presenthours (seminar_id, user_id, hour, present, recorded_at) \
                 VALUES (?1, ?2, ?3, ?4, ?5) \
                 ON CONFLICT (seminar_id, user_id, hour) DO UPDATE SET present = excluded.present, \
                 recorded_at = excluded.recorded_at",
                params![seminar_id.0, user_id.0, hour, present, now],
            )?;
            tx.execute(
                "UPDATE attendancebook SET \
                 present_count = (SELECT COUNT(*) FROM presenthours p WHERE p.seminar_id = ?1 AND p.user_id = ?2 AND p.present = 1), \
                 absent_count = (SELECT COUNT(*) FROM presenthours p WHERE p.seminar_id = ?1 AND p.user_id = ?2 AND p.present = 0) \
                 WHERE seminar_id = ?1 AND user_id = ?2",
                [seminar_id.0, user_id.0],
            )?;
            Ok(PresenceEntry {
                seminar_id,
                user_id,
                hour,
                present,
                recorded_at: now,
            })
        })
    }

    /// Every per-hour mark of a seminar, ordered by participant then hour.
    pub fn presence_entries(&self, seminar_id: SeminarId) -> StoreResult<Vec<PresenceEntry>> {
        self.read(|tx| {
            fetch_seminar(tx, seminar_id)?;
            let mut stmt = tx.prepare(
                "SELECT seminar_id, user_id, hour, present, recorded_at FROM presenthours \
                 WHERE seminar_id = ?1 ORDER BY user_id, hour",
            )?;
            let rows = stmt.query_map([seminar_id.0], |r| {
                Ok(PresenceEntry {
                    seminar_id: SeminarId(r.get(0)?),
                    user_id: UserId(r.get(1)?),
                    hour: r.get(2)?,
                    present: r.get(3)?,
                    recorded_at: r.get(4)?,
                })
            })?;
            Ok(rows.collect::<Result<_, _>>()?)
        })
    }

    pub fn attendance_summary(&self, seminar_id: SeminarId, user_id: UserId) -> StoreResult<AttendanceSummary> {
        self.read(|tx| fetch_summary(tx, seminar_id, user_id))
    }

    pub fn attendance_summaries(&self, seminar_id: SeminarId) -> StoreResult<Vec<AttendanceSummary>> {
        self.read(|tx| {
            let mut stmt = tx.prepare(
                "SELECT seminar_id, user_id, present_count, absent_count, success_mark FROM attendancebook \
                 WHERE seminar_id = ?1 ORDER BY user_id",
            )?;
            let rows = stmt.query_map([seminar_id.0], |r| summary_from_row(r, 0))?;
            Ok(rows.collect::<Result<_, _>>()?)
        })
    }

    /// Explicit tutor decision that overrides the ratio rule at finalization.
    /// `None` clears it.
    pub fn set_success_mark(
        &self,
        seminar_id: SeminarId,
        user_id: UserId,
        mark: Option<bool>,
    ) -> StoreResult<AttendanceSummary> {
        self.write(|tx| {
            let seminar = fetch_seminar(tx, seminar_id)?;
            if seminar.state == SeminarState::Finalized {
                return Err(StoreError::SeminarFinalized);
            }
            let changed = tx.execute(
                "UPDATE attendancebook SET success_mark = ?1 WHERE seminar_id = ?2 AND user_id = ?3",
                params![mark, seminar_id.0, user_id.0],
            )?;
            if changed == 0 {
                return Err(StoreError::not_found("enrollment", format!("{seminar_id}/{user_id}")));
            }
            fetch_summary(tx, seminar_id, user_id)
        })
    }

    /// Closes the seminar and writes a completion record for every
    /// participant who passes. Unmarked hours count as absent; an explicit
    /// success mark wins over the ratio rule. Any title collision aborts the
    /// whole finalization.
    pub fn finalize_seminar(&self, seminar_id: SeminarId) -> StoreResult<Vec<CompletionRecord>> {
        let today = self.now().date_naive();
        self.write(|tx| {
            let seminar = fetch_seminar(tx, seminar_id)?;
            if seminar.state == SeminarState::Finalized {
                return Err(StoreError::AlreadyFinalized);
            }
            let summaries: Vec<AttendanceSummary> = {
                let mut stmt = tx.prepare(
                    "SELECT seminar_id, user_id, present_count, absent_count, success_mark FROM attendancebook \
                     WHERE seminar_id = ?1 ORDER BY user_id",
                )?;
                let rows = stmt.query_map([seminar_id.0], |r| summary_from_row(r, 0))?;
                rows.collect::<Result<_, _>>()?
            };
            let mut records = Vec::new();
            for s in summaries {
                let passed = match s.success_mark {
                    Some(mark) => mark,
                    None => determine_completion(s.present_count, seminar.total_hours, seminar.completion_threshold)?,
                };
                if !passed {
                    continue;
                }
                let clash = count(
                    tx,
                    "SELECT COUNT(*) FROM history WHERE user_id = ?1 AND seminar_title = ?2",
                    params![s.user_id.0, seminar.title],
                )?;
                if clash > 0 {
                    return Err(StoreError::TitleCollision {
                        user_id: s.user_id,
                        title: seminar.title.clone(),
                    });
                }
                let record = CompletionRecord {
                    user_id: s.user_id,
                    seminar_title: seminar.title.clone(),
                    seminar_id,
                    completed_at: today,
                    certificate_serial: certificate_serial(s.user_id, seminar_id, today),
                };
                tx.execute(
                    "INSERT INTO history (user_id, seminar_title, seminar_id, completed_at, certificate_serial) \
                     VALUES (?1, ?2, ?3, ?4, ?5)",
                    params![
                        record.user_id.0,
                        record.seminar_title,
                        record.seminar_id.0,
                        record.completed_at,
                        record.certificate_serial
                    ],
                )?;
                records.push(record);
            }
            tx.execute("UPDATE seminars SET state = 'finalized' WHERE id = ?1", [seminar_id.0])?;
            Ok(records)
        })
    }

    pub fn participation_history(&self, user_id: UserId) -> StoreResult<Vec<CompletionRecord>> {
        self.read(|tx| {
            fetch_user(tx, user_id)?;
            let mut stmt = tx.prepare(
                "SELECT user_id, seminar_title, seminar_id, completed_at, certificate_serial FROM history \
                 WHERE user_id = ?1 ORDER BY completed_at, seminar_title",
            )?;
            let rows = stmt.query_map([user_id.0], record_from_row)?;
            Ok(rows.collect::<Result<_, _>>()?)
        })
    }

    pub fn completion_record(&self, user_id: UserId, seminar_id: SeminarId) -> StoreResult<Option<CompletionRecord>> {
        self.read(|tx| {
            Ok(tx
                .query_row(
                    "SELECT user_id, seminar_title, seminar_id, completed_at, certificate_serial FROM history \
                     WHERE user_id = ?1 AND seminar_id = ?2",
                    [user_id.0, seminar_id.0],
                    record_from_row,
                )
                .optional()?)
        })
    }

    /// The user's seminars with their own attendance, including ones that
    /// ended without a completion.
    pub fn enrollments_of(&self, user_id: UserId) -> StoreResult<Vec<UserEnrollment>> {
        self.read(|tx| {
            fetch_user(tx, user_id)?;
            let cols = SEMINAR_COLUMNS.split(", ").map(|c| format!("s.{}", c.trim())).collect::<Vec<_>>().join(", ");
            let mut stmt = tx.prepare(&format!(
                "SELECT {cols}, e.enrolled_at, a.seminar_id, a.user_id, a.present_count, a.absent_count, \
                 a.success_mark FROM usersseminars e JOIN seminars s ON s.id = e.seminar_id \
                 JOIN attendancebook a ON a.seminar_id = e.seminar_id AND a.user_id = e.user_id \
                 WHERE e.user_id = ?1 ORDER BY s.start_date, s.id"
            ))?;
            let rows = stmt.query_map([user_id.0], |row| {
                Ok(UserEnrollment {
                    seminar: seminar_from_row(row)?,
                    enrolled_at: row.get(11)?,
                    attendance: summary_from_row(row, 12)?,
                })
            })?;
            Ok(rows.collect::<Result<_, _>>()?)
        })
    }

    /// Every completion record in the store, by user then title.
    pub fn all_completion_records(&self) -> StoreResult<Vec<CompletionRecord>> {
        self.read(|tx| {
            let mut stmt = tx.prepare(
                "SELECT user_id, seminar_title, seminar_id, completed_at, certificate_serial FROM history \
                 ORDER BY user_id, seminar_title",
            )?;
            let rows = stmt.query_map([], record_from_row)?;
            Ok(rows.collect::<Result<_, _>>()?)
        })
    }
}
