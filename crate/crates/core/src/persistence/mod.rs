//! Durable storage: users, seminars, enrollments, hourly presence and its
//! aggregate, completion history, announcements and material metadata, plus
//! a content-addressed blob directory.

mod blobs;
mod enrollment;
mod export;
mod materials;
mod news;
mod password;
mod records;
mod schema;
mod seminars;
mod users;

use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard};

use chrono::{DateTime, Utc};
use rusqlite::{Connection, OptionalExtension, Row, Transaction, TransactionBehavior};

use crate::clock::{Clock, SystemClock};
use crate::domain::{
    AccessLevel, AnnouncementTarget, DomainError, FileId, NewsId, Seminar, SeminarId, SeminarState, Threshold, User,
    UserId, Violation,
};

pub use blobs::BlobStore;
pub use export::EXPORT_HEADER;
pub use password::PasswordCost;
pub use records::{
    Announcement, AttendanceSummary, CompletionRecord, Enrollment, MaterialFile, Page, Participant, PresenceEntry,
    SeminarListing, SeminarPatch, UserEnrollment, UserPatch,
};
pub use schema::SCHEMA_VERSION;

/// Why an enrollment was turned away without an error in the store itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Refusal {
    CapacityFull,
    AlreadyEnrolled,
    SeminarNotOpen,
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{entity} {id} not found")]
    NotFound { entity: &'static str, id: String },
    #[error("enrollment refused: {0:?}")]
    Refused(Refusal),
    #[error("validation failed")]
    Validation(Vec<Violation>),
    #[error("{field} is already taken")]
    Duplicate { field: &'static str },
    #[error("seminar is already finalized")]
    AlreadyFinalized,
    #[error("seminar is finalized and can no longer be changed")]
    SeminarFinalized,
    #[error("user {user_id} already has a completion titled {title:?}")]
    TitleCollision { user_id: UserId, title: String },
    #[error("{0}")]
    Conflict(String),
    #[error("{entity} {id} has dependent records; pass cascade to remove them")]
    HasDependents { entity: &'static str, id: i64 },
    #[error("upload of {size} bytes exceeds the {limit} byte limit")]
    TooLarge { size: u64, limit: u64 },
    #[error("database schema version {found:?} does not match {expected}")]
    SchemaMismatch { found: Option<String>, expected: i64 },
    #[error("database already exists at {0}")]
    AlreadyExists(PathBuf),
    #[error("stored data is inconsistent: {0}")]
    Corrupt(String),
    #[error("import failed at line {line}: {message}")]
    Import { line: usize, message: String },
    #[error("invalid credentials")]
    InvalidCredentials,
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("password hashing failed: {0}")]
    Password(String),
    #[error(transparent)]
    Sqlite(#[from] rusqlite::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl StoreError {
    pub(crate) fn not_found(entity: &'static str, id: impl ToString) -> Self {
        StoreError::NotFound {
            entity,
            id: id.to_string(),
        }
    }

    pub(crate) fn invalid(field: &str, code: &str, message: impl Into<String>) -> Self {
        StoreError::Validation(vec![Violation::new(field, code, message)])
    }
}

pub type StoreResult<T> = Result<T, StoreError>;

#[derive(Debug, Clone)]
pub struct StoreConfig {
    pub db_path: PathBuf,
    pub blob_dir: PathBuf,
    pub upload_limit: u64,
    pub password_cost: PasswordCost,
    pub default_threshold: Threshold,
}

impl StoreConfig {
    /// Database and blobs side by side under `dir`.
    pub fn in_dir(dir: &Path) -> Self {
        StoreConfig {
            db_path: dir.join("esem.db"),
            blob_dir: dir.join("blobs"),
            upload_limit: 10 * 1024 * 1024,
            password_cost: PasswordCost::default(),
            default_threshold: Threshold::default(),
        }
    }
}

pub struct Store {
    conn: Mutex<Connection>,
    blobs: BlobStore,
    config: StoreConfig,
    clock: Arc<dyn Clock>,
}

impl std::fmt::Debug for Store {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Store").field("config", &self.config).finish_non_exhaustive()
    }
}

fn configure(conn: &Connection) -> rusqlite::Result<()> {
    conn.pragma_update(None, "foreign_keys", true)?;
    conn.pragma_update(None, "journal_mode", "WAL")?;
    conn.pragma_update(None, "synchronous", "FULL")?;
    conn.busy_timeout(std::time::Duration::from_secs(10))?;
    Ok(())
}

impl Store {
    /// Creates a fresh database. An existing file is replaced only with `force`.
    pub fn init(config: StoreConfig, force: bool) -> StoreResult<Self> {
        if config.db_path.exists() {
            if !force {
                return Err(StoreError::AlreadyExists(config.db_path.clone()));
            }
            for suffix in ["", "-wal", "-shm"] {
                let mut p = config.db_path.clone().into_os_string();
                p.push(suffix);
                match std::fs::remove_file(&p) {
                    Ok(()) => {}
                    Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
                    Err(e) => return Err(e.into()),
                }
            }
        }
        if let Some(parent) = config.db_path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        let mut conn = Connection::open(&config.db_path)?;
        configure(&conn)?;
        let tx = conn.transaction()?;
        tx.execute_batch(schema::SCHEMA)?;
        tx.execute(
            "INSERT INTO meta (key, value) VALUES ('schema_version', ?1)",
            [SCHEMA_VERSION.to_string()],
        )?;
        tx.commit()?;
        Self::from_connection(conn, config)
    }

    /// Opens an existing database, refusing a missing file or another schema version.
    pub fn open(config: StoreConfig) -> StoreResult<Self> {
        if !config.db_path.exists() {
            return Err(StoreError::not_found("database", config.db_path.display()));
        }
        let conn = Connection::open(&config.db_path)?;
        configure(&conn)?;
        let has_meta: bool = conn
            .query_row(
                "SELECT COUNT(*) FROM sqlite_master WHERE type = 'table' AND name = 'meta'",
                [],
                |r| r.get::<_, i64>(0),
            )
            .map(|n| n > 0)?;
        let found: Option<String> = if has_meta {
            conn.query_row("SELECT value FROM meta WHERE key = 'schema_version'", [], |r| r.get(0))
                .optional()?
        } else {
            None
        };
        if found.as_deref() != Some(SCHEMA_VERSION.to_string().as_str()) {
            return Err(StoreError::SchemaMismatch {
                found,
                expected: SCHEMA_VERSION,
            });
        }
        Self::from_connection(conn, config)
    }

    fn from_connection(conn: Connection, config: StoreConfig) -> StoreResult<Self> {
        let blobs = BlobStore::open(&config.blob_dir)?;
        Ok(Store {
            conn: Mutex::new(conn),
            blobs,
            config,
            clock: Arc::new(SystemClock),
        })
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn config(&self) -> &StoreConfig {
        &self.config
    }

    pub fn blobs(&self) -> &BlobStore {
        &self.blobs
    }

    pub fn now(&self) -> DateTime<Utc> {
        self.clock.now()
    }

    fn lock(&self) -> MutexGuard<'_, Connection> {
        self.conn.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Runs `f` in an immediate (write-locked) transaction; commits on `Ok`.
    pub(crate) fn write<T>(&self, f: impl FnOnce(&Transaction<'_>) -> StoreResult<T>) -> StoreResult<T> {
        let mut conn = self.lock();
        let tx = conn.transaction_with_behavior(TransactionBehavior::Immediate)?;
        let out = f(&tx)?;
        tx.commit()?;
        Ok(out)
    }

    /// Runs `f` against a consistent snapshot.
    pub(crate) fn read<T>(&self, f: impl FnOnce(&Transaction<'_>) -> StoreResult<T>) -> StoreResult<T> {
        let mut conn = self.lock();
        let tx = conn.transaction_with_behavior(TransactionBehavior::Deferred)?;
        let out = f(&tx)?;
        tx.finish()?;
        Ok(out)
    }
}

// Row mapping shared by the submodules.

fn conversion<E: std::error::Error + Send + Sync + 'static>(idx: usize, e: E) -> rusqlite::Error {
    rusqlite::Error::FromSqlConversionFailure(idx, rusqlite::types::Type::Text, Box::new(e))
}

pub const USER_COLUMNS: &str = "id, username, password_hash, access_level, first_name, last_name, email, \
     phone, address, city, postal_code, date_of_birth, registered_at, last_login_at, active";

pub(crate) fn user_from_row(row: &Row<'_>) -> rusqlite::Result<User> {
    Ok(User {
        id: UserId(row.get(0)?),
        username: row.get(1)?,
        password_hash: row.get(2)?,
        access_level: AccessLevel::from_code(row.get(3)?).map_err(|e| conversion(3, e))?,
        first_name: row.get(4)?,
        last_name: row.get(5)?,
        email: row.get(6)?,
        phone: row.get(7)?,
        address: row.get(8)?,
        city: row.get(9)?,
        postal_code: row.get(10)?,
        date_of_birth: row.get(11)?,
        registered_at: row.get(12)?,
        last_login_at: row.get(13)?,
        active: row.get(14)?,
    })
}

pub(crate) const SEMINAR_COLUMNS: &str = "id, title, description, tutor_id, max_participants, total_hours, \
     start_date, end_date, threshold_num, threshold_den, state";

pub(crate) fn seminar_from_row(row: &Row<'_>) -> rusqlite::Result<Seminar> {
    let state: String = row.get(10)?;
    Ok(Seminar {
        id: SeminarId(row.get(0)?),
        title: row.get(1)?,
        description: row.get(2)?,
        tutor_id: UserId(row.get(3)?),
        max_participants: row.get(4)?,
        total_hours: row.get(5)?,
        start_date: row.get(6)?,
        end_date: row.get(7)?,
        completion_threshold: Threshold::new(row.get(8)?, row.get(9)?).map_err(|e| conversion(8, e))?,
        state: SeminarState::parse(&state).map_err(|e| conversion(10, e))?,
    })
}

pub(crate) fn summary_from_row(row: &Row<'_>, offset: usize) -> rusqlite::Result<AttendanceSummary> {
    Ok(AttendanceSummary {
        seminar_id: SeminarId(row.get(offset)?),
        user_id: UserId(row.get(offset + 1)?),
        present_count: row.get(offset + 2)?,
        absent_count: row.get(offset + 3)?,
        success_mark: row.get(offset + 4)?,
    })
}

pub(crate) fn record_from_row(row: &Row<'_>) -> rusqlite::Result<CompletionRecord> {
    Ok(CompletionRecord {
        user_id: UserId(row.get(0)?),
        seminar_title: row.get(1)?,
        seminar_id: SeminarId(row.get(2)?),
        completed_at: row.get(3)?,
        certificate_serial: row.get(4)?,
    })
}

pub(crate) fn announcement_from_row(row: &Row<'_>) -> rusqlite::Result<Announcement> {
    let kind: String = row.get(4)?;
    Ok(Announcement {
        id: NewsId(row.get(0)?),
        title: row.get(1)?,
        body: row.get(2)?,
        sender_id: UserId(row.get(3)?),
        target: AnnouncementTarget::from_columns(&kind, row.get(5)?).map_err(|e| conversion(4, e))?,
        created_at: row.get(6)?,
    })
}

pub(crate) fn material_from_row(row: &Row<'_>) -> rusqlite::Result<MaterialFile> {
    Ok(MaterialFile {
        id: FileId(row.get(0)?),
        seminar_id: SeminarId(row.get(1)?),
        uploader_id: UserId(row.get(2)?),
        name: row.get(3)?,
        media_type: row.get(4)?,
        size_bytes: row.get(5)?,
        content_hash: row.get(6)?,
        uploaded_at: row.get(7)?,
    })
}

pub(crate) fn fetch_user(tx: &Transaction<'_>, id: UserId) -> StoreResult<User> {
    tx.query_row(&format!("SELECT {USER_COLUMNS} FROM users WHERE id = ?1"), [id.0], user_from_row)
        .optional()?
        .ok_or_else(|| StoreError::not_found("user", id))
}

pub(crate) fn fetch_seminar(tx: &Transaction<'_>, id: SeminarId) -> StoreResult<Seminar> {
    tx.query_row(
        &format!("SELECT {SEMINAR_COLUMNS} FROM seminars WHERE id = ?1"),
        [id.0],
        seminar_from_row,
    )
    .optional()?
    .ok_or_else(|| StoreError::not_found("seminar", id))
}

pub(crate) fn count(tx: &Transaction<'_>, sql: &str, params: impl rusqlite::Params) -> StoreResult<u32> {
    Ok(tx.query_row(sql, params, |r| r.get::<_, u32>(0))?)
}

pub(crate) fn is_enrolled(tx: &Transaction<'_>, seminar: SeminarId, user: UserId) -> StoreResult<bool> {
    Ok(count(
        tx,
        "SELECT COUNT(*) FROM usersseminars WHERE seminar_id = ?1 AND user_id = ?2",
        [seminar.0, user.0],
    )? > 0)
}

pub(crate) fn enqueue_event(tx: &Transaction<'_>, kind: &str, correlation_id: i64, at: DateTime<Utc>) -> StoreResult<()> {
    tx.execute(
        "INSERT INTO outbox_events (kind, correlation_id, created_at) VALUES (?1, ?2, ?3)",
        rusqlite::params![kind, correlation_id, at],
    )?;
    Ok(())
}
