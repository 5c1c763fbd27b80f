pub const SCHEMA_VERSION: i64 = 1;

/// Tables in foreign-key order. The first eight are the logical schema that
/// export/import covers; the outbox tables are delivery bookkeeping.
pub const SCHEMA: &str = r#"
CREATE TABLE meta (
    key   TEXT PRIMARY KEY,
    value TEXT NOT NULL
);

CREATE TABLE users (
    id            INTEGER PRIMARY KEY,
    username      TEXT NOT NULL UNIQUE,
    password_hash TEXT NOT NULL CHECK (password_hash <> ''),
    access_level  INTEGER NOT NULL CHECK (access_level IN (0, 1, 2)),
    first_name    TEXT NOT NULL,
    last_name     TEXT NOT NULL,
    email         TEXT NOT NULL UNIQUE,
    phone         TEXT,
    address       TEXT,
    city          TEXT,
    postal_code   TEXT,
    date_of_birth TEXT,
    registered_at TEXT NOT NULL,
    last_login_at TEXT,
    active        INTEGER NOT NULL CHECK (active IN (0, 1))
);

CREATE TABLE seminars (
    id               INTEGER PRIMARY KEY,
    title            TEXT NOT NULL CHECK (title <> ''),
    description      TEXT NOT NULL,
    tutor_id         INTEGER NOT NULL REFERENCES users(id),
    max_participants INTEGER NOT NULL CHECK (max_participants >= 1),
    total_hours      INTEGER NOT NULL CHECK (total_hours >= 1),
    start_date       TEXT NOT NULL,
    end_date         TEXT NOT NULL,
    threshold_num    INTEGER NOT NULL CHECK (threshold_num >= 1),
    threshold_den    INTEGER NOT NULL CHECK (threshold_den >= threshold_num),
    state            TEXT NOT NULL CHECK (state IN ('open', 'in_progress', 'finalized')),
    CHECK (start_date <= end_date)
);

CREATE TABLE usersseminars (
    seminar_id  INTEGER NOT NULL REFERENCES seminars(id) ON DELETE CASCADE,
    user_id     INTEGER NOT NULL REFERENCES users(id) ON DELETE CASCADE,
    enrolled_at TEXT NOT NULL,
    PRIMARY KEY (seminar_id, user_id)
);

CREATE TABLE attendancebook (
    seminar_id    INTEGER NOT NULL,
    user_id       INTEGER NOT NULL,
    present_count INTEGER NOT NULL CHECK (present_count >= 0),
    absent_count  INTEGER NOT NULL CHECK (absent_count >= 0),
    success_mark  INTEGER CHECK (success_mark IN (0, 1)),
    PRIMARY KEY (seminar_id, user_id),
    FOREIGN KEY (seminar_id, user_id) REFERENCES usersseminars(seminar_id, user_id) ON DELETE CASCADE
);

CREATE TABLE presenthours (
    seminar_id  INTEGER NOT NULL,
    user_id     INTEGER NOT NULL,
    hour        INTEGER NOT NULL CHECK (hour >= 1),
    present     INTEGER NOT NULL CHECK (present IN (0, 1)),
    recorded_at TEXT NOT NULL,
    PRIMARY KEY (seminar_id, user_id, hour),
    FOREIGN KEY (seminar_id, user_id) REFERENCES usersseminars(seminar_id, user_id) ON DELETE CASCADE
);

CREATE TABLE history (
    user_id            INTEGER NOT NULL REFERENCES users(id) ON DELETE CASCADE,
    seminar_title      TEXT NOT NULL,
    seminar_id         INTEGER NOT NULL REFERENCES seminars(id),
    completed_at       TEXT NOT NULL,
    certificate_serial TEXT NOT NULL UNIQUE,
    PRIMARY KEY (user_id, seminar_title)
);

CREATE TABLE news (
    id          INTEGER PRIMARY KEY,
    title       TEXT NOT NULL CHECK (title <> ''),
    body        TEXT NOT NULL,
    sender_id   INTEGER NOT NULL REFERENCES users(id) ON DELETE CASCADE,
    target_type TEXT NOT NULL CHECK (target_type IN ('everyone', 'role', 'seminar', 'user')),
    target_id   INTEGER,
    created_at  TEXT NOT NULL
);

CREATE TABLE files (
    id           INTEGER PRIMARY KEY,
    seminar_id   INTEGER NOT NULL REFERENCES seminars(id) ON DELETE CASCADE,
    uploader_id  INTEGER NOT NULL REFERENCES users(id) ON DELETE CASCADE,
    name         TEXT NOT NULL,
    media_type   TEXT NOT NULL,
    size_bytes   INTEGER NOT NULL CHECK (size_bytes > 0),
    content_hash TEXT NOT NULL,
    uploaded_at  TEXT NOT NULL
);

CREATE TABLE outbox_events (
    id             INTEGER PRIMARY KEY,
    kind           TEXT NOT NULL CHECK (kind IN ('announcement', 'material')),
    correlation_id INTEGER NOT NULL,
    created_at     TEXT NOT NULL,
    processed      INTEGER NOT NULL DEFAULT 0
);

CREATE TABLE outbox_messages (
    id              INTEGER PRIMARY KEY,
    kind            TEXT NOT NULL,
    correlation_id  INTEGER NOT NULL,
    recipient       TEXT NOT NULL,
    subject         TEXT NOT NULL,
    body            TEXT NOT NULL,
    state           TEXT NOT NULL CHECK (state IN ('pending', 'sending', 'sent', 'dead')),
    attempts        INTEGER NOT NULL DEFAULT 0,
    next_attempt_at TEXT NOT NULL,
    last_error      TEXT,
    UNIQUE (recipient, kind, correlation_id)
);

CREATE INDEX idx_seminars_tutor ON seminars(tutor_id);
CREATE INDEX idx_enroll_user ON usersseminars(user_id);
CREATE INDEX idx_history_seminar ON history(seminar_id);
CREATE INDEX idx_news_sender ON news(sender_id);
CREATE INDEX idx_files_seminar ON files(seminar_id);
CREATE INDEX idx_files_uploader ON files(uploader_id);
CREATE INDEX idx_files_hash ON files(content_hash);
CREATE INDEX idx_outbox_state ON outbox_messages(state, next_attempt_at);
"#;

/// Logical tables with their primary-key ordering, in import order.
pub const LOGICAL_TABLES: [(&str, &str); 8] = [
    ("users", "id"),
    ("seminars", "id"),
    ("usersseminars", "seminar_id, user_id"),
    ("attendancebook", "seminar_id, user_id"),
    ("presenthours", "seminar_id, user_id, hour"),
    ("history", "user_id, seminar_title"),
    ("news", "id"),
    ("files", "id"),
];
