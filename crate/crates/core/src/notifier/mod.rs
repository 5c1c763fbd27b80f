//! E-mail fan-out for announcements and new material.
//!
//! Posting an announcement or uploading a file writes an outbox event in the
//! same transaction. A single background worker expands events into one
//! message per recipient and delivers them through a [`MailGateway`]. The
//! `(recipient, kind, correlation)` key is unique in the message table, so
//! replays and restarts never produce a second delivery.

mod gateway;

use std::sync::Arc;
use std::time::Duration;

use chrono::{DateTime, Utc};
use rusqlite::{params, OptionalExtension, Transaction};
use serde::{Deserialize, Serialize};
use tokio::sync::{watch, Notify};

pub use gateway::{CaptureSink, MailError, MailGateway, SmtpGateway, SmtpSecurity, SmtpSettings};

use crate::domain::{AnnouncementTarget, SeminarId, UserId};
use crate::persistence::{Announcement, MaterialFile, Store, StoreResult, USER_COLUMNS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    Announcement,
    Material,
}

impl MessageKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MessageKind::Announcement => "announcement",
            MessageKind::Material => "material",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "announcement" => Some(MessageKind::Announcement),
            "material" => Some(MessageKind::Material),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutboundMessage {
    pub to: String,
    pub subject: String,
    pub body: String,
    pub kind: MessageKind,
    /// Id of the announcement or material file that triggered the message.
    pub correlation_id: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeadLetter {
    pub id: i64,
    pub message: OutboundMessage,
    pub attempts: u32,
    pub last_error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            base_delay: Duration::from_secs(5),
        }
    }
}

impl RetryPolicy {
    /// Wait before the attempt following attempt number `attempts` (1-based).
    pub fn delay_after(&self, attempts: u32) -> Duration {
        self.base_delay * 2u32.saturating_pow(attempts.saturating_sub(1))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PumpReport {
    pub events: usize,
    pub enqueued: usize,
    pub sent: usize,
    pub retried: usize,
    pub dead: usize,
}

struct Recipient {
    id: UserId,
    email: String,
}

fn recipients(tx: &Transaction<'_>, sql: &str, params: impl rusqlite::Params) -> StoreResult<Vec<Recipient>> {
    let mut stmt = tx.prepare(sql)?;
    let rows = stmt.query_map(params, |r| {
        Ok(Recipient {
            id: UserId(r.get(0)?),
            email: r.get(6)?,
        })
    })?;
    Ok(rows.collect::<Result<_, _>>()?)
}

fn announcement_recipients(tx: &Transaction<'_>, a: &Announcement) -> StoreResult<Vec<Recipient>> {
    let mut list = match a.target {
        AnnouncementTarget::Everyone => recipients(
            tx,
            &format!("SELECT {USER_COLUMNS} FROM users WHERE active = 1 ORDER BY id"),
            [],
        )?,
        AnnouncementTarget::Role(level) => recipients(
            tx,
            &format!("SELECT {USER_COLUMNS} FROM users WHERE active = 1 AND access_level = ?1 ORDER BY id"),
            [level.code()],
        )?,
        AnnouncementTarget::Seminar(seminar) => seminar_audience(tx, seminar, true)?,
        AnnouncementTarget::User(user) => recipients(
            tx,
            &format!("SELECT {USER_COLUMNS} FROM users WHERE active = 1 AND id = ?1"),
            [user.0],
        )?,
    };
    list.retain(|r| r.id != a.sender_id);
    Ok(list)
}

/// Enrolled students of a seminar, plus its tutor when asked.
fn seminar_audience(tx: &Transaction<'_>, seminar: SeminarId, with_tutor: bool) -> StoreResult<Vec<Recipient>> {
    let cols = USER_COLUMNS.split(", ").map(|c| format!("u.{c}")).collect::<Vec<_>>().join(", ");
    let tutor_clause = if with_tutor {
        "OR u.id = (SELECT tutor_id FROM seminars WHERE id = ?1)"
    } else {
        ""
    };
    recipients(
        tx,
        &format!(
            "SELECT {cols} FROM users u WHERE u.active = 1 AND \
             (u.id IN (SELECT user_id FROM usersseminars WHERE seminar_id = ?1) {tutor_clause}) ORDER BY u.id"
        ),
        [seminar.0],
    )
}

fn announcement_message(tx: &Transaction<'_>, a: &Announcement, to: &str) -> StoreResult<OutboundMessage> {
    let sender: String = tx
        .query_row(
            "SELECT trim(first_name || ' ' || last_name) FROM users WHERE id = ?1",
            [a.sender_id.0],
            |r| r.get(0),
        )
        .optional()?
        .unwrap_or_default();
    Ok(OutboundMessage {
        to: to.to_string(),
        subject: format!("Announcement: {}", a.title),
        body: format!(
            "{}\n\n--\nPosted by {} on {}\n",
            a.body,
            sender,
            a.created_at.format("%Y-%m-%d %H:%M UTC")
        ),
        kind: MessageKind::Announcement,
        correlation_id: a.id.0,
    })
}

fn material_message(seminar_title: &str, file: &MaterialFile, to: &str) -> OutboundMessage {
    OutboundMessage {
        to: to.to_string(),
        subject: format!("New material for {seminar_title}: {}", file.name),
        body: format!(
            "A new file \"{}\" ({} bytes) was added to the seminar \"{}\".\n\
             Download it from the seminar's materials page.\n",
            file.name, file.size_bytes, seminar_title
        ),
        kind: MessageKind::Material,
        correlation_id: file.id.0,
    }
}

/// Inserts messages not already in the ledger; returns only the new ones.
fn enqueue(tx: &Transaction<'_>, messages: Vec<OutboundMessage>, now: DateTime<Utc>) -> StoreResult<Vec<OutboundMessage>> {
    let mut fresh = Vec::new();
    for m in messages {
        let inserted = tx.execute(
            "INSERT OR IGNORE INTO outbox_messages \
             (kind, correlation_id, recipient, subject, body, state, attempts, next_attempt_at) \
             VALUES (?1, ?2, ?3, ?4, ?5, 'pending', 0, ?6)",
            params![m.kind.as_str(), m.correlation_id, m.to, m.subject, m.body, now],
        )?;
        if inserted > 0 {
            fresh.push(m);
        }
    }
    Ok(fresh)
}

fn message_from_row(r: &rusqlite::Row<'_>) -> rusqlite::Result<(i64, OutboundMessage, u32, Option<String>)> {
    let kind: String = r.get(1)?;
    let kind = MessageKind::parse(&kind).ok_or_else(|| {
        rusqlite::Error::FromSqlConversionFailure(1, rusqlite::types::Type::Text, format!("bad kind {kind}").into())
    })?;
    Ok((
        r.get(0)?,
        OutboundMessage {
            kind,
            correlation_id: r.get(2)?,
            to: r.get(3)?,
            subject: r.get(4)?,
            body: r.get(5)?,
        },
        r.get(6)?,
        r.get(7)?,
    ))
}

const MESSAGE_COLUMNS: &str = "id, kind, correlation_id, recipient, subject, body, attempts, last_error";

pub struct Notifier {
    store: Arc<Store>,
    gateway: Arc<dyn MailGateway>,
    policy: RetryPolicy,
    wake: Notify,
}

impl std::fmt::Debug for Notifier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Notifier").field("policy", &self.policy).finish_non_exhaustive()
    }
}

impl Notifier {
    pub fn new(store: Arc<Store>, gateway: Arc<dyn MailGateway>, policy: RetryPolicy) -> Self {
        Notifier {
            store,
            gateway,
            policy,
            wake: Notify::new(),
        }
    }

    /// Queues one message per recipient of the announcement. Messages already
    /// queued or sent for the same recipient are skipped.
    pub fn fan_out_announcement(&self, announcement: &Announcement) -> StoreResult<Vec<OutboundMessage>> {
        let now = self.store.now();
        self.store.write(|tx| {
            let mut messages = Vec::new();
            for r in announcement_recipients(tx, announcement)? {
                messages.push(announcement_message(tx, announcement, &r.email)?);
            }
            enqueue(tx, messages, now)
        })
    }

    /// Queues one message per enrolled student of the file's seminar.
    pub fn fan_out_material(&self, file: &MaterialFile) -> StoreResult<Vec<OutboundMessage>> {
        let now = self.store.now();
        self.store.write(|tx| {
            let title: String =
                tx.query_row("SELECT title FROM seminars WHERE id = ?1", [file.seminar_id.0], |r| r.get(0))?;
            let messages = seminar_audience(tx, file.seminar_id, false)?
                .into_iter()
                .filter(|r| r.id != file.uploader_id)
                .map(|r| material_message(&title, file, &r.email))
                .collect();
            enqueue(tx, messages, now)
        })
    }

    /// Expands pending outbox events into messages. Events whose subject was
    /// deleted in the meantime are dropped.
    pub fn process_events(&self) -> StoreResult<(usize, usize)> {
        let events: Vec<(i64, String, i64)> = self.store.read(|tx| {
            let mut stmt =
                tx.prepare("SELECT id, kind, correlation_id FROM outbox_events WHERE processed = 0 ORDER BY id")?;
            let rows = stmt.query_map([], |r| Ok((r.get(0)?, r.get(1)?, r.get(2)?)))?;
            Ok(rows.collect::<Result<_, _>>()?)
        })?;
        let mut enqueued = 0;
        for (event_id, kind, correlation) in &events {
            let fresh = match MessageKind::parse(kind) {
                Some(MessageKind::Announcement) => match self.store.get_announcement(crate::domain::NewsId(*correlation)) {
                    Ok(a) => self.fan_out_announcement(&a)?,
                    Err(crate::persistence::StoreError::NotFound { .. }) => Vec::new(),
                    Err(e) => return Err(e),
                },
                Some(MessageKind::Material) => match self.store.get_material(crate::domain::FileId(*correlation)) {
                    Ok(f) => self.fan_out_material(&f)?,
                    Err(crate::persistence::StoreError::NotFound { .. }) => Vec::new(),
                    Err(e) => return Err(e),
                },
                None => Vec::new(),
            };
            enqueued += fresh.len();
            self.store.write(|tx| {
                tx.execute("UPDATE outbox_events SET processed = 1 WHERE id = ?1", [event_id])?;
                Ok(())
            })?;
        }
        Ok((events.len(), enqueued))
    }

    /// Attempts every message that is due. A message is marked in flight
    /// before the gateway is called, so a crash mid-send never leads to a
    /// second delivery.
    pub fn deliver_due(&self) -> StoreResult<(usize, usize, usize)> {
        let now = self.store.now();
        let due: Vec<(i64, OutboundMessage, u32, Option<String>)> = self.store.read(|tx| {
            let mut stmt = tx.prepare(&format!(
                "SELECT {MESSAGE_COLUMNS} FROM outbox_messages WHERE state = 'pending' AND next_attempt_at <= ?1 \
                 ORDER BY next_attempt_at, id"
            ))?;
            let rows = stmt.query_map([now], message_from_row)?;
            Ok(rows.collect::<Result<_, _>>()?)
        })?;
        let (mut sent, mut retried, mut dead) = (0, 0, 0);
        for (id, message, attempts, _) in due {
            let attempts = attempts + 1;
            self.store.write(|tx| {
                tx.execute(
                    "UPDATE outbox_messages SET state = 'sending', attempts = ?1 WHERE id = ?2",
                    params![attempts, id],
                )?;
                Ok(())
            })?;
            let outcome = self.gateway.send(&message);
            let now = self.store.now();
            self.store.write(|tx| {
                match &outcome {
                    Ok(()) => {
                        tx.execute("UPDATE outbox_messages SET state = 'sent', last_error = NULL WHERE id = ?1", [id])?;
                    }
                    Err(e) if attempts < self.policy.max_attempts && matches!(e, MailError::Unavailable(_)) => {
                        let delay = chrono::Duration::from_std(self.policy.delay_after(attempts))
                            .unwrap_or(chrono::Duration::MAX);
                        tx.execute(
                            "UPDATE outbox_messages SET state = 'pending', next_attempt_at = ?1, last_error = ?2 \
                             WHERE id = ?3",
                            params![now + delay, e.to_string(), id],
                        )?;
                    }
                    Err(e) => {
                        tx.execute(
                            "UPDATE outbox_messages SET state = 'dead', last_error = ?1 WHERE id = ?2",
                            params![e.to_string(), id],
                        )?;
                    }
                }
                Ok(())
            })?;
            match outcome {
                Ok(()) => sent += 1,
                Err(e) => {
                    if attempts < self.policy.max_attempts && matches!(e, MailError::Unavailable(_)) {
                        tracing::warn!(message = id, attempts, error = %e, "mail delivery failed, will retry");
                        retried += 1;
                    } else {
                        tracing::error!(message = id, attempts, error = %e, "mail delivery abandoned");
                        dead += 1;
                    }
                }
            }
        }
        Ok((sent, retried, dead))
    }

    /// Messages left in flight by a crash are dead-lettered rather than
    /// resent.
    pub fn recover_interrupted(&self) -> StoreResult<usize> {
        self.store.write(|tx| {
            Ok(tx.execute(
                "UPDATE outbox_messages SET state = 'dead', last_error = 'interrupted during delivery' \
                 WHERE state = 'sending'",
                [],
            )?)
        })
    }

    /// One full worker cycle.
    pub fn pump(&self) -> StoreResult<PumpReport> {
        let (events, enqueued) = self.process_events()?;
        let (sent, retried, dead) = self.deliver_due()?;
        Ok(PumpReport {
            events,
            enqueued,
            sent,
            retried,
            dead,
        })
    }

    pub fn dead_letters(&self) -> StoreResult<Vec<DeadLetter>> {
        self.store.read(|tx| {
            let mut stmt = tx.prepare(&format!(
                "SELECT {MESSAGE_COLUMNS} FROM outbox_messages WHERE state = 'dead' ORDER BY id"
            ))?;
            let rows = stmt.query_map([], message_from_row)?;
            Ok(rows
                .map(|r| {
                    r.map(|(id, message, attempts, last_error)| DeadLetter {
                        id,
                        message,
                        attempts,
                        last_error,
                    })
                })
                .collect::<Result<_, _>>()?)
        })
    }

    pub fn pending_count(&self) -> StoreResult<u32> {
        self.store.read(|tx| {
            Ok(tx.query_row(
                "SELECT (SELECT COUNT(*) FROM outbox_messages WHERE state IN ('pending', 'sending')) \
                      + (SELECT COUNT(*) FROM outbox_events WHERE processed = 0)",
                [],
                |r| r.get(0),
            )?)
        })
    }

    /// Nudges the worker after new events were written.
    pub fn wake(&self) {
        self.wake.notify_one();
    }

    /// Runs the delivery loop until `shutdown` flips to true. Polls at
    /// `idle` intervals for retries that become due.
    pub fn spawn(self: Arc<Self>, idle: Duration, mut shutdown: watch::Receiver<bool>) -> tokio::task::JoinHandle<()> {
        tokio::spawn(async move {
            let notifier = self.clone();
            match tokio::task::spawn_blocking(move || notifier.recover_interrupted()).await {
                Ok(Ok(n)) if n > 0 => tracing::warn!(count = n, "dead-lettered messages interrupted by a restart"),
                Ok(Err(e)) => tracing::error!(error = %e, "outbox recovery failed"),
                _ => {}
            }
            loop {
                let notifier = self.clone();
                match tokio::task::spawn_blocking(move || notifier.pump()).await {
                    Ok(Ok(report)) if report != PumpReport::default() => tracing::debug!(?report, "outbox pumped"),
                    Ok(Err(e)) => tracing::error!(error = %e, "outbox pump failed"),
                    Err(e) => tracing::error!(error = %e, "outbox worker panicked"),
                    _ => {}
                }
                tokio::select! {
                    _ = self.wake.notified() => {}
                    _ = tokio::time::sleep(idle) => {}
                    _ = shutdown.changed() => {}
                }
                if *shutdown.borrow() {
                    break;
                }
            }
        })
    }
}
