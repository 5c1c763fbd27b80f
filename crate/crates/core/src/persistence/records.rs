use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use crate::domain::{AnnouncementTarget, FileId, NewsId, Seminar, SeminarId, User, UserId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Enrollment {
    pub seminar_id: SeminarId,
    pub user_id: UserId,
    pub enrolled_at: DateTime<Utc>,
}

/// Aggregate presence for one participant, maintained alongside the
/// per-hour entries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttendanceSummary {
    pub seminar_id: SeminarId,
    pub user_id: UserId,
    pub present_count: u32,
    pub absent_count: u32,
    pub success_mark: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PresenceEntry {
    pub seminar_id: SeminarId,
    pub user_id: UserId,
    pub hour: u32,
    pub present: bool,
    pub recorded_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionRecord {
    pub user_id: UserId,
    pub seminar_title: String,
    pub seminar_id: SeminarId,
    pub completed_at: NaiveDate,
    pub certificate_serial: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Announcement {
    pub id: NewsId,
    pub title: String,
    pub body: String,
    pub sender_id: UserId,
    pub target: AnnouncementTarget,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaterialFile {
    pub id: FileId,
    pub seminar_id: SeminarId,
    pub uploader_id: UserId,
    pub name: String,
    pub media_type: String,
    pub size_bytes: u64,
    pub content_hash: String,
    pub uploaded_at: DateTime<Utc>,
}

/// A seminar together with its live enrollment count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeminarListing {
    #[serde(flatten)]
    pub seminar: Seminar,
    pub enrolled_count: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Participant {
    pub user: User,
    pub enrolled_at: DateTime<Utc>,
    pub attendance: AttendanceSummary,
}

/// One of a user's own enrollments.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserEnrollment {
    pub seminar: Seminar,
    pub enrolled_at: DateTime<Utc>,
    pub attendance: AttendanceSummary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Page {
    pub limit: u32,
    pub offset: u32,
}

impl Page {
    pub const DEFAULT_LIMIT: u32 = 50;
    pub const MAX_LIMIT: u32 = 500;

    pub fn new(limit: Option<u32>, offset: Option<u32>) -> Self {
        Page {
            limit: limit.unwrap_or(Self::DEFAULT_LIMIT).clamp(1, Self::MAX_LIMIT),
            offset: offset.unwrap_or(0),
        }
    }

    pub fn all() -> Self {
        Page {
            limit: u32::MAX,
            offset: 0,
        }
    }
}

impl Default for Page {
    fn default() -> Self {
        Page::new(None, None)
    }
}

/// Partial seminar update; absent fields keep their current value.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeminarPatch {
    pub title: Option<String>,
    pub description: Option<String>,
    pub tutor_id: Option<UserId>,
    pub max_participants: Option<i64>,
    pub total_hours: Option<i64>,
    pub start_date: Option<NaiveDate>,
    pub end_date: Option<NaiveDate>,
    pub completion_threshold: Option<String>,
    pub state: Option<String>,
}

/// Partial profile update.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserPatch {
    pub username: Option<String>,
    pub password: Option<String>,
    pub access_level: Option<i64>,
    pub first_name: Option<String>,
    pub last_name: Option<String>,
    pub email: Option<String>,
    pub phone: Option<String>,
    pub address: Option<String>,
    pub city: Option<String>,
    pub postal_code: Option<String>,
    pub date_of_birth: Option<NaiveDate>,
    pub active: Option<bool>,
}
