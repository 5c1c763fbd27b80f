use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use super::{AccessLevel, DomainError, Threshold};

macro_rules! id_type {
    ($name:ident) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub i64);

        impl std::fmt::Display for $name {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

id_type!(UserId);
id_type!(SeminarId);
id_type!(NewsId);
id_type!(FileId);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct User {
    pub id: UserId,
    pub username: String,
    #[serde(skip_serializing, default)]
    pub password_hash: String,
    pub access_level: AccessLevel,
    pub first_name: String,
    pub last_name: String,
    pub email: String,
    pub phone: Option<String>,
    pub address: Option<String>,
    pub city: Option<String>,
    pub postal_code: Option<String>,
    pub date_of_birth: Option<NaiveDate>,
    pub registered_at: DateTime<Utc>,
    pub last_login_at: Option<DateTime<Utc>>,
    pub active: bool,
}

impl User {
    pub fn full_name(&self) -> String {
        format!("{} {}", self.first_name, self.last_name).trim().to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeminarState {
    Open,
    InProgress,
    Finalized,
}

impl SeminarState {
    pub fn as_str(self) -> &'static str {
        match self {
            SeminarState::Open => "open",
            SeminarState::InProgress => "in_progress",
            SeminarState::Finalized => "finalized",
        }
    }

    pub fn parse(s: &str) -> Result<Self, DomainError> {
        match s {
            "open" => Ok(SeminarState::Open),
            "in_progress" => Ok(SeminarState::InProgress),
            "finalized" => Ok(SeminarState::Finalized),
            other => Err(DomainError::UnknownState(other.to_string())),
        }
    }

    fn rank(self) -> u8 {
        match self {
            SeminarState::Open => 0,
            SeminarState::InProgress => 1,
            SeminarState::Finalized => 2,
        }
    }

    /// States only move forward. Staying put is allowed.
    pub fn can_become(self, next: SeminarState) -> bool {
        next.rank() >= self.rank()
    }

    pub fn accepts_attendance(self) -> bool {
        self != SeminarState::Finalized
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seminar {
    pub id: SeminarId,
    pub title: String,
    pub description: String,
    pub tutor_id: UserId,
    pub max_participants: u32,
    pub total_hours: u32,
    pub start_date: NaiveDate,
    pub end_date: NaiveDate,
    pub completion_threshold: Threshold,
    pub state: SeminarState,
}

/// Who an announcement is addressed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", content = "id", rename_all = "snake_case")]
pub enum AnnouncementTarget {
    Everyone,
    Role(AccessLevel),
    Seminar(SeminarId),
    User(UserId),
}

impl AnnouncementTarget {
    /// Stored as a (type, id) column pair.
    pub fn to_columns(self) -> (&'static str, Option<i64>) {
        match self {
            AnnouncementTarget::Everyone => ("everyone", None),
            AnnouncementTarget::Role(level) => ("role", Some(level.code())),
            AnnouncementTarget::Seminar(id) => ("seminar", Some(id.0)),
            AnnouncementTarget::User(id) => ("user", Some(id.0)),
        }
    }

    pub fn from_columns(kind: &str, id: Option<i64>) -> Result<Self, DomainError> {
        let missing = || DomainError::MalformedTarget(kind.to_string());
        match kind {
            "everyone" => Ok(AnnouncementTarget::Everyone),
            "role" => AccessLevel::from_code(id.ok_or_else(missing)?).map(AnnouncementTarget::Role),
            "seminar" => Ok(AnnouncementTarget::Seminar(SeminarId(id.ok_or_else(missing)?))),
            "user" => Ok(AnnouncementTarget::User(UserId(id.ok_or_else(missing)?))),
            _ => Err(missing()),
        }
    }
}
