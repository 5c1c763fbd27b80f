use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{AccessLevel, Threshold, User, UserId};

/// One failed rule, addressed to a form field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub code: String,
    pub message: String,
}

impl Violation {
    pub fn new(field: &str, code: &str, message: impl Into<String>) -> Self {
        Violation {
            field: field.to_string(),
            code: code.to_string(),
            message: message.into(),
        }
    }
}

/// Seminar as submitted by a form, before any rule has been checked.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeminarDraft {
    pub title: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub tutor_id: Option<UserId>,
    pub max_participants: i64,
    pub total_hours: i64,
    pub start_date: NaiveDate,
    pub end_date: NaiveDate,
    #[serde(default)]
    pub completion_threshold: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NewSeminar {
    pub title: String,
    pub description: String,
    pub tutor_id: UserId,
    pub max_participants: u32,
    pub total_hours: u32,
    pub start_date: NaiveDate,
    pub end_date: NaiveDate,
    pub completion_threshold: Threshold,
}

const MAX_TITLE_LEN: usize = 200;

/// Checks every seminar rule and reports all failures together.
///
/// `tutor` is the account the draft's `tutor_id` resolved to, if any.
pub fn validate_seminar(
    draft: &SeminarDraft,
    tutor: Option<&User>,
    default_threshold: Threshold,
) -> Result<NewSeminar, Vec<Violation>> {
    let mut errors = Vec::new();

    let title = draft.title.trim();
    if title.is_empty() {
        errors.push(Violation::new("title", "required", "title must not be empty"));
    } else if title.chars().count() > MAX_TITLE_LEN {
        errors.push(Violation::new("title", "length", format!("title exceeds {MAX_TITLE_LEN} characters")));
    }

    let max_participants = u32::try_from(draft.max_participants).ok().filter(|m| *m >= 1);
    if max_participants.is_none() {
        errors.push(Violation::new("max_participants", "min", "capacity must be at least 1"));
    }

    let total_hours = u32::try_from(draft.total_hours).ok().filter(|h| *h >= 1);
    if total_hours.is_none() {
        errors.push(Violation::new("total_hours", "min", "total hours must be at least 1"));
    }

    if draft.end_date < draft.start_date {
        errors.push(Violation::new("end_date", "order", "end date is before start date"));
    }

    let threshold = match draft.completion_threshold.as_deref() {
        None => Some(default_threshold),
        Some(raw) => match raw.parse::<Threshold>() {
            Ok(t) => Some(t),
            Err(e) => {
                errors.push(Violation::new("completion_threshold", "range", e.to_string()));
                None
            }
        },
    };

    let tutor_id = match (draft.tutor_id, tutor) {
        (Some(id), Some(user)) if user.id == id && user.access_level == AccessLevel::Tutor && user.active => Some(id),
        _ => {
            errors.push(Violation::new(
                "tutor_id",
                "invalid_reference",
                "tutor must reference an active tutor account",
            ));
            None
        }
    };

    match (errors.is_empty(), max_participants, total_hours, threshold, tutor_id) {
        (true, Some(max_participants), Some(total_hours), Some(completion_threshold), Some(tutor_id)) => {
            Ok(NewSeminar {
                title: title.to_string(),
                description: draft.description.clone(),
                tutor_id,
                max_participants,
                total_hours,
                start_date: draft.start_date,
                end_date: draft.end_date,
                completion_threshold,
            })
        }
        _ => Err(errors),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct UserDraft {
    pub username: String,
    #[serde(default)]
    pub password: Option<String>,
    pub access_level: i64,
    #[serde(default)]
    pub first_name: String,
    #[serde(default)]
    pub last_name: String,
    pub email: String,
    #[serde(default)]
    pub phone: Option<String>,
    #[serde(default)]
    pub address: Option<String>,
    #[serde(default)]
    pub city: Option<String>,
    #[serde(default)]
    pub postal_code: Option<String>,
    #[serde(default)]
    pub date_of_birth: Option<NaiveDate>,
    #[serde(default)]
    pub active: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NewUser {
    pub username: String,
    /// Plaintext, present only when the password is being set.
    pub password: Option<String>,
    pub access_level: AccessLevel,
    pub first_name: String,
    pub last_name: String,
    pub email: String,
    pub phone: Option<String>,
    pub address: Option<String>,
    pub city: Option<String>,
    pub postal_code: Option<String>,
    pub date_of_birth: Option<NaiveDate>,
    pub active: bool,
}

pub const MIN_PASSWORD_LEN: usize = 8;

/// Minimal mailbox check: one `@`, non-empty local part, dotted domain with
/// non-empty labels, no whitespace.
pub fn is_valid_email(email: &str) -> bool {
    if email.chars().any(char::is_whitespace) {
        return false;
    }
    let Some((local, domain)) = email.split_once('@') else {
        return false;
    };
    !local.is_empty()
        && !domain.contains('@')
        && domain.contains('.')
        && domain.split('.').all(|label| !label.is_empty())
}

fn is_valid_username(name: &str) -> bool {
    (3..=64).contains(&name.chars().count())
        && name.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'))
}

/// Validates a new account; the password is mandatory.
pub fn validate_user(draft: &UserDraft) -> Result<NewUser, Vec<Violation>> {
    check_user(draft, true)
}

/// Validates a full replacement profile; the password may be omitted.
pub fn validate_user_update(draft: &UserDraft) -> Result<NewUser, Vec<Violation>> {
    check_user(draft, false)
}

fn check_user(draft: &UserDraft, require_password: bool) -> Result<NewUser, Vec<Violation>> {
    let mut errors = Vec::new();

    if draft.username.is_empty() {
        errors.push(Violation::new("username", "required", "username must not be empty"));
    } else if !is_valid_username(&draft.username) {
        errors.push(Violation::new(
            "username",
            "format",
            "username must be 3-64 characters of letters, digits, '.', '_' or '-'",
        ));
    }

    match draft.password.as_deref() {
        None if require_password => errors.push(Violation::new("password", "required", "password is required")),
        Some(p) if p.chars().count() < MIN_PASSWORD_LEN => errors.push(Violation::new(
            "password",
            "length",
            format!("password must be at least {MIN_PASSWORD_LEN} characters"),
        )),
        _ => {}
    }

    let access_level = match AccessLevel::from_code(draft.access_level) {
        Ok(level) => Some(level),
        Err(e) => {
            errors.push(Violation::new("access_level", "parse", e.to_string()));
            None
        }
    };

    if !is_valid_email(&draft.email) {
        errors.push(Violation::new("email", "format", "email is not a valid mailbox"));
    }

    match access_level {
        Some(access_level) if errors.is_empty() => Ok(NewUser {
            username: draft.username.clone(),
            password: draft.password.clone(),
            access_level,
            first_name: draft.first_name.trim().to_string(),
            last_name: draft.last_name.trim().to_string(),
            email: draft.email.clone(),
            phone: draft.phone.clone(),
            address: draft.address.clone(),
            city: draft.city.clone(),
            postal_code: draft.postal_code.clone(),
            date_of_birth: draft.date_of_birth,
            active: draft.active.unwrap_or(true),
        }),
        _ => Err(errors),
    }
}
