//! Storage-free types and business rules.

mod access;
mod completion;
mod model;
mod validation;

pub use access::{role_permits, AccessLevel, RoleAction};
pub use completion::{capacity_decision, determine_completion, CapacityDecision, Threshold};
pub use model::{AnnouncementTarget, FileId, NewsId, Seminar, SeminarId, SeminarState, User, UserId};
pub use validation::{
    is_valid_email, validate_seminar, validate_user, validate_user_update, NewSeminar, NewUser, SeminarDraft, UserDraft,
    Violation,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DomainError {
    #[error("access level code {0} is not one of 0, 1, 2")]
    InvalidAccessLevel(i64),
    #[error("unknown access level {0:?}")]
    UnknownAccessLevel(String),
    #[error("threshold {num}/{den} is outside (0, 1]")]
    ThresholdOutOfRange { num: u32, den: u32 },
    #[error("threshold {0:?} is not of the form n/d")]
    ThresholdSyntax(String),
    #[error("enrolled count {enrolled} exceeds capacity {max}")]
    CapacityExceeded { enrolled: u32, max: u32 },
    #[error("total hours must be positive")]
    ZeroTotalHours,
    #[error("present hours {present} exceed total hours {total}")]
    PresentExceedsTotal { present: u32, total: u32 },
    #[error("unknown seminar state {0:?}")]
    UnknownState(String),
    #[error("malformed announcement target {0:?}")]
    MalformedTarget(String),
}
