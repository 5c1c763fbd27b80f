use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::DomainError;

/// Account access level. The integer codes are part of the stored schema.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AccessLevel {
    Admin = 0,
    Tutor = 1,
    Student = 2,
}

impl AccessLevel {
    pub const ALL: [AccessLevel; 3] = [AccessLevel::Admin, AccessLevel::Tutor, AccessLevel::Student];

    pub fn code(self) -> i64 {
        self as i64
    }

    pub fn from_code(code: i64) -> Result<Self, DomainError> {
        match code {
            0 => Ok(AccessLevel::Admin),
            1 => Ok(AccessLevel::Tutor),
            2 => Ok(AccessLevel::Student),
            other => Err(DomainError::InvalidAccessLevel(other)),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AccessLevel::Admin => "admin",
            AccessLevel::Tutor => "tutor",
            AccessLevel::Student => "student",
        }
    }
}

impl fmt::Display for AccessLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AccessLevel {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "admin" => Ok(AccessLevel::Admin),
            "tutor" => Ok(AccessLevel::Tutor),
            "student" => Ok(AccessLevel::Student),
            other => match other.parse::<i64>() {
                Ok(code) => AccessLevel::from_code(code),
                Err(_) => Err(DomainError::UnknownAccessLevel(other.to_string())),
            },
        }
    }
}

// Serialized as the integer code so that the wire format and the stored
// column agree.
impl Serialize for AccessLevel {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_i64(self.code())
    }
}

impl<'de> Deserialize<'de> for AccessLevel {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let code = i64::deserialize(deserializer)?;
        AccessLevel::from_code(code).map_err(serde::de::Error::custom)
    }
}

/// Everything a signed-in account may attempt. Ownership (a tutor acting on
/// their own seminar) is checked separately by the callers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoleAction {
    EnrollSelf,
    ViewOwnHistory,
    EditOwnProfile,
    DownloadMaterial,
    ViewNews,
    PrintOwnCertificate,
    ManageOwnSeminars,
    RecordAttendance,
    MarkSuccess,
    ManageOwnParticipants,
    UploadMaterial,
    PostSeminarNews,
    ManageAnySeminar,
    ManageAnyParticipant,
    EditAnyProfile,
    AddTutor,
    PostGlobalNews,
}

impl RoleAction {
    pub const ALL: [RoleAction; 17] = [
        RoleAction::EnrollSelf,
        RoleAction::ViewOwnHistory,
        RoleAction::EditOwnProfile,
        RoleAction::DownloadMaterial,
        RoleAction::ViewNews,
        RoleAction::PrintOwnCertificate,
        RoleAction::ManageOwnSeminars,
        RoleAction::RecordAttendance,
        RoleAction::MarkSuccess,
        RoleAction::ManageOwnParticipants,
        RoleAction::UploadMaterial,
        RoleAction::PostSeminarNews,
        RoleAction::ManageAnySeminar,
        RoleAction::ManageAnyParticipant,
        RoleAction::EditAnyProfile,
        RoleAction::AddTutor,
        RoleAction::PostGlobalNews,
    ];
}

/// The permission matrix.
///
/// | action                  | admin | tutor | student |
/// |-------------------------|:-----:|:-----:|:-------:|
/// | EnrollSelf              |       |       |    x    |
/// | ViewOwnHistory          |   x   |       |    x    |
/// | EditOwnProfile          |   x   |   x   |    x    |
/// | DownloadMaterial        |   x   |   x   |    x    |
/// | ViewNews                |   x   |   x   |    x    |
/// | PrintOwnCertificate     |       |       |    x    |
/// | ManageOwnSeminars       |   x   |   x   |         |
/// | RecordAttendance        |   x   |   x   |         |
/// | MarkSuccess             |   x   |   x   |         |
/// | ManageOwnParticipants   |   x   |   x   |         |
/// | UploadMaterial          |   x   |   x   |         |
/// | PostSeminarNews         |   x   |   x   |         |
/// | ManageAnySeminar        |   x   |       |         |
/// | ManageAnyParticipant    |   x   |       |         |
/// | EditAnyProfile          |   x   |       |         |
/// | AddTutor                |   x   |       |         |
/// | PostGlobalNews          |   x   |       |         |
pub fn role_permits(level: AccessLevel, action: RoleAction) -> bool {
    use RoleAction::*;
    match level {
        AccessLevel::Admin => !matches!(action, EnrollSelf | PrintOwnCertificate),
        AccessLevel::Tutor => matches!(
            action,
            ManageOwnSeminars
                | RecordAttendance
                | MarkSuccess
                | ManageOwnParticipants
                | UploadMaterial
                | PostSeminarNews
                | EditOwnProfile
                | ViewNews
                | DownloadMaterial
        ),
        AccessLevel::Student => matches!(
            action,
            EnrollSelf
                | ViewOwnHistory
                | EditOwnProfile
                | DownloadMaterial
                | ViewNews
                | PrintOwnCertificate
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Transcription of the documented table, row by row: (admin, tutor, student).
    const TABLE: [(RoleAction, [bool; 3]); 17] = [
        (RoleAction::EnrollSelf, [false, false, true]),
        (RoleAction::ViewOwnHistory, [true, false, true]),
        (RoleAction::EditOwnProfile, [true, true, true]),
        (RoleAction::DownloadMaterial, [true, true, true]),
        (RoleAction::ViewNews, [true, true, true]),
        (RoleAction::PrintOwnCertificate, [false, false, true]),
        (RoleAction::ManageOwnSeminars, [true, true, false]),
        (RoleAction::RecordAttendance, [true, true, false]),
        (RoleAction::MarkSuccess, [true, true, false]),
        (RoleAction::ManageOwnParticipants, [true, true, false]),
        (RoleAction::UploadMaterial, [true, true, false]),
        (RoleAction::PostSeminarNews, [true, true, false]),
        (RoleAction::ManageAnySeminar, [true, false, false]),
        (RoleAction::ManageAnyParticipant, [true, false, false]),
        (RoleAction::EditAnyProfile, [true, false, false]),
        (RoleAction::AddTutor, [true, false, false]),
        (RoleAction::PostGlobalNews, [true, false, false]),
    ];

    #[test]
    fn matrix_matches_documented_table() {
        assert_eq!(TABLE.len(), RoleAction::ALL.len());
        for (action, row) in TABLE {
            for (level, expected) in AccessLevel::ALL.into_iter().zip(row) {
                assert_eq!(role_permits(level, action), expected, "{level:?} {action:?}");
            }
        }
    }

    #[test]
    fn named_examples() {
        assert!(role_permits(AccessLevel::Student, RoleAction::EnrollSelf));
        assert!(!role_permits(AccessLevel::Student, RoleAction::AddTutor));
        assert!(role_permits(AccessLevel::Tutor, RoleAction::RecordAttendance));
        assert!(!role_permits(AccessLevel::Tutor, RoleAction::ManageAnySeminar));
    }

    #[test]
    fn student_has_exactly_six_actions() {
        let count = RoleAction::ALL
            .iter()
            .filter(|a| role_permits(AccessLevel::Student, **a))
            .count();
        assert_eq!(count, 6);
        let tutor = RoleAction::ALL
            .iter()
            .filter(|a| role_permits(AccessLevel::Tutor, **a))
            .count();
        assert_eq!(tutor, 9);
    }

    #[test]
    fn access_codes() {
        assert_eq!(AccessLevel::from_code(0).unwrap(), AccessLevel::Admin);
        assert_eq!(AccessLevel::from_code(2).unwrap(), AccessLevel::Student);
        assert!(matches!(
            AccessLevel::from_code(3),
            Err(DomainError::InvalidAccessLevel(3))
        ));
        assert!(AccessLevel::from_code(-1).is_err());
        assert_eq!("tutor".parse::<AccessLevel>().unwrap(), AccessLevel::Tutor);
        assert_eq!("1".parse::<AccessLevel>().unwrap(), AccessLevel::Tutor);
        assert!(serde_json::from_str::<AccessLevel>("7").is_err());
    }
}
