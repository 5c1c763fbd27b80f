//! Named demo fixtures.
//!
//! Every seeded account uses [`SEED_PASSWORD`].

use std::fmt;
use std::str::FromStr;

use chrono::{Duration, NaiveDate};

use crate::domain::{AccessLevel, AnnouncementTarget, Seminar, SeminarDraft, User, UserDraft};
use crate::persistence::{Page, SeminarPatch, Store, StoreError, StoreResult};

pub const SEED_PASSWORD: &str = "esem-demo-pass";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    /// An admin, two tutors, eight students, three seminars (one full, one
    /// under way) and a welcome announcement.
    Demo,
    /// One tutor, 100 students `student001`..`student100` and a single
    /// ten-seat seminar titled "Contention".
    Contention,
}

impl Profile {
    pub const ALL: [Profile; 2] = [Profile::Demo, Profile::Contention];

    pub fn name(self) -> &'static str {
        match self {
            Profile::Demo => "demo",
            Profile::Contention => "contention",
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Profile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Profile::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown profile {s:?}; expected one of: demo, contention"))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SeedSummary {
    pub users: usize,
    pub seminars: usize,
    pub enrollments: usize,
}

fn account(store: &Store, username: &str, level: AccessLevel, first: &str, last: &str) -> StoreResult<User> {
    store.create_user(&UserDraft {
        username: username.into(),
        password: Some(SEED_PASSWORD.into()),
        access_level: level.code(),
        first_name: first.into(),
        last_name: last.into(),
        email: format!("{username}@example.org"),
        ..Default::default()
    })
}

fn course(
    store: &Store,
    tutor: &User,
    title: &str,
    max: i64,
    hours: i64,
    start: NaiveDate,
    threshold: Option<&str>,
) -> StoreResult<Seminar> {
    store.create_seminar(&SeminarDraft {
        title: title.into(),
        description: format!("{title}: {hours} contact hours."),
        tutor_id: Some(tutor.id),
        max_participants: max,
        total_hours: hours,
        start_date: start,
        end_date: start + Duration::days(4),
        completion_threshold: threshold.map(str::to_string),
    })
}

/// Loads `profile` into an empty database. Refuses when accounts exist.
pub fn seed(store: &Store, profile: Profile) -> StoreResult<SeedSummary> {
    if !store.list_users(Page::new(Some(1), None))?.is_empty() {
        return Err(StoreError::Conflict("database already has accounts; seed needs an empty database".into()));
    }
    let start = store.now().date_naive() + Duration::days(14);
    match profile {
        Profile::Demo => seed_demo(store, start),
        Profile::Contention => seed_contention(store, start),
    }
}

fn seed_demo(store: &Store, start: NaiveDate) -> StoreResult<SeedSummary> {
    const STUDENTS: [(&str, &str); 8] = [
        ("Eleni", "Andreou"),
        ("Giorgos", "Vlachos"),
        ("Katerina", "Dimou"),
        ("Petros", "Ioannou"),
        ("Sofia", "Karali"),
        ("Dimitris", "Lazarou"),
        ("Anna", "Michail"),
        ("Yannis", "Nikolaou"),
    ];
    let admin = account(store, "admin", AccessLevel::Admin, "Site", "Administrator")?;
    let maria = account(store, "maria.tutor", AccessLevel::Tutor, "Maria", "Papadopoulou")?;
    let nikos = account(store, "nikos.tutor", AccessLevel::Tutor, "Nikos", "Georgiou")?;
    let students = STUDENTS
        .iter()
        .enumerate()
        .map(|(i, (first, last))| account(store, &format!("student{:02}", i + 1), AccessLevel::Student, first, last))
        .collect::<StoreResult<Vec<_>>>()?;

    let web = course(store, &maria, "Introduction to Web Development", 20, 10, start, None)?;
    let db = course(store, &maria, "Database Design", 5, 6, start + Duration::days(7), None)?;
    let net = course(store, &nikos, "Network Security Basics", 10, 8, start - Duration::days(14), Some("3/4"))?;

    let mut enrollments = 0;
    for (seminar, range) in [(&web, 0..6), (&db, 0..5), (&net, 3..8)] {
        for s in &students[range] {
            store.enroll_atomic(seminar.id, s.id)?;
            enrollments += 1;
        }
    }
    store.update_seminar(
        net.id,
        &SeminarPatch {
            state: Some("in_progress".into()),
            ..Default::default()
        },
    )?;
    for (i, s) in students[3..8].iter().enumerate() {
        for hour in 1..=4 {
            store.record_presence(net.id, s.id, hour, !(hour as usize + i).is_multiple_of(4))?;
        }
    }
    store.post_announcement(
        admin.id,
        "Welcome to e-Sem",
        "Browse the seminar catalog and enroll while seats are available.",
        AnnouncementTarget::Everyone,
    )?;
    store.post_announcement(
        nikos.id,
        "Lab session moved",
        "Thursday's lab starts one hour later.",
        AnnouncementTarget::Seminar(net.id),
    )?;
    Ok(SeedSummary {
        users: 3 + students.len(),
        seminars: 3,
        enrollments,
    })
}

fn seed_contention(store: &Store, start: NaiveDate) -> StoreResult<SeedSummary> {
    let tutor = account(store, "tutor", AccessLevel::Tutor, "Contention", "Tutor")?;
    for i in 1..=100 {
        account(store, &format!("student{i:03}"), AccessLevel::Student, "Student", &format!("{i:03}"))?;
    }
    course(store, &tutor, "Contention", 10, 2, start, None)?;
    Ok(SeedSummary {
        users: 101,
        seminars: 1,
        enrollments: 0,
    })
}
