//! Printable certificates of successful attendance.
//!
//! Output is a single self-contained HTML page with print CSS (A4 landscape,
//! no external resources). Rendering reads nothing but its arguments, so the
//! same record always produces the same bytes.

use std::path::Path;

use chrono::NaiveDate;
use sha2::{Digest, Sha256};

use crate::domain::{Seminar, SeminarId, User, UserId};
use crate::persistence::{CompletionRecord, Store, StoreError};

pub const MEDIA_TYPE: &str = "text/html; charset=utf-8";

const DEFAULT_TEMPLATE: &str = include_str!("../templates/certificate.html");

const PLACEHOLDERS: [&str; 6] = [
    "{{serial}}",
    "{{holder_name}}",
    "{{seminar_title}}",
    "{{tutor_name}}",
    "{{completed_at}}",
    "{{completed_at_iso}}",
];

// Anything that would make the browser fetch something.
const FORBIDDEN: [&str; 6] = ["http://", "https://", "//", "src=", "@import", "url("];

#[derive(Debug, thiserror::Error)]
pub enum CertificateError {
    #[error("no completion record for user {user} in seminar {seminar}")]
    NotCompleted { user: UserId, seminar: SeminarId },
    #[error("certificate inputs do not belong together: {0}")]
    Mismatch(&'static str),
    #[error("invalid certificate template: {0}")]
    Template(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// 16 hex characters derived from who completed what, and when.
pub fn certificate_serial(user: UserId, seminar: SeminarId, completed_at: NaiveDate) -> String {
    let digest = Sha256::digest(format!("esem-certificate\n{user}\n{seminar}\n{completed_at}"));
    hex::encode(&digest[..8])
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CertificateTemplate {
    source: String,
}

impl Default for CertificateTemplate {
    fn default() -> Self {
        CertificateTemplate {
            source: DEFAULT_TEMPLATE.to_string(),
        }
    }
}

impl CertificateTemplate {
    /// The template must print the serial and must not reference anything
    /// outside the document.
    pub fn parse(source: String) -> Result<Self, CertificateError> {
        if !source.contains("{{serial}}") {
            return Err(CertificateError::Template("missing {{serial}} placeholder".into()));
        }
        let lowered = source.to_lowercase();
        if let Some(bad) = FORBIDDEN.iter().find(|p| lowered.contains(*p)) {
            return Err(CertificateError::Template(format!("external reference {bad:?} not allowed")));
        }
        Ok(CertificateTemplate { source })
    }

    pub fn load(path: &Path) -> Result<Self, CertificateError> {
        Self::parse(std::fs::read_to_string(path)?)
    }

    fn fill(&self, values: [&str; 6]) -> String {
        let mut out = self.source.clone();
        for (key, value) in PLACEHOLDERS.iter().zip(values) {
            out = out.replace(key, &escape_html(value));
        }
        out
    }
}

fn escape_html(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CertificateDocument {
    pub serial: String,
    pub holder_name: String,
    pub seminar_title: String,
    pub tutor_name: String,
    pub completed_at: NaiveDate,
    pub bytes: Vec<u8>,
}

impl CertificateDocument {
    pub fn file_name(&self) -> String {
        format!("certificate-{}.html", self.serial)
    }
}

/// Renders the certificate for an existing completion record. The title is
/// taken from the record, so later seminar renames do not change it.
pub fn render_certificate(
    template: &CertificateTemplate,
    record: &CompletionRecord,
    holder: &User,
    seminar: &Seminar,
    tutor: &User,
) -> Result<CertificateDocument, CertificateError> {
    if record.user_id != holder.id {
        return Err(CertificateError::Mismatch("record belongs to another user"));
    }
    if record.seminar_id != seminar.id {
        return Err(CertificateError::Mismatch("record belongs to another seminar"));
    }
    if seminar.tutor_id != tutor.id {
        return Err(CertificateError::Mismatch("tutor does not teach the seminar"));
    }
    let holder_name = holder.full_name();
    let tutor_name = tutor.full_name();
    let long_date = record.completed_at.format("%-d %B %Y").to_string();
    let iso_date = record.completed_at.format("%Y-%m-%d").to_string();
    let html = template.fill([
        &record.certificate_serial,
        &holder_name,
        &record.seminar_title,
        &tutor_name,
        &long_date,
        &iso_date,
    ]);
    Ok(CertificateDocument {
        serial: record.certificate_serial.clone(),
        holder_name,
        seminar_title: record.seminar_title.clone(),
        tutor_name,
        completed_at: record.completed_at,
        bytes: html.into_bytes(),
    })
}

/// Looks up the completion record and renders it; refuses when the user did
/// not complete the seminar.
pub fn certificate_for(
    store: &Store,
    template: &CertificateTemplate,
    user: UserId,
    seminar: SeminarId,
) -> Result<CertificateDocument, CertificateError> {
    let record = store
        .completion_record(user, seminar)?
        .ok_or(CertificateError::NotCompleted { user, seminar })?;
    let holder = store.get_user(user)?;
    let seminar = store.get_seminar(seminar)?;
    let tutor = store.get_user(seminar.tutor_id)?;
    render_certificate(template, &record, &holder, &seminar, &tutor)
}
