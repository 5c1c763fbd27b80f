use axum::extract::{Multipart, State};
use axum::http::header::{CONTENT_DISPOSITION, CONTENT_TYPE, X_CONTENT_TYPE_OPTIONS};
use axum::http::{HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};

use super::{ApiError, ApiJson, ApiPath, ApiQuery, AppState, CascadeQuery, Caller};
use crate::domain::{
    AccessLevel, FileId, RoleAction, Seminar, SeminarDraft, SeminarId, User, UserId, Violation,
};
use crate::persistence::{
    AttendanceSummary, CompletionRecord, Enrollment, MaterialFile, Page, Participant, PresenceEntry, SeminarListing,
    SeminarPatch, Store,
};

/// Tutors act on their own seminars; accounts allowed `any` act on all.
fn check_owner(user: &User, seminar: &Seminar, any: RoleAction) -> Result<(), ApiError> {
    if seminar.tutor_id == user.id || crate::domain::role_permits(user.access_level, any) {
        Ok(())
    } else {
        Err(ApiError::forbidden())
    }
}

fn owned_seminar(store: &Store, user: &User, id: SeminarId, any: RoleAction) -> Result<Seminar, ApiError> {
    let seminar = store.get_seminar(id)?;
    check_owner(user, &seminar, any)?;
    Ok(seminar)
}

/// Material is visible to the seminar's tutor, its participants and admins.
fn check_material_access(store: &Store, user: &User, seminar: &Seminar) -> Result<(), ApiError> {
    let allowed = match user.access_level {
        AccessLevel::Admin => true,
        AccessLevel::Tutor => seminar.tutor_id == user.id,
        AccessLevel::Student => store.is_enrolled(seminar.id, user.id)?,
    };
    if allowed {
        Ok(())
    } else {
        Err(ApiError::forbidden())
    }
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
pub(crate) struct ListQuery {
    /// Include seminars that are no longer open.
    #[serde(default)]
    all: bool,
    limit: Option<u32>,
    offset: Option<u32>,
}

pub(crate) async fn list(
    State(app): State<AppState>,
    ApiQuery(q): ApiQuery<ListQuery>,
) -> Result<Json<Vec<SeminarListing>>, ApiError> {
    let page = Page::new(q.limit, q.offset);
    Ok(Json(app.run(move |s| Ok(s.list_seminars(!q.all, page)?)).await?))
}

pub(crate) async fn get(
    State(app): State<AppState>,
    ApiPath(id): ApiPath<i64>,
) -> Result<Json<SeminarListing>, ApiError> {
    let id = SeminarId(id);
    Ok(Json(
        app.run(move |s| {
            let seminar = s.get_seminar(id)?;
            let enrolled_count = s.enrolled_count(id)?;
            Ok(SeminarListing {
                seminar,
                enrolled_count,
            })
        })
        .await?,
    ))
}

pub(crate) async fn create(
    State(app): State<AppState>,
    caller: Caller,
    ApiJson(mut draft): ApiJson<SeminarDraft>,
) -> Result<(StatusCode, Json<Seminar>), ApiError> {
    if !caller.may(RoleAction::ManageAnySeminar) {
        match draft.tutor_id {
            None => draft.tutor_id = Some(caller.user.id),
            Some(id) if id == caller.user.id => {}
            Some(_) => return Err(ApiError::forbidden()),
        }
    }
    let seminar = app.run(move |s| Ok(s.create_seminar(&draft)?)).await?;
    Ok((StatusCode::CREATED, Json(seminar)))
}

pub(crate) async fn update(
    State(app): State<AppState>,
    caller: Caller,
    ApiPath(id): ApiPath<i64>,
    ApiJson(patch): ApiJson<SeminarPatch>,
) -> Result<Json<Seminar>, ApiError> {
    let id = SeminarId(id);
    Ok(Json(
        app.run(move |s| {
            owned_seminar(s, &caller.user, id, RoleAction::ManageAnySeminar)?;
            if !caller.may(RoleAction::ManageAnySeminar) && patch.tutor_id.is_some_and(|t| t != caller.user.id) {
                return Err(ApiError::forbidden());
            }
            Ok(s.update_seminar(id, &patch)?)
        })
        .await?,
    ))
}

pub(crate) async fn delete(
    State(app): State<AppState>,
    caller: Caller,
    ApiPath(id): ApiPath<i64>,
    ApiQuery(q): ApiQuery<CascadeQuery>,
) -> Result<StatusCode, ApiError> {
    let id = SeminarId(id);
    app.run(move |s| {
        owned_seminar(s, &caller.user, id, RoleAction::ManageAnySeminar)?;
        Ok(s.delete_seminar(id, q.cascade)?)
    })
    .await?;
    Ok(StatusCode::NO_CONTENT)
}

pub(crate) async fn enroll(
    State(app): State<AppState>,
    caller: Caller,
    ApiPath(id): ApiPath<i64>,
) -> Result<(StatusCode, Json<Enrollment>), ApiError> {
    let enrollment = app
        .run(move |s| Ok(s.enroll_atomic(SeminarId(id), caller.user.id)?))
        .await?;
    Ok((StatusCode::CREATED, Json(enrollment)))
}

pub(crate) async fn withdraw(
    State(app): State<AppState>,
    caller: Caller,
    ApiPath(id): ApiPath<i64>,
) -> Result<StatusCode, ApiError> {
    app.run(move |s| Ok(s.remove_enrollment(SeminarId(id), caller.user.id, true)?))
        .await?;
    Ok(StatusCode::NO_CONTENT)
}

pub(crate) async fn participants(
    State(app): State<AppState>,
    caller: Caller,
    ApiPath(id): ApiPath<i64>,
) -> Result<Json<Vec<Participant>>, ApiError> {
    let id = SeminarId(id);
    Ok(Json(
        app.run(move |s| {
            owned_seminar(s, &caller.user, id, RoleAction::ManageAnyParticipant)?;
            Ok(s.list_participants(id)?)
        })
        .await?,
    ))
}

pub(crate) async fn remove_participant(
    State(app): State<AppState>,
    caller: Caller,
    ApiPath((id, uid)): ApiPath<(i64, i64)>,
) -> Result<StatusCode, ApiError> {
    let id = SeminarId(id);
    app.run(move |s| {
        owned_seminar(s, &caller.user, id, RoleAction::ManageAnyParticipant)?;
        Ok(s.remove_enrollment(id, UserId(uid), false)?)
    })
    .await?;
    Ok(StatusCode::NO_CONTENT)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttendanceSheet {
    pub seminar: Seminar,
    pub summaries: Vec<AttendanceSummary>,
    pub entries: Vec<PresenceEntry>,
}

pub(crate) async fn attendance(
    State(app): State<AppState>,
    caller: Caller,
    ApiPath(id): ApiPath<i64>,
) -> Result<Json<AttendanceSheet>, ApiError> {
    let id = SeminarId(id);
    Ok(Json(
        app.run(move |s| {
            let seminar = owned_seminar(s, &caller.user, id, RoleAction::ManageAnySeminar)?;
            Ok(AttendanceSheet {
                seminar,
                summaries: s.attendance_summaries(id)?,
                entries: s.presence_entries(id)?,
            })
        })
        .await?,
    ))
}

#[derive(Debug, Clone, Copy, Deserialize)]
pub(crate) struct PresenceBody {
    present: bool,
}

pub(crate) async fn record_presence(
    State(app): State<AppState>,
    caller: Caller,
    ApiPath((id, uid, hour)): ApiPath<(i64, i64, i64)>,
    ApiJson(body): ApiJson<PresenceBody>,
) -> Result<Json<PresenceEntry>, ApiError> {
    let id = SeminarId(id);
    Ok(Json(
        app.run(move |s| {
            let seminar = owned_seminar(s, &caller.user, id, RoleAction::ManageAnySeminar)?;
            let hour = u32::try_from(hour).ok().filter(|h| (1..=seminar.total_hours).contains(h));
            let Some(hour) = hour else {
                return Err(ApiError::validation(vec![Violation::new(
                    "hour",
                    "range",
                    format!("hour must be between 1 and {}", seminar.total_hours),
                )]));
            };
            Ok(s.record_presence(id, UserId(uid), hour, body.present)?)
        })
        .await?,
    ))
}

pub(crate) async fn finalize(
    State(app): State<AppState>,
    caller: Caller,
    ApiPath(id): ApiPath<i64>,
) -> Result<Json<Vec<CompletionRecord>>, ApiError> {
    let id = SeminarId(id);
    Ok(Json(
        app.run(move |s| {
            owned_seminar(s, &caller.user, id, RoleAction::ManageAnySeminar)?;
            Ok(s.finalize_seminar(id)?)
        })
        .await?,
    ))
}

#[derive(Debug, Clone, Copy, Deserialize)]
pub(crate) struct MarkBody {
    /// `null` clears the mark and returns the participant to the ratio rule.
    success: Option<bool>,
}

pub(crate) async fn success_mark(
    State(app): State<AppState>,
    caller: Caller,
    ApiPath((id, uid)): ApiPath<(i64, i64)>,
    ApiJson(body): ApiJson<MarkBody>,
) -> Result<Json<AttendanceSummary>, ApiError> {
    let id = SeminarId(id);
    Ok(Json(
        app.run(move |s| {
            owned_seminar(s, &caller.user, id, RoleAction::ManageAnySeminar)?;
            Ok(s.set_success_mark(id, UserId(uid), body.success)?)
        })
        .await?,
    ))
}

/// Last path component, so client-side directory names never reach storage.
fn base_name(name: &str) -> &str {
    name.rsplit(['/', '\\']).next().unwrap_or(name).trim()
}

pub(crate) async fn upload(
    State(app): State<AppState>,
    caller: Caller,
    ApiPath(id): ApiPath<i64>,
    mut form: Multipart,
) -> Result<(StatusCode, Json<MaterialFile>), ApiError> {
    let id = SeminarId(id);
    let user = caller.user.clone();
    app.run(move |s| owned_seminar(s, &user, id, RoleAction::ManageAnySeminar).map(drop))
        .await?;

    let mut upload = None;
    while let Some(field) = form.next_field().await? {
        if field.name() != Some("file") {
            continue;
        }
        let name = base_name(field.file_name().unwrap_or_default()).to_string();
        let media_type = field.content_type().unwrap_or("application/octet-stream").to_string();
        let bytes = field.bytes().await?;
        upload = Some((name, media_type, bytes));
        break;
    }
    let Some((name, media_type, bytes)) = upload else {
        return Err(ApiError::validation(vec![Violation::new(
            "file",
            "required",
            "multipart field \"file\" is missing",
        )]));
    };
    if name.is_empty() {
        return Err(ApiError::validation(vec![Violation::new(
            "file",
            "required",
            "uploaded file has no name",
        )]));
    }
    let file = app
        .run(move |s| Ok(s.store_material(id, caller.user.id, &name, &media_type, &bytes)?))
        .await?;
    app.notifier.wake();
    Ok((StatusCode::CREATED, Json(file)))
}

#[derive(Debug, Clone, Default, Deserialize)]
pub(crate) struct MaterialQuery {
    /// Case-insensitive substring of the file name.
    q: Option<String>,
}

pub(crate) async fn materials(
    State(app): State<AppState>,
    caller: Caller,
    ApiPath(id): ApiPath<i64>,
    ApiQuery(query): ApiQuery<MaterialQuery>,
) -> Result<Json<Vec<MaterialFile>>, ApiError> {
    let id = SeminarId(id);
    Ok(Json(
        app.run(move |s| {
            let seminar = s.get_seminar(id)?;
            check_material_access(s, &caller.user, &seminar)?;
            Ok(s.list_materials(id, query.q.as_deref())?)
        })
        .await?,
    ))
}

/// `attachment` disposition with an ASCII fallback and the UTF-8 name.
fn disposition(name: &str) -> String {
    let fallback: String = name
        .chars()
        .map(|c| if c.is_ascii_graphic() && c != '"' && c != '\\' || c == ' ' { c } else { '_' })
        .collect();
    let mut encoded = String::new();
    for b in name.bytes() {
        if b.is_ascii_alphanumeric() || b"!#$&+-.^_`|~".contains(&b) {
            encoded.push(b as char);
        } else {
            encoded.push_str(&format!("%{b:02X}"));
        }
    }
    format!("attachment; filename=\"{fallback}\"; filename*=UTF-8''{encoded}")
}

pub(crate) fn attachment(bytes: Vec<u8>, media_type: &str, name: &str) -> Response {
    let content_type = HeaderValue::from_str(media_type)
        .unwrap_or_else(|_| HeaderValue::from_static("application/octet-stream"));
    let disposition =
        HeaderValue::from_str(&disposition(name)).unwrap_or_else(|_| HeaderValue::from_static("attachment"));
    (
        [
            (CONTENT_TYPE, content_type),
            (CONTENT_DISPOSITION, disposition),
            (X_CONTENT_TYPE_OPTIONS, HeaderValue::from_static("nosniff")),
        ],
        bytes,
    )
        .into_response()
}

pub(crate) async fn download(
    State(app): State<AppState>,
    caller: Caller,
    ApiPath(fid): ApiPath<i64>,
) -> Result<Response, ApiError> {
    let (file, bytes) = app
        .run(move |s| {
            let file = s.get_material(FileId(fid))?;
            let seminar = s.get_seminar(file.seminar_id)?;
            check_material_access(s, &caller.user, &seminar)?;
            Ok(s.read_material(file.id)?)
        })
        .await?;
    Ok(attachment(bytes, &file.media_type, &file.name))
}
