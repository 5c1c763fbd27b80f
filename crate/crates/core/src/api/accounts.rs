use axum::extract::State;
use axum::http::header::SET_COOKIE;
use axum::http::StatusCode;
use axum::response::{AppendHeaders, IntoResponse, Response};
use axum::Json;
use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use super::session::{clear_cookie, session_cookie};
use super::{ApiError, ApiJson, ApiPath, ApiQuery, AppState, CascadeQuery, Caller, PageQuery};
use crate::certificate::{certificate_for, MEDIA_TYPE};
use crate::domain::{role_permits, AccessLevel, RoleAction, SeminarId, User, UserDraft, UserId};
use crate::persistence::{CompletionRecord, StoreError, UserEnrollment, UserPatch};

#[derive(Debug, Clone, Deserialize)]
pub(crate) struct LoginBody {
    username: String,
    password: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoginResponse {
    pub token: String,
    pub expires_at: DateTime<Utc>,
    pub user: User,
}

pub(crate) async fn login(State(app): State<AppState>, ApiJson(body): ApiJson<LoginBody>) -> Result<Response, ApiError> {
    let user = app
        .run(move |s| match s.authenticate(&body.username, &body.password) {
            Ok(user) => Ok(user),
            Err(StoreError::InvalidCredentials) => {
                Err(ApiError::new(super::ErrorCode::Unauthorized, "invalid username or password"))
            }
            Err(e) => Err(e.into()),
        })
        .await?;
    let session = app.sessions.issue(&user, app.store.now());
    let max_age = (session.expires_at - session.issued_at).num_seconds();
    let cookie = session_cookie(&session, max_age);
    let body = LoginResponse {
        token: session.token,
        expires_at: session.expires_at,
        user,
    };
    Ok((AppendHeaders([(SET_COOKIE, cookie)]), Json(body)).into_response())
}

pub(crate) async fn logout(State(app): State<AppState>, caller: Caller) -> Response {
    app.sessions.revoke(&caller.token);
    (StatusCode::NO_CONTENT, AppendHeaders([(SET_COOKIE, clear_cookie())])).into_response()
}

/// Self-registration form; always produces a student account.
#[derive(Debug, Clone, Deserialize)]
pub(crate) struct RegisterBody {
    username: String,
    password: String,
    #[serde(default)]
    first_name: String,
    #[serde(default)]
    last_name: String,
    email: String,
    #[serde(default)]
    phone: Option<String>,
    #[serde(default)]
    address: Option<String>,
    #[serde(default)]
    city: Option<String>,
    #[serde(default)]
    postal_code: Option<String>,
    #[serde(default)]
    date_of_birth: Option<NaiveDate>,
}

pub(crate) async fn register(
    State(app): State<AppState>,
    ApiJson(body): ApiJson<RegisterBody>,
) -> Result<(StatusCode, Json<User>), ApiError> {
    let draft = UserDraft {
        username: body.username,
        password: Some(body.password),
        access_level: AccessLevel::Student.code(),
        first_name: body.first_name,
        last_name: body.last_name,
        email: body.email,
        phone: body.phone,
        address: body.address,
        city: body.city,
        postal_code: body.postal_code,
        date_of_birth: body.date_of_birth,
        active: None,
    };
    let user = app.run(move |s| Ok(s.create_user(&draft)?)).await?;
    Ok((StatusCode::CREATED, Json(user)))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Profile {
    pub user: User,
    /// Actions the matrix allows this account, for clients that hide
    /// controls the server would refuse.
    pub permissions: Vec<RoleAction>,
}

pub(crate) async fn me(caller: Caller) -> Json<Profile> {
    let permissions = RoleAction::ALL
        .into_iter()
        .filter(|a| role_permits(caller.user.access_level, *a))
        .collect();
    Json(Profile {
        user: caller.user,
        permissions,
    })
}

pub(crate) async fn update_me(
    State(app): State<AppState>,
    caller: Caller,
    ApiJson(patch): ApiJson<UserPatch>,
) -> Result<Json<User>, ApiError> {
    // Level and activation are administrative decisions.
    if patch.access_level.is_some_and(|l| l != caller.user.access_level.code())
        || patch.active.is_some_and(|a| !a)
    {
        return Err(ApiError::forbidden());
    }
    let password_changed = patch.password.is_some();
    let id = caller.user.id;
    let user = app.run(move |s| Ok(s.update_user(id, &patch)?)).await?;
    if password_changed {
        app.sessions.revoke_others(id, &caller.token);
    }
    Ok(Json(user))
}

pub(crate) async fn history(
    State(app): State<AppState>,
    caller: Caller,
) -> Result<Json<Vec<CompletionRecord>>, ApiError> {
    Ok(Json(app.run(move |s| Ok(s.participation_history(caller.user.id)?)).await?))
}

pub(crate) async fn enrollments(
    State(app): State<AppState>,
    caller: Caller,
) -> Result<Json<Vec<UserEnrollment>>, ApiError> {
    Ok(Json(app.run(move |s| Ok(s.enrollments_of(caller.user.id)?)).await?))
}

pub(crate) async fn certificate(
    State(app): State<AppState>,
    caller: Caller,
    ApiPath(seminar): ApiPath<i64>,
) -> Result<Response, ApiError> {
    let template = app.template.clone();
    let doc = app
        .run(move |s| Ok(certificate_for(s, &template, caller.user.id, SeminarId(seminar))?))
        .await?;
    let name = doc.file_name();
    Ok(super::seminars::attachment(doc.bytes, MEDIA_TYPE, &name))
}

pub(crate) async fn list_users(
    State(app): State<AppState>,
    ApiQuery(q): ApiQuery<PageQuery>,
) -> Result<Json<Vec<User>>, ApiError> {
    let page = q.page();
    Ok(Json(app.run(move |s| Ok(s.list_users(page)?)).await?))
}

pub(crate) async fn create_user(
    State(app): State<AppState>,
    ApiJson(draft): ApiJson<UserDraft>,
) -> Result<(StatusCode, Json<User>), ApiError> {
    let user = app.run(move |s| Ok(s.create_user(&draft)?)).await?;
    Ok((StatusCode::CREATED, Json(user)))
}

pub(crate) async fn get_user(
    State(app): State<AppState>,
    ApiPath(id): ApiPath<i64>,
) -> Result<Json<User>, ApiError> {
    Ok(Json(app.run(move |s| Ok(s.get_user(UserId(id))?)).await?))
}

pub(crate) async fn update_user(
    State(app): State<AppState>,
    caller: Caller,
    ApiPath(id): ApiPath<i64>,
    ApiJson(patch): ApiJson<UserPatch>,
) -> Result<Json<User>, ApiError> {
    let id = UserId(id);
    if id == caller.user.id && (patch.access_level.is_some_and(|l| l != caller.user.access_level.code())
        || patch.active == Some(false))
    {
        return Err(ApiError::new(
            super::ErrorCode::Conflict,
            "an administrator cannot demote or deactivate their own account",
        ));
    }
    let revoke = patch.password.is_some() || patch.active == Some(false) || patch.access_level.is_some();
    let user = app.run(move |s| Ok(s.update_user(id, &patch)?)).await?;
    if revoke && id != caller.user.id {
        app.sessions.revoke_user(id);
    }
    Ok(Json(user))
}

pub(crate) async fn delete_user(
    State(app): State<AppState>,
    caller: Caller,
    ApiPath(id): ApiPath<i64>,
    ApiQuery(q): ApiQuery<CascadeQuery>,
) -> Result<StatusCode, ApiError> {
    let id = UserId(id);
    if id == caller.user.id {
        return Err(ApiError::new(super::ErrorCode::Conflict, "cannot delete your own account"));
    }
    app.run(move |s| Ok(s.delete_user(id, q.cascade)?)).await?;
    app.sessions.revoke_user(id);
    Ok(StatusCode::NO_CONTENT)
}
