use axum::extract::State;
use axum::http::StatusCode;
use axum::Json;
use serde::Deserialize;

use super::{ApiError, ApiJson, ApiQuery, AppState, Caller, PageQuery};
use crate::domain::{AnnouncementTarget, RoleAction};
use crate::notifier::{DeadLetter, OutboundMessage};
use crate::persistence::Announcement;

#[derive(Debug, Clone, Deserialize)]
pub(crate) struct PostBody {
    title: String,
    #[serde(default)]
    body: String,
    target: AnnouncementTarget,
}

/// Tutors may address their own seminars only; every other target needs
/// the global-news permission.
pub(crate) async fn post(
    State(app): State<AppState>,
    caller: Caller,
    ApiJson(body): ApiJson<PostBody>,
) -> Result<(StatusCode, Json<Announcement>), ApiError> {
    let announcement = app
        .run(move |s| {
            if !caller.may(RoleAction::PostGlobalNews) {
                let AnnouncementTarget::Seminar(id) = body.target else {
                    return Err(ApiError::forbidden());
                };
                caller.require(RoleAction::PostSeminarNews)?;
                if s.get_seminar(id)?.tutor_id != caller.user.id {
                    return Err(ApiError::forbidden());
                }
            }
            Ok(s.post_announcement(caller.user.id, &body.title, &body.body, body.target)?)
        })
        .await?;
    app.notifier.wake();
    Ok((StatusCode::CREATED, Json(announcement)))
}

pub(crate) async fn list(
    State(app): State<AppState>,
    caller: Caller,
    ApiQuery(q): ApiQuery<PageQuery>,
) -> Result<Json<Vec<Announcement>>, ApiError> {
    let page = q.page();
    Ok(Json(app.run(move |s| Ok(s.list_announcements(&caller.user, page)?)).await?))
}

pub(crate) async fn dead_letters(State(app): State<AppState>) -> Result<Json<Vec<DeadLetter>>, ApiError> {
    let notifier = app.notifier.clone();
    Ok(Json(app.run(move |_| Ok(notifier.dead_letters()?)).await?))
}

/// Captured mail in delivery order. Mounted only when inspection is on.
pub(crate) async fn outbox(State(app): State<AppState>) -> Result<Json<Vec<OutboundMessage>>, ApiError> {
    match &app.capture {
        Some(sink) => Ok(Json(sink.messages())),
        None => Err(ApiError::not_found("capture outbox")),
    }
}
