//! JSON-over-HTTP interface.
//!
//! Every route carries a [`Guard`]. The guard is checked by middleware
//! before the handler runs, so a request the permission matrix denies never
//! reaches the store. Handlers then check ownership (a tutor acting on their
//! own seminar) where the matrix alone is not enough.

mod accounts;
mod error;
mod news;
mod seminars;
mod session;

use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{DefaultBodyLimit, FromRequest, FromRequestParts, Request, State};
use axum::http::Method;
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{on, MethodFilter, MethodRouter};
use axum::Router;
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

pub use error::{ApiError, ErrorCode};
pub use session::{Session, SessionStore, SESSION_COOKIE};

use crate::certificate::CertificateTemplate;
use crate::domain::{role_permits, RoleAction, User};
use crate::notifier::{CaptureSink, Notifier};
use crate::persistence::{Page, Store};

/// Who may call a route.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Guard {
    /// No session needed.
    Public,
    /// Any signed-in account.
    Session,
    /// Signed in, and the matrix allows the action for the account's level.
    Action(RoleAction),
    /// Signed in, and the matrix allows at least one of the actions.
    AnyOf(&'static [RoleAction]),
}

impl Guard {
    /// Whether an account at `level` passes the matrix part of the guard.
    pub fn admits(self, level: crate::domain::AccessLevel) -> bool {
        match self {
            Guard::Public | Guard::Session => true,
            Guard::Action(a) => role_permits(level, a),
            Guard::AnyOf(actions) => actions.iter().any(|a| role_permits(level, *a)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RouteSpec {
    pub method: Method,
    /// Router syntax, with `:name` path parameters.
    pub path: &'static str,
    pub guard: Guard,
}

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<Store>,
    pub sessions: Arc<SessionStore>,
    pub notifier: Arc<Notifier>,
    pub template: Arc<CertificateTemplate>,
    /// Set when mail goes to the in-memory sink and inspection is enabled.
    pub capture: Option<Arc<CaptureSink>>,
}

impl AppState {
    /// Runs store work on the blocking pool.
    pub(crate) async fn run<T, F>(&self, f: F) -> Result<T, ApiError>
    where
        T: Send + 'static,
        F: FnOnce(&Store) -> Result<T, ApiError> + Send + 'static,
    {
        let store = self.store.clone();
        tokio::task::spawn_blocking(move || f(&store)).await.map_err(|e| {
            tracing::error!(error = %e, "store task failed");
            ApiError::internal()
        })?
    }
}

/// The authenticated account, inserted by the guard middleware.
#[derive(Debug, Clone)]
pub struct Caller {
    pub user: User,
    pub token: String,
}

impl Caller {
    pub fn may(&self, action: RoleAction) -> bool {
        role_permits(self.user.access_level, action)
    }

    pub fn require(&self, action: RoleAction) -> Result<(), ApiError> {
        if self.may(action) {
            Ok(())
        } else {
            Err(ApiError::forbidden())
        }
    }
}

#[axum::async_trait]
impl<S: Send + Sync> FromRequestParts<S> for Caller {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut axum::http::request::Parts, _: &S) -> Result<Self, ApiError> {
        parts.extensions.get::<Caller>().cloned().ok_or_else(ApiError::unauthorized)
    }
}

pub(crate) struct ApiJson<T>(pub T);

#[axum::async_trait]
impl<T, S> FromRequest<S> for ApiJson<T>
where
    axum::Json<T>: FromRequest<S, Rejection = JsonRejection>,
    S: Send + Sync,
{
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, ApiError> {
        let axum::Json(value) = axum::Json::<T>::from_request(req, state).await?;
        Ok(ApiJson(value))
    }
}

pub(crate) struct ApiPath<T>(pub T);

#[axum::async_trait]
impl<T, S> FromRequestParts<S> for ApiPath<T>
where
    T: serde::de::DeserializeOwned + Send,
    S: Send + Sync,
{
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut axum::http::request::Parts, state: &S) -> Result<Self, ApiError> {
        let axum::extract::Path(value) = axum::extract::Path::<T>::from_request_parts(parts, state).await?;
        Ok(ApiPath(value))
    }
}

pub(crate) struct ApiQuery<T>(pub T);

#[axum::async_trait]
impl<T, S> FromRequestParts<S> for ApiQuery<T>
where
    T: serde::de::DeserializeOwned,
    S: Send + Sync,
{
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut axum::http::request::Parts, state: &S) -> Result<Self, ApiError> {
        let axum::extract::Query(value) = axum::extract::Query::<T>::from_request_parts(parts, state).await?;
        Ok(ApiQuery(value))
    }
}

/// `?limit=&offset=`; limit defaults to 50.
#[derive(Debug, Clone, Copy, Default, Deserialize)]
pub(crate) struct PageQuery {
    limit: Option<u32>,
    offset: Option<u32>,
}

impl PageQuery {
    fn page(self) -> Page {
        Page::new(self.limit, self.offset)
    }
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
pub(crate) struct CascadeQuery {
    #[serde(default)]
    cascade: bool,
}

#[derive(Debug, Clone, Serialize)]
struct Health {
    status: &'static str,
}

async fn health() -> axum::Json<Health> {
    axum::Json(Health { status: "ok" })
}

async fn authorize(State((app, guard)): State<(AppState, Guard)>, mut req: Request, next: Next) -> Response {
    if guard == Guard::Public {
        return next.run(req).await;
    }
    let Some(token) = session::token_from_headers(req.headers()) else {
        return ApiError::unauthorized().into_response();
    };
    let Some(session) = app.sessions.lookup(&token, app.store.now()) else {
        return ApiError::unauthorized().into_response();
    };
    // Reload the account so deactivation and level changes take effect at once.
    let user = match app.run(move |s| Ok(s.get_user(session.user_id).ok())).await {
        Ok(Some(user)) if user.active => user,
        Ok(_) => {
            app.sessions.revoke(&token);
            return ApiError::unauthorized().into_response();
        }
        Err(e) => return e.into_response(),
    };
    if !guard.admits(user.access_level) {
        return ApiError::forbidden().into_response();
    }
    req.extensions_mut().insert(Caller { user, token });
    next.run(req).await
}

#[derive(Debug, Clone, Default)]
pub struct RouterOptions {
    /// Directory served under `/ui/`.
    pub ui_dir: Option<PathBuf>,
    /// Adds `GET /api/test/outbox`, listing captured mail.
    pub inspection: bool,
}

macro_rules! endpoint {
    ($method:ident $path:literal, $guard:expr, $handler:expr) => {
        (
            RouteSpec {
                method: Method::$method,
                path: $path,
                guard: $guard,
            },
            on(MethodFilter::$method, $handler),
        )
    };
}

fn endpoints(options: &RouterOptions) -> Vec<(RouteSpec, MethodRouter<AppState>)> {
    use RoleAction::*;
    const CATALOG: &[RoleAction] = &[EnrollSelf, ManageOwnSeminars, ManageAnySeminar];
    const NEWS: &[RoleAction] = &[PostSeminarNews, PostGlobalNews];

    let mut routes = vec![
        endpoint!(GET "/api/health", Guard::Public, health),
        endpoint!(POST "/api/login", Guard::Public, accounts::login),
        endpoint!(POST "/api/logout", Guard::Session, accounts::logout),
        endpoint!(POST "/api/register", Guard::Public, accounts::register),
        endpoint!(GET "/api/me", Guard::Action(EditOwnProfile), accounts::me),
        endpoint!(PATCH "/api/me", Guard::Action(EditOwnProfile), accounts::update_me),
        endpoint!(GET "/api/me/history", Guard::Action(ViewOwnHistory), accounts::history),
        endpoint!(GET "/api/me/enrollments", Guard::Action(ViewOwnHistory), accounts::enrollments),
        endpoint!(
            GET "/api/me/history/:seminar/certificate",
            Guard::Action(PrintOwnCertificate),
            accounts::certificate
        ),
        endpoint!(GET "/api/users", Guard::Action(EditAnyProfile), accounts::list_users),
        endpoint!(POST "/api/users", Guard::Action(AddTutor), accounts::create_user),
        endpoint!(GET "/api/users/:id", Guard::Action(EditAnyProfile), accounts::get_user),
        endpoint!(PATCH "/api/users/:id", Guard::Action(EditAnyProfile), accounts::update_user),
        endpoint!(DELETE "/api/users/:id", Guard::Action(EditAnyProfile), accounts::delete_user),
        endpoint!(GET "/api/seminars", Guard::AnyOf(CATALOG), seminars::list),
        endpoint!(POST "/api/seminars", Guard::Action(ManageOwnSeminars), seminars::create),
        endpoint!(GET "/api/seminars/:id", Guard::AnyOf(CATALOG), seminars::get),
        endpoint!(PATCH "/api/seminars/:id", Guard::Action(ManageOwnSeminars), seminars::update),
        endpoint!(DELETE "/api/seminars/:id", Guard::Action(ManageOwnSeminars), seminars::delete),
        endpoint!(POST "/api/seminars/:id/enroll", Guard::Action(EnrollSelf), seminars::enroll),
        endpoint!(DELETE "/api/seminars/:id/enroll", Guard::Action(EnrollSelf), seminars::withdraw),
        endpoint!(
            GET "/api/seminars/:id/participants",
            Guard::Action(ManageOwnParticipants),
            seminars::participants
        ),
        endpoint!(
            DELETE "/api/seminars/:id/participants/:uid",
            Guard::Action(ManageOwnParticipants),
            seminars::remove_participant
        ),
        endpoint!(GET "/api/seminars/:id/attendance", Guard::Action(RecordAttendance), seminars::attendance),
        endpoint!(
            PUT "/api/seminars/:id/attendance/:uid/:hour",
            Guard::Action(RecordAttendance),
            seminars::record_presence
        ),
        endpoint!(POST "/api/seminars/:id/finalize", Guard::Action(ManageOwnSeminars), seminars::finalize),
        endpoint!(
            PUT "/api/seminars/:id/success-mark/:uid",
            Guard::Action(MarkSuccess),
            seminars::success_mark
        ),
        endpoint!(POST "/api/seminars/:id/materials", Guard::Action(UploadMaterial), seminars::upload),
        endpoint!(GET "/api/seminars/:id/materials", Guard::Action(DownloadMaterial), seminars::materials),
        endpoint!(GET "/api/materials/:fid", Guard::Action(DownloadMaterial), seminars::download),
        endpoint!(POST "/api/news", Guard::AnyOf(NEWS), news::post),
        endpoint!(GET "/api/news", Guard::Action(ViewNews), news::list),
        endpoint!(GET "/api/admin/dead-letters", Guard::Action(PostGlobalNews), news::dead_letters),
    ];
    if options.inspection {
        routes.push(endpoint!(GET "/api/test/outbox", Guard::Public, news::outbox));
    }
    routes
}

/// Every route with its guard, in registration order.
pub fn route_table(options: &RouterOptions) -> Vec<RouteSpec> {
    endpoints(options).into_iter().map(|(spec, _)| spec).collect()
}

pub fn router(state: AppState, options: RouterOptions) -> Router {
    let body_limit = usize::try_from(state.store.config().upload_limit)
        .unwrap_or(usize::MAX)
        .saturating_add(64 * 1024);
    let mut api = Router::new();
    for (spec, handler) in endpoints(&options) {
        let guarded = handler.route_layer(middleware::from_fn_with_state((state.clone(), spec.guard), authorize));
        api = api.route(spec.path, guarded);
    }
    let mut app = api
        .fallback(|| async { ApiError::not_found("route") })
        .layer(DefaultBodyLimit::max(body_limit))
        .with_state(state);
    if let Some(dir) = options.ui_dir {
        app = app.nest_service("/ui", ServeDir::new(dir).append_index_html_on_directories(true));
    }
    app
}
