#![allow(dead_code)]

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, HeaderMap, Method, Request, StatusCode};
use axum::Router;
use chrono::{TimeZone, Utc};
use esem_core::api::RouterOptions;
use esem_core::clock::ManualClock;
use esem_core::domain::{AccessLevel, Seminar, SeminarDraft, User, UserDraft};
use esem_core::notifier::CaptureSink;
use esem_core::persistence::{PasswordCost, Store, StoreConfig};
use esem_core::server::{Mail, Service, ServiceSettings};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tempfile::TempDir;
use tower::ServiceExt;

pub const PASSWORD: &str = "password123";

pub struct Harness {
    pub service: Service,
    pub router: Router,
    pub sink: Arc<CaptureSink>,
    pub clock: Arc<ManualClock>,
    pub dir: TempDir,
}

pub struct Reply {
    pub status: StatusCode,
    pub headers: HeaderMap,
    pub bytes: Vec<u8>,
}

impl Reply {
    pub fn json(&self) -> Value {
        if self.bytes.is_empty() {
            Value::Null
        } else {
            serde_json::from_slice(&self.bytes).unwrap_or_else(|e| {
                panic!("{e}: {}", String::from_utf8_lossy(&self.bytes));
            })
        }
    }

    pub fn code(&self) -> String {
        self.json()["code"].as_str().unwrap_or_default().to_string()
    }
}

pub fn store_config(dir: &std::path::Path) -> StoreConfig {
    let mut config = StoreConfig::in_dir(dir);
    config.password_cost = PasswordCost::FAST;
    config.upload_limit = 64 * 1024;
    config
}

impl Harness {
    pub fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let clock = Arc::new(ManualClock::new(Utc.with_ymd_and_hms(2024, 5, 6, 9, 0, 0).unwrap()));
        let store = Arc::new(Store::init(store_config(dir.path()), false).unwrap().with_clock(clock.clone()));
        Self::with_store(store, clock, dir)
    }

    pub fn with_store(store: Arc<Store>, clock: Arc<ManualClock>, dir: TempDir) -> Self {
        let sink = Arc::new(CaptureSink::new());
        let service = Service::new(
            store,
            Mail::Capture(sink.clone()),
            ServiceSettings {
                options: RouterOptions {
                    ui_dir: None,
                    inspection: true,
                },
                ..Default::default()
            },
        );
        let router = service.router();
        Harness {
            service,
            router,
            sink,
            clock,
            dir,
        }
    }

    pub fn store(&self) -> &Store {
        &self.service.state.store
    }

    pub async fn send(&self, req: Request<Body>) -> Reply {
        let res = self.router.clone().oneshot(req).await.unwrap();
        let status = res.status();
        let headers = res.headers().clone();
        let bytes = res.into_body().collect().await.unwrap().to_bytes().to_vec();
        Reply { status, headers, bytes }
    }

    pub async fn call(&self, method: Method, path: &str, token: Option<&str>, body: Option<Value>) -> Reply {
        let mut req = Request::builder().method(method).uri(path);
        if let Some(t) = token {
            req = req.header(header::AUTHORIZATION, format!("Bearer {t}"));
        }
        let req = match body {
            Some(v) => req
                .header(header::CONTENT_TYPE, "application/json")
                .body(Body::from(v.to_string()))
                .unwrap(),
            None => req.body(Body::empty()).unwrap(),
        };
        self.send(req).await
    }

    pub async fn get(&self, path: &str, token: &str) -> Reply {
        self.call(Method::GET, path, Some(token), None).await
    }

    pub async fn upload(&self, path: &str, token: &str, name: &str, media_type: &str, bytes: &[u8]) -> Reply {
        let (content_type, body) = multipart("file", name, media_type, bytes);
        let req = Request::builder()
            .method(Method::POST)
            .uri(path)
            .header(header::AUTHORIZATION, format!("Bearer {token}"))
            .header(header::CONTENT_TYPE, content_type)
            .body(Body::from(body))
            .unwrap();
        self.send(req).await
    }

    pub async fn login(&self, username: &str, password: &str) -> String {
        let r = self
            .call(
                Method::POST,
                "/api/login",
                None,
                Some(json!({"username": username, "password": password})),
            )
            .await;
        assert_eq!(r.status, StatusCode::OK, "login {username}: {}", String::from_utf8_lossy(&r.bytes));
        r.json()["token"].as_str().unwrap().to_string()
    }

    pub fn user(&self, name: &str, level: AccessLevel) -> User {
        self.store()
            .create_user(&UserDraft {
                username: name.into(),
                password: Some(PASSWORD.into()),
                access_level: level.code(),
                first_name: name.into(),
                last_name: "Tester".into(),
                email: format!("{name}@example.org"),
                ..Default::default()
            })
            .unwrap()
    }

    pub fn seminar(&self, tutor: &User, title: &str, max: i64, hours: i64) -> Seminar {
        self.store().create_seminar(&draft(tutor, title, max, hours)).unwrap()
    }

    /// Binds a real listener on an ephemeral port.
    pub async fn serve(&self) -> SocketAddr {
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let addr = listener.local_addr().unwrap();
        let app = self.router.clone();
        tokio::spawn(async move {
            axum::serve(listener, app).await.unwrap();
        });
        addr
    }
}

pub fn draft(tutor: &User, title: &str, max: i64, hours: i64) -> SeminarDraft {
    SeminarDraft {
        title: title.into(),
        description: String::new(),
        tutor_id: Some(tutor.id),
        max_participants: max,
        total_hours: hours,
        start_date: chrono::NaiveDate::from_ymd_opt(2024, 5, 6).unwrap(),
        end_date: chrono::NaiveDate::from_ymd_opt(2024, 5, 10).unwrap(),
        completion_threshold: None,
    }
}

pub fn multipart(field: &str, name: &str, media_type: &str, bytes: &[u8]) -> (String, Vec<u8>) {
    let boundary = "esem-test-boundary-7MA4YWxkTrZu0gW";
    let mut body = Vec::new();
    body.extend_from_slice(
        format!(
            "--{boundary}\r\nContent-Disposition: form-data; name=\"{field}\"; filename=\"{name}\"\r\n\
             Content-Type: {media_type}\r\n\r\n"
        )
        .as_bytes(),
    );
    body.extend_from_slice(bytes);
    body.extend_from_slice(format!("\r\n--{boundary}--\r\n").as_bytes());
    (format!("multipart/form-data; boundary={boundary}"), body)
}
