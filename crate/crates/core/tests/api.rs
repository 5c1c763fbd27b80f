mod common;

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use common::{Harness, PASSWORD};
use esem_core::domain::{AccessLevel, AnnouncementTarget};
use esem_core::persistence::SeminarPatch;
use serde_json::json;

#[tokio::test]
async fn health_needs_no_session() {
    let h = Harness::new();
    let r = h.call(Method::GET, "/api/health", None, None).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.json()["status"], "ok");
}

#[tokio::test]
async fn missing_tampered_and_expired_tokens_are_unauthorized() {
    let h = Harness::new();
    h.user("stu", AccessLevel::Student);
    let token = h.login("stu", PASSWORD).await;
    assert_eq!(h.get("/api/me", &token).await.status, StatusCode::OK);

    let r = h.call(Method::GET, "/api/me", None, None).await;
    assert_eq!((r.status, r.code().as_str()), (StatusCode::UNAUTHORIZED, "UNAUTHORIZED"));
    let mut tampered = token.clone().into_bytes();
    tampered[10] = if tampered[10] == b'0' { b'1' } else { b'0' };
    let r = h.get("/api/me", std::str::from_utf8(&tampered).unwrap()).await;
    assert_eq!(r.status, StatusCode::UNAUTHORIZED);
    assert!(r.json().get("user").is_none());

    h.clock.advance(chrono::Duration::hours(9));
    let r = h.get("/api/me", &token).await;
    assert_eq!(r.status, StatusCode::UNAUTHORIZED);
}

#[tokio::test]
async fn wrong_password_is_unauthorized() {
    let h = Harness::new();
    h.user("stu", AccessLevel::Student);
    let r = h
        .call(Method::POST, "/api/login", None, Some(json!({"username": "stu", "password": "nope-nope"})))
        .await;
    assert_eq!((r.status, r.code().as_str()), (StatusCode::UNAUTHORIZED, "UNAUTHORIZED"));
}

#[tokio::test]
async fn cookie_session_and_logout() {
    let h = Harness::new();
    h.user("stu", AccessLevel::Student);
    let r = h
        .call(Method::POST, "/api/login", None, Some(json!({"username": "stu", "password": PASSWORD})))
        .await;
    let cookie = r.headers.get(header::SET_COOKIE).unwrap().to_str().unwrap().to_string();
    assert!(cookie.contains("HttpOnly"));
    let pair = cookie.split(';').next().unwrap().to_string();
    let with_cookie = |method: Method, path: &str| {
        Request::builder()
            .method(method)
            .uri(path)
            .header(header::COOKIE, pair.clone())
            .body(Body::empty())
            .unwrap()
    };
    assert_eq!(h.send(with_cookie(Method::GET, "/api/me")).await.status, StatusCode::OK);
    assert_eq!(h.send(with_cookie(Method::POST, "/api/logout")).await.status, StatusCode::NO_CONTENT);
    assert_eq!(h.send(with_cookie(Method::GET, "/api/me")).await.status, StatusCode::UNAUTHORIZED);
}

#[tokio::test]
async fn deactivated_account_loses_its_session() {
    let h = Harness::new();
    h.user("root", AccessLevel::Admin);
    let stu = h.user("stu", AccessLevel::Student);
    let admin = h.login("root", PASSWORD).await;
    let token = h.login("stu", PASSWORD).await;
    let r = h
        .call(Method::PATCH, &format!("/api/users/{}", stu.id), Some(&admin), Some(json!({"active": false})))
        .await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(h.get("/api/me", &token).await.status, StatusCode::UNAUTHORIZED);
    let r = h
        .call(Method::POST, "/api/login", None, Some(json!({"username": "stu", "password": PASSWORD})))
        .await;
    assert_eq!(r.status, StatusCode::UNAUTHORIZED);
}

#[tokio::test]
async fn register_creates_students_only() {
    let h = Harness::new();
    let r = h
        .call(
            Method::POST,
            "/api/register",
            None,
            Some(json!({
                "username": "newbie", "password": "longenough", "email": "n@example.org",
                "first_name": "New", "last_name": "Bie", "access_level": 0
            })),
        )
        .await;
    assert_eq!(r.status, StatusCode::CREATED, "{:?}", r.json());
    assert_eq!(r.json()["access_level"], 2);
    assert!(r.json().get("password_hash").is_none());

    let r = h
        .call(
            Method::POST,
            "/api/register",
            None,
            Some(json!({"username": "newbie", "password": "longenough", "email": "other@example.org"})),
        )
        .await;
    assert_eq!((r.status, r.code().as_str()), (StatusCode::CONFLICT, "DUPLICATE"));
    assert_eq!(r.json()["details"][0]["field"], "username");

    let r = h
        .call(
            Method::POST,
            "/api/register",
            None,
            Some(json!({"username": "x", "password": "short", "email": "bad"})),
        )
        .await;
    assert_eq!((r.status, r.code().as_str()), (StatusCode::UNPROCESSABLE_ENTITY, "VALIDATION_FAILED"));
    let fields: Vec<String> = r.json()["details"]
        .as_array()
        .unwrap()
        .iter()
        .map(|d| d["field"].as_str().unwrap().to_string())
        .collect();
    for f in ["username", "password", "email"] {
        assert!(fields.iter().any(|x| x == f), "{fields:?}");
    }
}

#[tokio::test]
async fn malformed_bodies_get_the_error_shape() {
    let h = Harness::new();
    let req = Request::builder()
        .method(Method::POST)
        .uri("/api/login")
        .header(header::CONTENT_TYPE, "application/json")
        .body(Body::from("{not json"))
        .unwrap();
    let r = h.send(req).await;
    assert_eq!((r.status, r.code().as_str()), (StatusCode::BAD_REQUEST, "BAD_REQUEST"));
    assert!(r.json()["details"].as_array().unwrap().is_empty());

    h.user("stu", AccessLevel::Student);
    let t = h.login("stu", PASSWORD).await;
    let r = h.get("/api/seminars/abc", &t).await;
    assert_eq!(r.code(), "BAD_REQUEST");
    let r = h.get("/api/no/such/route", &t).await;
    assert_eq!((r.status, r.code().as_str()), (StatusCode::NOT_FOUND, "NOT_FOUND"));
}

#[tokio::test]
async fn catalog_shows_live_counts() {
    let h = Harness::new();
    let tutor = h.user("tut", AccessLevel::Tutor);
    let a = h.user("ann", AccessLevel::Student);
    let b = h.user("bob", AccessLevel::Student);
    let s = h.seminar(&tutor, "Intro", 10, 4);
    h.store().enroll_atomic(s.id, a.id).unwrap();
    h.store().enroll_atomic(s.id, b.id).unwrap();
    let t = h.login("ann", PASSWORD).await;
    let list = h.get("/api/seminars", &t).await.json();
    assert_eq!(list[0]["enrolled_count"], 2);
    assert_eq!(list[0]["enrolled_count"], h.store().enrolled_count(s.id).unwrap());
    assert_eq!(list[0]["title"], "Intro");
    assert_eq!(h.get(&format!("/api/seminars/{}", s.id), &t).await.json()["enrolled_count"], 2);
}

#[tokio::test]
async fn catalog_paginates_and_filters_state() {
    let h = Harness::new();
    let tutor = h.user("tut", AccessLevel::Tutor);
    for i in 0..7 {
        h.seminar(&tutor, &format!("S{i}"), 5, 2);
    }
    let first = h.seminar(&tutor, "Running", 5, 2);
    h.store()
        .update_seminar(first.id, &SeminarPatch { state: Some("in_progress".into()), ..Default::default() })
        .unwrap();
    let t = h.login("tut", PASSWORD).await;
    assert_eq!(h.get("/api/seminars", &t).await.json().as_array().unwrap().len(), 7);
    assert_eq!(h.get("/api/seminars?all=true", &t).await.json().as_array().unwrap().len(), 8);
    let page = h.get("/api/seminars?limit=3&offset=6", &t).await.json();
    assert_eq!(page.as_array().unwrap().len(), 1);
    assert_eq!(h.get("/api/seminars?limit=x", &t).await.code(), "BAD_REQUEST");
}

#[tokio::test]
async fn enrollment_refusals_have_distinct_codes() {
    let h = Harness::new();
    let tutor = h.user("tut", AccessLevel::Tutor);
    h.user("ann", AccessLevel::Student);
    h.user("bob", AccessLevel::Student);
    let s = h.seminar(&tutor, "Tiny", 1, 2);
    let a = h.login("ann", PASSWORD).await;
    let b = h.login("bob", PASSWORD).await;
    let path = format!("/api/seminars/{}/enroll", s.id);
    assert_eq!(h.call(Method::POST, &path, Some(&a), None).await.status, StatusCode::CREATED);
    assert_eq!(h.call(Method::POST, &path, Some(&a), None).await.code(), "ALREADY_ENROLLED");
    let r = h.call(Method::POST, &path, Some(&b), None).await;
    assert_eq!((r.status, r.code().as_str()), (StatusCode::CONFLICT, "CAPACITY_FULL"));
    assert_eq!(h.store().enrolled_count(s.id).unwrap(), 1);

    // Withdrawal frees the seat while the seminar is open.
    assert_eq!(h.call(Method::DELETE, &path, Some(&a), None).await.status, StatusCode::NO_CONTENT);
    assert_eq!(h.call(Method::POST, &path, Some(&b), None).await.status, StatusCode::CREATED);
    h.store()
        .update_seminar(s.id, &SeminarPatch { state: Some("in_progress".into()), ..Default::default() })
        .unwrap();
    assert_eq!(h.call(Method::POST, &path, Some(&a), None).await.code(), "SEMINAR_NOT_OPEN");
    assert_eq!(h.call(Method::DELETE, &path, Some(&b), None).await.code(), "SEMINAR_NOT_OPEN");
    assert_eq!(h.call(Method::POST, "/api/seminars/999/enroll", Some(&a), None).await.code(), "NOT_FOUND");
}

#[tokio::test]
async fn tutors_act_only_on_their_own_seminars() {
    let h = Harness::new();
    let mine = h.user("tut", AccessLevel::Tutor);
    let other = h.user("oth", AccessLevel::Tutor);
    let stu = h.user("stu", AccessLevel::Student);
    let own = h.seminar(&mine, "Mine", 5, 2);
    let theirs = h.seminar(&other, "Theirs", 5, 2);
    h.store().enroll_atomic(theirs.id, stu.id).unwrap();
    let t = h.login("tut", PASSWORD).await;

    let denied = [
        (Method::PATCH, format!("/api/seminars/{}", theirs.id), Some(json!({"description": "x"}))),
        (Method::DELETE, format!("/api/seminars/{}", theirs.id), None),
        (Method::GET, format!("/api/seminars/{}/participants", theirs.id), None),
        (Method::GET, format!("/api/seminars/{}/attendance", theirs.id), None),
        (Method::PUT, format!("/api/seminars/{}/attendance/{}/1", theirs.id, stu.id), Some(json!({"present": true}))),
        (Method::POST, format!("/api/seminars/{}/finalize", theirs.id), None),
        (Method::PUT, format!("/api/seminars/{}/success-mark/{}", theirs.id, stu.id), Some(json!({"success": true}))),
        (Method::GET, format!("/api/seminars/{}/materials", theirs.id), None),
        (
            Method::POST,
            "/api/news".to_string(),
            Some(json!({"title": "t", "target": {"type": "seminar", "id": theirs.id.0}})),
        ),
        (Method::POST, "/api/news".to_string(), Some(json!({"title": "t", "target": {"type": "everyone"}}))),
        (Method::POST, "/api/seminars".to_string(), Some(serde_json::to_value(common::draft(&other, "X", 1, 1)).unwrap())),
        (Method::PATCH, format!("/api/seminars/{}", own.id), Some(json!({"tutor_id": other.id.0}))),
    ];
    for (method, path, body) in denied {
        let r = h.call(method.clone(), &path, Some(&t), body).await;
        assert_eq!(r.status, StatusCode::FORBIDDEN, "{method} {path}: {:?}", r.json());
    }
    let r = h.upload(&format!("/api/seminars/{}/materials", theirs.id), &t, "a.txt", "text/plain", b"a").await;
    assert_eq!(r.status, StatusCode::FORBIDDEN);
    assert!(h.store().list_materials(theirs.id, None).unwrap().is_empty());

    let mut d = common::draft(&mine, "Own", 3, 3);
    d.tutor_id = None;
    let r = h.call(Method::POST, "/api/seminars", Some(&t), Some(serde_json::to_value(d).unwrap())).await;
    assert_eq!(r.status, StatusCode::CREATED);
    assert_eq!(r.json()["tutor_id"], mine.id.0);
}

#[tokio::test]
async fn seminar_validation_lists_every_violation() {
    let h = Harness::new();
    h.user("tut", AccessLevel::Tutor);
    let t = h.login("tut", PASSWORD).await;
    let body = json!({
        "title": "", "max_participants": 0, "total_hours": 0,
        "start_date": "2024-05-10", "end_date": "2024-05-01", "completion_threshold": "3/2"
    });
    let r = h.call(Method::POST, "/api/seminars", Some(&t), Some(body)).await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(r.json()["details"].as_array().unwrap().len(), 5, "{:?}", r.json());
    let r = h
        .call(Method::POST, "/api/seminars", Some(&t), Some(json!({"title": "no dates"})))
        .await;
    assert_eq!(r.code(), "VALIDATION_FAILED");
}

#[tokio::test]
async fn attendance_hour_out_of_range_is_422_on_hour() {
    let h = Harness::new();
    let tutor = h.user("tut", AccessLevel::Tutor);
    let stu = h.user("stu", AccessLevel::Student);
    let s = h.seminar(&tutor, "Intro", 5, 3);
    h.store().enroll_atomic(s.id, stu.id).unwrap();
    let t = h.login("tut", PASSWORD).await;
    for hour in [0i64, 4, -1] {
        let r = h
            .call(
                Method::PUT,
                &format!("/api/seminars/{}/attendance/{}/{hour}", s.id, stu.id),
                Some(&t),
                Some(json!({"present": true})),
            )
            .await;
        assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
        assert_eq!(r.json()["details"][0]["field"], "hour");
    }
    let put = |hour: u32, present: bool| {
        let path = format!("/api/seminars/{}/attendance/{}/{hour}", s.id, stu.id);
        let t = t.clone();
        let h = &h;
        async move { h.call(Method::PUT, &path, Some(&t), Some(json!({"present": present}))).await }
    };
    assert_eq!(put(1, true).await.status, StatusCode::OK);
    assert_eq!(put(1, false).await.json()["present"], false);
    let sheet = h.get(&format!("/api/seminars/{}/attendance", s.id), &t).await.json();
    assert_eq!(sheet["entries"].as_array().unwrap().len(), 1);
    assert_eq!(sheet["summaries"][0]["present_count"], 0);
    assert_eq!(sheet["summaries"][0]["absent_count"], 1);

    let r = h.call(Method::POST, &format!("/api/seminars/{}/finalize", s.id), Some(&t), None).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(put(2, true).await.code(), "ALREADY_FINALIZED");
    let r = h.call(Method::POST, &format!("/api/seminars/{}/finalize", s.id), Some(&t), None).await;
    assert_eq!(r.code(), "ALREADY_FINALIZED");
}

#[tokio::test]
async fn success_mark_overrides_and_clears() {
    let h = Harness::new();
    let tutor = h.user("tut", AccessLevel::Tutor);
    let stu = h.user("stu", AccessLevel::Student);
    let s = h.seminar(&tutor, "Intro", 5, 3);
    h.store().enroll_atomic(s.id, stu.id).unwrap();
    let t = h.login("tut", PASSWORD).await;
    let path = format!("/api/seminars/{}/success-mark/{}", s.id, stu.id);
    let r = h.call(Method::PUT, &path, Some(&t), Some(json!({"success": true}))).await;
    assert_eq!(r.json()["success_mark"], true);
    let r = h.call(Method::PUT, &path, Some(&t), Some(json!({"success": null}))).await;
    assert_eq!(r.json()["success_mark"], serde_json::Value::Null);
    h.call(Method::PUT, &path, Some(&t), Some(json!({"success": true}))).await;
    let records = h.call(Method::POST, &format!("/api/seminars/{}/finalize", s.id), Some(&t), None).await.json();
    assert_eq!(records.as_array().unwrap().len(), 1);
    assert_eq!(records[0]["certificate_serial"].as_str().unwrap().len(), 16);
}

#[tokio::test]
async fn materials_upload_list_download() {
    let h = Harness::new();
    let tutor = h.user("tut", AccessLevel::Tutor);
    let stu = h.user("stu", AccessLevel::Student);
    h.user("out", AccessLevel::Student);
    let s = h.seminar(&tutor, "Intro", 5, 3);
    h.store().enroll_atomic(s.id, stu.id).unwrap();
    let t = h.login("tut", PASSWORD).await;
    let path = format!("/api/seminars/{}/materials", s.id);

    let r = h.upload(&path, &t, "notes.pdf", "application/pdf", b"pdf").await;
    assert_eq!(r.status, StatusCode::CREATED);
    let file = r.json();
    assert_eq!(file["size_bytes"], 3);
    assert_eq!(file["name"], "notes.pdf");
    h.upload(&path, &t, "Copy Of Notes.pdf", "application/pdf", b"pdf").await;
    assert_eq!(h.store().blobs().list().unwrap().len(), 1);

    let empty = h.upload(&path, &t, "empty.txt", "text/plain", b"").await;
    assert_eq!((empty.status, empty.code().as_str()), (StatusCode::UNPROCESSABLE_ENTITY, "VALIDATION_FAILED"));
    let big = vec![7u8; 64 * 1024 + 1];
    assert_eq!(h.upload(&path, &t, "big.bin", "application/octet-stream", &big).await.code(), "PAYLOAD_TOO_LARGE");
    let huge = vec![7u8; 512 * 1024];
    assert_eq!(h.upload(&path, &t, "huge.bin", "application/octet-stream", &huge).await.status, StatusCode::PAYLOAD_TOO_LARGE);

    let st = h.login("stu", PASSWORD).await;
    let list = h.get(&format!("{path}?q=COPY"), &st).await.json();
    assert_eq!(list.as_array().unwrap().len(), 1);
    let r = h.get(&format!("/api/materials/{}", file["id"]), &st).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.bytes, b"pdf");
    assert_eq!(r.headers[header::CONTENT_TYPE], "application/pdf");
    assert!(r.headers[header::CONTENT_DISPOSITION].to_str().unwrap().contains("notes.pdf"));

    let outsider = h.login("out", PASSWORD).await;
    assert_eq!(h.get(&format!("/api/materials/{}", file["id"]), &outsider).await.status, StatusCode::FORBIDDEN);
    assert_eq!(h.get(&path, &outsider).await.status, StatusCode::FORBIDDEN);
}

#[tokio::test]
async fn news_feed_is_filtered_per_viewer() {
    let h = Harness::new();
    let admin = h.user("root", AccessLevel::Admin);
    let tutor = h.user("tut", AccessLevel::Tutor);
    let stu = h.user("stu", AccessLevel::Student);
    let s = h.seminar(&tutor, "Intro", 5, 3);
    h.store().enroll_atomic(s.id, stu.id).unwrap();
    let store = h.store();
    store.post_announcement(admin.id, "all", "", AnnouncementTarget::Everyone).unwrap();
    store.post_announcement(admin.id, "tutors", "", AnnouncementTarget::Role(AccessLevel::Tutor)).unwrap();
    store.post_announcement(tutor.id, "seminar", "", AnnouncementTarget::Seminar(s.id)).unwrap();
    store.post_announcement(admin.id, "personal", "", AnnouncementTarget::User(stu.id)).unwrap();

    let t = h.login("stu", PASSWORD).await;
    let titles: Vec<String> = h.get("/api/news", &t).await.json().as_array().unwrap().iter()
        .map(|n| n["title"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(titles, ["personal", "seminar", "all"]);
    let first = h.get("/api/news?limit=1", &t).await.json();
    assert_eq!(first.as_array().unwrap().len(), 1);
}

#[tokio::test]
async fn posting_news_queues_mail_off_the_request_path() {
    let h = Harness::new();
    h.user("root", AccessLevel::Admin);
    for i in 0..20 {
        h.user(&format!("stu{i:02}"), AccessLevel::Student);
    }
    let t = h.login("root", PASSWORD).await;
    let r = h
        .call(Method::POST, "/api/news", Some(&t), Some(json!({"title": "Hello", "body": "b", "target": {"type": "everyone"}})))
        .await;
    assert_eq!(r.status, StatusCode::CREATED);
    // Nothing is delivered until the worker runs.
    assert!(h.sink.is_empty());
    assert_eq!(h.service.state.notifier.pump().unwrap().sent, 20);
    let outbox = h.call(Method::GET, "/api/test/outbox", None, None).await.json();
    assert_eq!(outbox.as_array().unwrap().len(), 20);
    assert_eq!(outbox[0]["kind"], "announcement");
}

#[tokio::test]
async fn worker_delivers_in_the_background() {
    let h = Harness::new();
    let admin = h.user("root", AccessLevel::Admin);
    h.user("stu", AccessLevel::Student);
    let (stop, stopped) = tokio::sync::watch::channel(false);
    let worker = h.service.spawn_worker(stopped);
    h.store().post_announcement(admin.id, "Hi", "", AnnouncementTarget::Everyone).unwrap();
    h.service.state.notifier.wake();
    for _ in 0..200 {
        if h.sink.len() == 1 {
            break;
        }
        tokio::time::sleep(std::time::Duration::from_millis(10)).await;
    }
    assert_eq!(h.sink.len(), 1);
    stop.send(true).unwrap();
    worker.await.unwrap();
}

#[tokio::test]
async fn dead_letters_are_admin_visible() {
    let h = Harness::new();
    let admin = h.user("root", AccessLevel::Admin);
    h.user("stu", AccessLevel::Student);
    h.sink.set_offline(true);
    h.store().post_announcement(admin.id, "Hi", "", AnnouncementTarget::Everyone).unwrap();
    let n = &h.service.state.notifier;
    for _ in 0..3 {
        n.pump().unwrap();
        h.clock.advance(chrono::Duration::minutes(1));
    }
    let t = h.login("root", PASSWORD).await;
    let dead = h.get("/api/admin/dead-letters", &t).await.json();
    assert_eq!(dead.as_array().unwrap().len(), 1);
    assert_eq!(dead[0]["attempts"], 3);
    assert_eq!(dead[0]["message"]["to"], "stu@example.org");
}

#[tokio::test]
async fn profile_edit_cannot_escalate() {
    let h = Harness::new();
    h.user("stu", AccessLevel::Student);
    let t = h.login("stu", PASSWORD).await;
    let r = h.call(Method::PATCH, "/api/me", Some(&t), Some(json!({"access_level": 0}))).await;
    assert_eq!(r.status, StatusCode::FORBIDDEN);
    let r = h.call(Method::PATCH, "/api/me", Some(&t), Some(json!({"city": "Patras"}))).await;
    assert_eq!(r.json()["city"], "Patras");
    let me = h.get("/api/me", &t).await.json();
    assert_eq!(me["user"]["access_level"], 2);
    let perms: Vec<&str> = me["permissions"].as_array().unwrap().iter().map(|p| p.as_str().unwrap()).collect();
    assert_eq!(
        perms,
        ["enroll_self", "view_own_history", "edit_own_profile", "download_material", "view_news", "print_own_certificate"]
    );
    let r = h.call(Method::PATCH, "/api/me", Some(&t), Some(json!({"password": "another-password"}))).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(h.get("/api/me", &t).await.status, StatusCode::OK);
    h.login("stu", "another-password").await;
}

#[tokio::test]
async fn admin_manages_users() {
    let h = Harness::new();
    let admin = h.user("root", AccessLevel::Admin);
    let t = h.login("root", PASSWORD).await;
    let r = h
        .call(
            Method::POST,
            "/api/users",
            Some(&t),
            Some(json!({"username": "newtutor", "password": "password99", "access_level": 1,
                        "email": "nt@example.org", "first_name": "New", "last_name": "Tutor"})),
        )
        .await;
    assert_eq!(r.status, StatusCode::CREATED);
    let id = r.json()["id"].as_i64().unwrap();
    assert_eq!(h.get("/api/users", &t).await.json().as_array().unwrap().len(), 2);
    assert_eq!(h.get(&format!("/api/users/{id}"), &t).await.json()["username"], "newtutor");
    let r = h
        .call(Method::POST, "/api/users", Some(&t), Some(json!({"username": "bad", "password": "password99", "access_level": 3, "email": "b@example.org"})))
        .await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
    let r = h.call(Method::DELETE, &format!("/api/users/{}", admin.id), Some(&t), None).await;
    assert_eq!(r.code(), "CONFLICT");
    assert_eq!(h.call(Method::DELETE, &format!("/api/users/{id}"), Some(&t), None).await.status, StatusCode::NO_CONTENT);
    assert_eq!(h.get(&format!("/api/users/{id}"), &t).await.code(), "NOT_FOUND");
}

#[tokio::test]
async fn deleting_a_seminar_with_enrollments_needs_cascade() {
    let h = Harness::new();
    let tutor = h.user("tut", AccessLevel::Tutor);
    let stu = h.user("stu", AccessLevel::Student);
    let s = h.seminar(&tutor, "Intro", 5, 3);
    h.store().enroll_atomic(s.id, stu.id).unwrap();
    let t = h.login("tut", PASSWORD).await;
    let r = h.call(Method::DELETE, &format!("/api/seminars/{}", s.id), Some(&t), None).await;
    assert_eq!(r.code(), "CONFLICT");
    let r = h.call(Method::DELETE, &format!("/api/seminars/{}?cascade=true", s.id), Some(&t), None).await;
    assert_eq!(r.status, StatusCode::NO_CONTENT);
    assert!(h.store().get_seminar(s.id).is_err());
}

#[tokio::test]
async fn certificate_download_and_refusal() {
    let h = Harness::new();
    let tutor = h.user("tut", AccessLevel::Tutor);
    let stu = h.user("stu", AccessLevel::Student);
    let done = h.seminar(&tutor, "Done", 5, 2);
    let not_done = h.seminar(&tutor, "Pending", 5, 2);
    for s in [&done, &not_done] {
        h.store().enroll_atomic(s.id, stu.id).unwrap();
    }
    for hour in 1..=2 {
        h.store().record_presence(done.id, stu.id, hour, true).unwrap();
    }
    h.store().finalize_seminar(done.id).unwrap();
    let t = h.login("stu", PASSWORD).await;
    let history = h.get("/api/me/history", &t).await.json();
    assert_eq!(history.as_array().unwrap().len(), 1);
    let serial = history[0]["certificate_serial"].as_str().unwrap().to_string();

    let r = h.get(&format!("/api/me/history/{}/certificate", done.id), &t).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.headers[header::CONTENT_TYPE], "text/html; charset=utf-8");
    let html = String::from_utf8(r.bytes.clone()).unwrap();
    assert!(html.contains(&serial) && html.contains("Done") && html.contains("stu Tester"));
    assert_eq!(h.get(&format!("/api/me/history/{}/certificate", done.id), &t).await.bytes, r.bytes);

    let r = h.get(&format!("/api/me/history/{}/certificate", not_done.id), &t).await;
    assert_eq!((r.status, r.code().as_str()), (StatusCode::NOT_FOUND, "NOT_FOUND"));

    let enrolled = h.get("/api/me/enrollments", &t).await.json();
    assert_eq!(enrolled.as_array().unwrap().len(), 2);
}

#[tokio::test]
async fn reads_do_not_change_state() {
    let h = Harness::new();
    let admin = h.user("root", AccessLevel::Admin);
    let tutor = h.user("tut", AccessLevel::Tutor);
    let stu = h.user("stu", AccessLevel::Student);
    let s = h.seminar(&tutor, "Intro", 5, 3);
    h.store().enroll_atomic(s.id, stu.id).unwrap();
    h.store().record_presence(s.id, stu.id, 1, true).unwrap();
    let f = h.store().store_material(s.id, tutor.id, "a.txt", "text/plain", b"abc").unwrap();
    h.store().post_announcement(admin.id, "all", "", AnnouncementTarget::Everyone).unwrap();
    let tokens = [h.login("root", PASSWORD).await, h.login("tut", PASSWORD).await, h.login("stu", PASSWORD).await];
    let before = h.store().export_logical().unwrap();
    let paths = [
        "/api/health".to_string(),
        "/api/me".into(),
        "/api/me/history".into(),
        "/api/me/enrollments".into(),
        "/api/users".into(),
        format!("/api/users/{}", stu.id),
        "/api/seminars".into(),
        format!("/api/seminars/{}", s.id),
        format!("/api/seminars/{}/participants", s.id),
        format!("/api/seminars/{}/attendance", s.id),
        format!("/api/seminars/{}/materials", s.id),
        format!("/api/materials/{}", f.id),
        "/api/news".into(),
        "/api/admin/dead-letters".into(),
    ];
    for t in &tokens {
        for p in &paths {
            h.get(p, t).await;
        }
    }
    assert_eq!(h.store().export_logical().unwrap(), before);
}

#[tokio::test]
async fn ui_directory_is_served_when_configured() {
    use esem_core::api::{router, RouterOptions};
    let h = Harness::new();
    let ui = h.dir.path().join("ui");
    std::fs::create_dir_all(&ui).unwrap();
    std::fs::write(ui.join("index.html"), "<h1>e-Sem</h1>").unwrap();
    let app = router(h.service.state.clone(), RouterOptions { ui_dir: Some(ui), inspection: false });
    use tower::ServiceExt;
    let res = app
        .clone()
        .oneshot(Request::builder().uri("/ui/").body(Body::empty()).unwrap())
        .await
        .unwrap();
    assert_eq!(res.status(), StatusCode::OK);
    let res = app
        .oneshot(Request::builder().uri("/api/test/outbox").body(Body::empty()).unwrap())
        .await
        .unwrap();
    assert_eq!(res.status(), StatusCode::NOT_FOUND);
}
