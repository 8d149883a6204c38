use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use base64::Engine;
use birs_core::sim::SimParams;
use birs_core::{parse_model, WeightConfig};
use birs_service::docs::{PlanDocument, TelemetryRecord};
use birs_service::server::router;
use birs_service::session::{Session, SessionConfig};
use birs_testkit::{today, twocorridor};
use futures::StreamExt;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn app_with(tick: Duration, initial_room: Option<&str>) -> Router {
    let session = Session::start(SessionConfig {
        model: twocorridor(),
        weights: WeightConfig::default(),
        today: today(),
        params: SimParams::default(),
        initial_room: initial_room.map(str::to_string),
        tick,
    })
    .unwrap();
    router(session)
}

fn app() -> Router {
    app_with(Duration::ZERO, Some("W-CORRIDOR"))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap())
}

async fn wait_until_idle(app: &Router) -> Value {
    for _ in 0..2000 {
        let (_, v) = call(app, "GET", "/api/mission", None).await;
        if v["data"]["active"] == false {
            return v["data"].clone();
        }
        tokio::time::sleep(Duration::from_millis(5)).await;
    }
    panic!("mission did not finish");
}

#[tokio::test]
async fn model_and_rooms() {
    let app = app();
    let (status, v) = call(&app, "GET", "/api/model", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["ok"], true);
    let reparsed = parse_model(v["data"].to_string().as_bytes()).unwrap();
    assert_eq!(reparsed, twocorridor());

    let (_, v) = call(&app, "GET", "/api/rooms", None).await;
    let rooms = v["data"].as_array().unwrap();
    assert_eq!(rooms.len(), 5);
    let north = rooms.iter().find(|r| r["id"] == "N-CORRIDOR").unwrap();
    assert_eq!(north["name"], "NORTH CORRIDOR");
    assert_eq!(north["area"], 120.0);
    assert_eq!(north["scan_age_days"], 10);
    assert_eq!(north["hazard"], false);
    assert_eq!(north["curtain"], true);
    assert_eq!(north["weight"], 30.0);
    let side = rooms.iter().find(|r| r["id"] == "SIDE-ROOM").unwrap();
    assert_eq!(side["scan_age_days"], Value::Null);
}

#[tokio::test]
async fn grid_as_document_and_graymap() {
    let app = app();
    let (_, v) = call(&app, "GET", "/api/grid", None).await;
    let d = &v["data"];
    assert_eq!((d["width"].as_u64(), d["height"].as_u64()), (Some(600), Some(400)));
    assert_eq!(d["resolution"], 0.05);
    assert_eq!(d["layer"], "walls");
    let pgm = base64::engine::general_purpose::STANDARD.decode(d["pgm"].as_str().unwrap()).unwrap();
    assert!(pgm.starts_with(b"P5\n600 400\n255\n"));
    let zeros = pgm[b"P5\n600 400\n255\n".len()..].iter().filter(|&&b| b == 0).count();
    assert_eq!(zeros as u64, d["occupied"].as_u64().unwrap());

    let (_, plan) = call(&app, "GET", "/api/grid?layer=plan", None).await;
    assert!(plan["data"]["occupied"].as_u64() > d["occupied"].as_u64());

    let req = Request::get("/api/grid?format=pgm").body(Body::empty()).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    assert_eq!(resp.headers()["content-type"], "image/x-portable-graymap");
    let raw = resp.into_body().collect().await.unwrap().to_bytes();
    assert_eq!(&raw[..], &pgm[..]);

    let (status, v) = call(&app, "GET", "/api/grid?layer=roof", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["ok"], false);
}

#[tokio::test]
async fn weight_edits_are_validated_and_atomic() {
    let app = app();
    let (_, v) = call(&app, "GET", "/api/weights", None).await;
    assert_eq!(serde_json::from_value::<WeightConfig>(v["data"].clone()).unwrap(), WeightConfig::default());

    let mut bad = serde_json::to_value(WeightConfig::default()).unwrap();
    bad["wm_curtain"] = json!(20.0);
    bad["wd_pull"] = json!(-1.0);
    let (status, v) = call(&app, "PUT", "/api/weights", Some(bad)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"]["kind"], "validation");
    assert!(v["error"]["message"].as_str().unwrap().contains("wd_pull"));
    let (_, v) = call(&app, "GET", "/api/weights", None).await;
    assert_eq!(v["data"]["wm_curtain"], 12.0);

    let (status, v) = call(&app, "PUT", "/api/weights", Some(json!({ "wm_curtain": 30, "color": 1 }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"]["kind"], "bad-request");

    let (status, v) = call(&app, "PUT", "/api/weights", Some(json!({ "wm_curtain": 30 }))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["data"]["wm_curtain"], 30.0);
    let (_, v) = call(&app, "GET", "/api/rooms", None).await;
    let north = v["data"].as_array().unwrap().iter().find(|r| r["id"] == "N-CORRIDOR").unwrap().clone();
    assert_eq!(north["weight"], 48.0);
}

#[tokio::test]
async fn plan_endpoint() {
    let app = app();
    let (status, v) = call(&app, "POST", "/api/plan", Some(json!({ "to": "E-CORRIDOR" }))).await;
    assert_eq!(status, StatusCode::OK);
    let doc: PlanDocument = serde_json::from_value(v["data"].clone()).unwrap();
    assert_eq!(doc.from, "W-CORRIDOR");
    assert_eq!(doc.path.semantic_path, ["W-CORRIDOR", "D1", "CENTER-HALL", "D2", "E-CORRIDOR"]);
    assert_eq!(doc.path.total_weight, 58.0);
    assert_eq!(doc.waypoints.len(), 5);
    assert!(doc.grid_length >= 24.0 - 1e-9);

    // One-off weights leave the stored table alone.
    let heavy = WeightConfig {
        wd_pull: 100.0,
        ..WeightConfig::default()
    };
    let (_, v) = call(&app, "POST", "/api/plan", Some(json!({ "to": "E-CORRIDOR", "weights": heavy }))).await;
    assert_eq!(v["data"]["semantic_path"][2], "N-CORRIDOR");
    let (_, v) = call(&app, "GET", "/api/weights", None).await;
    assert_eq!(v["data"]["wd_pull"], 6.0);

    let (status, v) = call(&app, "POST", "/api/plan", Some(json!({ "to": "R9" }))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(v["error"]["kind"], "unknown-room");
    let (status, _) = call(&app, "POST", "/api/plan", Some(json!({ "to": "W-CORRIDOR" }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn plan_endpoint_reports_no_path() {
    let mut model = twocorridor();
    model.doors.retain(|d| d.from_room != "SIDE-ROOM" && d.to_room != "SIDE-ROOM");
    let session = Session::start(SessionConfig {
        model,
        weights: WeightConfig::default(),
        today: today(),
        params: SimParams::default(),
        initial_room: Some("W-CORRIDOR".into()),
        tick: Duration::ZERO,
    })
    .unwrap();
    let app = router(session);
    let (status, v) = call(&app, "POST", "/api/plan", Some(json!({ "to": "SIDE-ROOM" }))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"]["kind"], "no-path");
    assert_eq!(v["error"]["details"], json!({ "from": "W-CORRIDOR", "to": "SIDE-ROOM" }));
}

#[tokio::test]
async fn plan_needs_a_start_when_the_robot_is_nowhere() {
    let app = app_with(Duration::ZERO, None);
    let (status, v) = call(&app, "POST", "/api/plan", Some(json!({ "to": "E-CORRIDOR" }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"]["kind"], "validation");
    let (status, _) = call(&app, "POST", "/api/plan", Some(json!({ "from": "W-CORRIDOR", "to": "E-CORRIDOR" }))).await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test]
async fn hazard_toggles_show_up_in_plans() {
    let app = app();
    let (status, v) = call(&app, "POST", "/api/hazard", Some(json!({ "room_id": "CENTER-HALL", "active": true }))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["data"]["replanned"], false);
    let (_, v) = call(&app, "POST", "/api/plan", Some(json!({ "to": "E-CORRIDOR" }))).await;
    assert_eq!(v["data"]["semantic_path"][2], "N-CORRIDOR");
    assert_eq!(v["data"]["warnings"], json!([]));

    call(&app, "POST", "/api/hazard", Some(json!({ "room_id": "N-CORRIDOR", "active": true }))).await;
    let (_, v) = call(&app, "POST", "/api/plan", Some(json!({ "to": "E-CORRIDOR" }))).await;
    assert_eq!(v["data"]["semantic_path"][2], "CENTER-HALL");
    assert_eq!(v["data"]["warnings"][1]["kind"], "no-safe-alternative");

    let (_, v) = call(&app, "GET", "/api/rooms", None).await;
    let hall = v["data"].as_array().unwrap().iter().find(|r| r["id"] == "CENTER-HALL").unwrap().clone();
    assert_eq!(hall["hazard"], true);

    let (status, v) = call(&app, "POST", "/api/hazard", Some(json!({ "room_id": "R9", "active": true }))).await;
    assert_eq!((status, v["error"]["kind"].clone()), (StatusCode::NOT_FOUND, json!("unknown-room")));
}

#[tokio::test]
async fn one_mission_at_a_time() {
    // Slow ticks keep the first mission running while the second is refused.
    let app = app_with(Duration::from_millis(20), Some("W-CORRIDOR"));
    let (status, v) = call(&app, "POST", "/api/mission/start", Some(json!({ "to": "E-CORRIDOR" }))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["data"]["active"], true);
    assert_eq!(v["data"]["events"][0]["kind"], "mission-started");

    let (status, v) = call(&app, "POST", "/api/mission/start", Some(json!({ "to": "SIDE-ROOM" }))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(v["error"]["kind"], "conflict");

    let (status, v) = call(&app, "POST", "/api/mission/abort", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["data"]["status"], "aborted");
    let last = v["data"]["events"].as_array().unwrap().last().unwrap().clone();
    assert_eq!((last["kind"].clone(), last["payload"]["reason"].clone()), (json!("aborted"), json!("operator")));

    let (status, _) = call(&app, "POST", "/api/mission/abort", None).await;
    assert_eq!(status, StatusCode::CONFLICT);
}

#[tokio::test]
async fn weights_apply_to_the_mission_only_on_replan() {
    let app = app_with(Duration::from_millis(20), Some("W-CORRIDOR"));
    call(&app, "POST", "/api/mission/start", Some(json!({ "to": "E-CORRIDOR" }))).await;
    let (_, v) = call(&app, "PUT", "/api/weights", Some(json!({ "wm_curtain": 100 }))).await;
    assert_eq!(v["data"]["wm_curtain"], 100.0);
    let (_, v) = call(&app, "GET", "/api/mission", None).await;
    assert_eq!(v["data"]["path"]["total_weight"], 58.0);

    let (_, v) = call(&app, "POST", "/api/hazard", Some(json!({ "room_id": "CENTER-HALL", "active": true }))).await;
    assert_eq!(v["data"]["replanned"], true);
    // 12 + 2 + (100 + 12 + 6) + 2 + 22
    assert_eq!(v["data"]["path"]["total_weight"], 156.0);
    call(&app, "POST", "/api/mission/abort", None).await;
}

#[tokio::test]
async fn mission_runs_to_the_goal_and_telemetry_matches_the_log() {
    let app = app();
    let req = Request::get("/api/telemetry").body(Body::empty()).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    assert_eq!(resp.headers()["content-type"], "application/x-ndjson");
    let mut body = resp.into_body().into_data_stream();

    let (status, _) = call(&app, "POST", "/api/mission/start", Some(json!({ "to": "E-CORRIDOR" }))).await;
    assert_eq!(status, StatusCode::OK);

    let mut buf = String::new();
    let mut events = Vec::new();
    let mut states = 0;
    'read: while let Some(chunk) = tokio::time::timeout(Duration::from_secs(30), body.next()).await.unwrap() {
        buf.push_str(std::str::from_utf8(&chunk.unwrap()).unwrap());
        while let Some(nl) = buf.find('\n') {
            let line: String = buf.drain(..=nl).collect();
            match serde_json::from_str::<TelemetryRecord>(line.trim_end()).unwrap() {
                TelemetryRecord::Event(e) => {
                    let done = e.kind == birs_core::sim::EventKind::GoalReached;
                    events.push(e);
                    if done {
                        break 'read;
                    }
                }
                TelemetryRecord::State(_) => states += 1,
            }
        }
    }
    let snap = wait_until_idle(&app).await;
    assert_eq!(snap["status"], "finished");
    assert_eq!(snap["room_id"], "E-CORRIDOR");
    let logged: Vec<birs_core::sim::Event> = serde_json::from_value(snap["events"].clone()).unwrap();
    assert_eq!(events, logged);
    assert!(states > 100);

    // The robot stays where it stopped: the next plan starts there.
    let (_, v) = call(&app, "POST", "/api/plan", Some(json!({ "to": "SIDE-ROOM" }))).await;
    assert_eq!(v["data"]["from"], "E-CORRIDOR");
}

#[tokio::test]
async fn telemetry_rate_at_default_tick() {
    let app = app_with(Duration::from_millis(50), Some("W-CORRIDOR"));
    let req = Request::get("/api/telemetry").body(Body::empty()).unwrap();
    let mut body = app.clone().oneshot(req).await.unwrap().into_body().into_data_stream();
    call(&app, "POST", "/api/mission/start", Some(json!({ "to": "E-CORRIDOR" }))).await;
    let start = tokio::time::Instant::now();
    let mut states = 0;
    while start.elapsed() < Duration::from_secs(1) {
        let Ok(Some(chunk)) = tokio::time::timeout(Duration::from_millis(200), body.next()).await else { continue };
        states += std::str::from_utf8(&chunk.unwrap()).unwrap().matches("\"type\":\"state\"").count();
    }
    assert!(states >= 10, "{states} samples in one second");
    call(&app, "POST", "/api/mission/abort", None).await;
}

#[tokio::test]
async fn telemetry_over_websocket() {
    let app = app();
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let server = app.clone();
    tokio::spawn(async move { axum::serve(listener, server).await });
    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/api/telemetry")).await.unwrap();

    call(&app, "POST", "/api/mission/start", Some(json!({ "to": "E-CORRIDOR" }))).await;
    let mut kinds = Vec::new();
    while let Some(msg) = tokio::time::timeout(Duration::from_secs(30), ws.next()).await.unwrap() {
        let text = msg.unwrap().into_text().unwrap();
        if let TelemetryRecord::Event(e) = serde_json::from_str(&text).unwrap() {
            kinds.push(e.kind);
            if e.kind == birs_core::sim::EventKind::GoalReached {
                break;
            }
        }
    }
    assert_eq!(kinds.first(), Some(&birs_core::sim::EventKind::MissionStarted));
    assert!(!kinds.contains(&birs_core::sim::EventKind::Estop));
}

#[tokio::test]
async fn unknown_routes_and_bad_bodies() {
    let app = app();
    let (status, v) = call(&app, "GET", "/api/nothing", None).await;
    assert_eq!((status, v["ok"].clone()), (StatusCode::NOT_FOUND, json!(false)));

    let req = Request::post("/api/plan").body(Body::from("{\"to\": ")).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    assert_eq!(resp.status(), StatusCode::BAD_REQUEST);
    let v: Value = serde_json::from_slice(&resp.into_body().collect().await.unwrap().to_bytes()).unwrap();
    assert_eq!(v["error"]["kind"], "bad-request");
    assert_eq!(v["error"]["details"]["line"], 1);
}
