//! Drives the HTTP API in-process: uploads a scenario, runs a sweep job and
//! prints the rows.

use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use equiders::service::{router, Store};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(app: &axum::Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or(Body::empty(), |b| Body::from(b.to_string())))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join(format!("equiders-client-{}", std::process::id()));
    let app = router(Store::open(&dir, 2)?);

    let spec = json!({"synthetic": {"seed": 1, "n_tracts": 2, "archetypes_per_tract": 3, "hours": 8760}});
    let (status, body) = call(&app, "POST", "/api/v1/scenarios", Some(spec)).await;
    println!("scenario: {status} {body}");
    let scenario_id = body["id"].as_str().unwrap().to_string();

    let job = json!({"scenario_id": scenario_id, "kind": "sweep", "overrides": {"ratios": [1.0, 0.8, 0.6]}});
    let (_, job) = call(&app, "POST", "/api/v1/jobs", Some(job)).await;
    let job_id = job["id"].as_str().unwrap().to_string();
    loop {
        let (_, j) = call(&app, "GET", &format!("/api/v1/jobs/{job_id}?wait_secs=5"), None).await;
        println!("job {}", j["state"]);
        if j["state"] == "done" || j["state"] == "failed" {
            break;
        }
        tokio::time::sleep(Duration::from_millis(100)).await;
    }
    let (status, result) = call(&app, "GET", &format!("/api/v1/jobs/{job_id}/result"), None).await;
    println!("result: {status}");
    for row in result["rows"].as_array().into_iter().flatten() {
        println!("  ratio {} battery {:.1} kWh", row["ratio"], row["battery_kwh"].as_f64().unwrap_or(0.0));
    }
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
