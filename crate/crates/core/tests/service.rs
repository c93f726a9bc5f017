use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use equiders::domain::{validate_solution, Solution, ValidationTolerances};
use equiders::ingest::SyntheticSpec;
use equiders::service::{router, Store};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

struct Api {
    app: Router,
    _dir: tempfile::TempDir,
}

impl Api {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let app = router(Store::open(dir.path(), 2).unwrap());
        Self { app, _dir: dir }
    }

    async fn call(&self, method: &str, uri: &str, body: Option<Value>, key: Option<&str>) -> (StatusCode, Value) {
        let mut req = Request::builder()
            .method(method)
            .uri(uri)
            .header("content-type", "application/json");
        if let Some(k) = key {
            req = req.header("idempotency-key", k);
        }
        let req = req
            .body(body.map_or(Body::empty(), |b| Body::from(b.to_string())))
            .unwrap();
        let resp = self.app.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
    }

    async fn post(&self, uri: &str, body: Value) -> (StatusCode, Value) {
        self.call("POST", uri, Some(body), None).await
    }

    async fn get(&self, uri: &str) -> (StatusCode, Value) {
        self.call("GET", uri, None, None).await
    }

    async fn scenario(&self, seed: u64) -> String {
        let (status, body) = self.post("/api/v1/scenarios", json!({ "synthetic": small(seed) })).await;
        assert_eq!(status, StatusCode::CREATED, "{body}");
        body["id"].as_str().unwrap().to_string()
    }

    async fn submit(&self, scenario_id: &str, kind: &str, overrides: Value) -> String {
        let req = json!({ "scenario_id": scenario_id, "kind": kind, "overrides": overrides });
        let (status, job) = self.post("/api/v1/jobs", req).await;
        assert_eq!(status, StatusCode::ACCEPTED, "{job}");
        assert_eq!(job["state"], "queued");
        job["id"].as_str().unwrap().to_string()
    }

    async fn finish(&self, job_id: &str) -> Value {
        for _ in 0..60 {
            let (status, job) = self.get(&format!("/api/v1/jobs/{job_id}?wait_secs=5")).await;
            assert_eq!(status, StatusCode::OK);
            if job["state"] == "done" || job["state"] == "failed" {
                return job;
            }
            tokio::time::sleep(Duration::from_millis(20)).await;
        }
        panic!("job {job_id} did not finish");
    }

    async fn result(&self, job_id: &str) -> (StatusCode, Value) {
        self.get(&format!("/api/v1/jobs/{job_id}/result")).await
    }
}

fn small(seed: u64) -> Value {
    json!({ "seed": seed, "n_tracts": 2, "archetypes_per_tract": 3, "hours": 672 })
}

#[tokio::test]
async fn solve_job_returns_a_valid_solution() {
    let api = Api::new();
    let sid = api.scenario(1).await;
    let jid = api.submit(&sid, "solve", json!({})).await;
    let job = api.finish(&jid).await;
    assert_eq!(job["state"], "done", "{job}");
    assert!(job["finished_at"].as_u64() >= job["started_at"].as_u64());

    let (status, body) = api.result(&jid).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["kind"], "solve");
    let sol: Solution = serde_json::from_value(body["solution"].clone()).unwrap();
    let scenario = SyntheticSpec::new(1, 2, 3, 672).generate().unwrap();
    validate_solution(&scenario, &sol, ValidationTolerances::default()).unwrap();
}

#[tokio::test]
async fn sweep_job_has_one_row_per_ratio() {
    let api = Api::new();
    let sid = api.scenario(2).await;
    let jid = api.submit(&sid, "sweep", json!({ "ratios": [1.0, 0.8, 0.6] })).await;
    assert_eq!(api.finish(&jid).await["state"], "done");
    let (_, body) = api.result(&jid).await;
    let ratios: Vec<f64> = body["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["ratio"].as_f64().unwrap())
        .collect();
    assert_eq!(ratios, vec![1.0, 0.8, 0.6]);
}

#[tokio::test]
async fn validate_job_reports_indicators() {
    let api = Api::new();
    let sid = api.scenario(3).await;
    let jid = api.submit(&sid, "validate", json!({ "threshold_pct": 50.0 })).await;
    assert_eq!(api.finish(&jid).await["state"], "done");
    let (_, body) = api.result(&jid).await;
    assert_eq!(body["report"]["threshold_pct"], 50.0);
    assert!(!body["report"]["indicators"].as_array().unwrap().is_empty());
}

#[tokio::test]
async fn repeated_jobs_give_identical_results() {
    let api = Api::new();
    let sid = api.scenario(4).await;
    let a = api.submit(&sid, "solve", json!({ "budget": 2000.0 })).await;
    let b = api.submit(&sid, "solve", json!({ "budget": 2000.0 })).await;
    api.finish(&a).await;
    api.finish(&b).await;
    let (_, ra) = api.result(&a).await;
    let (_, rb) = api.result(&b).await;
    assert_eq!(ra, rb);
}

#[tokio::test]
async fn invalid_scenarios_name_the_field() {
    let api = Api::new();
    let mut scenario = serde_json::to_value(SyntheticSpec::new(1, 1, 2, 48).generate().unwrap()).unwrap();
    scenario["archetypes"][0]["annual_income"] = json!(-5.0);
    let (status, body) = api.post("/api/v1/scenarios", json!({ "scenario": scenario })).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{body}");
    let fields: Vec<&str> = body["errors"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["field"].as_str().unwrap())
        .collect();
    assert!(fields.iter().any(|f| f.starts_with("scenario.") && f.ends_with("annual_income")), "{fields:?}");

    let (status, body) = api.post("/api/v1/scenarios", json!({ "synthetic": { "seed": 1, "n_tracts": 0 } })).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{body}");
    let (status, _) = api.post("/api/v1/scenarios", json!({})).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, _) = api.call("POST", "/api/v1/scenarios", None, None).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn idempotency_key_returns_the_first_id() {
    let api = Api::new();
    let body = json!({ "synthetic": small(5) });
    let (s1, b1) = api.call("POST", "/api/v1/scenarios", Some(body.clone()), Some("k-1")).await;
    let (s2, b2) = api.call("POST", "/api/v1/scenarios", Some(body.clone()), Some("k-1")).await;
    let (s3, b3) = api.call("POST", "/api/v1/scenarios", Some(body), Some("k-2")).await;
    assert_eq!((s1, s2, s3), (StatusCode::CREATED, StatusCode::OK, StatusCode::CREATED));
    assert_eq!(b1["id"], b2["id"]);
    assert_ne!(b1["id"], b3["id"]);
}

#[tokio::test]
async fn bad_job_requests_are_rejected() {
    let api = Api::new();
    let sid = api.scenario(6).await;
    let (status, body) = api
        .post("/api/v1/jobs", json!({ "scenario_id": sid, "kind": "sweep", "overrides": {} }))
        .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{body}");
    assert_eq!(body["errors"][0]["field"], "overrides");
    let (status, _) = api
        .post("/api/v1/jobs", json!({ "scenario_id": sid, "kind": "solve", "overrides": { "ratio": 2.0 } }))
        .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, _) = api
        .post("/api/v1/jobs", json!({ "scenario_id": sid, "kind": "solve", "overrides": { "model": "both" } }))
        .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, _) = api.post("/api/v1/jobs", json!({ "scenario_id": sid, "kind": "dance" })).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn unknown_ids_are_not_found() {
    let api = Api::new();
    let missing = "00000000-0000-4000-8000-000000000000";
    for uri in [
        format!("/api/v1/scenarios/{missing}/summary"),
        "/api/v1/scenarios/../../etc/summary".to_string(),
        format!("/api/v1/jobs/{missing}"),
        format!("/api/v1/jobs/{missing}/result"),
    ] {
        let (status, _) = api.get(&uri).await;
        assert_eq!(status, StatusCode::NOT_FOUND, "{uri}");
    }
    let (status, _) = api.post("/api/v1/jobs", json!({ "scenario_id": missing, "kind": "solve" })).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn failed_jobs_answer_409_with_the_error() {
    let api = Api::new();
    let sid = api.scenario(7).await;
    // A one-point grid cannot fit the hourly dispatch curves.
    let jid = api.submit(&sid, "solve", json!({ "model": "time", "grid": 1 })).await;
    let job = api.finish(&jid).await;
    assert_eq!(job["state"], "failed");
    let (status, body) = api.result(&jid).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["state"], "failed");
    assert!(body["message"].as_str().unwrap().contains("grid"), "{body}");
}

#[tokio::test]
async fn summary_counts_every_household() {
    let api = Api::new();
    let sid = api.scenario(8).await;
    let (status, body) = api.get(&format!("/api/v1/scenarios/{sid}/summary")).await;
    assert_eq!(status, StatusCode::OK);
    let scenario = SyntheticSpec::new(8, 2, 3, 672).generate().unwrap();
    let total: u64 = scenario.archetypes.iter().map(|a| a.count as u64).sum();
    assert_eq!(body["households"].as_u64(), Some(total));
    assert_eq!(body["hours"], 672);
    assert_eq!(body["tracts"].as_array().unwrap().len(), 2);
    let binned: u64 = body["burden_histogram"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["households"].as_u64().unwrap())
        .sum();
    assert_eq!(binned, total);
}

#[tokio::test]
async fn queued_jobs_survive_a_restart() {
    let dir = tempfile::tempdir().unwrap();
    let sid;
    let jid;
    {
        let api = Api {
            app: router(Store::open(dir.path(), 1).unwrap()),
            _dir: tempfile::tempdir().unwrap(),
        };
        let (_, body) = api.post("/api/v1/scenarios", json!({ "synthetic": small(9) })).await;
        sid = body["id"].as_str().unwrap().to_string();
        jid = api.submit(&sid, "solve", json!({})).await;
        api.finish(&jid).await;
    }
    let api = Api {
        app: router(Store::open(dir.path(), 1).unwrap()),
        _dir: tempfile::tempdir().unwrap(),
    };
    let (status, job) = api.get(&format!("/api/v1/jobs/{jid}")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(job["state"], "done");
    assert_eq!(job["scenario_id"], sid.as_str());
    assert_eq!(api.result(&jid).await.0, StatusCode::OK);
}
