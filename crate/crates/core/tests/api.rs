mod common;

use std::sync::Arc;
use std::time::Duration;

use common::*;
use epimob::service::{Service, ServiceOptions};
use epimob::time::{format_timestamp, LocalClock};
use reqwest::StatusCode;
use serde_json::{json, Value};

struct Server {
    base: String,
    http: reqwest::Client,
    stop: Option<tokio::sync::oneshot::Sender<()>>,
    _dir: tempfile::TempDir,
}

impl Server {
    async fn start(capacity: u64) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let opts = ServiceOptions {
            workers: 1,
            capacity,
            ensemble_workers: Some(1),
        };
        let service = Arc::new(Service::open(dir.path(), opts).unwrap());
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        let (tx, rx) = tokio::sync::oneshot::channel::<()>();
        tokio::spawn(epimob::service::serve(service, listener, async {
            let _ = rx.await;
        }));
        Self {
            base,
            http: reqwest::Client::new(),
            stop: Some(tx),
            _dir: dir,
        }
    }

    async fn get(&self, path: &str) -> (StatusCode, Value) {
        let resp = self.http.get(format!("{}{path}", self.base)).send().await.unwrap();
        (resp.status(), resp.json().await.unwrap())
    }

    async fn post(&self, path: &str, body: &Value) -> (StatusCode, Value) {
        let resp = self
            .http
            .post(format!("{}{path}", self.base))
            .json(body)
            .send()
            .await
            .unwrap();
        (resp.status(), resp.json().await.unwrap())
    }

    async fn post_raw(&self, path: &str, body: &'static str) -> (StatusCode, Value) {
        let resp = self
            .http
            .post(format!("{}{path}", self.base))
            .header("content-type", "application/json")
            .body(body)
            .send()
            .await
            .unwrap();
        (resp.status(), resp.json().await.unwrap())
    }

    async fn small_city(&self) -> String {
        let (status, ds) = self
            .post(
                "/v1/datasets/synthetic",
                &json!({"n_users": 300, "rng_seed": 1, "days": 7}),
            )
            .await;
        assert_eq!(status, StatusCode::CREATED, "{ds}");
        ds["dataset_id"].as_str().unwrap().to_string()
    }

    async fn finish(&self, job: &str) -> Value {
        loop {
            let (status, rec) = self.get(&format!("/v1/simulations/{job}")).await;
            assert_eq!(status, StatusCode::OK);
            match rec["status"].as_str().unwrap() {
                "done" | "failed" => return rec,
                _ => tokio::time::sleep(Duration::from_millis(50)).await,
            }
        }
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
    }
}

fn job_id(v: &Value) -> String {
    v["job_id"].as_str().unwrap().to_string()
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn errors_map_to_status_codes() {
    let s = Server::start(300 * 7 * 40).await;
    let (status, body) = s.get("/v1/datasets/ffffffffffffffff").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["kind"], "not_found");
    assert_eq!(s.get("/v1/simulations/000000-00000000").await.0, StatusCode::NOT_FOUND);

    let ds = s.small_city().await;
    let (status, body) = s
        .post(
            "/v1/simulations",
            &json!({"dataset_id": ds, "params": {"beta_global": "high"}}),
        )
        .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["field"], "params.beta_global");
    let (status, body) = s
        .post(
            "/v1/simulations",
            &json!({"dataset_id": ds, "params": {"beta_global": -0.1}}),
        )
        .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["field"], "params.beta_global");
    let (status, body) = s.post_raw("/v1/simulations", "{not json").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["kind"], "invalid_input");
    let (status, body) = s.post("/v1/simulations", &json!({"dataset_id": ds, "m": 41})).await;
    assert_eq!(status, StatusCode::PAYLOAD_TOO_LARGE);
    assert_eq!(body["kind"], "capacity");

    let (status, busy) = s.post("/v1/simulations", &json!({"dataset_id": ds, "m": 40})).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let (_, waiting) = s
        .post(
            "/v1/simulations",
            &json!({"dataset_id": ds, "m": 40, "params": {"rng_seed": 9}}),
        )
        .await;
    let (status, body) = s.get(&format!("/v1/simulations/{}/curve", job_id(&waiting))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["kind"], "not_ready");

    let rec = s.finish(&job_id(&busy)).await;
    assert_eq!(rec["status"], "done");
    let job = job_id(&busy);
    let (status, body) = s.get(&format!("/v1/simulations/{job}/severity/nonsense/hourly")).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["field"], "cell");
    let (status, body) = s.get(&format!("/v1/simulations/{job}/severity?res=12")).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["field"], "res");
    s.finish(&job_id(&waiting)).await;
}

/// Three users, each stepping between two places every half hour over two local days.
fn upload_csv() -> String {
    let clock = LocalClock::default();
    let d0 = clock.day_start(epimob::time::date_to_day(start_date()));
    let mut csv = String::from("uid,timestamp,lat,lon\n");
    for u in 0..3 {
        for q in 0..96 {
            let lat = if q % 2 == 0 { 35.65 } else { 35.66 } + 0.01 * f64::from(u);
            csv.push_str(&format!(
                "u{u},{},{lat},139.70\n",
                format_timestamp(d0 + i64::from(q) * 1800)
            ));
        }
    }
    csv
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn multipart_upload_and_dataset_views() {
    let s = Server::start(epimob::service::DEFAULT_CAPACITY).await;
    let form = reqwest::multipart::Form::new()
        .text("trajectories", upload_csv())
        .text(
            "pois",
            "lat,lon,category\n35.65,139.70,restaurant\n35.66,139.71,station\n",
        )
        .text("options", r#"{"step": 1800}"#);
    let resp = s
        .http
        .post(format!("{}/v1/datasets", s.base))
        .multipart(form)
        .send()
        .await
        .unwrap();
    assert_eq!(resp.status(), StatusCode::CREATED);
    let summary: Value = resp.json().await.unwrap();
    assert_eq!(summary["users"], 3);
    assert_eq!(summary["pois"], 2);
    assert_eq!(summary["step"], 1800);
    let id = summary["dataset_id"].as_str().unwrap().to_string();

    let (status, ids) = s.get("/v1/datasets").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(ids, json!([id]));
    assert_eq!(s.get(&format!("/v1/datasets/{id}")).await.1, summary);

    let (status, layers) = s
        .get(&format!("/v1/poi/layers?dataset={id}&categories=restaurant"))
        .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(layers["layers"]["restaurant"], json!([[139.70, 35.65]]));
    assert!(layers["layers"].get("station").is_none());
    let (_, all) = s.get("/v1/poi/layers").await;
    assert_eq!(all["dataset_id"], id.as_str());
    assert_eq!(all["layers"]["station"], json!([[139.71, 35.66]]));

    let (status, work) = s.get(&format!("/v1/datasets/{id}/workplaces?res=6")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(work["resolution"], 6);

    let bad = reqwest::multipart::Form::new().text("trajectories", "uid,when,lat,lon\nu0,x,1,2\n");
    let resp = s
        .http
        .post(format!("{}/v1/datasets", s.base))
        .multipart(bad)
        .send()
        .await
        .unwrap();
    assert_eq!(resp.status(), StatusCode::BAD_REQUEST);
    let missing = reqwest::multipart::Form::new().text("pois", "");
    let resp = s
        .http
        .post(format!("{}/v1/datasets", s.base))
        .multipart(missing)
        .send()
        .await
        .unwrap();
    assert_eq!(resp.status(), StatusCode::BAD_REQUEST);
    let body: Value = resp.json().await.unwrap();
    assert_eq!(body["field"], "trajectories");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn jobs_results_and_comparisons() {
    let s = Server::start(epimob::service::DEFAULT_CAPACITY).await;
    let ds = s.small_city().await;
    let low = json!({"dataset_id": ds, "m": 10, "name": "low", "params": {"beta_global": 0.2}});
    let high = json!({"dataset_id": ds, "m": 10, "name": "high", "params": {"beta_global": 0.4}});
    let (status, a) = s.post("/v1/simulations", &low).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    assert_eq!(a["cached"], false);
    let (_, b) = s.post("/v1/simulations", &high).await;
    let (a, b) = (job_id(&a), job_id(&b));
    assert_eq!(s.finish(&a).await["status"], "done");
    assert_eq!(s.finish(&b).await["status"], "done");

    let (status, again) = s.post("/v1/simulations", &low).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(again["cached"], true);
    assert_eq!(job_id(&again), a);

    let (_, listed) = s.get("/v1/simulations").await;
    let ids: Vec<&str> = listed
        .as_array()
        .unwrap()
        .iter()
        .map(|j| j["job_id"].as_str().unwrap())
        .collect();
    assert_eq!(ids, [b.as_str(), a.as_str()]);
    let (_, cfg) = s.get(&format!("/v1/simulations/{a}/config")).await;
    assert_eq!(cfg["params"]["beta_global"], 0.2);
    assert_eq!(cfg["name"], "low");

    let (_, curve) = s.get(&format!("/v1/simulations/{a}/curve")).await;
    assert_eq!(curve["name"], "low");
    assert_eq!(curve["points"].as_array().unwrap().len(), 7);

    let (status, sev) = s.get(&format!("/v1/simulations/{b}/severity?res=6")).await;
    assert_eq!(status, StatusCode::OK);
    let clusters = sev["clusters"].as_array().unwrap();
    let total: u64 = clusters.iter().map(|c| c["count"].as_u64().unwrap()).sum();
    assert_eq!(total, sev["total_events"].as_u64().unwrap());
    let cell = clusters[0]["cell"].as_str().unwrap();
    let (status, hist) = s.get(&format!("/v1/simulations/{b}/severity/{cell}/hourly")).await;
    assert_eq!(status, StatusCode::OK);
    let bins: f64 = hist["bins"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .sum();
    assert!((bins - 100.0).abs() < 1e-9);

    let (status, cmp) = s
        .post("/v1/comparisons", &json!({"job_ids": [b, a], "name": "beta"}))
        .await;
    assert_eq!(status, StatusCode::OK, "{cmp}");
    assert_eq!(cmp["ranking"][0]["curve"], "low");
    let (status, _) = s
        .post("/v1/comparisons", &json!({"job_ids": [a, "000099-00000000"]}))
        .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}
