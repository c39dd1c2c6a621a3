//! Starts the HTTP service in-process and drives it the way a browser client would.

use std::sync::Arc;
use std::time::Duration;

use epimob::service::{serve, Service, ServiceOptions};
use serde_json::{json, Value};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let service = Arc::new(Service::open(dir.path(), ServiceOptions::default())?);
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
    let base = format!("http://{}/v1", listener.local_addr()?);
    let (stop, stopped) = tokio::sync::oneshot::channel::<()>();
    let server = tokio::spawn(serve(service, listener, async {
        let _ = stopped.await;
    }));

    let http = reqwest::Client::new();
    let ds: Value = http
        .post(format!("{base}/datasets/synthetic"))
        .json(&json!({"n_users": 500, "rng_seed": 1, "days": 7}))
        .send()
        .await?
        .json()
        .await?;
    println!("dataset {} with {} users", ds["dataset_id"], ds["users"]);

    let job: Value = http
        .post(format!("{base}/simulations"))
        .json(&json!({"dataset_id": ds["dataset_id"], "m": 20, "name": "baseline"}))
        .send()
        .await?
        .json()
        .await?;
    let id = job["job_id"].as_str().unwrap_or_default().to_string();
    loop {
        let rec: Value = http
            .get(format!("{base}/simulations/{id}"))
            .send()
            .await?
            .json()
            .await?;
        println!(
            "{id}: {} {:.0}%",
            rec["status"],
            rec["progress"].as_f64().unwrap_or(0.0) * 100.0
        );
        if rec["status"] == "done" || rec["status"] == "failed" {
            break;
        }
        tokio::time::sleep(Duration::from_millis(250)).await;
    }
    let curve: Value = http
        .get(format!("{base}/simulations/{id}/curve"))
        .send()
        .await?
        .json()
        .await?;
    if let Some(last) = curve["points"].as_array().and_then(|p| p.last()) {
        println!(
            "final cumulative infections {} [{}, {}]",
            last["mean"], last["lo"], last["hi"]
        );
    }

    let _ = stop.send(());
    server.await??;
    Ok(())
}
