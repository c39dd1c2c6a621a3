mod common;

use std::time::Duration;

use common::*;
use epimob::engine::EpidemicParams;
use epimob::mobility::SyntheticCitySpec;
use epimob::service::{
    DatasetSource, JobRecord, JobStatus, Service, ServiceOptions, SimulationConfig, Store, SyntheticDatasetRequest,
};
use epimob::Error;

const POLL: Duration = Duration::from_millis(20);

fn opts() -> ServiceOptions {
    ServiceOptions {
        workers: 1,
        ensemble_workers: Some(1),
        ..Default::default()
    }
}

fn small_source(seed: u64) -> DatasetSource {
    DatasetSource::Synthetic(SyntheticDatasetRequest::new(SyntheticCitySpec::new(300, seed), 7))
}

fn config(dataset: &str, seed: u64, m: usize) -> SimulationConfig {
    SimulationConfig::new(
        dataset,
        EpidemicParams {
            rng_seed: seed,
            ..Default::default()
        },
        m,
    )
}

#[test]
fn job_runs_to_done_and_resubmission_is_cached() {
    let dir = tempfile::tempdir().unwrap();
    let svc = Service::open(dir.path(), opts()).unwrap();
    let ds = svc.register_dataset(small_source(1)).unwrap();
    let first = svc.submit(config(&ds.dataset_id, 1, 10)).unwrap();
    assert!(!first.cached);
    assert_eq!(first.status, JobStatus::Queued);
    let rec = svc.wait(&first.job_id, POLL).unwrap();
    assert_eq!(rec.status, JobStatus::Done, "{:?}", rec.error);
    assert_eq!(rec.progress, 1.0);
    assert!(rec.started_at.is_some() && rec.finished_at.is_some());
    assert_eq!(svc.result(&first.job_id).unwrap().runs.len(), 10);

    // The display name does not take part in deduplication.
    let mut renamed = config(&ds.dataset_id, 1, 10);
    renamed.name = "again".into();
    let again = svc.submit(renamed).unwrap();
    assert!(again.cached);
    assert_eq!(again.job_id, first.job_id);
    assert_eq!(again.status, JobStatus::Done);

    let other = svc.submit(config(&ds.dataset_id, 2, 10)).unwrap();
    assert!(!other.cached);
    assert_ne!(other.job_id, first.job_id);
    assert_eq!(svc.jobs(10)[0].job_id, other.job_id);
    svc.shutdown();
}

#[test]
fn unknown_ids_are_not_found() {
    let dir = tempfile::tempdir().unwrap();
    let svc = Service::open(dir.path(), opts()).unwrap();
    assert!(matches!(svc.submit(config("nope", 1, 10)), Err(Error::NotFound { .. })));
    assert!(matches!(svc.job("000000-deadbeef"), Err(Error::NotFound { .. })));
    assert!(matches!(svc.dataset("nope"), Err(Error::NotFound { .. })));
    assert!(matches!(
        Service::open(dir.path(), ServiceOptions { workers: 0, ..opts() }),
        Err(Error::InvalidInput { .. })
    ));
}

#[test]
fn unfinished_job_is_not_ready() {
    let dir = tempfile::tempdir().unwrap();
    let svc = Service::open(dir.path(), opts()).unwrap();
    let ds = svc.register_dataset(small_source(1)).unwrap();
    // One worker: the second job waits behind the first.
    let busy = svc.submit(config(&ds.dataset_id, 1, 60)).unwrap();
    let waiting = svc.submit(config(&ds.dataset_id, 2, 60)).unwrap();
    let err = svc.result(&waiting.job_id).unwrap_err();
    assert!(
        matches!(&err, Error::NotReady { id, .. } if *id == waiting.job_id),
        "{err}"
    );
    assert!(matches!(svc.curve(&waiting.job_id), Err(Error::NotReady { .. })));
    svc.wait(&busy.job_id, POLL).unwrap();
    svc.wait(&waiting.job_id, POLL).unwrap();
    assert!(svc.result(&waiting.job_id).is_ok());
}

#[test]
fn capacity_is_enforced_at_submission() {
    let dir = tempfile::tempdir().unwrap();
    let svc = Service::open(
        dir.path(),
        ServiceOptions {
            capacity: 300 * 7 * 10,
            ..opts()
        },
    )
    .unwrap();
    let ds = svc.register_dataset(small_source(1)).unwrap();
    assert!(svc.submit(config(&ds.dataset_id, 1, 10)).is_ok());
    assert!(matches!(
        svc.submit(config(&ds.dataset_id, 1, 11)),
        Err(Error::Capacity { .. })
    ));
    assert!(matches!(
        svc.submit(config(&ds.dataset_id, 1, 1)),
        Err(Error::InvalidInput { .. })
    ));
}

#[test]
fn failed_job_is_not_deduplicated() {
    let dir = tempfile::tempdir().unwrap();
    let svc = Service::open(dir.path(), opts()).unwrap();
    let ds = svc.register_dataset(small_source(1)).unwrap();
    // Valid on its own, but the start date lies outside the dataset horizon.
    let mut cfg = config(&ds.dataset_id, 1, 10);
    cfg.policies = vec![lockdown(
        "late",
        day(30),
        3,
        vec![square(epimob::geo::Grid::default().center(cell(0)), 500.0)],
    )];
    let first = svc.submit(cfg.clone()).unwrap();
    let rec = svc.wait(&first.job_id, POLL).unwrap();
    assert_eq!(rec.status, JobStatus::Failed);
    assert!(rec.error.is_some());
    let second = svc.submit(cfg).unwrap();
    assert!(!second.cached);
    assert_ne!(second.job_id, first.job_id);
}

#[test]
fn results_survive_a_restart() {
    let dir = tempfile::tempdir().unwrap();
    let (job_id, curve, dataset_id) = {
        let svc = Service::open(dir.path(), opts()).unwrap();
        let ds = svc.register_dataset(small_source(3)).unwrap();
        let sub = svc.submit(config(&ds.dataset_id, 4, 12)).unwrap();
        svc.wait(&sub.job_id, POLL).unwrap();
        let curve = svc.curve(&sub.job_id).unwrap();
        svc.shutdown();
        (sub.job_id, curve, ds.dataset_id)
    };
    let svc = Service::open(dir.path(), opts()).unwrap();
    assert_eq!(svc.dataset_ids().unwrap(), vec![dataset_id.clone()]);
    assert_eq!(svc.job(&job_id).unwrap().status, JobStatus::Done);
    assert_eq!(svc.curve(&job_id).unwrap(), curve);
    let er = svc.result(&job_id).unwrap();
    assert_eq!(er.fingerprint, svc.config(&job_id).unwrap().fingerprint());
    // Same config after restart: still a cache hit, and new ids do not collide.
    assert!(svc.submit(config(&dataset_id, 4, 12)).unwrap().cached);
    let fresh = svc.submit(config(&dataset_id, 5, 12)).unwrap();
    assert!(fresh.job_id.as_str() > job_id.as_str());
}

#[test]
fn damaged_result_is_an_integrity_error() {
    let dir = tempfile::tempdir().unwrap();
    let job_id = {
        let svc = Service::open(dir.path(), opts()).unwrap();
        let ds = svc.register_dataset(small_source(3)).unwrap();
        let sub = svc.submit(config(&ds.dataset_id, 4, 5)).unwrap();
        svc.wait(&sub.job_id, POLL).unwrap();
        svc.shutdown();
        sub.job_id
    };
    let store = Store::open(dir.path()).unwrap();
    let rec: JobRecord = store.get("jobs", &job_id).unwrap().unwrap();
    let path = store.file_path("results", &rec.result.unwrap()).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 10]).unwrap();

    let svc = Service::open(dir.path(), opts()).unwrap();
    assert!(matches!(svc.result(&job_id), Err(Error::Integrity { .. })));
}

fn record(job_id: &str, fingerprint: &str, dataset_id: &str, status: JobStatus) -> JobRecord {
    JobRecord {
        job_id: job_id.into(),
        fingerprint: fingerprint.into(),
        name: String::new(),
        dataset_id: dataset_id.into(),
        status,
        progress: 0.0,
        result: None,
        error: None,
        created_at: 0,
        started_at: None,
        finished_at: None,
    }
}

#[test]
fn restart_fails_running_jobs_and_requeues_queued_ones() {
    let dir = tempfile::tempdir().unwrap();
    let dataset_id = {
        let svc = Service::open(dir.path(), opts()).unwrap();
        svc.register_dataset(small_source(1)).unwrap().dataset_id
    };
    let store = Store::open(dir.path()).unwrap();
    let running = config(&dataset_id, 1, 5);
    let queued = config(&dataset_id, 2, 5);
    let (rid, qid) = ("000000-aaaaaaaa", "000001-bbbbbbbb");
    store.put("configs", rid, &running).unwrap();
    store
        .put(
            "jobs",
            rid,
            &record(rid, &running.fingerprint(), &dataset_id, JobStatus::Running),
        )
        .unwrap();
    store.put("configs", qid, &queued).unwrap();
    store
        .put(
            "jobs",
            qid,
            &record(qid, &queued.fingerprint(), &dataset_id, JobStatus::Queued),
        )
        .unwrap();

    let svc = Service::open(dir.path(), opts()).unwrap();
    let r = svc.job(rid).unwrap();
    assert_eq!(r.status, JobStatus::Failed);
    assert_eq!(r.error.as_deref(), Some("interrupted by a service restart"));
    let persisted: JobRecord = store.get("jobs", rid).unwrap().unwrap();
    assert_eq!(persisted.status, JobStatus::Failed);

    let q = svc.wait(qid, POLL).unwrap();
    assert_eq!(q.status, JobStatus::Done, "{:?}", q.error);
    assert_eq!(svc.result(qid).unwrap().runs.len(), 5);

    // The interrupted config is runnable again under a new id.
    let again = svc.submit(running).unwrap();
    assert!(!again.cached);
    assert!(again.job_id.starts_with("000002-"));
}
