use std::collections::{BTreeMap, HashMap, VecDeque};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Condvar, Mutex, RwLock};
use std::thread::JoinHandle;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::config::{execute, SimulationConfig};
use super::dataset::{Dataset, DatasetSource, DatasetSummary};
use super::store::Store;
use crate::analytics::{
    compare_policies, cumulative_curve, hourly_histogram, severity_clusters, Comparison, CurveSeries, HourlyHistogram,
    SeverityPayload,
};
use crate::engine::EnsembleResult;
use crate::error::{Error, Result};
use crate::geo::{CellId, Resolution};

const NS_DATASETS: &str = "datasets";
const NS_JOBS: &str = "jobs";
const NS_CONFIGS: &str = "configs";
const NS_RESULTS: &str = "results";

/// users × days × runs accepted per job by default (a 2,000-user, 14-day,
/// 100-run ensemble is 2.8M).
pub const DEFAULT_CAPACITY: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Failed,
}

impl JobStatus {
    fn can_become(self, next: JobStatus) -> bool {
        matches!(
            (self, next),
            (JobStatus::Queued, JobStatus::Running)
                | (JobStatus::Queued, JobStatus::Failed)
                | (JobStatus::Running, JobStatus::Done)
                | (JobStatus::Running, JobStatus::Failed)
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            JobStatus::Queued => "queued",
            JobStatus::Running => "running",
            JobStatus::Done => "done",
            JobStatus::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobRecord {
    pub job_id: String,
    pub fingerprint: String,
    pub name: String,
    pub dataset_id: String,
    pub status: JobStatus,
    /// Finished runs over requested runs.
    pub progress: f64,
    /// Store key of the result once done.
    pub result: Option<String>,
    pub error: Option<String>,
    pub created_at: u64,
    pub started_at: Option<u64>,
    pub finished_at: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmitResponse {
    pub job_id: String,
    pub status: JobStatus,
    /// True when an identical configuration was already queued, running or done.
    pub cached: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct ServiceOptions {
    /// Jobs executed at once.
    pub workers: usize,
    /// Upper bound on users × days × runs per job.
    pub capacity: u64,
    /// Threads per ensemble; `None` shares the global pool.
    pub ensemble_workers: Option<usize>,
}

impl Default for ServiceOptions {
    fn default() -> Self {
        Self {
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            capacity: DEFAULT_CAPACITY,
            ensemble_workers: None,
        }
    }
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

#[derive(Default)]
struct JobTable {
    jobs: BTreeMap<String, JobRecord>,
    by_fingerprint: HashMap<String, String>,
    next: u64,
}

struct Inner {
    store: Store,
    opts: ServiceOptions,
    datasets: RwLock<HashMap<String, Arc<Dataset>>>,
    jobs: RwLock<JobTable>,
    queue: Mutex<VecDeque<String>>,
    wake: Condvar,
    results: Mutex<HashMap<String, Arc<EnsembleResult>>>,
    stop: AtomicBool,
}

/// Dataset registry, job queue and result access. Job records and results
/// are persisted so a restarted service picks up where it left off.
pub struct Service {
    inner: Arc<Inner>,
    workers: Mutex<Vec<JoinHandle<()>>>,
}

impl Service {
    /// Opens the store at `dir`, recovers jobs and starts the workers.
    /// Jobs that were running when the previous process stopped are marked
    /// failed; queued jobs are queued again.
    pub fn open(dir: impl AsRef<std::path::Path>, opts: ServiceOptions) -> Result<Self> {
        if opts.workers == 0 {
            return Err(Error::invalid("workers", "must be at least 1"));
        }
        let store = Store::open(dir)?;
        let mut table = JobTable::default();
        let mut queue = VecDeque::new();
        for key in store.keys(NS_JOBS)? {
            let Some(mut rec) = store.get::<JobRecord>(NS_JOBS, &key)? else {
                continue;
            };
            match rec.status {
                JobStatus::Running => {
                    rec.status = JobStatus::Failed;
                    rec.error = Some("interrupted by a service restart".into());
                    rec.finished_at = Some(now());
                    store.put(NS_JOBS, &key, &rec)?;
                }
                JobStatus::Queued => queue.push_back(key.clone()),
                _ => {}
            }
            if rec.status != JobStatus::Failed {
                table.by_fingerprint.insert(rec.fingerprint.clone(), key.clone());
            }
            if let Some(seq) = key.split('-').next().and_then(|s| s.parse::<u64>().ok()) {
                table.next = table.next.max(seq + 1);
            }
            table.jobs.insert(key, rec);
        }
        let inner = Arc::new(Inner {
            store,
            opts,
            datasets: RwLock::default(),
            jobs: RwLock::new(table),
            queue: Mutex::new(queue),
            wake: Condvar::new(),
            results: Mutex::default(),
            stop: AtomicBool::new(false),
        });
        let workers = (0..opts.workers)
            .map(|i| {
                let inner = Arc::clone(&inner);
                std::thread::Builder::new()
                    .name(format!("epimob-worker-{i}"))
                    .spawn(move || inner.work())
                    .expect("spawn worker")
            })
            .collect();
        Ok(Self {
            inner,
            workers: Mutex::new(workers),
        })
    }

    pub fn store(&self) -> &Store {
        &self.inner.store
    }

    pub fn register_dataset(&self, source: DatasetSource) -> Result<DatasetSummary> {
        let ds = Dataset::build(source)?;
        self.inner.store.put(NS_DATASETS, &ds.id, &ds.source)?;
        let summary = ds.summary();
        self.inner
            .datasets
            .write()
            .expect("dataset lock")
            .insert(ds.id.clone(), Arc::new(ds));
        Ok(summary)
    }

    pub fn dataset(&self, id: &str) -> Result<Arc<Dataset>> {
        self.inner.dataset(id)
    }

    pub fn dataset_ids(&self) -> Result<Vec<String>> {
        self.inner.store.keys(NS_DATASETS)
    }

    pub fn submit(&self, cfg: SimulationConfig) -> Result<SubmitResponse> {
        cfg.validate()?;
        let ds = self.inner.dataset(&cfg.dataset_id)?;
        let cost = cfg.cost(&ds);
        if cost > self.inner.opts.capacity {
            return Err(Error::Capacity {
                message: format!(
                    "{} users x {} days x {} runs = {cost} exceeds the budget of {}",
                    ds.trajectories.len(),
                    ds.trajectories.days().count(),
                    cfg.m,
                    self.inner.opts.capacity
                ),
            });
        }
        let fp = cfg.fingerprint();
        let mut table = self.inner.jobs.write().expect("job lock");
        if let Some(existing) = table.by_fingerprint.get(&fp) {
            let rec = &table.jobs[existing];
            return Ok(SubmitResponse {
                job_id: rec.job_id.clone(),
                status: rec.status,
                cached: true,
            });
        }
        let job_id = format!("{:06}-{}", table.next, &fp[..8]);
        table.next += 1;
        let rec = JobRecord {
            job_id: job_id.clone(),
            fingerprint: fp.clone(),
            name: cfg.name.clone(),
            dataset_id: cfg.dataset_id.clone(),
            status: JobStatus::Queued,
            progress: 0.0,
            result: None,
            error: None,
            created_at: now(),
            started_at: None,
            finished_at: None,
        };
        self.inner.store.put(NS_CONFIGS, &job_id, &cfg)?;
        self.inner.store.put(NS_JOBS, &job_id, &rec)?;
        table.by_fingerprint.insert(fp, job_id.clone());
        table.jobs.insert(job_id.clone(), rec);
        drop(table);
        self.inner.queue.lock().expect("queue lock").push_back(job_id.clone());
        self.inner.wake.notify_one();
        Ok(SubmitResponse {
            job_id,
            status: JobStatus::Queued,
            cached: false,
        })
    }

    pub fn job(&self, id: &str) -> Result<JobRecord> {
        self.inner
            .jobs
            .read()
            .expect("job lock")
            .jobs
            .get(id)
            .cloned()
            .ok_or_else(|| Error::not_found("job", id))
    }

    /// Most recent jobs first.
    pub fn jobs(&self, limit: usize) -> Vec<JobRecord> {
        let table = self.inner.jobs.read().expect("job lock");
        table.jobs.values().rev().take(limit).cloned().collect()
    }

    pub fn config(&self, id: &str) -> Result<SimulationConfig> {
        self.job(id)?;
        self.inner
            .store
            .get(NS_CONFIGS, id)?
            .ok_or_else(|| Error::not_found("config", id))
    }

    /// Blocks until the job is done or failed, polling every `every`.
    pub fn wait(&self, id: &str, every: std::time::Duration) -> Result<JobRecord> {
        loop {
            let rec = self.job(id)?;
            if matches!(rec.status, JobStatus::Done | JobStatus::Failed) {
                return Ok(rec);
            }
            std::thread::sleep(every);
        }
    }

    pub fn result(&self, id: &str) -> Result<Arc<EnsembleResult>> {
        let rec = self.job(id)?;
        if rec.status != JobStatus::Done {
            return Err(Error::NotReady {
                id: id.to_string(),
                status: rec.status.as_str().to_string(),
            });
        }
        let key = rec.result.ok_or_else(|| Error::not_found("result", id))?;
        if let Some(r) = self.inner.results.lock().expect("result lock").get(&key) {
            return Ok(Arc::clone(r));
        }
        let er: EnsembleResult = self
            .inner
            .store
            .get(NS_RESULTS, &key)?
            .ok_or_else(|| Error::not_found("result", &key))?;
        let er = Arc::new(er);
        self.inner
            .results
            .lock()
            .expect("result lock")
            .insert(key, Arc::clone(&er));
        Ok(er)
    }

    fn label(&self, id: &str) -> Result<(String, SimulationConfig)> {
        let cfg = self.config(id)?;
        let name = if cfg.name.is_empty() {
            id.to_string()
        } else {
            cfg.name.clone()
        };
        Ok((name, cfg))
    }

    pub fn curve(&self, id: &str) -> Result<CurveSeries> {
        let er = self.result(id)?;
        let (name, cfg) = self.label(id)?;
        cumulative_curve(&er, &name, &cfg.policies)
    }

    pub fn severity(&self, id: &str, res: Option<Resolution>) -> Result<SeverityPayload> {
        let er = self.result(id)?;
        severity_clusters(&er, res.unwrap_or(er.meta.resolution))
    }

    pub fn hourly(&self, id: &str, cell: CellId) -> Result<HourlyHistogram> {
        let er = self.result(id)?;
        hourly_histogram(&er, &[cell])
    }

    pub fn compare(&self, ids: &[String], name: &str) -> Result<Comparison> {
        let results = ids.iter().map(|id| self.result(id)).collect::<Result<Vec<_>>>()?;
        let mut curves = Vec::with_capacity(ids.len());
        for (id, er) in ids.iter().zip(&results) {
            let (label, cfg) = self.label(id)?;
            curves.push((cumulative_curve(er, &label, &cfg.policies)?, &**er));
        }
        compare_policies(curves, name)
    }

    /// Stops the workers after their current job.
    pub fn shutdown(&self) {
        self.inner.stop.store(true, Ordering::SeqCst);
        self.inner.wake.notify_all();
        for h in self.workers.lock().expect("worker lock").drain(..) {
            let _ = h.join();
        }
    }
}

impl Drop for Service {
    fn drop(&mut self) {
        self.inner.stop.store(true, Ordering::SeqCst);
        self.inner.wake.notify_all();
    }
}

impl Inner {
    fn dataset(&self, id: &str) -> Result<Arc<Dataset>> {
        if let Some(ds) = self.datasets.read().expect("dataset lock").get(id) {
            return Ok(Arc::clone(ds));
        }
        let source: DatasetSource = self
            .store
            .get(NS_DATASETS, id)
            .map_err(|e| match e {
                Error::InvalidInput { .. } => Error::not_found("dataset", id),
                e => e,
            })?
            .ok_or_else(|| Error::not_found("dataset", id))?;
        let ds = Arc::new(Dataset::build(source)?);
        if ds.id != id {
            return Err(Error::Integrity {
                key: format!("{NS_DATASETS}/{id}"),
                message: format!("rebuilt dataset has id {}", ds.id),
            });
        }
        let mut map = self.datasets.write().expect("dataset lock");
        Ok(Arc::clone(map.entry(id.to_string()).or_insert(ds)))
    }

    fn update(&self, id: &str, f: impl FnOnce(&mut JobRecord)) -> Result<()> {
        let mut table = self.jobs.write().expect("job lock");
        let rec = table.jobs.get_mut(id).ok_or_else(|| Error::not_found("job", id))?;
        let before = rec.status;
        f(rec);
        assert!(
            before == rec.status || before.can_become(rec.status),
            "job {id}: {before:?} -> {:?} is not a forward transition",
            rec.status
        );
        if before != rec.status {
            self.store.put(NS_JOBS, id, rec)?;
            if rec.status == JobStatus::Failed {
                let fp = rec.fingerprint.clone();
                table.by_fingerprint.remove(&fp);
            }
        }
        Ok(())
    }

    fn next_job(&self) -> Option<String> {
        let mut q = self.queue.lock().expect("queue lock");
        loop {
            if self.stop.load(Ordering::SeqCst) {
                return None;
            }
            if let Some(id) = q.pop_front() {
                return Some(id);
            }
            q = self.wake.wait(q).expect("queue lock");
        }
    }

    fn work(&self) {
        while let Some(id) = self.next_job() {
            if let Err(e) = self.run_job(&id) {
                let msg = e.to_string();
                let _ = self.update(&id, |r| {
                    r.status = JobStatus::Failed;
                    r.error = Some(msg);
                    r.finished_at = Some(now());
                });
            }
        }
    }

    fn run_job(&self, id: &str) -> Result<()> {
        self.update(id, |r| {
            r.status = JobStatus::Running;
            r.started_at = Some(now());
        })?;
        let cfg: SimulationConfig = self
            .store
            .get(NS_CONFIGS, id)?
            .ok_or_else(|| Error::not_found("config", id))?;
        let ds = self.dataset(&cfg.dataset_id)?;
        let done = std::sync::atomic::AtomicUsize::new(0);
        let on_run = || {
            let k = done.fetch_add(1, Ordering::SeqCst) + 1;
            let _ = self.update(id, |r| r.progress = k as f64 / cfg.m as f64);
        };
        let er = execute(&ds, &cfg, self.opts.ensemble_workers, &on_run)?;
        let key = er.fingerprint.clone();
        self.store.put(NS_RESULTS, &key, &er)?;
        self.results
            .lock()
            .expect("result lock")
            .insert(key.clone(), Arc::new(er));
        self.update(id, |r| {
            r.status = JobStatus::Done;
            r.progress = 1.0;
            r.result = Some(key);
            r.finished_at = Some(now());
        })
    }
}
