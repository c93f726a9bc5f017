use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::jobs::{execute, JobKind, JobResult, Overrides};
use crate::cli::artifacts::atomic_write;
use crate::domain::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub id: String,
    pub kind: JobKind,
    pub state: JobState,
    pub scenario_id: String,
    pub overrides: Overrides,
    /// Path of the result file relative to the data directory, once done.
    pub result: Option<String>,
    pub error: Option<String>,
    /// Milliseconds since the Unix epoch.
    pub submitted_at: u64,
    pub started_at: Option<u64>,
    pub finished_at: Option<u64>,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let text = serde_json::to_vec(value).map_err(io::Error::other)?;
    atomic_write(path, &text)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> io::Result<T> {
    let bytes = fs::read(path)?;
    serde_json::from_slice(&bytes).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
}

/// Scenarios, jobs and results under one data directory:
/// `scenarios/<id>.json`, `jobs/<id>.json`, `results/<id>.json` and
/// `idempotency.json`.
pub struct Store {
    root: PathBuf,
    jobs: Mutex<HashMap<String, Job>>,
    idempotency: Mutex<BTreeMap<String, String>>,
    queue: Mutex<mpsc::Sender<String>>,
}

impl Store {
    /// Opens or creates the store and starts `workers` solver threads.
    /// Jobs left queued by a previous process are queued again; jobs that
    /// were running are marked failed.
    pub fn open(root: &Path, workers: usize) -> io::Result<Arc<Store>> {
        for sub in ["scenarios", "jobs", "results"] {
            fs::create_dir_all(root.join(sub))?;
        }
        let idem_path = root.join("idempotency.json");
        let idempotency = if idem_path.exists() {
            read_json(&idem_path)?
        } else {
            BTreeMap::new()
        };
        let mut jobs = HashMap::new();
        for entry in fs::read_dir(root.join("jobs"))? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "json") {
                let job: Job = read_json(&path)?;
                jobs.insert(job.id.clone(), job);
            }
        }
        let (tx, rx) = mpsc::channel::<String>();
        let store = Arc::new(Store {
            root: root.to_path_buf(),
            jobs: Mutex::new(jobs),
            idempotency: Mutex::new(idempotency),
            queue: Mutex::new(tx),
        });

        let mut pending: Vec<Job> = Vec::new();
        {
            let mut jobs = store.jobs.lock().unwrap();
            for job in jobs.values_mut() {
                match job.state {
                    JobState::Running => {
                        job.state = JobState::Failed;
                        job.error = Some("interrupted by a service restart".into());
                        job.finished_at = Some(now_ms());
                        store.persist(job)?;
                    }
                    JobState::Queued => pending.push(job.clone()),
                    _ => {}
                }
            }
        }
        pending.sort_by(|a, b| (a.submitted_at, &a.id).cmp(&(b.submitted_at, &b.id)));
        for job in pending {
            store.enqueue(job.id);
        }

        let rx = Arc::new(Mutex::new(rx));
        for i in 0..workers.max(1) {
            let store = Arc::clone(&store);
            let rx = Arc::clone(&rx);
            std::thread::Builder::new()
                .name(format!("equiders-worker-{i}"))
                .spawn(move || loop {
                    let next = rx.lock().unwrap().recv();
                    match next {
                        Ok(id) => store.run(&id),
                        Err(_) => break,
                    }
                })?;
        }
        Ok(store)
    }

    fn scenario_path(&self, id: &str) -> PathBuf {
        self.root.join("scenarios").join(format!("{id}.json"))
    }

    fn result_rel(id: &str) -> String {
        format!("results/{id}.json")
    }

    fn persist(&self, job: &Job) -> io::Result<()> {
        write_json(&self.root.join("jobs").join(format!("{}.json", job.id)), job)
    }

    fn enqueue(&self, id: String) {
        // Workers hold the receiver for the life of the store.
        let _ = self.queue.lock().unwrap().send(id);
    }

    /// Ids are generated here; only valid ids ever reach the filesystem.
    fn valid_id(id: &str) -> bool {
        uuid::Uuid::parse_str(id).is_ok()
    }

    /// Persists a validated scenario. With an idempotency key already seen,
    /// returns the earlier id and `false`.
    pub fn put_scenario(&self, scenario: &Scenario, key: Option<&str>) -> io::Result<(String, bool)> {
        let mut idem = self.idempotency.lock().unwrap();
        if let Some(id) = key.and_then(|k| idem.get(k)) {
            return Ok((id.clone(), false));
        }
        let id = uuid::Uuid::new_v4().to_string();
        write_json(&self.scenario_path(&id), scenario)?;
        if let Some(k) = key {
            idem.insert(k.to_string(), id.clone());
            write_json(&self.root.join("idempotency.json"), &*idem)?;
        }
        Ok((id, true))
    }

    pub fn scenario_exists(&self, id: &str) -> bool {
        Self::valid_id(id) && self.scenario_path(id).is_file()
    }

    pub fn scenario(&self, id: &str) -> io::Result<Option<Scenario>> {
        if !self.scenario_exists(id) {
            return Ok(None);
        }
        read_json(&self.scenario_path(id)).map(Some)
    }

    pub fn submit(&self, scenario_id: &str, kind: JobKind, overrides: Overrides) -> io::Result<Job> {
        let job = Job {
            id: uuid::Uuid::new_v4().to_string(),
            kind,
            state: JobState::Queued,
            scenario_id: scenario_id.to_string(),
            overrides,
            result: None,
            error: None,
            submitted_at: now_ms(),
            started_at: None,
            finished_at: None,
        };
        self.persist(&job)?;
        self.jobs.lock().unwrap().insert(job.id.clone(), job.clone());
        self.enqueue(job.id.clone());
        Ok(job)
    }

    pub fn job(&self, id: &str) -> Option<Job> {
        self.jobs.lock().unwrap().get(id).cloned()
    }

    pub fn result(&self, job: &Job) -> io::Result<serde_json::Value> {
        read_json(&self.root.join(Self::result_rel(&job.id)))
    }

    fn update(&self, id: &str, f: impl FnOnce(&mut Job)) -> Option<Job> {
        let mut jobs = self.jobs.lock().unwrap();
        let job = jobs.get_mut(id)?;
        f(job);
        let snapshot = job.clone();
        drop(jobs);
        if let Err(e) = self.persist(&snapshot) {
            eprintln!("job {id}: cannot persist state: {e}");
        }
        Some(snapshot)
    }

    fn run(&self, id: &str) {
        let Some(job) = self.update(id, |j| {
            j.state = JobState::Running;
            j.started_at = Some(now_ms());
        }) else {
            return;
        };
        let outcome = self
            .scenario(&job.scenario_id)
            .map_err(|e| format!("cannot read scenario: {e}"))
            .and_then(|s| s.ok_or_else(|| format!("scenario {} not found", job.scenario_id)))
            .and_then(|s| execute(&s, job.kind, &job.overrides).map_err(|e| e.to_string()))
            .and_then(|r: JobResult| {
                write_json(&self.root.join(Self::result_rel(id)), &r).map_err(|e| format!("cannot write result: {e}"))
            });
        self.update(id, |j| {
            j.finished_at = Some(now_ms());
            match outcome {
                Ok(()) => {
                    j.state = JobState::Done;
                    j.result = Some(Self::result_rel(id));
                }
                Err(msg) => {
                    j.state = JobState::Failed;
                    j.error = Some(msg);
                }
            }
        });
    }
}
