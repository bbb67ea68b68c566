//! The bootstrap service: task queue, data map, scheduler thread, workers.
//!
//! Shape of the machine: admitted refresh requests land in a sequence-keyed
//! task queue while their ciphertext bytes go into a per-client data map.
//! A single scheduler thread repeatedly takes the task with the lowest
//! sequence number — first come, first served — and hands it to one of P
//! pre-started worker threads over a rendezvous channel, so a handoff
//! happens exactly when a worker is free. The worker runs the refresh,
//! writes the result back into the data map, and flips the entry to
//! finished; clients retrieve results by polling, and each result is
//! delivered exactly once.
//!
//! Workers never touch the network and the service never runs cryptography
//! on its own threads; the split mirrors the service/scheduler/worker
//! design the admission policy assumes.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use crossbeam_channel::{bounded, Receiver, Sender, SendTimeoutError};

use crate::enclave::Enclave;
use crate::error::{Error, Result};

use super::policy::PolicyConfig;

/// Executes one bootstrap: takes ciphertext bytes, returns refreshed bytes.
///
/// The service is generic over the runner so tests and benchmarks can
/// substitute controlled work for real enclave calls.
pub trait BootstrapRunner: Send + Sync + 'static {
    /// Performs the refresh for one client.
    fn run(&self, client_id: &[u8; 16], ciphertext: &[u8]) -> Result<Vec<u8>>;
}

/// The production runner: forwards to the enclave's refresh call.
pub struct EnclaveRunner {
    enclave: Arc<Enclave>,
}

impl EnclaveRunner {
    /// Wraps an enclave.
    pub fn new(enclave: Arc<Enclave>) -> Self {
        EnclaveRunner { enclave }
    }
}

impl BootstrapRunner for EnclaveRunner {
    fn run(&self, client_id: &[u8; 16], ciphertext: &[u8]) -> Result<Vec<u8>> {
        self.enclave.decrease_noise(client_id, ciphertext)
    }
}

/// A runner that sleeps for a fixed duration and echoes its input.
///
/// Used to measure scheduler behavior under a known service time.
pub struct InjectedDelayRunner {
    delay: Duration,
}

impl InjectedDelayRunner {
    /// Runner with the given fixed service time.
    pub fn new(delay: Duration) -> Self {
        InjectedDelayRunner { delay }
    }
}

impl BootstrapRunner for InjectedDelayRunner {
    fn run(&self, _client_id: &[u8; 16], ciphertext: &[u8]) -> Result<Vec<u8>> {
        thread::sleep(self.delay);
        Ok(ciphertext.to_vec())
    }
}

/// Service tunables.
#[derive(Clone, Copy, Debug)]
pub struct SchedulerConfig {
    /// Number of worker threads (P ≥ 1).
    pub pool_size: usize,
    /// Eager-admission budget threshold, in bits.
    pub eager_threshold: u32,
    /// Mandatory-admission safety margin, in bits.
    pub mandatory_margin: u32,
    /// Idle-park and polling granularity.
    pub poll_interval: Duration,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        SchedulerConfig {
            pool_size: 2,
            eager_threshold: 16,
            mandatory_margin: 0,
            poll_interval: Duration::from_millis(1),
        }
    }
}

impl SchedulerConfig {
    /// The admission-policy view of this configuration.
    pub fn policy(&self) -> PolicyConfig {
        PolicyConfig {
            pool_size: self.pool_size,
            eager_threshold: self.eager_threshold,
            mandatory_margin: self.mandatory_margin,
        }
    }
}

/// Result of polling for a client's refresh.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PollOutcome {
    /// The task is still queued or running.
    Pending,
    /// The refreshed ciphertext; returned exactly once.
    Finished(Vec<u8>),
}

/// One completed task's timing row.
#[derive(Clone, Copy, Debug)]
pub struct TaskRecord {
    /// Submitting client.
    pub client_id: [u8; 16],
    /// Sequence number assigned at submission (global, monotone).
    pub submit_seq: u64,
    /// Order in which the scheduler handed tasks to workers.
    pub dispatch_index: u64,
    /// Monotonic nanoseconds (service epoch) at submission.
    pub submit_ns: u64,
    /// Monotonic nanoseconds at worker handoff.
    pub dispatch_ns: u64,
    /// Monotonic nanoseconds at completion.
    pub finish_ns: u64,
    /// `finish_ns − submit_ns`: the client-visible waiting time.
    pub wait_ns: u64,
}

/// Completed-task statistics with CSV export.
#[derive(Clone, Debug, Default)]
pub struct WaitingStats {
    records: Vec<TaskRecord>,
}

impl WaitingStats {
    /// All completed-task rows, in completion order.
    pub fn rows(&self) -> &[TaskRecord] {
        &self.records
    }

    /// Number of completed tasks.
    pub fn len(&self) -> usize {
        self.records.len()
    }

    /// True when no task has completed.
    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Mean waiting time over all completed tasks, in nanoseconds.
    pub fn mean_wait_ns(&self) -> Option<f64> {
        if self.records.is_empty() {
            return None;
        }
        let total: u128 = self.records.iter().map(|r| r.wait_ns as u128).sum();
        Some(total as f64 / self.records.len() as f64)
    }

    /// Waiting-time percentile (`pct` in 0..=100) over all completed tasks.
    pub fn percentile_wait_ns(&self, pct: f64) -> Option<u64> {
        if self.records.is_empty() {
            return None;
        }
        let mut waits: Vec<u64> = self.records.iter().map(|r| r.wait_ns).collect();
        waits.sort_unstable();
        let rank = ((pct / 100.0) * waits.len() as f64).ceil() as usize;
        Some(waits[rank.clamp(1, waits.len()) - 1])
    }

    /// Mean waiting time for one client, in nanoseconds.
    pub fn mean_wait_ns_for(&self, client_id: &[u8; 16]) -> Option<f64> {
        let waits: Vec<u64> = self
            .records
            .iter()
            .filter(|r| &r.client_id == client_id)
            .map(|r| r.wait_ns)
            .collect();
        if waits.is_empty() {
            return None;
        }
        let total: u128 = waits.iter().map(|&w| w as u128).sum();
        Some(total as f64 / waits.len() as f64)
    }

    /// CSV export: `client_id,submit_ns,dispatch_ns,finish_ns,wait_ns`.
    pub fn csv(&self) -> String {
        let mut out = String::from("client_id,submit_ns,dispatch_ns,finish_ns,wait_ns\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                u128::from_be_bytes(r.client_id),
                r.submit_ns,
                r.dispatch_ns,
                r.finish_ns,
                r.wait_ns
            ));
        }
        out
    }
}

/// Data-map entry for one client's in-flight refresh.
enum DataEntry {
    /// Ciphertext awaiting processing (queued or running).
    Input(Vec<u8>),
    /// Finished: refreshed bytes, or the failure reason.
    Output(std::result::Result<Vec<u8>, String>),
}

/// A queued task descriptor; the payload lives in the data map.
struct QueuedTask {
    client: [u8; 16],
    submit_ns: u64,
}

struct ServiceState {
    /// Sequence-keyed queue; the first entry is the FCFS head.
    queue: BTreeMap<u64, QueuedTask>,
    /// Per-client ciphertext / result slots.
    data_map: HashMap<[u8; 16], DataEntry>,
    /// Completed-task timing rows.
    records: Vec<TaskRecord>,
    next_seq: u64,
    next_dispatch: u64,
}

struct Shared {
    state: Mutex<ServiceState>,
    /// Signaled on submission and on shutdown.
    submitted: Condvar,
    shutdown: AtomicBool,
    epoch: Instant,
}

impl Shared {
    fn now_ns(&self) -> u64 {
        self.epoch.elapsed().as_nanos() as u64
    }

    /// Marks a task failed in the data map so pollers see an error
    /// instead of hanging.
    fn fail_task(&self, client: &[u8; 16], reason: &str) {
        let mut state = self.state.lock().expect("service lock");
        state
            .data_map
            .insert(*client, DataEntry::Output(Err(reason.to_string())));
    }
}

/// Work handed from the scheduler to a worker.
struct WorkItem {
    seq: u64,
    dispatch_index: u64,
    client: [u8; 16],
    payload: Vec<u8>,
    submit_ns: u64,
    dispatch_ns: u64,
}

/// The running service: scheduler thread plus P workers.
///
/// Dropping the service shuts it down and joins all threads; tasks still
/// queued at shutdown are marked failed so pollers get an error.
pub struct BootstrapService {
    shared: Arc<Shared>,
    config: SchedulerConfig,
    scheduler: Option<JoinHandle<()>>,
    workers: Vec<JoinHandle<()>>,
}

impl BootstrapService {
    /// Starts the scheduler and worker pool.
    pub fn start(runner: Arc<dyn BootstrapRunner>, config: SchedulerConfig) -> Result<Self> {
        if config.pool_size == 0 {
            return Err(Error::Scheduler("pool size must be at least 1".into()));
        }
        let shared = Arc::new(Shared {
            state: Mutex::new(ServiceState {
                queue: BTreeMap::new(),
                data_map: HashMap::new(),
                records: Vec::new(),
                next_seq: 0,
                next_dispatch: 0,
            }),
            submitted: Condvar::new(),
            shutdown: AtomicBool::new(false),
            epoch: Instant::now(),
        });
        let (tx, rx) = bounded::<WorkItem>(0);
        let workers = (0..config.pool_size)
            .map(|_| {
                let rx = rx.clone();
                let shared = Arc::clone(&shared);
                let runner = Arc::clone(&runner);
                thread::spawn(move || worker_loop(rx, shared, runner))
            })
            .collect();
        let scheduler = {
            let shared = Arc::clone(&shared);
            let poll = config.poll_interval;
            thread::spawn(move || scheduler_loop(tx, shared, poll))
        };
        Ok(BootstrapService {
            shared,
            config,
            scheduler: Some(scheduler),
            workers,
        })
    }

    /// The configuration the service was started with.
    pub fn config(&self) -> &SchedulerConfig {
        &self.config
    }

    /// Submits one admitted refresh request; returns its sequence number.
    ///
    /// Rejects a submission while the client already has a task in flight
    /// (queued, running, or finished-but-unretrieved): one outstanding
    /// bootstrap per client.
    pub fn submit(&self, client_id: [u8; 16], ciphertext: Vec<u8>) -> Result<u64> {
        if self.shared.shutdown.load(Ordering::SeqCst) {
            return Err(Error::Scheduler("service is shut down".into()));
        }
        let mut state = self.shared.state.lock().expect("service lock");
        if state.data_map.contains_key(&client_id) {
            return Err(Error::Scheduler(
                "client already has an outstanding bootstrap task".into(),
            ));
        }
        let seq = state.next_seq;
        state.next_seq += 1;
        state.data_map.insert(client_id, DataEntry::Input(ciphertext));
        state.queue.insert(
            seq,
            QueuedTask { client: client_id, submit_ns: self.shared.now_ns() },
        );
        drop(state);
        self.shared.submitted.notify_all();
        Ok(seq)
    }

    /// Number of tasks waiting in the queue (not yet handed to a worker).
    pub fn queue_len(&self) -> usize {
        self.shared.state.lock().expect("service lock").queue.len()
    }

    /// Polls for a client's result.
    ///
    /// A finished result is returned exactly once and then forgotten; a
    /// second poll — or a poll with no submitted task — is an error. A
    /// failed task reports its failure reason, also exactly once.
    pub fn poll_result(&self, client_id: &[u8; 16]) -> Result<PollOutcome> {
        let mut state = self.shared.state.lock().expect("service lock");
        match state.data_map.get(client_id) {
            None => Err(Error::Scheduler("no outstanding task for client".into())),
            Some(DataEntry::Input(_)) => Ok(PollOutcome::Pending),
            Some(DataEntry::Output(_)) => {
                let Some(DataEntry::Output(outcome)) = state.data_map.remove(client_id)
                else {
                    unreachable!("entry kind checked above");
                };
                match outcome {
                    Ok(bytes) => Ok(PollOutcome::Finished(bytes)),
                    Err(reason) => Err(Error::Scheduler(reason)),
                }
            }
        }
    }

    /// Polls at the configured interval until the result arrives or the
    /// timeout elapses.
    pub fn wait_for(&self, client_id: &[u8; 16], timeout: Duration) -> Result<Vec<u8>> {
        let deadline = Instant::now() + timeout;
        loop {
            match self.poll_result(client_id)? {
                PollOutcome::Finished(bytes) => return Ok(bytes),
                PollOutcome::Pending => {
                    if Instant::now() >= deadline {
                        return Err(Error::Scheduler(
                            "timed out waiting for bootstrap result".into(),
                        ));
                    }
                    thread::sleep(self.config.poll_interval);
                }
            }
        }
    }

    /// Snapshot of completed-task timing statistics.
    pub fn waiting_time_stats(&self) -> WaitingStats {
        let state = self.shared.state.lock().expect("service lock");
        WaitingStats { records: state.records.clone() }
    }

    /// Stops the scheduler and workers, failing any still-queued tasks.
    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        self.shared.shutdown.store(true, Ordering::SeqCst);
        self.shared.submitted.notify_all();
        if let Some(handle) = self.scheduler.take() {
            let _ = handle.join();
        }
        for handle in self.workers.drain(..) {
            let _ = handle.join();
        }
    }
}

impl Drop for BootstrapService {
    fn drop(&mut self) {
        self.stop();
    }
}

/// Scheduler thread: FCFS pop, rendezvous handoff.
fn scheduler_loop(tx: Sender<WorkItem>, shared: Arc<Shared>, poll: Duration) {
    loop {
        // Take the lowest-sequence task, parking briefly while the queue is
        // empty so an idle scheduler costs nothing beyond the poll interval.
        let (seq, task, payload, dispatch_index) = {
            let mut state = shared.state.lock().expect("service lock");
            loop {
                if shared.shutdown.load(Ordering::SeqCst) {
                    fail_all_queued(&mut state);
                    return;
                }
                if let Some((&seq, _)) = state.queue.iter().next() {
                    let task = state.queue.remove(&seq).expect("key just observed");
                    let payload = match state.data_map.get(&task.client) {
                        Some(DataEntry::Input(bytes)) => bytes.clone(),
                        // The entry is created at submission and can only
                        // have moved on if the service is being torn down.
                        _ => continue,
                    };
                    let dispatch_index = state.next_dispatch;
                    state.next_dispatch += 1;
                    break (seq, task, payload, dispatch_index);
                }
                let (guard, _) = shared
                    .submitted
                    .wait_timeout(state, poll)
                    .expect("service lock");
                state = guard;
            }
        };
        let mut item = WorkItem {
            seq,
            dispatch_index,
            client: task.client,
            payload,
            submit_ns: task.submit_ns,
            dispatch_ns: shared.now_ns(),
        };
        // Rendezvous: the send completes only when a worker is actually
        // free to take the task. While every worker is busy, keep the
        // dispatch timestamp fresh so it reflects the real handoff moment.
        loop {
            match tx.send_timeout(item, poll) {
                Ok(()) => break,
                Err(SendTimeoutError::Timeout(returned)) => {
                    if shared.shutdown.load(Ordering::SeqCst) {
                        shared.fail_task(&returned.client, "service shut down");
                        let mut state = shared.state.lock().expect("service lock");
                        fail_all_queued(&mut state);
                        return;
                    }
                    item = returned;
                    item.dispatch_ns = shared.now_ns();
                }
                Err(SendTimeoutError::Disconnected(returned)) => {
                    shared.fail_task(&returned.client, "worker pool unavailable");
                    return;
                }
            }
        }
    }
}

/// Marks every still-queued task as failed (used at shutdown).
fn fail_all_queued(state: &mut ServiceState) {
    let clients: Vec<[u8; 16]> = state.queue.values().map(|t| t.client).collect();
    state.queue.clear();
    for client in clients {
        state
            .data_map
            .insert(client, DataEntry::Output(Err("service shut down".into())));
    }
}

/// Worker thread: run the refresh, publish the outcome, record timing.
fn worker_loop(rx: Receiver<WorkItem>, shared: Arc<Shared>, runner: Arc<dyn BootstrapRunner>) {
    while let Ok(item) = rx.recv() {
        let outcome = runner
            .run(&item.client, &item.payload)
            .map_err(|e| e.to_string());
        let finish_ns = shared.now_ns();
        let mut state = shared.state.lock().expect("service lock");
        state.records.push(TaskRecord {
            client_id: item.client,
            submit_seq: item.seq,
            dispatch_index: item.dispatch_index,
            submit_ns: item.submit_ns,
            dispatch_ns: item.dispatch_ns,
            finish_ns,
            wait_ns: finish_ns.saturating_sub(item.submit_ns),
        });
        state.data_map.insert(item.client, DataEntry::Output(outcome));
    }
}
