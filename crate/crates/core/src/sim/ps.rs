//! A single processor-sharing server.
//!
//! Rather than decrementing every job's remaining work on each event, the
//! server keeps a virtual clock equal to the service attained by any one job
//! present since the server last went idle. A job arriving with work `w`
//! when the clock reads `v` leaves when the clock reaches `v + w`, so a
//! min-heap of those finish tags yields the next departure directly.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

/// A request in service.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Job {
    pub id: u64,
    pub arrival: f64,
    pub work: f64,
}

#[derive(Debug, Clone, Copy)]
struct Tagged {
    finish: f64,
    job: Job,
}

impl PartialEq for Tagged {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Tagged {}

impl PartialOrd for Tagged {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Tagged {
    fn cmp(&self, other: &Self) -> Ordering {
        self.finish
            .total_cmp(&other.finish)
            .then(self.job.id.cmp(&other.job.id))
    }
}

#[derive(Debug, Clone)]
pub struct PsServerState {
    speed: f64,
    virtual_time: f64,
    last_update: f64,
    jobs: BinaryHeap<Reverse<Tagged>>,
    work_processed: f64,
}

impl PsServerState {
    pub fn new(speed: f64) -> Self {
        Self {
            speed,
            virtual_time: 0.0,
            last_update: 0.0,
            jobs: BinaryHeap::new(),
            work_processed: 0.0,
        }
    }

    pub fn speed(&self) -> f64 {
        self.speed
    }

    pub fn len(&self) -> usize {
        self.jobs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jobs.is_empty()
    }

    pub fn last_update(&self) -> f64 {
        self.last_update
    }

    /// Total work served since creation.
    pub fn work_processed(&self) -> f64 {
        self.work_processed
    }

    /// Remaining work of every job present, in departure order.
    pub fn remaining_work(&self) -> Vec<f64> {
        let mut tags: Vec<f64> = self.jobs.iter().map(|Reverse(t)| t.finish).collect();
        tags.sort_by(f64::total_cmp);
        tags.into_iter().map(|f| f - self.virtual_time).collect()
    }

    /// Shares `speed * (now - last_update)` equally among the jobs present.
    pub fn apply_elapsed(&mut self, now: f64) {
        debug_assert!(now >= self.last_update);
        let n = self.jobs.len();
        if n > 0 {
            let served = self.speed * (now - self.last_update);
            self.virtual_time += served / n as f64;
            self.work_processed += served;
        }
        self.last_update = now;
    }

    /// Time the next job will finish if nothing else arrives; `None` when idle.
    pub fn next_departure(&self) -> Option<f64> {
        self.jobs.peek().map(|Reverse(t)| {
            let remaining = (t.finish - self.virtual_time).max(0.0);
            self.last_update + remaining * self.jobs.len() as f64 / self.speed
        })
    }

    pub fn add_job(&mut self, now: f64, job: Job) {
        self.apply_elapsed(now);
        self.jobs.push(Reverse(Tagged {
            finish: self.virtual_time + job.work,
            job,
        }));
    }

    /// Removes the job with the least remaining work at `now`. Returns it with
    /// the remaining work it still had by the clock, which is rounding noise
    /// when `now` is its scheduled departure.
    pub fn depart(&mut self, now: f64) -> Option<(Job, f64)> {
        self.apply_elapsed(now);
        let Reverse(tagged) = self.jobs.pop()?;
        let residual = tagged.finish - self.virtual_time;
        if self.jobs.is_empty() {
            self.virtual_time = 0.0;
        } else {
            self.virtual_time = self.virtual_time.max(tagged.finish);
        }
        Some((tagged.job, residual))
    }
}

/// Work accounting: every job's remaining work drops by
/// `speed * (now - last_update) / |jobs|`.
pub fn ps_apply_elapsed(server: &PsServerState, now: f64) -> PsServerState {
    let mut next = server.clone();
    next.apply_elapsed(now);
    next
}

/// `last_update + min(remaining) * |jobs| / speed`, or `None` when idle.
pub fn ps_next_departure(server: &PsServerState) -> Option<f64> {
    server.next_departure()
}
