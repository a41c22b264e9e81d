//! Request arrivals and the FIFO queue between ingestion and the model.

use std::collections::VecDeque;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::seed::rng_for;

/// Non-decreasing arrival timestamps in seconds, starting at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalTrace {
    times: Vec<f64>,
}

impl ArrivalTrace {
    /// Validates order and shifts the trace so the first arrival is at 0.
    pub fn new(mut times: Vec<f64>) -> Result<Self> {
        let Some(&first) = times.first() else {
            return Err(Error::Config("arrival trace is empty".into()));
        };
        for (i, w) in times.windows(2).enumerate() {
            if w[1] < w[0] || !w[1].is_finite() {
                return Err(Error::Validation(format!(
                    "arrival {} at {} precedes arrival {} at {}",
                    i + 2,
                    w[1],
                    i + 1,
                    w[0]
                )));
            }
        }
        for t in &mut times {
            *t -= first;
        }
        Ok(ArrivalTrace { times })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// First `n` arrivals.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        ArrivalTrace::new(self.times[..n.min(self.times.len())].to_vec())
    }
}

/// One ASCII decimal timestamp (seconds) per line; blank lines are skipped.
pub fn load_arrival_trace(path: &Path) -> Result<ArrivalTrace> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_arrival_trace(&text, path)
}

pub(crate) fn parse_arrival_trace(text: &str, path: &Path) -> Result<ArrivalTrace> {
    let mut times = Vec::new();
    let mut prev = f64::NEG_INFINITY;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let s = line.trim();
        if s.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            msg,
        };
        let t: f64 = s.parse().map_err(|_| err(format!("not a number: `{s}`")))?;
        if !t.is_finite() {
            return Err(err(format!("not a finite timestamp: `{s}`")));
        }
        if t < prev {
            return Err(err(format!("timestamp {t} is earlier than previous {prev}")));
        }
        prev = t;
        times.push(t);
    }
    if times.is_empty() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            msg: "no timestamps".into(),
        });
    }
    ArrivalTrace::new(times)
}

/// Poisson arrivals: `n` requests with exponential gaps of mean `1 / rate`.
pub fn synth_arrivals(n: usize, rate: f64, seed: u64) -> Result<ArrivalTrace> {
    if n == 0 {
        return Err(Error::Config("request count must be >= 1".into()));
    }
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::Config(format!("arrival rate must be > 0, got {rate}")));
    }
    let mut rng = rng_for(seed, "arrivals");
    let mut t = 0.0;
    let mut times = Vec::with_capacity(n);
    times.push(0.0);
    for _ in 1..n {
        let u: f64 = rng.random();
        t += -(1.0 - u).ln() / rate;
        times.push(t);
    }
    ArrivalTrace::new(times)
}

/// FIFO buffer of pending request ids. A bounded queue drops the newest
/// arrival when full and counts the drop.
#[derive(Debug, Clone, Default)]
pub struct RequestQueue {
    buf: VecDeque<u64>,
    capacity: Option<usize>,
    dropped: u64,
}

impl RequestQueue {
    pub fn unbounded() -> Self {
        Self::default()
    }

    pub fn bounded(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("queue capacity must be >= 1".into()));
        }
        Ok(RequestQueue {
            buf: VecDeque::with_capacity(capacity),
            capacity: Some(capacity),
            dropped: 0,
        })
    }

    /// Returns false if the request was dropped.
    pub fn enqueue(&mut self, id: u64) -> bool {
        if self.capacity.is_some_and(|c| self.buf.len() >= c) {
            self.dropped += 1;
            return false;
        }
        self.buf.push_back(id);
        true
    }

    pub fn dequeue(&mut self) -> Option<u64> {
        self.buf.pop_front()
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn dropped(&self) -> u64 {
        self.dropped
    }
}
