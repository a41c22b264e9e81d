use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bounded ring of reals with an incrementally maintained mean.
///
/// The sum is kept as deviations from a reference value (`shift`), so a
/// constant stream averages back to exactly that constant. The sum is
/// re-accumulated from the buffer every `capacity` evictions to keep
/// rounding error bounded over long runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanRing {
    capacity: usize,
    buf: VecDeque<f64>,
    shift: f64,
    sum: f64,
    evictions: usize,
}

impl MeanRing {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("window capacity k must be >= 1".into()));
        }
        Ok(MeanRing {
            capacity,
            buf: VecDeque::with_capacity(capacity),
            shift: 0.0,
            sum: 0.0,
            evictions: 0,
        })
    }

    pub fn push(&mut self, v: f64) {
        if self.buf.is_empty() {
            self.shift = v;
            self.sum = 0.0;
        }
        if self.buf.len() == self.capacity {
            if let Some(old) = self.buf.pop_front() {
                self.sum -= old - self.shift;
            }
            self.evictions += 1;
        }
        self.buf.push_back(v);
        self.sum += v - self.shift;
        if self.evictions >= self.capacity {
            self.resync();
        }
    }

    fn resync(&mut self) {
        self.evictions = 0;
        self.shift = self.buf.front().copied().unwrap_or(0.0);
        let shift = self.shift;
        self.sum = self.buf.iter().map(|v| v - shift).sum();
    }

    pub fn mean(&self) -> Option<f64> {
        if self.buf.is_empty() {
            None
        } else {
            Some(self.shift + self.sum / self.buf.len() as f64)
        }
    }

    pub fn latest(&self) -> Option<f64> {
        self.buf.back().copied()
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn clear(&mut self) {
        self.buf.clear();
        self.shift = 0.0;
        self.sum = 0.0;
        self.evictions = 0;
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.buf.iter().copied()
    }
}

/// Paired energy/confidence window over the last `k` processed requests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlidingWindow {
    energy: MeanRing,
    confidence: MeanRing,
}

impl SlidingWindow {
    pub fn new(k: usize) -> Result<Self> {
        Ok(SlidingWindow {
            energy: MeanRing::new(k)?,
            confidence: MeanRing::new(k)?,
        })
    }

    pub fn push(&mut self, energy: f64, confidence: f64) {
        self.energy.push(energy);
        self.confidence.push(confidence);
    }

    /// Mean energy and mean confidence over the buffered observations.
    ///
    /// A partially filled window averages whatever it holds.
    pub fn stats(&self) -> Result<(f64, f64)> {
        match (self.energy.mean(), self.confidence.mean()) {
            (Some(e), Some(c)) => Ok((e, c)),
            _ => Err(Error::NoData),
        }
    }

    pub fn latest(&self) -> Option<(f64, f64)> {
        Some((self.energy.latest()?, self.confidence.latest()?))
    }

    pub fn len(&self) -> usize {
        self.energy.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energy.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.energy.capacity()
    }

    pub fn clear(&mut self) {
        self.energy.clear();
        self.confidence.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_window_mean() {
        let mut w = SlidingWindow::new(3).unwrap();
        for (e, c) in [(1.0, 0.4), (2.0, 0.5), (3.0, 0.6)] {
            w.push(e, c);
        }
        let (e, c) = w.stats().unwrap();
        assert_eq!(e, 2.0);
        assert!((c - 0.5).abs() < 1e-15);
    }

    #[test]
    fn partial_window_uses_available_observations() {
        let mut w = SlidingWindow::new(3).unwrap();
        w.push(5.0, 0.9);
        assert_eq!(w.stats().unwrap(), (5.0, 0.9));
    }

    #[test]
    fn empty_window_signals_no_data() {
        let w = SlidingWindow::new(3).unwrap();
        assert!(matches!(w.stats(), Err(Error::NoData)));
    }

    #[test]
    fn zero_capacity_is_rejected() {
        assert!(matches!(SlidingWindow::new(0), Err(Error::Config(_))));
    }

    #[test]
    fn eviction_drops_oldest() {
        let mut r = MeanRing::new(2).unwrap();
        r.push(1.0);
        r.push(2.0);
        r.push(4.0);
        assert_eq!(r.iter().collect::<Vec<_>>(), vec![2.0, 4.0]);
        assert_eq!(r.mean(), Some(3.0));
    }

    #[test]
    fn constant_fill_is_exact() {
        let mut w = SlidingWindow::new(10).unwrap();
        for _ in 0..1000 {
            w.push(1.61, 0.536);
        }
        assert_eq!(w.stats().unwrap(), (1.61, 0.536));
    }
}
