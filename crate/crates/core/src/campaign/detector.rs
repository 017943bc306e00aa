//! Defender-side probe-burst detection over the query log.
//!
//! The defender does not inspect inputs; it only watches arrival rates.
//! Every query carries a source tag and a logical tick, and a source that
//! crams more than `threshold` queries into any trailing window of
//! `window` ticks gets flagged. This is the control the attacker's pacing
//! is designed to stay under.

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::QueryRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlertKind {
    ProbeBurst,
}

/// One detector hit: a source exceeded the per-window query budget.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlertEvent {
    pub tick: u64,
    pub source: String,
    /// Queries from this source inside the window, the flagged one included.
    /// Always greater than the threshold.
    pub count: u64,
    pub threshold: u64,
    pub kind: AlertKind,
}

/// Streaming per-source sliding-window counter.
///
/// The window at tick t covers (t - window, t]. An alert fires the moment
/// a source's count in its own window exceeds the threshold, and that
/// source's window is then reset so one burst reports once instead of on
/// every query that follows it.
#[derive(Debug)]
pub struct BurstDetector {
    window: u64,
    threshold: u64,
    recent: HashMap<String, VecDeque<u64>>,
}

impl BurstDetector {
    pub fn new(window: u64, threshold: u64) -> Result<Self> {
        if window == 0 {
            return Err(Error::InvalidArgument(
                "detector window must be at least one tick".into(),
            ));
        }
        Ok(BurstDetector {
            window,
            threshold,
            recent: HashMap::new(),
        })
    }

    /// Feed one query, in log order; returns the alert it triggers, if any.
    pub fn observe(&mut self, tick: u64, source: &str) -> Option<AlertEvent> {
        let q = self.recent.entry(source.to_string()).or_default();
        while q.front().is_some_and(|&t| t + self.window <= tick) {
            q.pop_front();
        }
        q.push_back(tick);
        if (q.len() as u64) > self.threshold {
            let count = q.len() as u64;
            q.clear();
            return Some(AlertEvent {
                tick,
                source: source.to_string(),
                count,
                threshold: self.threshold,
                kind: AlertKind::ProbeBurst,
            });
        }
        None
    }
}

/// Replay a full query log through the burst detector.
pub fn detector_scan(log: &[QueryRecord], window: u64, threshold: u64) -> Result<Vec<AlertEvent>> {
    let mut det = BurstDetector::new(window, threshold)?;
    Ok(log
        .iter()
        .filter_map(|r| det.observe(r.tick, &r.source))
        .collect())
}
