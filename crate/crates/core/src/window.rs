//! Sliding time windows over event streams: token statistics for the
//! current window, lagged counts for the window one length earlier, author
//! counter extrema, and immutable snapshots taken at slide boundaries.
//!
//! Boundary convention is half-open `(now - length, now]`: an event
//! exactly `length` old is evicted.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use thiserror::Error;

use crate::events::{AtomicEvent, Payload};

pub const DEFAULT_WINDOW_SECS: u64 = 120;
pub const DEFAULT_SLIDE_SECS: u64 = 10;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("event at {event_ts} is older than the window start {window_start}")]
pub struct StaleEvent {
    pub event_ts: u64,
    pub window_start: u64,
}

/// All events of one record, grouped as they arrive. Every event of a
/// record carries the record's timestamp, so records expire atomically.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordBucket {
    pub record_id: String,
    pub ts: u64,
    pub events: Vec<AtomicEvent>,
}

/// Order-statistics multiset over u64 counter values.
#[derive(Debug, Default, Clone)]
struct CounterSet {
    values: BTreeMap<u64, u32>,
}

impl CounterSet {
    fn insert(&mut self, v: u64) {
        *self.values.entry(v).or_insert(0) += 1;
    }

    fn remove(&mut self, v: u64) {
        if let Some(n) = self.values.get_mut(&v) {
            *n -= 1;
            if *n == 0 {
                self.values.remove(&v);
            }
        }
    }

    fn extrema(&self) -> Option<(u64, u64)> {
        let lo = self.values.keys().next()?;
        let hi = self.values.keys().next_back()?;
        Some((*lo, *hi))
    }
}

/// Min/max of the author counters and text length over records currently
/// in the window. `None` when the window holds no metadata events.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Extrema {
    pub followers: Option<(u64, u64)>,
    pub friends: Option<(u64, u64)>,
    pub statuses: Option<(u64, u64)>,
    pub text_len: Option<(u64, u64)>,
}

#[derive(Debug)]
pub struct SlidingWindow {
    length_ms: u64,
    slide_ms: u64,
    now_ms: u64,
    seq: u64,
    /// Eviction order over records: (ts, seq) -> record id.
    expiry: BTreeMap<(u64, u64), String>,
    records: HashMap<String, Arc<RecordBucket>>,
    token_counts: HashMap<String, u64>,
    /// Token occurrences evicted from the current window, retained until
    /// they age past 2x length: (ts, seq) -> token.
    prior_expiry: BTreeMap<(u64, u64), String>,
    prior_seq: u64,
    prior_counts: HashMap<String, u64>,
    followers: CounterSet,
    friends: CounterSet,
    statuses: CounterSet,
    text_len: CounterSet,
}

impl SlidingWindow {
    pub fn new(length_ms: u64, slide_ms: u64) -> Self {
        assert!(length_ms > 0 && slide_ms > 0);
        SlidingWindow {
            length_ms,
            slide_ms,
            now_ms: 0,
            seq: 0,
            expiry: BTreeMap::new(),
            records: HashMap::new(),
            token_counts: HashMap::new(),
            prior_expiry: BTreeMap::new(),
            prior_seq: 0,
            prior_counts: HashMap::new(),
            followers: CounterSet::default(),
            friends: CounterSet::default(),
            statuses: CounterSet::default(),
            text_len: CounterSet::default(),
        }
    }

    pub fn with_defaults() -> Self {
        SlidingWindow::new(DEFAULT_WINDOW_SECS * 1000, DEFAULT_SLIDE_SECS * 1000)
    }

    pub fn length_ms(&self) -> u64 {
        self.length_ms
    }

    pub fn slide_ms(&self) -> u64 {
        self.slide_ms
    }

    pub fn now_ms(&self) -> u64 {
        self.now_ms
    }

    pub fn record_count(&self) -> usize {
        self.records.len()
    }

    /// Insert one event. Advances the window clock when the event is newer
    /// than `now`; rejects events older than the window start.
    pub fn insert_event(&mut self, event: AtomicEvent) -> Result<(), StaleEvent> {
        if event.header.ts > self.now_ms {
            self.advance_to(event.header.ts);
        }
        if event.header.ts + self.length_ms <= self.now_ms {
            return Err(StaleEvent {
                event_ts: event.header.ts,
                window_start: self.now_ms - self.length_ms,
            });
        }
        match &event.payload {
            Payload::Token { token } => {
                *self.token_counts.entry(token.clone()).or_insert(0) += 1;
            }
            Payload::Metadata { followers, friends, statuses, text_len } => {
                self.followers.insert(*followers);
                self.friends.insert(*friends);
                self.statuses.insert(*statuses);
                self.text_len.insert(*text_len);
            }
            _ => {}
        }
        let record_id = event.header.source_record_id.clone();
        let ts = event.header.ts;
        let bucket = self.records.entry(record_id.clone()).or_insert_with(|| {
            Arc::new(RecordBucket { record_id: record_id.clone(), ts, events: Vec::new() })
        });
        if bucket.events.is_empty() {
            self.expiry.insert((ts, self.seq), record_id);
            self.seq += 1;
        }
        Arc::make_mut(bucket).events.push(event);
        Ok(())
    }

    /// Evict everything older than `now - length`; expired token counts
    /// roll into the prior-window counts until they age past 2x length.
    pub fn evict_expired(&mut self, now_ms: u64) {
        self.advance_to(now_ms);
    }

    fn advance_to(&mut self, now_ms: u64) {
        if now_ms <= self.now_ms {
            return;
        }
        self.now_ms = now_ms;
        loop {
            let key = match self.expiry.keys().next() {
                Some(&(ts, seq)) if ts + self.length_ms <= now_ms => (ts, seq),
                _ => break,
            };
            let record_id = self.expiry.remove(&key).unwrap();
            let bucket = self.records.remove(&record_id).unwrap();
            for event in &bucket.events {
                match &event.payload {
                    Payload::Token { token } => {
                        decrement(&mut self.token_counts, token);
                        self.prior_expiry.insert((bucket.ts, self.prior_seq), token.clone());
                        self.prior_seq += 1;
                        *self.prior_counts.entry(token.clone()).or_insert(0) += 1;
                    }
                    Payload::Metadata { followers, friends, statuses, text_len } => {
                        self.followers.remove(*followers);
                        self.friends.remove(*friends);
                        self.statuses.remove(*statuses);
                        self.text_len.remove(*text_len);
                    }
                    _ => {}
                }
            }
        }
        loop {
            let key = match self.prior_expiry.keys().next() {
                Some(&(ts, seq)) if ts + 2 * self.length_ms <= now_ms => (ts, seq),
                _ => break,
            };
            let token = self.prior_expiry.remove(&key).unwrap();
            decrement(&mut self.prior_counts, &token);
        }
    }

    pub fn extrema(&self) -> Extrema {
        Extrema {
            followers: self.followers.extrema(),
            friends: self.friends.extrema(),
            statuses: self.statuses.extrema(),
            text_len: self.text_len.extrema(),
        }
    }

    /// Freeze the current state. Buckets are shared by reference; the live
    /// window copies a bucket on write only if it would mutate one that a
    /// snapshot still holds.
    pub fn snapshot(&self, window_index: u64, boundary_ms: u64) -> WindowSnapshot {
        let records: Vec<Arc<RecordBucket>> = self
            .expiry
            .values()
            .map(|id| Arc::clone(&self.records[id]))
            .collect();
        let max_count = self.token_counts.values().copied().max().unwrap_or(0);
        WindowSnapshot {
            window_index,
            boundary_ms,
            length_ms: self.length_ms,
            records,
            token_counts: self.token_counts.clone(),
            max_count,
            prior_counts: self.prior_counts.clone(),
            extrema: self.extrema(),
        }
    }

    #[cfg(test)]
    pub(crate) fn token_counts(&self) -> &HashMap<String, u64> {
        &self.token_counts
    }
}

fn decrement(counts: &mut HashMap<String, u64>, token: &str) {
    if let Some(n) = counts.get_mut(token) {
        *n -= 1;
        if *n == 0 {
            counts.remove(token);
        }
    }
}

/// Immutable view of one sliding window frozen at a slide boundary.
#[derive(Debug, Clone)]
pub struct WindowSnapshot {
    pub window_index: u64,
    pub boundary_ms: u64,
    pub length_ms: u64,
    /// Records in eviction (timestamp, arrival) order.
    records: Vec<Arc<RecordBucket>>,
    token_counts: HashMap<String, u64>,
    max_count: u64,
    prior_counts: HashMap<String, u64>,
    extrema: Extrema,
}

impl WindowSnapshot {
    pub fn records(&self) -> &[Arc<RecordBucket>] {
        &self.records
    }

    pub fn token_count(&self, token: &str) -> u64 {
        self.token_counts.get(token).copied().unwrap_or(0)
    }

    pub fn token_counts(&self) -> &HashMap<String, u64> {
        &self.token_counts
    }

    pub fn max_token_count(&self) -> u64 {
        self.max_count
    }

    pub fn extrema(&self) -> Extrema {
        self.extrema
    }

    /// Occurrence count normalized by the window's largest single-token
    /// count: the top token of a nonempty window scores 1.0.
    pub fn token_score(&self, token: &str) -> f64 {
        if self.max_count == 0 {
            return 0.0;
        }
        self.token_count(token) as f64 / self.max_count as f64
    }

    /// Bounded symmetric change ratio against the window ending one
    /// length earlier, mapped to [0,1]: 0.5 means no change, 1.0 a pure
    /// burst, 0.0 a pure drop.
    pub fn frequency_variation(&self, token: &str) -> f64 {
        let now = self.token_count(token) as f64;
        let prev = self.prior_counts.get(token).copied().unwrap_or(0) as f64;
        if now == 0.0 && prev == 0.0 {
            return 0.5;
        }
        let v = (now - prev) / (now + prev);
        (v + 1.0) / 2.0
    }
}

/// Min-max normalization to [0,1], clamped; the degenerate `hi == lo`
/// case maps to the midpoint.
pub fn scale_normalize(x: f64, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return 0.5;
    }
    ((x - lo) / (hi - lo)).clamp(0.0, 1.0)
}
