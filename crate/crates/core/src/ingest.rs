//! Stream ingestion: JSON-lines parsing, the English-language filter, and
//! replay of a recorded stream at a configurable rate with a monotonic
//! stream clock and bounded out-of-order tolerance.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::io::BufRead;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stopwords::is_stopword;
use crate::text::plain_tokens;

/// Maximum accepted text length, in characters.
pub const MAX_TEXT_CHARS: usize = 1000;
/// Records arriving more than this far behind the newest timestamp seen
/// are dropped; anything closer is reordered in the replay buffer.
pub const SKEW_TOLERANCE_MS: u64 = 5_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawRecord {
    pub id: String,
    /// Epoch milliseconds.
    pub ts: u64,
    pub text: String,
    #[serde(default)]
    pub followers: u64,
    #[serde(default)]
    pub friends: u64,
    #[serde(default)]
    pub statuses: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lang: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retweet_of: Option<String>,
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("malformed JSON: {0}")]
    Parse(String),
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Wire shape with everything optional so that missing required fields
/// surface as schema errors rather than parse errors.
#[derive(Deserialize)]
struct WireRecord {
    id: Option<String>,
    ts: Option<i64>,
    text: Option<String>,
    #[serde(default)]
    followers: Option<u64>,
    #[serde(default)]
    friends: Option<u64>,
    #[serde(default)]
    statuses: Option<u64>,
    #[serde(default)]
    lang: Option<String>,
    #[serde(default)]
    retweet_of: Option<String>,
}

/// Parse one JSON-lines record. Unknown fields are ignored; missing
/// optional fields default; missing required fields are schema errors.
pub fn parse_record(line: &str) -> Result<RawRecord, IngestError> {
    let wire: WireRecord = serde_json::from_str(line).map_err(|e| {
        if e.is_syntax() || e.is_eof() {
            IngestError::Parse(e.to_string())
        } else {
            IngestError::Schema(e.to_string())
        }
    })?;
    let mut missing = Vec::new();
    if wire.id.is_none() {
        missing.push("id");
    }
    if wire.ts.is_none() {
        missing.push("ts");
    }
    if wire.text.is_none() {
        missing.push("text");
    }
    if !missing.is_empty() {
        return Err(IngestError::Schema(format!(
            "missing required field(s): {}",
            missing.join(", ")
        )));
    }
    let ts = wire.ts.unwrap();
    if ts < 0 {
        return Err(IngestError::Schema(format!("negative ts: {ts}")));
    }
    let text = wire.text.unwrap();
    if text.chars().count() > MAX_TEXT_CHARS {
        return Err(IngestError::Schema(format!(
            "text longer than {MAX_TEXT_CHARS} chars"
        )));
    }
    Ok(RawRecord {
        id: wire.id.unwrap(),
        ts: ts as u64,
        text,
        followers: wire.followers.unwrap_or(0),
        friends: wire.friends.unwrap_or(0),
        statuses: wire.statuses.unwrap_or(0),
        lang: wire.lang,
        retweet_of: wire.retweet_of,
    })
}

/// English filter: a `lang` field decides directly; otherwise a stopword
/// heuristic over the raw tokens (>= 2 stopword hits, or >= 15% of
/// tokens). Empty text fails.
pub fn filter_language(record: &RawRecord) -> bool {
    match record.lang.as_deref() {
        Some("en") => true,
        Some(_) => false,
        None => {
            let tokens = plain_tokens(&record.text);
            if tokens.is_empty() {
                return false;
            }
            let hits = tokens.iter().filter(|t| is_stopword(t)).count();
            hits >= 2 || (hits as f64 / tokens.len() as f64) >= 0.15
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClockMode {
    /// Pace emissions in real time at the configured rate.
    Wall,
    /// Emit as fast as downstream accepts; the clock advances from record
    /// timestamps.
    Data,
}

/// Monotonic stream clock. `now` never decreases.
#[derive(Debug, Clone)]
pub struct StreamClock {
    mode: ClockMode,
    now_ms: u64,
    epoch: Instant,
    wall_base_ms: u64,
}

impl StreamClock {
    pub fn new(mode: ClockMode) -> Self {
        StreamClock { mode, now_ms: 0, epoch: Instant::now(), wall_base_ms: 0 }
    }

    pub fn mode(&self) -> ClockMode {
        self.mode
    }

    /// Observe a record timestamp (data mode) or poll wall time.
    pub fn observe(&mut self, record_ts: u64) -> u64 {
        let candidate = match self.mode {
            ClockMode::Data => record_ts,
            ClockMode::Wall => {
                if self.wall_base_ms == 0 {
                    // Anchor wall time to the first record's timestamp so
                    // window arithmetic stays in the stream's time base.
                    self.wall_base_ms = record_ts;
                    self.epoch = Instant::now();
                }
                self.wall_base_ms + self.epoch.elapsed().as_millis() as u64
            }
        };
        if candidate > self.now_ms {
            self.now_ms = candidate;
        }
        self.now_ms
    }

    pub fn now_ms(&self) -> u64 {
        self.now_ms
    }
}

#[derive(Debug, Clone)]
pub struct ReplayConfig {
    /// Events per second; must be > 0 in wall mode.
    pub rate: f64,
    pub clock: ClockMode,
    /// Reorder tolerance; records older than this behind the maximum
    /// timestamp seen are dropped with a warning.
    pub skew_ms: u64,
}

impl Default for ReplayConfig {
    fn default() -> Self {
        ReplayConfig { rate: 100.0, clock: ClockMode::Data, skew_ms: SKEW_TOLERANCE_MS }
    }
}

#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct ReplayStats {
    pub lines_read: u64,
    pub parse_failures: u64,
    pub language_filtered: u64,
    pub dropped_out_of_order: u64,
    pub emitted: u64,
}

/// Heap entry ordered by (ts, arrival seq) so ties keep arrival order.
struct Pending {
    ts: u64,
    seq: u64,
    record: Box<RawRecord>,
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        (self.ts, self.seq) == (other.ts, other.seq)
    }
}
impl Eq for Pending {}
impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Pending {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.ts, self.seq).cmp(&(other.ts, other.seq))
    }
}

/// Reorder buffer: emits records in timestamp order once the watermark
/// (max ts seen minus skew) passes them.
struct ReorderBuffer {
    heap: BinaryHeap<Reverse<Pending>>,
    seq: u64,
    max_ts: u64,
    skew_ms: u64,
}

impl ReorderBuffer {
    fn new(skew_ms: u64) -> Self {
        ReorderBuffer { heap: BinaryHeap::new(), seq: 0, max_ts: 0, skew_ms }
    }

    /// Returns false when the record is too stale and was dropped.
    fn push(&mut self, record: RawRecord) -> bool {
        if self.seq > 0 && record.ts + self.skew_ms < self.max_ts {
            return false;
        }
        self.max_ts = self.max_ts.max(record.ts);
        self.heap.push(Reverse(Pending { ts: record.ts, seq: self.seq, record: Box::new(record) }));
        self.seq += 1;
        true
    }

    fn pop_ready(&mut self) -> Option<RawRecord> {
        let watermark = self.max_ts.saturating_sub(self.skew_ms);
        match self.heap.peek() {
            Some(Reverse(p)) if p.ts <= watermark => Some(*self.heap.pop().unwrap().0.record),
            _ => None,
        }
    }

    fn drain(&mut self) -> Vec<RawRecord> {
        let mut out = Vec::with_capacity(self.heap.len());
        while let Some(Reverse(p)) = self.heap.pop() {
            out.push(*p.record);
        }
        out
    }
}

/// Replay a recorded stream into `sink`. Only records passing the
/// language filter are emitted. Malformed lines and over-stale records
/// are counted and skipped with a warning. The sink returning an error
/// aborts the replay (downstream closed).
pub fn replay_stream<R, F, E>(
    reader: R,
    cfg: &ReplayConfig,
    mut sink: F,
) -> Result<ReplayStats, IngestError>
where
    R: BufRead,
    F: FnMut(RawRecord) -> Result<(), E>,
{
    if cfg.rate <= 0.0 {
        return Err(IngestError::Schema("replay rate must be > 0".into()));
    }
    let mut stats = ReplayStats::default();
    let mut buffer = ReorderBuffer::new(cfg.skew_ms);
    let start = Instant::now();
    let mut emit = |record: RawRecord, stats: &mut ReplayStats| -> bool {
        stats.emitted += 1;
        sink(record).is_ok()
    };

    for (line_no, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        stats.lines_read += 1;
        if cfg.clock == ClockMode::Wall {
            // Absolute schedule: the i-th line is due at start + i/rate,
            // so sleep overshoot self-corrects instead of accumulating.
            let due = start
                + Duration::from_secs_f64((stats.lines_read - 1) as f64 / cfg.rate);
            let now = Instant::now();
            if due > now {
                std::thread::sleep(due - now);
            }
        }
        let record = match parse_record(&line) {
            Ok(r) => r,
            Err(e) => {
                stats.parse_failures += 1;
                log::warn!("line {}: {}", line_no + 1, e);
                continue;
            }
        };
        if !filter_language(&record) {
            stats.language_filtered += 1;
            continue;
        }
        if !buffer.push(record) {
            stats.dropped_out_of_order += 1;
            log::warn!("line {}: timestamp too far out of order, dropped", line_no + 1);
            continue;
        }
        while let Some(ready) = buffer.pop_ready() {
            if !emit(ready, &mut stats) {
                return Ok(stats);
            }
        }
    }
    for record in buffer.drain() {
        if !emit(record, &mut stats) {
            return Ok(stats);
        }
    }
    Ok(stats)
}
