//! Atomic information events: the typed units one stream record decomposes
//! into, each carrying a header (id, timestamp, source) and one payload.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::ingest::RawRecord;
use crate::text::{extract_semantics, tokenize_normalize};

/// Timestamp granularity for all derived events, in milliseconds.
pub const GRANULARITY_MS: u64 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventHeader {
    /// Unique within a run: `<source_record_id>:<n>`.
    pub event_id: String,
    /// Inherited from the source record.
    pub ts: u64,
    pub granularity_ms: u64,
    pub source_record_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Payload {
    Token {
        token: String,
    },
    Link {
        url: String,
    },
    Hashtag {
        tag: String,
    },
    Mention {
        handle: String,
    },
    Retweet {
        original_id: Option<String>,
        normalized_body: String,
    },
    /// Pair members are distinct and sorted (`token_a < token_b`).
    Cooccurrence {
        token_a: String,
        token_b: String,
    },
    Metadata {
        followers: u64,
        friends: u64,
        statuses: u64,
        /// Text length in characters; feeds the window length extrema.
        text_len: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomicEvent {
    pub header: EventHeader,
    pub payload: Payload,
}

impl AtomicEvent {
    pub fn token(&self) -> Option<&str> {
        match &self.payload {
            Payload::Token { token } => Some(token),
            _ => None,
        }
    }
}

/// All unordered pairs of distinct token types, members sorted, each pair
/// emitted once, pairs in lexicographic order.
pub fn build_cooccurrences(tokens: &[String]) -> Vec<(String, String)> {
    let distinct: BTreeSet<&String> = tokens.iter().collect();
    let distinct: Vec<&String> = distinct.into_iter().collect();
    let mut pairs = Vec::new();
    for i in 0..distinct.len() {
        for j in i + 1..distinct.len() {
            pairs.push((distinct[i].clone(), distinct[j].clone()));
        }
    }
    pairs
}

/// Decompose one record into its atomic events. Pure: the same record
/// always yields the same event sequence.
///
/// Emits one `Token` event per normalized token occurrence, one `Link` /
/// `Hashtag` / `Mention` event per extracted item, one `Retweet` event iff
/// the record is structurally or textually a retweet, `Cooccurrence`
/// events for every distinct token pair, and exactly one `Metadata` event.
pub fn map_record(record: &RawRecord) -> Vec<AtomicEvent> {
    let semantics = extract_semantics(&record.text);
    let tokens = tokenize_normalize(&record.text);

    let mut events = Vec::new();
    let mut next_id = 0u32;
    let mut push = |payload: Payload, next_id: &mut u32, events: &mut Vec<AtomicEvent>| {
        events.push(AtomicEvent {
            header: EventHeader {
                event_id: format!("{}:{}", record.id, next_id),
                ts: record.ts,
                granularity_ms: GRANULARITY_MS,
                source_record_id: record.id.clone(),
            },
            payload,
        });
        *next_id += 1;
    };

    for token in &tokens {
        push(Payload::Token { token: token.clone() }, &mut next_id, &mut events);
    }
    for url in &semantics.links {
        push(Payload::Link { url: url.clone() }, &mut next_id, &mut events);
    }
    for tag in &semantics.hashtags {
        push(Payload::Hashtag { tag: tag.clone() }, &mut next_id, &mut events);
    }
    for handle in &semantics.mentions {
        push(Payload::Mention { handle: handle.clone() }, &mut next_id, &mut events);
    }
    if semantics.is_retweet || record.retweet_of.is_some() {
        push(
            Payload::Retweet {
                original_id: record.retweet_of.clone(),
                normalized_body: tokens.join(" "),
            },
            &mut next_id,
            &mut events,
        );
    }
    for (a, b) in build_cooccurrences(&tokens) {
        push(
            Payload::Cooccurrence { token_a: a, token_b: b },
            &mut next_id,
            &mut events,
        );
    }
    push(
        Payload::Metadata {
            followers: record.followers,
            friends: record.friends,
            statuses: record.statuses,
            text_len: record.text.chars().count() as u64,
        },
        &mut next_id,
        &mut events,
    );
    events
}

/// Write events as JSON-lines, one event per line.
pub fn write_event_log<W: Write>(mut w: W, events: &[AtomicEvent]) -> std::io::Result<()> {
    for event in events {
        serde_json::to_writer(&mut w, event)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Read an event log written by [`write_event_log`].
pub fn read_event_log<R: BufRead>(r: R) -> std::io::Result<Vec<AtomicEvent>> {
    let mut events = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let event: AtomicEvent = serde_json::from_str(&line)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
        events.push(event);
    }
    Ok(events)
}
