//! Feature assembly: the fixed 15-component vector per record, the
//! retweet-presence label, and minority-class oversampling.
//!
//! Layout (all components in [0,1]):
//! ```text
//! [0]      hashtag indicator
//! [1]      link indicator
//! [2..=6]  token score of the record's top-5 tokens (descending, 0-padded)
//! [7..=11] frequency variation of the same tokens (0.5-padded)
//! [12]     scale-normalized followers
//! [13]     scale-normalized friends
//! [14]     scale-normalized statuses
//! [15]     scale-normalized text length (optional, off by default)
//! ```

use std::collections::{BTreeSet, HashMap, HashSet};
use std::io::Write;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::events::Payload;
use crate::window::{scale_normalize, RecordBucket, WindowSnapshot};

/// Number of base feature components.
pub const BASE_DIM: usize = 15;
/// Number of per-record token slots.
pub const TOKEN_SLOTS: usize = 5;

/// Layout version; bump when the component order changes.
pub const LAYOUT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FeatureLayout {
    /// Append the scale-normalized text length as a 16th component.
    pub include_length: bool,
}

impl FeatureLayout {
    pub fn dim(&self) -> usize {
        BASE_DIM + usize::from(self.include_length)
    }
}

/// Per-record digest of the fields feature assembly and labeling need,
/// extracted once from the record's events.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordDigest {
    pub record_id: String,
    pub ts: u64,
    pub tokens: Vec<String>,
    pub has_hashtag: bool,
    pub has_link: bool,
    pub followers: u64,
    pub friends: u64,
    pub statuses: u64,
    pub text_len: u64,
    /// Present when the record itself is a retweet.
    pub retweet: Option<(Option<String>, String)>,
    /// Space-joined normalized token sequence.
    pub normalized_body: String,
}

impl RecordDigest {
    pub fn from_bucket(bucket: &RecordBucket) -> Self {
        let mut digest = RecordDigest {
            record_id: bucket.record_id.clone(),
            ts: bucket.ts,
            tokens: Vec::new(),
            has_hashtag: false,
            has_link: false,
            followers: 0,
            friends: 0,
            statuses: 0,
            text_len: 0,
            retweet: None,
            normalized_body: String::new(),
        };
        for event in &bucket.events {
            match &event.payload {
                Payload::Token { token } => digest.tokens.push(token.clone()),
                Payload::Hashtag { .. } => digest.has_hashtag = true,
                Payload::Link { .. } => digest.has_link = true,
                Payload::Metadata { followers, friends, statuses, text_len } => {
                    digest.followers = *followers;
                    digest.friends = *friends;
                    digest.statuses = *statuses;
                    digest.text_len = *text_len;
                }
                Payload::Retweet { original_id, normalized_body } => {
                    digest.retweet = Some((original_id.clone(), normalized_body.clone()));
                }
                _ => {}
            }
        }
        digest.normalized_body = digest.tokens.join(" ");
        digest
    }
}

/// Assemble the feature vector for one record against a frozen snapshot.
/// Top tokens are the record's distinct tokens ranked by window token
/// score descending, ties broken lexicographically; missing slots pad
/// with score 0 and variation 0.5.
pub fn assemble_features(
    digest: &RecordDigest,
    snap: &WindowSnapshot,
    layout: FeatureLayout,
) -> Vec<f64> {
    let mut features = Vec::with_capacity(layout.dim());
    features.push(if digest.has_hashtag { 1.0 } else { 0.0 });
    features.push(if digest.has_link { 1.0 } else { 0.0 });

    let distinct: BTreeSet<&String> = digest.tokens.iter().collect();
    let mut ranked: Vec<(&String, f64)> = distinct
        .into_iter()
        .map(|t| (t, snap.token_score(t)))
        .collect();
    // BTreeSet iteration is lexicographic, so a stable sort by descending
    // score leaves ties in lexicographic order.
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    ranked.truncate(TOKEN_SLOTS);

    for i in 0..TOKEN_SLOTS {
        features.push(ranked.get(i).map_or(0.0, |(_, s)| *s));
    }
    for i in 0..TOKEN_SLOTS {
        features.push(ranked.get(i).map_or(0.5, |(t, _)| snap.frequency_variation(t)));
    }

    let extrema = snap.extrema();
    for (value, bounds) in [
        (digest.followers, extrema.followers),
        (digest.friends, extrema.friends),
        (digest.statuses, extrema.statuses),
    ] {
        features.push(match bounds {
            Some((lo, hi)) => scale_normalize(value as f64, lo as f64, hi as f64),
            None => 0.5,
        });
    }
    if layout.include_length {
        features.push(match extrema.text_len {
            Some((lo, hi)) => scale_normalize(digest.text_len as f64, lo as f64, hi as f64),
            None => 0.5,
        });
    }
    features
}

/// Retweet lookup over one snapshot: original ids referenced by retweet
/// events, plus normalized retweet bodies with multiplicity (so a retweet
/// record can exclude its own body).
#[derive(Debug, Default)]
pub struct RetweetIndex {
    by_original: HashSet<String>,
    bodies: HashMap<String, u32>,
}

impl RetweetIndex {
    pub fn from_snapshot(snap: &WindowSnapshot) -> Self {
        let mut index = RetweetIndex::default();
        for bucket in snap.records() {
            for event in &bucket.events {
                if let Payload::Retweet { original_id, normalized_body } = &event.payload {
                    if let Some(id) = original_id {
                        index.by_original.insert(id.clone());
                    }
                    if !normalized_body.is_empty() {
                        *index.bodies.entry(normalized_body.clone()).or_insert(0) += 1;
                    }
                }
            }
        }
        index
    }
}

/// 1 iff the window holds a retweet of this record: by original id, or by
/// identical normalized body (excluding the record's own retweet event —
/// being a retweet does not make a record positive).
pub fn label_by_retweet(digest: &RecordDigest, index: &RetweetIndex) -> u8 {
    if index.by_original.contains(&digest.record_id) {
        return 1;
    }
    if digest.normalized_body.is_empty() {
        return 0;
    }
    let count = index.bodies.get(&digest.normalized_body).copied().unwrap_or(0);
    let own = match &digest.retweet {
        Some((_, body)) if *body == digest.normalized_body => 1,
        _ => 0,
    };
    u8::from(count > own)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub features: Vec<f64>,
    pub label: u8,
    pub record_id: String,
    pub window_index: u64,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("window {window_index} has a single class ({n_pos} positive / {n_neg} negative)")]
pub struct DegenerateWindow {
    pub window_index: u64,
    pub n_pos: usize,
    pub n_neg: usize,
}

/// Duplicate minority-class samples uniformly at random (with
/// replacement) until class parity, keeping every original sample, then
/// shuffle deterministically with the caller's RNG.
pub fn oversample<R: Rng>(
    mut samples: Vec<LabeledSample>,
    rng: &mut R,
) -> Result<Vec<LabeledSample>, DegenerateWindow> {
    let n_pos = samples.iter().filter(|s| s.label == 1).count();
    let n_neg = samples.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(DegenerateWindow {
            window_index: samples.first().map_or(0, |s| s.window_index),
            n_pos,
            n_neg,
        });
    }
    let minority_label = if n_pos < n_neg { 1 } else { 0 };
    let minority: Vec<usize> = samples
        .iter()
        .enumerate()
        .filter(|(_, s)| s.label == minority_label)
        .map(|(i, _)| i)
        .collect();
    let deficit = n_pos.abs_diff(n_neg);
    for _ in 0..deficit {
        let pick = minority[rng.random_range(0..minority.len())];
        samples.push(samples[pick].clone());
    }
    samples.shuffle(rng);
    Ok(samples)
}

/// Write samples as CSV: feature columns in layout order, then label,
/// record_id, window_index.
pub fn write_samples_csv<W: Write>(
    mut w: W,
    samples: &[LabeledSample],
    layout: FeatureLayout,
) -> std::io::Result<()> {
    let mut header: Vec<String> = (0..layout.dim()).map(|i| format!("f{i}")).collect();
    header.extend(["label".into(), "record_id".into(), "window_index".into()]);
    writeln!(w, "{}", header.join(","))?;
    for s in samples {
        let mut row: Vec<String> = s.features.iter().map(|v| format!("{v:.6}")).collect();
        row.push(s.label.to_string());
        row.push(s.record_id.clone());
        row.push(s.window_index.to_string());
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// Convenience for building digests for a whole snapshot (parallel when
/// the `parallel` feature is on; order always matches `snap.records()`).
pub fn digest_snapshot(snap: &WindowSnapshot) -> Vec<RecordDigest> {
    crate::batch::map_collect(snap.records(), |bucket: &Arc<RecordBucket>| {
        RecordDigest::from_bucket(bucket)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::{map_record, AtomicEvent, EventHeader};
    use crate::ingest::RawRecord;
    use crate::window::SlidingWindow;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn record(id: &str, ts: u64, text: &str, retweet_of: Option<&str>) -> RawRecord {
        RawRecord {
            id: id.into(),
            ts,
            text: text.into(),
            followers: 50,
            friends: 50,
            statuses: 50,
            lang: Some("en".into()),
            retweet_of: retweet_of.map(str::to_string),
        }
    }

    fn insert(w: &mut SlidingWindow, r: &RawRecord) {
        for e in map_record(r) {
            w.insert_event(e).unwrap();
        }
    }

    fn token_event(id: &str, ts: u64, token: &str, n: u32) -> AtomicEvent {
        AtomicEvent {
            header: EventHeader {
                event_id: format!("{id}:{token}:{n}"),
                ts,
                granularity_ms: 1,
                source_record_id: id.into(),
            },
            payload: Payload::Token { token: token.into() },
        }
    }

    #[test]
    fn bare_record_in_empty_window() {
        // No tokens, no markup, sole record: indicator 0s, zero-padded
        // scores, 0.5-padded variations, midpoint counters.
        let mut w = SlidingWindow::with_defaults();
        insert(&mut w, &record("1", 0, "", None));
        let snap = w.snapshot(0, 0);
        let digest = RecordDigest::from_bucket(&snap.records()[0]);
        let f = assemble_features(&digest, &snap, FeatureLayout::default());
        let expected = [
            0.0, 0.0, // indicators
            0.0, 0.0, 0.0, 0.0, 0.0, // token scores
            0.5, 0.5, 0.5, 0.5, 0.5, // variations
            0.5, 0.5, 0.5, // counters (degenerate extrema)
        ];
        assert_eq!(f, expected);
    }

    #[test]
    fn crafted_counts_rank_top_tokens() {
        // Window counts {a:4, b:2, c:1}; a record containing a, b, c gets
        // scores [1.0, 0.5, 0.25] in slots 2..=4.
        let mut w = SlidingWindow::with_defaults();
        for n in 0..3 {
            w.insert_event(token_event("bg", 0, "aa", n)).unwrap();
        }
        w.insert_event(token_event("bg", 0, "bb", 3)).unwrap();
        insert(&mut w, &record("r", 1, "aa bb cc", None));
        let snap = w.snapshot(0, 1);
        assert_eq!(snap.token_count("aa"), 4);
        assert_eq!(snap.token_count("bb"), 2);
        assert_eq!(snap.token_count("cc"), 1);
        let digest = snap
            .records()
            .iter()
            .find(|b| b.record_id == "r")
            .map(|b| RecordDigest::from_bucket(b))
            .unwrap();
        let f = assemble_features(&digest, &snap, FeatureLayout::default());
        assert_eq!(&f[2..=4], &[1.0, 0.5, 0.25]);
        assert_eq!(&f[5..=6], &[0.0, 0.0], "zero padding");
    }

    #[test]
    fn record_with_top_token_scores_one() {
        let mut w = SlidingWindow::with_defaults();
        insert(&mut w, &record("r", 0, "solo", None));
        let snap = w.snapshot(0, 0);
        let digest = RecordDigest::from_bucket(&snap.records()[0]);
        let f = assemble_features(&digest, &snap, FeatureLayout::default());
        assert_eq!(f[2], 1.0);
    }

    #[test]
    fn tie_break_is_lexicographic() {
        let mut w = SlidingWindow::with_defaults();
        insert(&mut w, &record("r", 0, "zebra apple", None));
        let snap = w.snapshot(0, 0);
        let digest = RecordDigest::from_bucket(&snap.records()[0]);
        // Both tokens count 1 -> both score 1.0; apple (stem "appl")
        // sorts before zebra.
        let distinct: BTreeSet<&String> = digest.tokens.iter().collect();
        let first = distinct.into_iter().next().unwrap().clone();
        assert_eq!(first, "appl");
        let f = assemble_features(&digest, &snap, FeatureLayout::default());
        assert_eq!(&f[2..=3], &[1.0, 1.0]);
    }

    #[test]
    fn length_feature_is_optional_16th() {
        let mut w = SlidingWindow::with_defaults();
        insert(&mut w, &record("a", 0, "xx", None));
        insert(&mut w, &record("b", 0, "xxxxxxxxxx", None));
        let snap = w.snapshot(0, 0);
        let layout = FeatureLayout { include_length: true };
        let digest = RecordDigest::from_bucket(&snap.records()[0]);
        let f = assemble_features(&digest, &snap, layout);
        assert_eq!(f.len(), 16);
        assert_eq!(f[15], 0.0, "shortest record normalizes to 0");
    }

    #[test]
    fn indicators_from_markup() {
        let mut w = SlidingWindow::with_defaults();
        insert(&mut w, &record("r", 0, "check #tag http://x.y body", None));
        let snap = w.snapshot(0, 0);
        let digest = RecordDigest::from_bucket(&snap.records()[0]);
        let f = assemble_features(&digest, &snap, FeatureLayout::default());
        assert_eq!(f[0], 1.0);
        assert_eq!(f[1], 1.0);
    }

    #[test]
    fn label_positive_when_retweeted_within_window() {
        let mut w = SlidingWindow::with_defaults();
        insert(&mut w, &record("A", 0, "original insight", None));
        insert(&mut w, &record("B", 60_000, "RT @x original insight", Some("A")));
        let snap = w.snapshot(0, 60_000);
        let index = RetweetIndex::from_snapshot(&snap);
        let digests: HashMap<String, RecordDigest> = snap
            .records()
            .iter()
            .map(|b| (b.record_id.clone(), RecordDigest::from_bucket(b)))
            .collect();
        assert_eq!(label_by_retweet(&digests["A"], &index), 1);
        // The retweet record itself is not positive.
        assert_eq!(label_by_retweet(&digests["B"], &index), 0);
    }

    #[test]
    fn label_zero_without_matching_retweet() {
        let mut w = SlidingWindow::with_defaults();
        insert(&mut w, &record("A", 0, "original insight", None));
        let snap = w.snapshot(0, 0);
        let index = RetweetIndex::from_snapshot(&snap);
        let digest = RecordDigest::from_bucket(&snap.records()[0]);
        assert_eq!(label_by_retweet(&digest, &index), 0);
    }

    #[test]
    fn label_zero_after_original_expires() {
        // Retweet at 130s, window 120s: at the boundary where A expired,
        // A is gone; and B alone stays negative.
        let mut w = SlidingWindow::with_defaults();
        insert(&mut w, &record("A", 0, "original insight", None));
        insert(&mut w, &record("B", 130_000, "RT @x original insight", Some("A")));
        let snap = w.snapshot(0, 130_000);
        assert_eq!(snap.records().len(), 1);
        let index = RetweetIndex::from_snapshot(&snap);
        let digest = RecordDigest::from_bucket(&snap.records()[0]);
        assert_eq!(label_by_retweet(&digest, &index), 0);
    }

    #[test]
    fn label_body_fallback_without_structural_id() {
        let mut w = SlidingWindow::with_defaults();
        insert(&mut w, &record("A", 0, "original insight", None));
        insert(&mut w, &record("B", 60_000, "RT @x original insight", None));
        let snap = w.snapshot(0, 60_000);
        let index = RetweetIndex::from_snapshot(&snap);
        let digests: HashMap<String, RecordDigest> = snap
            .records()
            .iter()
            .map(|b| (b.record_id.clone(), RecordDigest::from_bucket(b)))
            .collect();
        assert_eq!(label_by_retweet(&digests["A"], &index), 1);
        assert_eq!(label_by_retweet(&digests["B"], &index), 0);
    }

    fn sample(label: u8, id: &str) -> LabeledSample {
        LabeledSample {
            features: vec![label as f64; BASE_DIM],
            label,
            record_id: id.into(),
            window_index: 0,
        }
    }

    #[test]
    fn oversample_reaches_parity() {
        let mut samples: Vec<LabeledSample> =
            (0..98).map(|i| sample(0, &format!("n{i}"))).collect();
        samples.push(sample(1, "p0"));
        samples.push(sample(1, "p1"));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let balanced = oversample(samples, &mut rng).unwrap();
        assert_eq!(balanced.len(), 196);
        assert_eq!(balanced.iter().filter(|s| s.label == 1).count(), 98);
        // Every original positive still present.
        for id in ["p0", "p1"] {
            assert!(balanced.iter().any(|s| s.record_id == id));
        }
    }

    #[test]
    fn oversample_balanced_input_only_shuffles() {
        let samples: Vec<LabeledSample> = (0..10)
            .map(|i| sample((i % 2) as u8, &format!("s{i}")))
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let out = oversample(samples.clone(), &mut rng).unwrap();
        assert_eq!(out.len(), samples.len());
        let mut sorted_ids: Vec<_> = out.iter().map(|s| s.record_id.clone()).collect();
        sorted_ids.sort();
        let mut expect: Vec<_> = samples.iter().map(|s| s.record_id.clone()).collect();
        expect.sort();
        assert_eq!(sorted_ids, expect);
    }

    #[test]
    fn oversample_single_class_is_degenerate() {
        let samples: Vec<LabeledSample> = (0..5).map(|i| sample(0, &format!("n{i}"))).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(oversample(samples, &mut rng).is_err());
    }

    #[test]
    fn oversample_is_deterministic_per_seed() {
        let make = || {
            let mut s: Vec<LabeledSample> =
                (0..20).map(|i| sample(0, &format!("n{i}"))).collect();
            s.push(sample(1, "p"));
            s
        };
        let mut a_rng = ChaCha8Rng::seed_from_u64(9);
        let mut b_rng = ChaCha8Rng::seed_from_u64(9);
        let a = oversample(make(), &mut a_rng).unwrap();
        let b = oversample(make(), &mut b_rng).unwrap();
        assert_eq!(a, b);
    }
}
