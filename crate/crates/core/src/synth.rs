//! Synthetic stream generator: Zipf-distributed token draws, log-uniform
//! author counters, configurable hashtag/link probabilities, and a
//! planted retweet rule so desk-scale runs have a learnable signal of
//! known strength. Deterministic per seed.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};

use crate::ingest::RawRecord;

/// The designated bursty token injected into planted records.
pub const BURSTY_TOKEN: &str = "surgewave";

#[derive(Debug, Clone)]
pub struct SynthConfig {
    /// Base records per second.
    pub rate: f64,
    pub duration_secs: f64,
    pub vocab_size: usize,
    pub zipf_s: f64,
    /// Fraction of base records built to satisfy the plant predicate
    /// (hashtag AND link AND bursty token).
    pub plant_frac: f64,
    /// Retweet probability for records satisfying the plant predicate.
    pub p_hi: f64,
    /// Retweet probability for everything else.
    pub p_lo: f64,
    /// Hashtag / link / background-bursty probabilities for non-planted
    /// records.
    pub hashtag_prob: f64,
    pub link_prob: f64,
    pub bursty_background: f64,
    pub mention_prob: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            rate: 100.0,
            duration_secs: 600.0,
            vocab_size: 5000,
            zipf_s: 1.1,
            plant_frac: 0.05,
            p_hi: 0.6,
            p_lo: 0.01,
            hashtag_prob: 0.12,
            link_prob: 0.10,
            bursty_background: 0.02,
            mention_prob: 0.05,
            seed: 42,
        }
    }
}

/// Does a record's content satisfy the plant predicate?
pub fn satisfies_plant(text: &str) -> bool {
    text.contains('#') && text.contains("http://") && text.contains(BURSTY_TOKEN)
}

fn log_uniform(rng: &mut ChaCha8Rng, hi: f64) -> u64 {
    let ln_hi = hi.ln();
    rng.random_range(0.0..ln_hi).exp() as u64
}

/// Generate the stream as records sorted by (timestamp, generation
/// order). Retweets carry `retweet_of` and echo the original's tokens
/// behind an `RT @user` prefix.
pub fn generate_records(cfg: &SynthConfig) -> Vec<RawRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let zipf = Zipf::new(cfg.vocab_size as f64, cfg.zipf_s).expect("zipf parameters");
    let n_base = (cfg.duration_secs * cfg.rate).floor() as u64;
    let mut records: Vec<(u64, u64, RawRecord)> = Vec::with_capacity(n_base as usize);
    let mut seq = 0u64;

    for i in 0..n_base {
        let ts = (i as f64 * 1000.0 / cfg.rate).floor() as u64;
        let planted = rng.random_bool(cfg.plant_frac);
        let n_tokens = rng.random_range(4..=10usize);
        let mut tokens: Vec<String> = (0..n_tokens)
            .map(|_| format!("w{:04}", zipf.sample(&mut rng) as u64))
            .collect();
        if planted || rng.random_bool(cfg.bursty_background) {
            tokens.push(BURSTY_TOKEN.to_string());
        }
        let mut text = tokens.join(" ");
        if planted || rng.random_bool(cfg.hashtag_prob) {
            text.push_str(&format!(" #trend{}", rng.random_range(0..20)));
        }
        if planted || rng.random_bool(cfg.link_prob) {
            text.push_str(&format!(" http://ex.io/{:06x}", rng.random_range(0..0xffffffu32)));
        }
        if rng.random_bool(cfg.mention_prob) {
            text.push_str(&format!(" @user{}", rng.random_range(0..500)));
        }
        let id = format!("t{i:07}");
        let record = RawRecord {
            id: id.clone(),
            ts,
            text: text.clone(),
            followers: log_uniform(&mut rng, 1e6),
            friends: log_uniform(&mut rng, 1e5),
            statuses: log_uniform(&mut rng, 1e5),
            lang: Some("en".to_string()),
            retweet_of: None,
        };
        records.push((ts, seq, record));
        seq += 1;

        // The retweet decision applies to the record's *content*, not the
        // planting coin: background lookalikes are retweeted at p_hi too.
        let p = if satisfies_plant(&text) { cfg.p_hi } else { cfg.p_lo };
        if p > 0.0 && rng.random_bool(p) {
            let delay = rng.random_range(5_000..=110_000u64);
            let rt = RawRecord {
                id: format!("r{i:07}"),
                ts: ts + delay,
                text: format!("RT @user{} {}", rng.random_range(0..500), tokens.join(" ")),
                followers: log_uniform(&mut rng, 1e6),
                friends: log_uniform(&mut rng, 1e5),
                statuses: log_uniform(&mut rng, 1e5),
                lang: Some("en".to_string()),
                retweet_of: Some(id),
            };
            records.push((ts + delay, seq, rt));
            seq += 1;
        }
    }

    records.sort_by_key(|(ts, seq, _)| (*ts, *seq));
    records.into_iter().map(|(_, _, r)| r).collect()
}

/// Write the generated stream as JSON-lines. Byte-identical per seed.
pub fn generate_stream<W: Write>(cfg: &SynthConfig, mut w: W) -> std::io::Result<u64> {
    let records = generate_records(cfg);
    let n = records.len() as u64;
    for record in &records {
        serde_json::to_writer(&mut w, record)?;
        w.write_all(b"\n")?;
    }
    Ok(n)
}
