//! Offline experiment runner: drives the full pipeline over a recorded or
//! generated stream, one micro-batch cycle per slide boundary, and
//! collects per-window metrics restricted to a window range.

use std::io::BufRead;
use std::path::Path;
use std::sync::Arc;

use thiserror::Error;

use crate::events::map_record;
use crate::features::{write_samples_csv, LabeledSample};
use crate::ingest::{replay_stream, IngestError, RawRecord, ReplayConfig, ReplayStats};
use crate::metrics::{MetricsReport, WindowRow};
use crate::mlp::MlpModel;
use crate::pipeline::{
    run_microbatch_cycle, BoundaryTracker, CycleOutcome, FeatureMode, PipelineConfig,
    WindowReport,
};
use crate::synth::{generate_records, SynthConfig};
use crate::window::SlidingWindow;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentMode {
    /// Real stream features.
    Real,
    /// Substitute uniform-random features after labeling.
    RandomBaseline,
    /// Generate a synthetic stream first, then run real features on it.
    Synthetic,
}

impl ExperimentMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "real" => Some(ExperimentMode::Real),
            "random-baseline" => Some(ExperimentMode::RandomBaseline),
            "synthetic" => Some(ExperimentMode::Synthetic),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub mode: ExperimentMode,
    /// Inclusive window-index range to report on.
    pub window_range: (u64, u64),
    pub seed: u64,
    pub pipeline: PipelineConfig,
    /// Stream generation parameters for `Synthetic` mode.
    pub synth: SynthConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            mode: ExperimentMode::Real,
            window_range: (20, 200),
            seed: 42,
            pipeline: PipelineConfig::default(),
            synth: SynthConfig::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub struct ExperimentOutput {
    pub metrics: MetricsReport,
    /// True iff every trained window used class-balanced samples.
    pub parity_ok: bool,
    pub windows_processed: u64,
    pub trained_windows: u64,
    pub degenerate_windows: u64,
    pub replay: Option<ReplayStats>,
    /// Raw labeled samples of in-range windows, when requested.
    pub samples: Vec<LabeledSample>,
}

impl ExperimentOutput {
    pub fn write_samples_csv<W: std::io::Write>(
        &self,
        w: W,
        layout: crate::features::FeatureLayout,
    ) -> std::io::Result<()> {
        write_samples_csv(w, &self.samples, layout)
    }
}

struct Runner {
    cfg: ExperimentConfig,
    window: SlidingWindow,
    boundaries: BoundaryTracker,
    model: Option<Arc<MlpModel>>,
    rows: Vec<WindowRow>,
    parity_ok: bool,
    windows_processed: u64,
    trained_windows: u64,
    degenerate_windows: u64,
    last_ts: u64,
    collect_samples: bool,
    samples: Vec<LabeledSample>,
}

impl Runner {
    fn new(cfg: ExperimentConfig, collect_samples: bool) -> Self {
        let window = SlidingWindow::new(
            cfg.pipeline.window_secs * 1000,
            cfg.pipeline.slide_secs * 1000,
        );
        let boundaries = BoundaryTracker::new(cfg.pipeline.slide_secs * 1000);
        Runner {
            cfg,
            window,
            boundaries,
            model: None,
            rows: Vec::new(),
            parity_ok: true,
            windows_processed: 0,
            trained_windows: 0,
            degenerate_windows: 0,
            last_ts: 0,
            collect_samples,
            samples: Vec::new(),
        }
    }

    fn in_range(&self, index: u64) -> bool {
        index >= self.cfg.window_range.0 && index <= self.cfg.window_range.1
    }

    fn feature_mode(&self) -> FeatureMode {
        match self.cfg.mode {
            ExperimentMode::RandomBaseline => FeatureMode::RandomBaseline,
            _ => FeatureMode::Real,
        }
    }

    fn run_boundary(&mut self, index: u64, boundary: u64) {
        self.window.evict_expired(boundary);
        let snap = self.window.snapshot(index, boundary);
        let keep = self.collect_samples && self.in_range(index);
        let (model, report) = run_microbatch_cycle(
            &snap,
            &self.cfg.pipeline,
            self.feature_mode(),
            self.model.as_ref(),
            self.cfg.seed,
            keep,
        );
        if let Some(m) = model {
            self.model = Some(Arc::new(m));
        }
        self.windows_processed += 1;
        self.absorb(report);
    }

    fn absorb(&mut self, report: WindowReport) {
        match &report.outcome {
            CycleOutcome::Trained { .. } => {
                self.trained_windows += 1;
                match report.oversampled {
                    Some((pos, neg)) if pos == neg => {}
                    _ => self.parity_ok = false,
                }
            }
            CycleOutcome::Degenerate { .. } => self.degenerate_windows += 1,
            CycleOutcome::Disabled => {}
        }
        if !self.in_range(report.window_index) {
            return;
        }
        if let Some(samples) = &report.samples {
            self.samples.extend(samples.iter().cloned());
        }
        let row = match &report.outcome {
            CycleOutcome::Trained { report: train_report, test_confusion } => WindowRow {
                window_index: report.window_index,
                start_ts_ms: report.boundary_ms.saturating_sub(self.window.length_ms()),
                n_samples: report.n_records as u64,
                n_pos: report.n_pos as u64,
                precision: test_confusion.precision(),
                recall: test_confusion.recall(),
                f1: test_confusion.f1(),
                kappa: test_confusion.kappa().ok(),
                train_ms: train_report.train_ms,
                stop_reason: train_report.stop_reason.as_str().to_string(),
            },
            CycleOutcome::Degenerate { .. } => WindowRow {
                window_index: report.window_index,
                start_ts_ms: report.boundary_ms.saturating_sub(self.window.length_ms()),
                n_samples: report.n_records as u64,
                n_pos: report.n_pos as u64,
                precision: None,
                recall: None,
                f1: None,
                kappa: None,
                train_ms: 0,
                stop_reason: "degenerate".to_string(),
            },
            CycleOutcome::Disabled => WindowRow {
                window_index: report.window_index,
                start_ts_ms: report.boundary_ms.saturating_sub(self.window.length_ms()),
                n_samples: report.n_records as u64,
                n_pos: report.n_pos as u64,
                precision: None,
                recall: None,
                f1: None,
                kappa: None,
                train_ms: 0,
                stop_reason: "disabled".to_string(),
            },
        };
        self.rows.push(row);
    }

    fn on_record(&mut self, record: RawRecord) {
        self.last_ts = self.last_ts.max(record.ts);
        for (index, boundary) in self.boundaries.observe(record.ts) {
            self.run_boundary(index, boundary);
        }
        for event in map_record(&record) {
            if let Err(e) = self.window.insert_event(event) {
                log::warn!("record {}: {e}", record.id);
            }
        }
    }

    fn finish(mut self, replay: Option<ReplayStats>) -> ExperimentOutput {
        for (index, boundary) in self.boundaries.drain(self.last_ts) {
            self.run_boundary(index, boundary);
        }
        let max_window = self.rows.iter().map(|r| r.window_index).max().unwrap_or(0);
        let truncated = max_window < self.cfg.window_range.1;
        if truncated {
            log::warn!(
                "stream ended at window {max_window}, short of the requested range {}..{}",
                self.cfg.window_range.0,
                self.cfg.window_range.1
            );
        }
        ExperimentOutput {
            metrics: MetricsReport { rows: self.rows, truncated_range: truncated },
            parity_ok: self.parity_ok,
            windows_processed: self.windows_processed,
            trained_windows: self.trained_windows,
            degenerate_windows: self.degenerate_windows,
            replay,
            samples: self.samples,
        }
    }
}

/// Run an experiment over a recorded stream file (`Real` and
/// `RandomBaseline` modes).
pub fn run_experiment_on_file(
    input: &Path,
    cfg: ExperimentConfig,
    collect_samples: bool,
) -> Result<ExperimentOutput, ExperimentError> {
    let file = std::fs::File::open(input)?;
    run_experiment_on_reader(std::io::BufReader::new(file), cfg, collect_samples)
}

/// Run an experiment from any JSON-lines reader.
pub fn run_experiment_on_reader<R: BufRead>(
    reader: R,
    cfg: ExperimentConfig,
    collect_samples: bool,
) -> Result<ExperimentOutput, ExperimentError> {
    let mut runner = Runner::new(cfg, collect_samples);
    let replay_cfg = ReplayConfig::default(); // data-driven, rate-free
    let stats = replay_stream(reader, &replay_cfg, |record| -> Result<(), ()> {
        runner.on_record(record);
        Ok(())
    })?;
    Ok(runner.finish(Some(stats)))
}

/// Run an experiment, generating the stream when in `Synthetic` mode.
pub fn run_experiment(
    input: Option<&Path>,
    cfg: ExperimentConfig,
    collect_samples: bool,
) -> Result<ExperimentOutput, ExperimentError> {
    match cfg.mode {
        ExperimentMode::Synthetic => {
            let records = generate_records(&cfg.synth);
            let mut runner = Runner::new(cfg, collect_samples);
            for record in records {
                if crate::ingest::filter_language(&record) {
                    runner.on_record(record);
                }
            }
            Ok(runner.finish(None))
        }
        _ => {
            let path = input.ok_or_else(|| {
                ExperimentError::Io(std::io::Error::new(
                    std::io::ErrorKind::NotFound,
                    "real and random-baseline modes need an input stream",
                ))
            })?;
            run_experiment_on_file(path, cfg, collect_samples)
        }
    }
}
