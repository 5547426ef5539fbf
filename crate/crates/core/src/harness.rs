//! Monte Carlo sweep harness: paired trials across oversampling factors,
//! deterministic seeding, CSV/JSON reporting, and point-level resume.
//!
//! Reproducibility rules:
//!
//! * every trial derives its own master seed from
//!   `(sweep master seed, point index, frame index)`, so results do not
//!   depend on scheduling or worker count;
//! * receivers with different oversampling factors are **paired**: the trial
//!   is realised once at the largest requested factor and coarser receivers
//!   see polyphase restrictions of the same observation, which removes the
//!   channel/noise draw as a source of variance between the curves;
//! * frames are distributed over a rayon pool but reduced in frame order, so
//!   the serial and parallel sweeps emit byte-identical CSV (as long as
//!   timing capture is disabled, which is the default for tests).
//!
//! A sweep walks pilot counts (outer) and SNR points (inner). After every
//! point the CSV and a JSON manifest are rewritten atomically; re-running the
//! same spec against an existing manifest skips the finished points.

use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baselines::{gabp_detect_known_channel, gabp_estimate_known_data, Scenario};
use crate::pbigabp::PbigabpEngine;
use crate::sysconfig::{substream, SystemParams, STREAM_TRIAL};

/// Receivers the harness can evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReceiverKind {
    /// The joint channel-estimation-and-detection receiver.
    Pbigabp,
    /// Genie-aided linear bound: detection with the true channel plus
    /// estimation with the true symbols (seeded by pilot LMMSE).
    LinearGabp,
    /// Detection with the true channel only; its gain error is identically
    /// zero.
    GenieDetection,
}

impl ReceiverKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ReceiverKind::Pbigabp => "pbigabp",
            ReceiverKind::LinearGabp => "linear_gabp",
            ReceiverKind::GenieDetection => "genie_detection",
        }
    }

    pub const ALL: [ReceiverKind; 3] = [
        ReceiverKind::Pbigabp,
        ReceiverKind::LinearGabp,
        ReceiverKind::GenieDetection,
    ];
}

impl fmt::Display for ReceiverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ReceiverKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pbigabp" => Ok(ReceiverKind::Pbigabp),
            "linear_gabp" => Ok(ReceiverKind::LinearGabp),
            "genie_detection" => Ok(ReceiverKind::GenieDetection),
            other => Err(format!(
                "unknown receiver '{}'; expected pbigabp, linear_gabp or genie_detection",
                other
            )),
        }
    }
}

/// Everything needed to run one sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSpec {
    /// Template parameters; per point the pilot count, SNR and oversampling
    /// factor are overridden.
    pub base: SystemParams,
    /// SNR grid in dB (inner loop).
    pub snr_db: Vec<f64>,
    /// Pilot-count grid (outer loop).
    pub pilot_counts: Vec<usize>,
    /// Oversampling factors to compare; trials are generated at the largest
    /// one, which every other entry must divide.
    pub oversampling_factors: Vec<usize>,
    /// Monte Carlo frames per sweep point.
    pub frames_per_point: usize,
    /// Receivers to evaluate on every trial.
    pub receivers: Vec<ReceiverKind>,
    /// Rayon worker threads; 0 uses the global default pool.
    pub workers: usize,
    /// Record wall-clock time per receiver. Leave off for byte-identical
    /// reruns (timing is the only nondeterministic column).
    pub include_timing: bool,
}

impl SweepSpec {
    /// A spec over the given grids with library defaults elsewhere.
    pub fn new(base: SystemParams, snr_db: Vec<f64>, pilot_counts: Vec<usize>) -> SweepSpec {
        SweepSpec {
            base,
            snr_db,
            pilot_counts,
            oversampling_factors: vec![1, 2],
            frames_per_point: 500,
            receivers: vec![ReceiverKind::Pbigabp],
            workers: 0,
            include_timing: false,
        }
    }

    /// Check grid consistency; returns a description of the first problem.
    pub fn validate(&self) -> Result<(), String> {
        if self.snr_db.is_empty() || self.pilot_counts.is_empty() {
            return Err("sweep grids must be non-empty".into());
        }
        if self.oversampling_factors.is_empty() {
            return Err("at least one oversampling factor is required".into());
        }
        if self.receivers.is_empty() {
            return Err("at least one receiver is required".into());
        }
        let g_max = *self.oversampling_factors.iter().max().unwrap();
        for &g in &self.oversampling_factors {
            if g == 0 || g_max % g != 0 {
                return Err(format!(
                    "oversampling factor {} must be a nonzero divisor of the maximum {}",
                    g, g_max
                ));
            }
        }
        for &np in &self.pilot_counts {
            if np > self.base.n {
                return Err(format!("pilot count {} exceeds frame length {}", np, self.base.n));
            }
        }
        Ok(())
    }

    /// Sweep points in canonical order: pilot counts outer, SNR inner.
    pub fn points(&self) -> Vec<SweepPoint> {
        let mut pts = Vec::new();
        let mut idx = 0;
        for &n_p in &self.pilot_counts {
            for &snr_db in &self.snr_db {
                pts.push(SweepPoint { index: idx, n_p, snr_db });
                idx += 1;
            }
        }
        pts
    }
}

/// One cell of the sweep grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub index: usize,
    pub n_p: usize,
    pub snr_db: f64,
}

/// Raw outcome of one receiver on one trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialMetrics {
    pub receiver: ReceiverKind,
    pub g: usize,
    pub bit_errors: usize,
    pub bits: usize,
    /// Linear (not dB) squared gain-estimate error over squared gain norm.
    pub nmse: Option<f64>,
    /// The receiver hit a numerical failure; excluded from every average.
    pub aborted: bool,
    /// Wall time in milliseconds, zero unless timing capture is enabled.
    pub wall_ms: f64,
}

/// Aggregated sweep-point result for one receiver at one oversampling
/// factor; one CSV line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub receiver: String,
    pub g: usize,
    pub n: usize,
    pub n_p: usize,
    pub snr_db: f64,
    /// Trials attempted (including aborted ones).
    pub frames: usize,
    pub bit_errors: u64,
    pub bits_total: u64,
    pub ber: f64,
    /// `10 log10` of the mean linear gain-estimate error; `-inf` for an
    /// exact (genie) estimate.
    pub nmse_db: f64,
    pub aborts: usize,
    pub wall_ms: f64,
}

/// Relative squared error of a gain estimate.
pub fn nmse(est: &[num_complex::Complex64], truth: &[num_complex::Complex64]) -> f64 {
    assert_eq!(est.len(), truth.len());
    let err: f64 = est.iter().zip(truth).map(|(a, b)| (a - b).norm_sqr()).sum();
    let nrm: f64 = truth.iter().map(|z| z.norm_sqr()).sum();
    err / nrm
}

/// Master seed for one trial, independent of every other trial.
pub fn trial_seed(master: u64, point_index: usize, frame_index: usize) -> u64 {
    use rand::RngCore;
    let mut rng = substream(master, &[STREAM_TRIAL, point_index as u64, frame_index as u64]);
    rng.next_u64()
}

/// Run every requested receiver on one already-realised trial, restricting
/// the observation for coarser oversampling factors. `g_list` entries must
/// divide the scenario's own factor.
pub fn run_receivers(
    scenario: &Scenario,
    g_list: &[usize],
    receivers: &[ReceiverKind],
    include_timing: bool,
) -> Vec<TrialMetrics> {
    let mut out = Vec::with_capacity(g_list.len() * receivers.len());
    for &g in g_list {
        let restricted;
        let sub: &Scenario = if g == scenario.params.g {
            scenario
        } else {
            restricted = scenario.restrict_streams(g);
            &restricted
        };
        // The genie detection half is shared between the genie row and the
        // linear bound; compute it once per restriction.
        let needs_det = receivers
            .iter()
            .any(|r| matches!(r, ReceiverKind::LinearGabp | ReceiverKind::GenieDetection));
        let mut det_result = None;
        let mut det_ms = 0.0;
        if needs_det {
            let start = Instant::now();
            det_result = Some(gabp_detect_known_channel(sub));
            if include_timing {
                det_ms = start.elapsed().as_secs_f64() * 1e3;
            }
        }
        let truth = &sub.paths.gains;
        let data_bits = &sub.frame.data_bits;
        for &receiver in receivers {
            let metric = match receiver {
                ReceiverKind::Pbigabp => {
                    let start = Instant::now();
                    let mut engine = PbigabpEngine::new(&sub.dict, &sub.frame, &sub.params);
                    let result = engine.run(&sub.y);
                    let ms = if include_timing {
                        start.elapsed().as_secs_f64() * 1e3
                    } else {
                        0.0
                    };
                    match result {
                        Ok(output) => {
                            let errs = output
                                .data_bits()
                                .iter()
                                .zip(data_bits)
                                .filter(|(a, b)| a != b)
                                .count();
                            TrialMetrics {
                                receiver,
                                g,
                                bit_errors: errs,
                                bits: data_bits.len(),
                                nmse: Some(nmse(&output.h_est, truth)),
                                aborted: false,
                                wall_ms: ms,
                            }
                        }
                        Err(_) => abort_metric(receiver, g, ms),
                    }
                }
                ReceiverKind::GenieDetection => {
                    match det_result.as_ref().unwrap() {
                        Ok(output) => {
                            let errs = output
                                .data_bits()
                                .iter()
                                .zip(data_bits)
                                .filter(|(a, b)| a != b)
                                .count();
                            TrialMetrics {
                                receiver,
                                g,
                                bit_errors: errs,
                                bits: data_bits.len(),
                                // The genie hands over the exact gains.
                                nmse: Some(0.0),
                                aborted: false,
                                wall_ms: det_ms,
                            }
                        }
                        Err(_) => abort_metric(receiver, g, det_ms),
                    }
                }
                ReceiverKind::LinearGabp => {
                    let start = Instant::now();
                    let est = gabp_estimate_known_data(sub);
                    let est_ms = if include_timing {
                        start.elapsed().as_secs_f64() * 1e3
                    } else {
                        0.0
                    };
                    match (det_result.as_ref().unwrap(), est) {
                        (Ok(det), Ok(est)) => {
                            let errs = det
                                .data_bits()
                                .iter()
                                .zip(data_bits)
                                .filter(|(a, b)| a != b)
                                .count();
                            TrialMetrics {
                                receiver,
                                g,
                                bit_errors: errs,
                                bits: data_bits.len(),
                                nmse: Some(nmse(&est.h_est, truth)),
                                aborted: false,
                                wall_ms: det_ms + est_ms,
                            }
                        }
                        _ => abort_metric(receiver, g, det_ms + est_ms),
                    }
                }
            };
            out.push(metric);
        }
    }
    out
}

fn abort_metric(receiver: ReceiverKind, g: usize, wall_ms: f64) -> TrialMetrics {
    TrialMetrics {
        receiver,
        g,
        bit_errors: 0,
        bits: 0,
        nmse: None,
        aborted: true,
        wall_ms,
    }
}

/// Realise and evaluate one trial of one sweep point.
pub fn run_trial(
    base_at_point: &SystemParams,
    g_list: &[usize],
    receivers: &[ReceiverKind],
    point_index: usize,
    frame_index: usize,
    include_timing: bool,
) -> Vec<TrialMetrics> {
    let g_max = *g_list.iter().max().expect("g_list must be non-empty");
    let mut params = base_at_point.with_oversampling(g_max);
    params.seed = trial_seed(base_at_point.seed, point_index, frame_index);
    let scenario = Scenario::draw(&params);
    run_receivers(&scenario, g_list, receivers, include_timing)
}

/// Evaluate every frame of one sweep point, optionally on a private rayon
/// pool. Results are ordered by frame index regardless of scheduling.
pub fn run_point(
    base_at_point: &SystemParams,
    g_list: &[usize],
    receivers: &[ReceiverKind],
    point_index: usize,
    frames: usize,
    workers: usize,
    include_timing: bool,
) -> Vec<Vec<TrialMetrics>> {
    use rayon::prelude::*;
    let job = || -> Vec<Vec<TrialMetrics>> {
        (0..frames)
            .into_par_iter()
            .map(|frame| {
                run_trial(base_at_point, g_list, receivers, point_index, frame, include_timing)
            })
            .collect()
    };
    if workers > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("failed to build rayon pool");
        pool.install(job)
    } else {
        job()
    }
}

/// Collapse the per-frame metrics of one sweep point into CSV rows, one per
/// `(oversampling factor, receiver)` pair in grid order. Aborted trials are
/// counted but contribute to no average.
pub fn aggregate_point(
    point: &SweepPoint,
    n: usize,
    g_list: &[usize],
    receivers: &[ReceiverKind],
    frames: &[Vec<TrialMetrics>],
) -> Vec<ResultRow> {
    let mut rows = Vec::new();
    for &g in g_list {
        for &receiver in receivers {
            let mut bit_errors = 0u64;
            let mut bits_total = 0u64;
            let mut nmse_sum = 0.0f64;
            let mut nmse_count = 0usize;
            let mut aborts = 0usize;
            let mut wall_ms = 0.0f64;
            let mut attempted = 0usize;
            for frame in frames {
                for metric in frame
                    .iter()
                    .filter(|m| m.receiver == receiver && m.g == g)
                {
                    attempted += 1;
                    wall_ms += metric.wall_ms;
                    if metric.aborted {
                        aborts += 1;
                        continue;
                    }
                    bit_errors += metric.bit_errors as u64;
                    bits_total += metric.bits as u64;
                    if let Some(v) = metric.nmse {
                        nmse_sum += v;
                        nmse_count += 1;
                    }
                }
            }
            let ber = if bits_total > 0 {
                bit_errors as f64 / bits_total as f64
            } else {
                0.0
            };
            let nmse_db = if nmse_count > 0 {
                10.0 * (nmse_sum / nmse_count as f64).log10()
            } else {
                f64::NAN
            };
            rows.push(ResultRow {
                receiver: receiver.as_str().to_string(),
                g,
                n,
                n_p: point.n_p,
                snr_db: point.snr_db,
                frames: attempted,
                bit_errors,
                bits_total,
                ber,
                nmse_db,
                aborts,
                wall_ms,
            });
        }
    }
    rows
}

/// CSV header shared by every writer and parser in the project.
pub const CSV_HEADER: &str =
    "receiver,G,N,N_P,snr_db,frames,bit_errors,bits_total,ber,nmse_db,aborts,wall_ms";

/// Serialise rows to CSV. Floats use Rust's shortest round-trip formatting,
/// so parsing the text reproduces the binary values exactly.
pub fn rows_to_csv(rows: &[ResultRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.receiver,
            r.g,
            r.n,
            r.n_p,
            r.snr_db,
            r.frames,
            r.bit_errors,
            r.bits_total,
            r.ber,
            r.nmse_db,
            r.aborts,
            r.wall_ms
        ));
    }
    out
}

/// Parse CSV produced by [`rows_to_csv`].
pub fn parse_csv(text: &str) -> Result<Vec<ResultRow>, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => return Err(format!("bad CSV header: {:?}", other)),
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 12 {
            return Err(format!("line {}: expected 12 fields, got {}", lineno + 2, fields.len()));
        }
        let parse_f = |s: &str, what: &str| -> Result<f64, String> {
            s.parse::<f64>().map_err(|e| format!("line {}: bad {}: {}", lineno + 2, what, e))
        };
        let parse_u = |s: &str, what: &str| -> Result<u64, String> {
            s.parse::<u64>().map_err(|e| format!("line {}: bad {}: {}", lineno + 2, what, e))
        };
        rows.push(ResultRow {
            receiver: fields[0].to_string(),
            g: parse_u(fields[1], "G")? as usize,
            n: parse_u(fields[2], "N")? as usize,
            n_p: parse_u(fields[3], "N_P")? as usize,
            snr_db: parse_f(fields[4], "snr_db")?,
            frames: parse_u(fields[5], "frames")? as usize,
            bit_errors: parse_u(fields[6], "bit_errors")?,
            bits_total: parse_u(fields[7], "bits_total")?,
            ber: parse_f(fields[8], "ber")?,
            nmse_db: parse_f(fields[9], "nmse_db")?,
            aborts: parse_u(fields[10], "aborts")? as usize,
            wall_ms: parse_f(fields[11], "wall_ms")?,
        });
    }
    Ok(rows)
}

/// Sweep progress on disk; lets an interrupted run resume at the next
/// unfinished point. Finished rows are embedded as CSV text because JSON has
/// no representation for the infinities that appear in `nmse_db`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    /// Serialised spec; a resume only proceeds when it matches exactly.
    pub spec: SweepSpec,
    pub completed_points: usize,
    pub rows_csv: String,
}

fn write_atomic(path: &Path, contents: &str) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

/// Run a full sweep in memory (no files) and return the rows in canonical
/// order.
pub fn sweep(spec: &SweepSpec) -> Result<Vec<ResultRow>, String> {
    sweep_with_output(spec, None, None).map_err(|e| e.to_string())
}

/// Run a sweep, rewriting `csv_path` and `manifest_path` after every point;
/// resumes from a matching manifest when one exists.
pub fn sweep_with_output(
    spec: &SweepSpec,
    csv_path: Option<&Path>,
    manifest_path: Option<&Path>,
) -> io::Result<Vec<ResultRow>> {
    spec.validate().map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, e))?;
    let points = spec.points();
    let mut start_at = 0usize;
    let mut rows: Vec<ResultRow> = Vec::new();
    if let Some(mpath) = manifest_path {
        if mpath.exists() {
            let text = fs::read_to_string(mpath)?;
            match serde_json::from_str::<Manifest>(&text) {
                Ok(m) if serde_json::to_string(&m.spec).unwrap() == serde_json::to_string(spec).unwrap() => {
                    if let Ok(parsed) = parse_csv(&m.rows_csv) {
                        start_at = m.completed_points.min(points.len());
                        rows = parsed;
                    }
                }
                _ => {
                    // Stale or foreign manifest: start over.
                    start_at = 0;
                }
            }
        }
    }
    for point in &points[start_at..] {
        let base = spec
            .base
            .with_pilot_count(point.n_p)
            .with_snr_db(point.snr_db);
        let frames = run_point(
            &base,
            &spec.oversampling_factors,
            &spec.receivers,
            point.index,
            spec.frames_per_point,
            spec.workers,
            spec.include_timing,
        );
        rows.extend(aggregate_point(
            point,
            spec.base.n,
            &spec.oversampling_factors,
            &spec.receivers,
            &frames,
        ));
        if let Some(cpath) = csv_path {
            write_atomic(cpath, &rows_to_csv(&rows))?;
        }
        if let Some(mpath) = manifest_path {
            let manifest = Manifest {
                spec: spec.clone(),
                completed_points: point.index + 1,
                rows_csv: rows_to_csv(&rows),
            };
            write_atomic(mpath, &serde_json::to_string_pretty(&manifest)?)?;
        }
    }
    if let Some(cpath) = csv_path {
        write_atomic(cpath, &rows_to_csv(&rows))?;
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
