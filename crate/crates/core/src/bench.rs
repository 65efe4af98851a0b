//! Sliding-window evaluation against contact-PPG ground truth, MAE/RMSE
//! aggregation, and CSV / markdown / JSON reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{
    ground_truth_hr, load_entry_ppg, load_entry_trace, DatasetManifest, GroundTruthPpg,
    SubjectSplit,
};
use crate::methods::Method;
use crate::spectral::{FrequencyBand, FIR_TAPS_AT_20_FPS};
use crate::trace::{sliding_windows, ChannelTrace};

/// Allowed difference between trace and PPG durations.
pub const MAX_SPAN_MISMATCH_S: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedWindow {
    pub start_s: f64,
    pub reason: String,
}

/// Per-window heart-rate estimates keyed by window start time.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HrSeries {
    pub window_starts_s: Vec<f64>,
    pub hr_bpm: Vec<f64>,
    pub skipped: Vec<SkippedWindow>,
}

impl HrSeries {
    pub fn push(&mut self, start_s: f64, hr_bpm: f64) {
        self.window_starts_s.push(start_s);
        self.hr_bpm.push(hr_bpm);
    }

    pub fn skip(&mut self, start_s: f64, reason: impl Into<String>) {
        self.skipped.push(SkippedWindow {
            start_s,
            reason: reason.into(),
        });
    }

    pub fn len(&self) -> usize {
        self.hr_bpm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hr_bpm.is_empty()
    }

    pub fn mean_hr(&self) -> Option<f64> {
        (!self.is_empty()).then(|| self.hr_bpm.iter().sum::<f64>() / self.len() as f64)
    }

    fn by_start(&self) -> BTreeMap<i64, f64> {
        self.window_starts_s
            .iter()
            .zip(&self.hr_bpm)
            .map(|(s, hr)| (start_key(*s), *hr))
            .collect()
    }
}

// Window starts are matched at millisecond resolution.
fn start_key(start_s: f64) -> i64 {
    (start_s * 1000.0).round() as i64
}

/// Runs `method` over every sliding window of `trace`.
pub fn estimate_series(
    trace: &ChannelTrace,
    method: Method,
    window_seconds: f64,
    step_seconds: f64,
    band: &FrequencyBand,
) -> Result<HrSeries> {
    let mut series = HrSeries::default();
    for view in sliding_windows(trace.len(), trace.fps(), window_seconds, step_seconds)? {
        let start = view.start_seconds(trace.fps());
        match method.estimate_hr(trace.window(&view), trace.fps(), band) {
            Ok(hr) => series.push(start, hr),
            Err(e) => series.skip(start, e.to_string()),
        }
    }
    Ok(series)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub estimate: HrSeries,
    pub ground_truth: HrSeries,
    /// Start times of the windows where both sides produced a value.
    pub window_starts_s: Vec<f64>,
    pub abs_errors: Vec<f64>,
    /// Windows dropped because either side had no estimate.
    pub n_skipped: usize,
}

/// Pairs estimate and ground-truth windows by start time.
pub fn compare_series(estimate: HrSeries, ground_truth: HrSeries) -> Evaluation {
    let gt = ground_truth.by_start();
    let est = estimate.by_start();
    let mut window_starts_s = Vec::new();
    let mut abs_errors = Vec::new();
    for (key, hr) in &est {
        if let Some(g) = gt.get(key) {
            window_starts_s.push(*key as f64 / 1000.0);
            abs_errors.push((hr - g).abs());
        }
    }
    let mut all_keys: Vec<i64> = est.keys().chain(gt.keys()).copied().collect();
    all_keys.extend(estimate.skipped.iter().map(|s| start_key(s.start_s)));
    all_keys.extend(ground_truth.skipped.iter().map(|s| start_key(s.start_s)));
    all_keys.sort_unstable();
    all_keys.dedup();
    let n_skipped = all_keys.len() - abs_errors.len();
    Evaluation {
        estimate,
        ground_truth,
        window_starts_s,
        abs_errors,
        n_skipped,
    }
}

fn check_span(trace: &ChannelTrace, ppg: &GroundTruthPpg) -> Result<()> {
    let diff = (trace.duration_s() - ppg.duration_s()).abs();
    if diff > MAX_SPAN_MISMATCH_S {
        return Err(Error::InvalidParameter(format!(
            "trace covers {:.2} s but PPG covers {:.2} s",
            trace.duration_s(),
            ppg.duration_s()
        )));
    }
    Ok(())
}

/// Evaluates one method on one recording. Fails with `EmptyEvaluation` when
/// no window has both an estimate and a ground-truth value.
pub fn evaluate_video(
    trace: &ChannelTrace,
    ppg: &GroundTruthPpg,
    method: Method,
    window_seconds: f64,
    step_seconds: f64,
    band: &FrequencyBand,
) -> Result<Evaluation> {
    check_span(trace, ppg)?;
    let gt = ground_truth_hr(ppg, window_seconds, step_seconds, band)?;
    let est = estimate_series(trace, method, window_seconds, step_seconds, band)?;
    let eval = compare_series(est, gt);
    if eval.abs_errors.is_empty() {
        return Err(Error::EmptyEvaluation(format!(
            "{method} on `{}` with {window_seconds} s windows: {} windows skipped",
            trace.origin_id(),
            eval.n_skipped
        )));
    }
    Ok(eval)
}

pub fn mae(errors: &[f64]) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::EmptyEvaluation("no errors to average".into()));
    }
    Ok(errors.iter().map(|e| e.abs()).sum::<f64>() / errors.len() as f64)
}

pub fn rmse(errors: &[f64]) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::EmptyEvaluation("no errors to average".into()));
    }
    Ok((errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub methods: Vec<Method>,
    pub windows_s: Vec<f64>,
    pub step_s: f64,
    pub band: FrequencyBand,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            methods: Method::ALL.to_vec(),
            windows_s: vec![60.0, 30.0, 15.0],
            step_s: 1.0,
            band: FrequencyBand::PHYSIOLOGICAL,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() || self.windows_s.is_empty() {
            return Err(Error::InvalidParameter(
                "need at least one method and one window".into(),
            ));
        }
        if self.windows_s.iter().any(|w| !(*w > 0.0)) || !(self.step_s > 0.0) {
            return Err(Error::InvalidParameter(
                "windows and step must be > 0".into(),
            ));
        }
        FrequencyBand::new(self.band.low_hz, self.band.high_hz)?;
        Ok(())
    }
}

/// Configuration echoed into every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub methods: Vec<Method>,
    pub windows_s: Vec<f64>,
    pub step_s: f64,
    pub band_low_hz: f64,
    pub band_high_hz: f64,
    pub fir_taps_at_20_fps: usize,
    pub n_entries: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub method: Method,
    pub window_s: f64,
    pub mae_bpm: Option<f64>,
    pub rmse_bpm: Option<f64>,
    pub n_windows: usize,
    pub n_skipped: usize,
}

impl CellStats {
    fn from_errors(method: Method, window_s: f64, errors: &[f64], n_skipped: usize) -> Self {
        Self {
            method,
            window_s,
            mae_bpm: mae(errors).ok(),
            rmse_bpm: rmse(errors).ok(),
            n_windows: errors.len(),
            n_skipped,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoCellStats {
    pub origin_id: String,
    pub method: Method,
    pub window_s: f64,
    pub mae_bpm: Option<f64>,
    pub rmse_bpm: Option<f64>,
    pub n_windows: usize,
    pub n_skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanRow {
    pub method: Method,
    /// Unweighted mean of the per-window-length MAEs.
    pub mean_mae_bpm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryFailure {
    pub origin_id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub config: ReportConfig,
    /// Windows pooled across all evaluated recordings.
    pub cells: Vec<CellStats>,
    /// Sorted by origin id, then method and window in config order.
    pub per_video: Vec<VideoCellStats>,
    pub mean_row: Vec<MeanRow>,
    pub failures: Vec<EntryFailure>,
}

impl BenchReport {
    pub fn cell(&self, method: Method, window_s: f64) -> Option<&CellStats> {
        self.cells
            .iter()
            .find(|c| c.method == method && c.window_s == window_s)
    }

    pub fn mean_mae(&self, method: Method) -> Option<f64> {
        self.mean_row
            .iter()
            .find(|m| m.method == method)
            .and_then(|m| m.mean_mae_bpm)
    }
}

/// Per-recording evaluation results for every (method, window) cell.
struct EntryResult {
    origin_id: String,
    cells: Vec<(Vec<f64>, usize)>,
    failures: Vec<String>,
}

fn evaluate_entry(
    trace: &ChannelTrace,
    ppg: &GroundTruthPpg,
    config: &BenchConfig,
) -> Result<EntryResult> {
    check_span(trace, ppg)?;
    let mut cells = Vec::with_capacity(config.methods.len() * config.windows_s.len());
    let mut failures = Vec::new();
    let gts = config
        .windows_s
        .iter()
        .map(|&w| ground_truth_hr(ppg, w, config.step_s, &config.band))
        .collect::<Result<Vec<_>>>()?;
    for &method in &config.methods {
        for (&w, gt) in config.windows_s.iter().zip(&gts) {
            let est = estimate_series(trace, method, w, config.step_s, &config.band)?;
            let eval = compare_series(est, gt.clone());
            if eval.abs_errors.is_empty() {
                failures.push(format!("{method} @ {w} s: every window skipped"));
            }
            cells.push((eval.abs_errors, eval.n_skipped));
        }
    }
    Ok(EntryResult {
        origin_id: trace.origin_id().to_string(),
        cells,
        failures,
    })
}

/// Evaluates in-memory recordings. Results do not depend on input order.
pub fn run_benchmark_traces(
    recordings: &[(ChannelTrace, GroundTruthPpg)],
    config: &BenchConfig,
) -> Result<BenchReport> {
    config.validate()?;
    let results: Vec<std::result::Result<EntryResult, EntryFailure>> = recordings
        .par_iter()
        .map(|(trace, ppg)| {
            evaluate_entry(trace, ppg, config).map_err(|e| EntryFailure {
                origin_id: trace.origin_id().to_string(),
                error: e.to_string(),
            })
        })
        .collect();
    aggregate(results, config, recordings.len())
}

/// Evaluates every manifest entry (only the test subjects when a split is
/// given). Entries that fail to load or evaluate are reported, not fatal.
pub fn run_benchmark(
    manifest: &DatasetManifest,
    split: Option<&SubjectSplit>,
    config: &BenchConfig,
) -> Result<BenchReport> {
    config.validate()?;
    if manifest.entries.is_empty() {
        return Err(Error::InvalidParameter("manifest has no entries".into()));
    }
    let entries: Vec<_> = manifest
        .entries
        .iter()
        .filter(|e| split.is_none_or(|s| s.test_ids.contains(&e.subject_id)))
        .collect();
    let results: Vec<std::result::Result<EntryResult, EntryFailure>> = entries
        .par_iter()
        .map(|entry| {
            let run = || -> Result<EntryResult> {
                let trace = load_entry_trace(entry)?;
                let ppg = load_entry_ppg(entry)?;
                evaluate_entry(&trace, &ppg, config)
            };
            run().map_err(|e| EntryFailure {
                origin_id: entry.origin_id(),
                error: e.to_string(),
            })
        })
        .collect();
    aggregate(results, config, entries.len())
}

fn aggregate(
    results: Vec<std::result::Result<EntryResult, EntryFailure>>,
    config: &BenchConfig,
    n_entries: usize,
) -> Result<BenchReport> {
    let mut ok = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(entry) => {
                failures.extend(entry.failures.iter().map(|e| EntryFailure {
                    origin_id: entry.origin_id.clone(),
                    error: e.clone(),
                }));
                ok.push(entry);
            }
            Err(f) => failures.push(f),
        }
    }
    ok.sort_by(|a, b| a.origin_id.cmp(&b.origin_id));
    failures.sort_by(|a, b| (&a.origin_id, &a.error).cmp(&(&b.origin_id, &b.error)));

    let n_windows_total: usize = ok.iter().flat_map(|e| &e.cells).map(|c| c.0.len()).sum();
    if n_windows_total == 0 {
        let detail = failures
            .iter()
            .map(|f| format!("{}: {}", f.origin_id, f.error))
            .collect::<Vec<_>>()
            .join("; ");
        return Err(Error::EmptyEvaluation(if detail.is_empty() {
            "no entries to evaluate".into()
        } else {
            detail
        }));
    }

    let cell_keys: Vec<(Method, f64)> = config
        .methods
        .iter()
        .flat_map(|&m| config.windows_s.iter().map(move |&w| (m, w)))
        .collect();
    let mut cells = Vec::with_capacity(cell_keys.len());
    let mut per_video = Vec::new();
    for (i, &(method, window_s)) in cell_keys.iter().enumerate() {
        let mut pooled = Vec::new();
        let mut skipped = 0;
        for entry in &ok {
            let (errors, n_skipped) = &entry.cells[i];
            pooled.extend_from_slice(errors);
            skipped += n_skipped;
        }
        cells.push(CellStats::from_errors(method, window_s, &pooled, skipped));
    }
    for entry in &ok {
        for (i, &(method, window_s)) in cell_keys.iter().enumerate() {
            let (errors, n_skipped) = &entry.cells[i];
            let s = CellStats::from_errors(method, window_s, errors, *n_skipped);
            per_video.push(VideoCellStats {
                origin_id: entry.origin_id.clone(),
                method,
                window_s,
                mae_bpm: s.mae_bpm,
                rmse_bpm: s.rmse_bpm,
                n_windows: s.n_windows,
                n_skipped: s.n_skipped,
            });
        }
    }
    let mean_row = config
        .methods
        .iter()
        .map(|&method| {
            let maes: Vec<f64> = cells
                .iter()
                .filter(|c| c.method == method)
                .filter_map(|c| c.mae_bpm)
                .collect();
            MeanRow {
                method,
                mean_mae_bpm: (!maes.is_empty())
                    .then(|| maes.iter().sum::<f64>() / maes.len() as f64),
            }
        })
        .collect();

    Ok(BenchReport {
        config: ReportConfig {
            methods: config.methods.clone(),
            windows_s: config.windows_s.clone(),
            step_s: config.step_s,
            band_low_hz: config.band.low_hz,
            band_high_hz: config.band.high_hz,
            fir_taps_at_20_fps: FIR_TAPS_AT_20_FPS,
            n_entries,
        },
        cells,
        per_video,
        mean_row,
        failures,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            "json" => Ok(ReportFormat::Json),
            _ => Err(Error::InvalidParameter(format!(
                "unknown report format `{s}`, expected csv, markdown or json"
            ))),
        }
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Serializes a report. Markdown marks the best (lowest) value per column in
/// bold; values are compared as displayed (two decimals), so every row tied
/// at the displayed minimum is marked.
pub fn emit_report(report: &BenchReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            serde_json::to_string_pretty(report).expect("report serializes") + "\n"
        }
        ReportFormat::Csv => {
            let mut out = String::from("method,window_s,mae_bpm,rmse_bpm,n_windows,n_skipped\n");
            for c in &report.cells {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    c.method.label(),
                    c.window_s,
                    fmt_opt(c.mae_bpm),
                    fmt_opt(c.rmse_bpm),
                    c.n_windows,
                    c.n_skipped
                );
            }
            out
        }
        ReportFormat::Markdown => markdown_table(report),
    }
}

fn markdown_table(report: &BenchReport) -> String {
    let mut windows = report.config.windows_s.clone();
    windows.sort_by(|a, b| b.total_cmp(a));
    windows.dedup();

    // rows x (windows + mean), as displayed strings
    let rows: Vec<(Method, Vec<Option<String>>)> = report
        .config
        .methods
        .iter()
        .map(|&m| {
            let mut vals: Vec<Option<String>> = windows
                .iter()
                .map(|&w| {
                    report
                        .cell(m, w)
                        .and_then(|c| c.mae_bpm)
                        .map(|v| format!("{v:.2}"))
                })
                .collect();
            vals.push(report.mean_mae(m).map(|v| format!("{v:.2}")));
            (m, vals)
        })
        .collect();
    let n_cols = windows.len() + 1;
    let best: Vec<Option<f64>> = (0..n_cols)
        .map(|j| {
            rows.iter()
                .filter_map(|(_, v)| v[j].as_ref().and_then(|s| s.parse::<f64>().ok()))
                .reduce(f64::min)
        })
        .collect();

    let mut out = String::from("| Method |");
    for w in &windows {
        let _ = write!(out, " {w} s |");
    }
    out.push_str(" Mean |\n|---|");
    for _ in 0..n_cols {
        out.push_str("---:|");
    }
    out.push('\n');
    for (m, vals) in &rows {
        let _ = write!(out, "| {} |", m.label());
        for (j, v) in vals.iter().enumerate() {
            match v {
                Some(s) if best[j] == s.parse::<f64>().ok() => {
                    let _ = write!(out, " **{s}** |");
                }
                Some(s) => {
                    let _ = write!(out, " {s} |");
                }
                None => out.push_str(" - |"),
            }
        }
        out.push('\n');
    }
    out
}

/// Parses a JSON report produced by [`emit_report`].
pub fn parse_report_json(text: &str) -> Result<BenchReport> {
    Ok(serde_json::from_str(text)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{synth_trace, SynthSpec};
    use rand::{Rng, SeedableRng};

    #[test]
    fn mae_rmse_hand_values() {
        let errs = [72.0 - 70.0, 74.0 - 70.0];
        assert!((mae(&errs).unwrap() - 3.0).abs() < 1e-12);
        assert!((rmse(&errs).unwrap() - 10f64.sqrt()).abs() < 1e-12);
        assert_eq!(mae(&[0.0, 0.0]).unwrap(), 0.0);
        assert!(matches!(mae(&[]), Err(Error::EmptyEvaluation(_))));
        assert!(matches!(rmse(&[]), Err(Error::EmptyEvaluation(_))));
    }

    #[test]
    fn rmse_dominates_mae() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let n = rng.random_range(1..50);
            let errs: Vec<f64> = (0..n).map(|_| rng.random_range(-30.0..30.0)).collect();
            assert!(rmse(&errs).unwrap() >= mae(&errs).unwrap() - 1e-12);
        }
    }

    #[test]
    fn compare_pairs_by_start_and_counts_skips() {
        let mut est = HrSeries::default();
        est.push(0.0, 70.0);
        est.skip(1.0, "x");
        est.push(2.0, 75.0);
        let mut gt = HrSeries::default();
        gt.push(0.0, 71.0);
        gt.push(1.0, 72.0);
        gt.skip(2.0, "y");
        gt.push(3.0, 73.0);
        let eval = compare_series(est, gt);
        assert_eq!(eval.abs_errors, vec![1.0]);
        assert_eq!(eval.window_starts_s, vec![0.0]);
        assert_eq!(eval.n_skipped, 3);
    }

    fn recording(hr: f64, seed: u64, name: &str) -> (ChannelTrace, GroundTruthPpg) {
        let out = synth_trace(&SynthSpec::default().with_hr(hr).with_seed(seed)).unwrap();
        (out.trace.with_origin_id(name), out.ppg)
    }

    #[test]
    fn evaluate_video_window_counts() {
        let (trace, ppg) = recording(72.0, 1, "a");
        let band = FrequencyBand::PHYSIOLOGICAL;
        let e15 = evaluate_video(&trace, &ppg, Method::Pos, 15.0, 1.0, &band).unwrap();
        assert_eq!(e15.abs_errors.len(), 46);
        assert!(e15.abs_errors.iter().all(|e| *e <= 2.0));
        let e60 = evaluate_video(&trace, &ppg, Method::Chrom, 60.0, 1.0, &band).unwrap();
        assert_eq!(e60.abs_errors.len(), 1);
    }

    #[test]
    fn degenerate_trace_is_empty_evaluation() {
        let out = synth_trace(&SynthSpec::default().with_noise(0.0).with_strength(0.0)).unwrap();
        for m in Method::ALL {
            let r = evaluate_video(
                &out.trace,
                &out.ppg,
                m,
                30.0,
                1.0,
                &FrequencyBand::PHYSIOLOGICAL,
            );
            assert!(matches!(r, Err(Error::EmptyEvaluation(_))), "{m}: {r:?}");
        }
        let report = run_benchmark_traces(&[(out.trace, out.ppg)], &BenchConfig::default());
        assert!(matches!(report, Err(Error::EmptyEvaluation(_))));
    }

    #[test]
    fn span_mismatch_is_rejected() {
        let (trace, _) = recording(72.0, 1, "a");
        let short = synth_trace(&SynthSpec::default().with_duration(50.0))
            .unwrap()
            .ppg;
        assert!(evaluate_video(
            &trace,
            &short,
            Method::Pos,
            15.0,
            1.0,
            &FrequencyBand::PHYSIOLOGICAL
        )
        .is_err());
    }

    #[test]
    fn report_is_order_invariant_and_json_stable() {
        let recs = vec![
            recording(65.0, 1, "a"),
            recording(80.0, 2, "b"),
            recording(100.0, 3, "c"),
        ];
        let config = BenchConfig {
            methods: vec![Method::Green, Method::Pos],
            ..BenchConfig::default()
        };
        let fwd = run_benchmark_traces(&recs, &config).unwrap();
        let rev: Vec<_> = recs.iter().rev().cloned().collect();
        let back = run_benchmark_traces(&rev, &config).unwrap();
        assert_eq!(fwd, back);
        assert_eq!(fwd.cells.len(), 6);
        for c in &fwd.cells {
            assert!(c.rmse_bpm.unwrap() >= c.mae_bpm.unwrap());
        }

        let json = emit_report(&fwd, ReportFormat::Json);
        let parsed = parse_report_json(&json).unwrap();
        assert_eq!(emit_report(&parsed, ReportFormat::Json), json);
    }

    #[test]
    fn zero_error_video_never_raises_mae() {
        let recs = vec![recording(70.0, 5, "a")];
        let config = BenchConfig {
            methods: vec![Method::Chrom],
            windows_s: vec![15.0],
            ..BenchConfig::default()
        };
        let base = run_benchmark_traces(&recs, &config).unwrap();
        // a recording whose estimate equals its own ground truth: feed the
        // PPG itself as all three channels around a baseline
        let (_, ppg) = recording(90.0, 6, "z");
        let n = 1200;
        let decimated: Vec<f64> = (0..n).map(|i| ppg.samples[i * 256 / 20]).collect();
        let r: Vec<f64> = decimated.iter().map(|p| 0.6 * (1.0 + 0.01 * p)).collect();
        let g: Vec<f64> = decimated.iter().map(|p| 0.45 * (1.0 + 0.03 * p)).collect();
        let b: Vec<f64> = decimated.iter().map(|p| 0.35 * (1.0 + 0.02 * p)).collect();
        let perfect = ChannelTrace::new(r, g, b, 20.0, "zz").unwrap();
        let eval = evaluate_video(&perfect, &ppg, Method::Chrom, 15.0, 1.0, &config.band).unwrap();
        let mut more = recs.clone();
        more.push((perfect, ppg));
        let after = run_benchmark_traces(&more, &config).unwrap();
        let before = base.cells[0].mae_bpm.unwrap();
        let new_mean = mae(&eval.abs_errors).unwrap();
        // pooled MAE moves toward the added video's MAE
        if new_mean <= before {
            assert!(after.cells[0].mae_bpm.unwrap() <= before + 1e-12);
        }
    }

    fn fake_report(maes: &[(Method, [f64; 3])]) -> BenchReport {
        let windows = [60.0, 30.0, 15.0];
        let mut cells = Vec::new();
        for (m, vals) in maes {
            for (w, v) in windows.iter().zip(vals) {
                cells.push(CellStats {
                    method: *m,
                    window_s: *w,
                    mae_bpm: Some(*v),
                    rmse_bpm: Some(*v),
                    n_windows: 1,
                    n_skipped: 0,
                });
            }
        }
        let mean_row = maes
            .iter()
            .map(|(m, v)| MeanRow {
                method: *m,
                mean_mae_bpm: Some(v.iter().sum::<f64>() / 3.0),
            })
            .collect();
        BenchReport {
            config: ReportConfig {
                methods: maes.iter().map(|m| m.0).collect(),
                windows_s: windows.to_vec(),
                step_s: 1.0,
                band_low_hz: 0.7,
                band_high_hz: 4.0,
                fir_taps_at_20_fps: 127,
                n_entries: 1,
            },
            cells,
            per_video: Vec::new(),
            mean_row,
            failures: Vec::new(),
        }
    }

    #[test]
    fn markdown_layout_and_ties() {
        let one = fake_report(&[(Method::Green, [12.86, 14.30, 16.91])]);
        let md = emit_report(&one, ReportFormat::Markdown);
        let lines: Vec<&str> = md.lines().collect();
        assert_eq!(lines[0], "| Method | 60 s | 30 s | 15 s | Mean |");
        assert_eq!(lines.len(), 3);
        assert_eq!(
            lines[2],
            "| GREEN | **12.86** | **14.30** | **16.91** | **14.69** |"
        );

        let tied = fake_report(&[
            (Method::Green, [5.0, 6.0, 7.0]),
            (Method::Pos, [5.0, 8.0, 7.001]),
        ]);
        let md = emit_report(&tied, ReportFormat::Markdown);
        assert!(md.contains("| GREEN | **5.00** | **6.00** | **7.00** | **6.00** |"));
        assert!(md.contains("| POS | **5.00** | 8.00 | **7.00** | 6.67 |"));
    }

    #[test]
    fn csv_layout() {
        let r = fake_report(&[(Method::Chrom, [1.0, 2.0, 3.5])]);
        let csv = emit_report(&r, ReportFormat::Csv);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next(),
            Some("method,window_s,mae_bpm,rmse_bpm,n_windows,n_skipped")
        );
        assert_eq!(lines.next(), Some("CHROM,60,1,1,1,0"));
        assert_eq!(csv.lines().count(), 4);
    }
}
