//! Trace CSV (`t,r,g,b`) and PPG CSV (`ppg`) files.

use std::path::Path;

use crate::error::{Error, Result};
use crate::ingest::{write_atomic, GroundTruthPpg};
use crate::trace::ChannelTrace;

/// Allowed relative deviation of any sample interval from the median.
pub const MAX_TIME_JITTER: f64 = 0.01;

fn open_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Format(format!("{}: {other:?}", path.display())),
        })
}

fn check_header(
    reader: &mut csv::Reader<std::fs::File>,
    expected: &[&str],
    path: &Path,
) -> Result<()> {
    let header = reader.headers()?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(Error::Format(format!(
            "{}: header must be `{}`, found `{}`",
            path.display(),
            expected.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    Ok(())
}

fn parse_field(field: Option<&str>, row: usize, path: &Path) -> Result<f64> {
    let text =
        field.ok_or_else(|| Error::Format(format!("{}: row {row} is short", path.display())))?;
    let v: f64 = text.parse().map_err(|_| {
        Error::Format(format!(
            "{}: row {row}: `{text}` is not a number",
            path.display()
        ))
    })?;
    if !v.is_finite() {
        return Err(Error::Format(format!(
            "{}: row {row}: non-finite value",
            path.display()
        )));
    }
    Ok(v)
}

/// Frame rate from timestamps: reciprocal of the median interval. Intervals
/// must be positive and within [`MAX_TIME_JITTER`] of the median.
pub fn infer_fps(times: &[f64]) -> Result<f64> {
    if times.len() < 2 {
        return Err(Error::Format(
            "need at least two rows to infer the frame rate".into(),
        ));
    }
    let mut deltas: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    if let Some(i) = deltas.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::Format(format!(
            "timestamps are not increasing at row {}",
            i + 1
        )));
    }
    let original = deltas.clone();
    deltas.sort_by(f64::total_cmp);
    let mid = deltas.len() / 2;
    let median = if deltas.len().is_multiple_of(2) {
        0.5 * (deltas[mid - 1] + deltas[mid])
    } else {
        deltas[mid]
    };
    if let Some(i) = original
        .iter()
        .position(|d| (d - median).abs() > MAX_TIME_JITTER * median)
    {
        return Err(Error::Format(format!(
            "sample interval at row {} deviates more than 1% from the median {median}",
            i + 1
        )));
    }
    Ok(1.0 / median)
}

pub fn read_trace_csv(path: impl AsRef<Path>) -> Result<ChannelTrace> {
    let path = path.as_ref();
    let mut reader = open_reader(path)?;
    check_header(&mut reader, &["t", "r", "g", "b"], path)?;
    let mut t = Vec::new();
    let mut rgb = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        t.push(parse_field(record.get(0), row, path)?);
        rgb.push([
            parse_field(record.get(1), row, path)?,
            parse_field(record.get(2), row, path)?,
            parse_field(record.get(3), row, path)?,
        ]);
    }
    let fps = infer_fps(&t).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let origin = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    ChannelTrace::from_rgb(&rgb, fps, origin)
}

pub fn write_trace_csv(trace: &ChannelTrace, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    write_atomic(path, |w| {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "r", "g", "b"])?;
        for i in 0..trace.len() {
            let t = i as f64 / trace.fps();
            out.write_record([
                t.to_string(),
                trace.red()[i].to_string(),
                trace.green()[i].to_string(),
                trace.blue()[i].to_string(),
            ])?;
        }
        out.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    })
}

pub fn read_ppg_csv(path: impl AsRef<Path>, sample_rate_hz: f64) -> Result<GroundTruthPpg> {
    let path = path.as_ref();
    let mut reader = open_reader(path)?;
    check_header(&mut reader, &["ppg"], path)?;
    let samples = reader
        .records()
        .enumerate()
        .map(|(row, record)| parse_field(record?.get(0), row, path))
        .collect::<Result<Vec<_>>>()?;
    GroundTruthPpg::new(samples, sample_rate_hz)
}

pub fn write_ppg_csv(ppg: &GroundTruthPpg, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    write_atomic(path, |w| {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["ppg"])?;
        for v in &ppg.samples {
            out.write_record([v.to_string()])?;
        }
        out.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    })
}
