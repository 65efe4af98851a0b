//! Channel traces and the time-domain preprocessing shared by all estimators.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Channel standard deviations below this are treated as carrying no signal.
pub const DEGENERATE_STD: f64 = 1e-12;

const CHANNEL_NAMES: [&str; 3] = ["red", "green", "blue"];

/// Per-frame spatial means of the three colour channels, in `[0, 1]` units.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTrace {
    r: Vec<f64>,
    g: Vec<f64>,
    b: Vec<f64>,
    fps: f64,
    origin_id: String,
}

impl ChannelTrace {
    pub fn new(
        r: Vec<f64>,
        g: Vec<f64>,
        b: Vec<f64>,
        fps: f64,
        origin_id: impl Into<String>,
    ) -> Result<Self> {
        if r.is_empty() || r.len() != g.len() || r.len() != b.len() {
            return Err(Error::InvalidParameter(format!(
                "channel lengths must be equal and nonzero (r={}, g={}, b={})",
                r.len(),
                g.len(),
                b.len()
            )));
        }
        if !(fps.is_finite() && fps > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "fps must be > 0, got {fps}"
            )));
        }
        if let Some(i) = r.iter().chain(&g).chain(&b).position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite sample at flat index {i}"
            )));
        }
        Ok(Self {
            r,
            g,
            b,
            fps,
            origin_id: origin_id.into(),
        })
    }

    /// Builds a trace from per-frame `[r, g, b]` triples.
    pub fn from_rgb(samples: &[[f64; 3]], fps: f64, origin_id: impl Into<String>) -> Result<Self> {
        let r = samples.iter().map(|s| s[0]).collect();
        let g = samples.iter().map(|s| s[1]).collect();
        let b = samples.iter().map(|s| s[2]).collect();
        Self::new(r, g, b, fps, origin_id)
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / self.fps
    }

    pub fn origin_id(&self) -> &str {
        &self.origin_id
    }

    pub fn with_origin_id(mut self, origin_id: impl Into<String>) -> Self {
        self.origin_id = origin_id.into();
        self
    }

    /// Reinterprets the samples at a different frame rate.
    pub fn with_fps(mut self, fps: f64) -> Result<Self> {
        if !(fps.is_finite() && fps > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "fps must be > 0, got {fps}"
            )));
        }
        self.fps = fps;
        Ok(self)
    }

    pub fn red(&self) -> &[f64] {
        &self.r
    }

    pub fn green(&self) -> &[f64] {
        &self.g
    }

    pub fn blue(&self) -> &[f64] {
        &self.b
    }

    pub fn channels(&self) -> [&[f64]; 3] {
        [&self.r, &self.g, &self.b]
    }

    /// Slices the three channels to a window. Panics if the view does not fit.
    pub fn window(&self, view: &WindowView) -> [&[f64]; 3] {
        let range = view.start_index..view.start_index + view.length;
        [
            &self.r[range.clone()],
            &self.g[range.clone()],
            &self.b[range],
        ]
    }
}

/// A contiguous slice of a trace used by the sliding-window pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowView {
    pub start_index: usize,
    pub length: usize,
    pub step_seconds: f64,
}

impl WindowView {
    pub fn start_seconds(&self, fps: f64) -> f64 {
        self.start_index as f64 / fps
    }
}

/// Three zero-mean, unit-variance channels. Channels flagged as degenerate
/// had no variance and are stored as zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedWindow {
    pub channels: [Vec<f64>; 3],
    pub degenerate: [bool; 3],
    pub fps: f64,
}

impl NormalizedWindow {
    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels[0].is_empty()
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate.iter().any(|&d| d)
    }
}

/// Rectangular region of interest in pixel coordinates, top-left origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Roi {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl Roi {
    pub fn full(width: usize, height: usize) -> Self {
        Self {
            x: 0,
            y: 0,
            width,
            height,
        }
    }

    pub fn area(&self) -> usize {
        self.width * self.height
    }

    pub fn check_within(&self, width: usize, height: usize) -> Result<()> {
        if self.area() == 0 {
            return Err(Error::InvalidRoi(format!(
                "{}x{} roi has no pixels",
                self.width, self.height
            )));
        }
        if self.x + self.width > width || self.y + self.height > height {
            return Err(Error::InvalidRoi(format!(
                "roi {}x{}+{}+{} exceeds {width}x{height} frame",
                self.width, self.height, self.x, self.y
            )));
        }
        Ok(())
    }
}

/// Either the whole frame or a fixed rectangle. Serialized as `"full"` or as
/// an `{x, y, width, height}` object.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RoiSelection {
    #[default]
    Full,
    Rect(Roi),
}

impl RoiSelection {
    pub fn resolve(&self, width: usize, height: usize) -> Result<Roi> {
        let roi = match *self {
            RoiSelection::Full => Roi::full(width, height),
            RoiSelection::Rect(roi) => roi,
        };
        roi.check_within(width, height)?;
        Ok(roi)
    }
}

impl std::str::FromStr for RoiSelection {
    type Err = Error;

    /// Parses `full` or `x,y,width,height`.
    fn from_str(s: &str) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case("full") {
            return Ok(RoiSelection::Full);
        }
        let parts = s
            .split(',')
            .map(|p| p.trim().parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::InvalidRoi(format!("`{s}`: {e}")))?;
        match parts[..] {
            [x, y, width, height] => Ok(RoiSelection::Rect(Roi {
                x,
                y,
                width,
                height,
            })),
            _ => Err(Error::InvalidRoi(format!(
                "`{s}`: expected `full` or `x,y,width,height`"
            ))),
        }
    }
}

impl fmt::Display for RoiSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RoiSelection::Full => f.write_str("full"),
            RoiSelection::Rect(r) => write!(f, "{},{},{},{}", r.x, r.y, r.width, r.height),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RoiRepr {
    Tag(String),
    Rect(Roi),
}

impl Serialize for RoiSelection {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            RoiSelection::Full => RoiRepr::Tag("full".into()),
            RoiSelection::Rect(roi) => RoiRepr::Rect(roi),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for RoiSelection {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        match RoiRepr::deserialize(deserializer)? {
            RoiRepr::Tag(tag) if tag == "full" => Ok(RoiSelection::Full),
            RoiRepr::Tag(tag) => Err(serde::de::Error::custom(format!(
                "unknown roi `{tag}`, expected \"full\" or an object"
            ))),
            RoiRepr::Rect(roi) => Ok(RoiSelection::Rect(roi)),
        }
    }
}

/// Anything that can be sampled as RGB pixels in `[0, 1]`.
pub trait Raster {
    fn width(&self) -> usize;
    fn height(&self) -> usize;
    fn pixel(&self, x: usize, y: usize) -> [f64; 3];
}

/// Interleaved 8-bit RGB frame, row-major, top-left origin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbFrame {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl RgbFrame {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height * 3 {
            return Err(Error::InvalidParameter(format!(
                "{width}x{height} frame needs {} bytes, got {}",
                width * height * 3,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }
}

impl Raster for RgbFrame {
    fn width(&self) -> usize {
        self.width
    }

    fn height(&self) -> usize {
        self.height
    }

    fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        let i = (y * self.width + x) * 3;
        let p = &self.data[i..i + 3];
        [
            p[0] as f64 / 255.0,
            p[1] as f64 / 255.0,
            p[2] as f64 / 255.0,
        ]
    }
}

/// Floating-point RGB raster, mainly for synthetic inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatRaster {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[f64; 3]>,
}

impl FloatRaster {
    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> [f64; 3]) -> Self {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            pixels,
        }
    }
}

impl Raster for FloatRaster {
    fn width(&self) -> usize {
        self.width
    }

    fn height(&self) -> usize {
        self.height
    }

    fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        self.pixels[y * self.width + x]
    }
}

/// Per-channel arithmetic mean of the pixels inside `roi`.
pub fn spatial_mean<R: Raster + ?Sized>(frame: &R, roi: &Roi) -> Result<[f64; 3]> {
    roi.check_within(frame.width(), frame.height())?;
    let mut acc = [0.0f64; 3];
    for y in roi.y..roi.y + roi.height {
        for x in roi.x..roi.x + roi.width {
            let p = frame.pixel(x, y);
            acc[0] += p[0];
            acc[1] += p[1];
            acc[2] += p[2];
        }
    }
    let n = roi.area() as f64;
    Ok(acc.map(|s| s / n))
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample standard deviation (denominator `n - 1`).
pub fn sample_std(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    let ss: f64 = x.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (x.len() - 1) as f64).sqrt()
}

/// Z-scores a single sequence; `None` when its standard deviation is
/// below [`DEGENERATE_STD`].
pub fn zscore(x: &[f64]) -> Option<Vec<f64>> {
    let m = mean(x);
    let s = sample_std(x);
    if s.is_nan() || s < DEGENERATE_STD {
        return None;
    }
    Some(x.iter().map(|v| (v - m) / s).collect())
}

/// Z-scores each channel, flagging (and zero-filling) degenerate channels
/// instead of failing.
pub fn zscore_normalize_partial(window: [&[f64]; 3], fps: f64) -> Result<NormalizedWindow> {
    check_window_lengths(window, 2)?;
    let mut degenerate = [false; 3];
    let channels: [Vec<f64>; 3] = std::array::from_fn(|c| match zscore(window[c]) {
        Some(z) => z,
        None => {
            degenerate[c] = true;
            vec![0.0; window[c].len()]
        }
    });
    Ok(NormalizedWindow {
        channels,
        degenerate,
        fps,
    })
}

/// Z-scores each channel to zero mean and unit sample standard deviation.
pub fn zscore_normalize(window: [&[f64]; 3], fps: f64) -> Result<NormalizedWindow> {
    let normalized = zscore_normalize_partial(window, fps)?;
    if let Some(c) = normalized.degenerate.iter().position(|&d| d) {
        return Err(Error::degenerate(CHANNEL_NAMES[c], "zero variance"));
    }
    Ok(normalized)
}

/// Divides each channel by its temporal mean and subtracts one.
pub fn temporal_mean_normalize(window: [&[f64]; 3]) -> Result<[Vec<f64>; 3]> {
    check_window_lengths(window, 1)?;
    let means = window.map(mean);
    if let Some(c) = means.iter().position(|m| !(m.abs() > DEGENERATE_STD)) {
        return Err(Error::degenerate(CHANNEL_NAMES[c], "mean is zero"));
    }
    Ok(std::array::from_fn(|c| {
        window[c].iter().map(|v| v / means[c] - 1.0).collect()
    }))
}

fn check_window_lengths(window: [&[f64]; 3], min_len: usize) -> Result<()> {
    let n = window[0].len();
    if window.iter().any(|c| c.len() != n) {
        return Err(Error::InvalidParameter("channel lengths differ".into()));
    }
    if n < min_len {
        return Err(Error::SignalTooShort {
            len: n,
            required: min_len - 1,
        });
    }
    Ok(())
}

/// Window length and step in samples: `round(seconds * fps)`, step at least 1.
pub fn window_samples(fps: f64, window_seconds: f64, step_seconds: f64) -> (usize, usize) {
    let len = (window_seconds * fps).round() as usize;
    let step = ((step_seconds * fps).round() as usize).max(1);
    (len, step)
}

/// Window views starting at 0, step, 2*step, ... while the window fits.
pub fn sliding_windows(
    trace_len: usize,
    fps: f64,
    window_seconds: f64,
    step_seconds: f64,
) -> Result<Vec<WindowView>> {
    if !(fps > 0.0 && window_seconds > 0.0 && step_seconds > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "fps ({fps}), window ({window_seconds} s) and step ({step_seconds} s) must be > 0"
        )));
    }
    let (length, step) = window_samples(fps, window_seconds, step_seconds);
    if length < 2 {
        return Err(Error::InvalidParameter(format!(
            "window of {window_seconds} s at {fps} fps is shorter than 2 samples"
        )));
    }
    if trace_len < length {
        return Ok(Vec::new());
    }
    Ok((0..=trace_len - length)
        .step_by(step)
        .map(|start_index| WindowView {
            start_index,
            length,
            step_seconds,
        })
        .collect())
}

/// Removes the least-squares linear trend.
pub fn detrend(signal: &[f64]) -> Vec<f64> {
    let n = signal.len();
    if n < 2 {
        return vec![0.0; n];
    }
    // centred abscissa keeps the normal equations well conditioned
    let tc = (n - 1) as f64 / 2.0;
    let m = mean(signal);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (i, &v) in signal.iter().enumerate() {
        let t = i as f64 - tc;
        sxy += t * (v - m);
        sxx += t * t;
    }
    let slope = sxy / sxx;
    signal
        .iter()
        .enumerate()
        .map(|(i, &v)| v - m - slope * (i as f64 - tc))
        .collect()
}
