//! The four hand-crafted pulse estimators and the shared heart-rate readout.
//!
//! Every estimator maps one analysis window of raw channel means to a
//! [`PulseSignal`]; [`hr_from_pulse`] then reads the heart rate off the
//! band-limited spectrum. GREEN and ICA run on detrended, z-scored channels;
//! CHROM and POS work on temporally mean-normalized channels. GREEN, ICA and
//! CHROM band-pass their output, POS does not.

pub mod ica;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use ica::{fastica_3ch, IcaResult};

use crate::error::{Error, Result};
use crate::spectral::{
    band_peak_hz, band_snr, bandpass_fir, default_fft_len, magnitude_spectrum, FrequencyBand,
    Spectrum, DEFAULT_GUARD_HZ,
};
use crate::trace::{
    detrend, sample_std, temporal_mean_normalize, zscore_normalize_partial, NormalizedWindow,
    DEGENERATE_STD,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Method {
    Green,
    Ica,
    Chrom,
    Pos,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Green, Method::Ica, Method::Chrom, Method::Pos];

    /// Short lowercase name used on the command line.
    pub fn cli_name(&self) -> &'static str {
        match self {
            Method::Green => "green",
            Method::Ica => "ica",
            Method::Chrom => "chrom",
            Method::Pos => "pos",
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Method::Green => "GREEN",
            Method::Ica => "ICA",
            Method::Chrom => "CHROM",
            Method::Pos => "POS",
        }
    }

    /// Runs the full per-window pipeline on raw channel means.
    pub fn pulse(&self, raw: [&[f64]; 3], fps: f64, band: &FrequencyBand) -> Result<PulseSignal> {
        match self {
            Method::Green => green_pulse(&detrend_normalize(raw, fps)?, band),
            Method::Ica => ica_pulse(&detrend_normalize(raw, fps)?, band),
            Method::Chrom => chrom_pulse(raw, fps, band),
            Method::Pos => pos_pulse(raw, fps),
        }
    }

    /// Pulse extraction followed by [`hr_from_pulse`].
    pub fn estimate_hr(&self, raw: [&[f64]; 3], fps: f64, band: &FrequencyBand) -> Result<f64> {
        hr_from_pulse(&self.pulse(raw, fps, band)?, band)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        Method::ALL
            .into_iter()
            .find(|m| m.cli_name() == lower || m.label().eq_ignore_ascii_case(&lower))
            .ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "unknown method `{s}`, expected one of: green, ica, chrom, pos"
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PulseSignal {
    pub samples: Vec<f64>,
    pub fps: f64,
    pub method: Method,
}

impl PulseSignal {
    /// Spectrum used by the HR readout.
    pub fn spectrum(&self) -> Result<Spectrum> {
        magnitude_spectrum(&self.samples, self.fps, default_fft_len(self.samples.len()))
    }
}

/// Detrends each channel and z-scores it. Zero-variance channels are flagged
/// rather than rejected so that GREEN can ignore a flat red or blue channel.
pub fn detrend_normalize(raw: [&[f64]; 3], fps: f64) -> Result<NormalizedWindow> {
    let detrended = raw.map(detrend);
    zscore_normalize_partial([&detrended[0], &detrended[1], &detrended[2]], fps)
}

pub fn green_pulse(window: &NormalizedWindow, band: &FrequencyBand) -> Result<PulseSignal> {
    if window.degenerate[1] {
        return Err(Error::degenerate("green", "zero variance"));
    }
    Ok(PulseSignal {
        samples: bandpass_fir(&window.channels[1], window.fps, band)?,
        fps: window.fps,
        method: Method::Green,
    })
}

fn skewness(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let m2 = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
    let m3 = x.iter().map(|v| (v - m).powi(3)).sum::<f64>() / n;
    if m2 <= 0.0 {
        0.0
    } else {
        m3 / m2.powf(1.5)
    }
}

/// Index of the component with the highest in-band SNR; lowest index on ties.
pub fn select_component(ica: &IcaResult, fps: f64, band: &FrequencyBand) -> Result<usize> {
    let mut best = (0, f64::NEG_INFINITY);
    for (k, comp) in ica.components.iter().enumerate() {
        let spectrum = magnitude_spectrum(comp, fps, default_fft_len(comp.len()))?;
        let peak = band_peak_hz(&spectrum, band)?;
        let snr = band_snr(&spectrum, band, peak, DEFAULT_GUARD_HZ)?.db;
        if snr > best.1 {
            best = (k, snr);
        }
    }
    Ok(best.0)
}

/// Flips `x` so it has positive skewness. Near-symmetric signals instead
/// get a non-negative cosine projection at their dominant in-band frequency.
fn sign_normalize(mut x: Vec<f64>, fps: f64, band: &FrequencyBand) -> Result<Vec<f64>> {
    let skew = skewness(&x);
    let flip = if skew.abs() >= 1e-6 {
        skew < 0.0
    } else {
        let spectrum = magnitude_spectrum(&x, fps, default_fft_len(x.len()))?;
        let f = band_peak_hz(&spectrum, band)?;
        let w = 2.0 * std::f64::consts::PI * f / fps;
        let re: f64 = x
            .iter()
            .enumerate()
            .map(|(t, v)| v * (w * t as f64).cos())
            .sum();
        re < 0.0
    };
    if flip {
        x.iter_mut().for_each(|v| *v = -*v);
    }
    Ok(x)
}

pub fn ica_pulse(window: &NormalizedWindow, band: &FrequencyBand) -> Result<PulseSignal> {
    if let Some(c) = window.degenerate.iter().position(|&d| d) {
        return Err(Error::degenerate(
            ["red", "green", "blue"][c],
            "zero variance",
        ));
    }
    let ica = fastica_3ch(window, ica::DEFAULT_MAX_ITER, ica::DEFAULT_TOL)?;
    let k = select_component(&ica, window.fps, band)?;
    let filtered = bandpass_fir(&ica.components[k], window.fps, band)?;
    Ok(PulseSignal {
        samples: sign_normalize(filtered, window.fps, band)?,
        fps: window.fps,
        method: Method::Ica,
    })
}

fn all_flat(channels: &[Vec<f64>; 3]) -> bool {
    channels.iter().all(|c| sample_std(c) < DEGENERATE_STD)
}

/// Chrominance signal `X - alpha * Y` before band-pass filtering.
pub fn chrom_projection(raw: [&[f64]; 3]) -> Result<Vec<f64>> {
    let [rn, gn, bn] = temporal_mean_normalize(raw)?;
    let x: Vec<f64> = rn.iter().zip(&gn).map(|(r, g)| 3.0 * r - 2.0 * g).collect();
    let y: Vec<f64> = rn
        .iter()
        .zip(&gn)
        .zip(&bn)
        .map(|((r, g), b)| 1.5 * r + g - 1.5 * b)
        .collect();
    let std_y = sample_std(&y);
    if std_y < DEGENERATE_STD {
        return Err(Error::degenerate("chrominance Y", "zero variance"));
    }
    let alpha = sample_std(&x) / std_y;
    Ok(x.iter().zip(&y).map(|(x, y)| x - alpha * y).collect())
}

pub fn chrom_pulse(raw: [&[f64]; 3], fps: f64, band: &FrequencyBand) -> Result<PulseSignal> {
    let projected = chrom_projection(raw)?;
    Ok(PulseSignal {
        samples: bandpass_fir(&projected, fps, band)?,
        fps,
        method: Method::Chrom,
    })
}

/// Plane-orthogonal-to-skin projection over the whole window; no band-pass.
///
/// Inputs whose three normalized channels coincide are projected to an
/// all-zero pulse. Flat input channels, or an `S2` that vanishes while `S1`
/// does not, are degenerate.
pub fn pos_pulse(raw: [&[f64]; 3], fps: f64) -> Result<PulseSignal> {
    let normalized = temporal_mean_normalize(raw)?;
    if all_flat(&normalized) {
        return Err(Error::degenerate("rgb", "all channels are constant"));
    }
    let [rn, gn, bn] = &normalized;
    let s1: Vec<f64> = gn.iter().zip(bn).map(|(g, b)| g - b).collect();
    let s2: Vec<f64> = gn
        .iter()
        .zip(bn)
        .zip(rn)
        .map(|((g, b), r)| g + b - 2.0 * r)
        .collect();
    let (std1, std2) = (sample_std(&s1), sample_std(&s2));
    let alpha = if std2 >= DEGENERATE_STD {
        std1 / std2
    } else if std1 < DEGENERATE_STD {
        // pure intensity change: both projections annihilate it
        0.0
    } else {
        return Err(Error::degenerate("projection S2", "zero variance"));
    };
    let mut pulse: Vec<f64> = s1.iter().zip(&s2).map(|(a, b)| a + alpha * b).collect();
    let m = pulse.iter().sum::<f64>() / pulse.len() as f64;
    pulse.iter_mut().for_each(|v| *v -= m);
    Ok(PulseSignal {
        samples: pulse,
        fps,
        method: Method::Pos,
    })
}

/// Heart rate in bpm: 60 times the refined in-band spectral peak.
pub fn hr_from_pulse(pulse: &PulseSignal, band: &FrequencyBand) -> Result<f64> {
    let min_len = (2.0 * pulse.fps).ceil() as usize;
    if pulse.samples.len() < min_len {
        return Err(Error::SignalTooShort {
            len: pulse.samples.len(),
            required: min_len - 1,
        });
    }
    let spectrum = pulse.spectrum()?;
    let bins = spectrum.band_bins(band);
    if spectrum.magnitudes[bins].iter().all(|&m| m == 0.0) {
        return Err(Error::degenerate(
            pulse.method.label(),
            "pulse has no in-band energy",
        ));
    }
    Ok(60.0 * band_peak_hz(&spectrum, band)?)
}
