//! Frequency-domain machinery: magnitude spectra, band-limited peak picking,
//! in-band SNR and a zero-phase windowed-sinc band-pass filter.

use std::cell::RefCell;
use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// FIR length at the reference rate of 20 fps; scaled proportionally with fps.
pub const FIR_TAPS_AT_20_FPS: usize = 127;

/// Half-width of the SNR signal region around the peak and its harmonic.
pub const DEFAULT_GUARD_HZ: f64 = 0.1;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Frequency range of plausible heart rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyBand {
    pub low_hz: f64,
    pub high_hz: f64,
}

impl FrequencyBand {
    /// 0.7 - 4.0 Hz, i.e. 42 - 240 bpm.
    pub const PHYSIOLOGICAL: FrequencyBand = FrequencyBand {
        low_hz: 0.7,
        high_hz: 4.0,
    };

    pub fn new(low_hz: f64, high_hz: f64) -> Result<Self> {
        if !(low_hz > 0.0 && low_hz < high_hz && high_hz.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "band must satisfy 0 < low < high, got [{low_hz}, {high_hz}]"
            )));
        }
        Ok(Self { low_hz, high_hz })
    }

    /// Checks the band against the Nyquist limit of `fps`.
    pub fn check_rate(&self, fps: f64) -> Result<()> {
        if self.high_hz >= fps / 2.0 {
            return Err(Error::InvalidParameter(format!(
                "band upper edge {} Hz is not below Nyquist ({} Hz)",
                self.high_hz,
                fps / 2.0
            )));
        }
        Ok(())
    }

    pub fn contains(&self, hz: f64) -> bool {
        hz >= self.low_hz && hz <= self.high_hz
    }

    pub fn low_bpm(&self) -> f64 {
        self.low_hz * 60.0
    }

    pub fn high_bpm(&self) -> f64 {
        self.high_hz * 60.0
    }
}

impl Default for FrequencyBand {
    fn default() -> Self {
        Self::PHYSIOLOGICAL
    }
}

/// One-sided magnitude spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub magnitudes: Vec<f64>,
    pub bin_hz: f64,
    pub fps: f64,
}

impl Spectrum {
    pub fn n_fft(&self) -> usize {
        (self.fps / self.bin_hz).round() as usize
    }

    pub fn frequency(&self, bin: usize) -> f64 {
        bin as f64 * self.bin_hz
    }

    /// Inclusive bin index range whose centre frequencies lie inside `band`.
    pub fn band_bins(&self, band: &FrequencyBand) -> std::ops::RangeInclusive<usize> {
        let lo = (band.low_hz / self.bin_hz).ceil().max(0.0) as usize;
        let hi = ((band.high_hz / self.bin_hz).floor() as usize).min(self.magnitudes.len() - 1);
        lo..=hi
    }
}

/// Zero-padded FFT length used by the HR readout: next power of two at
/// least four times the window length.
pub fn default_fft_len(n: usize) -> usize {
    (4 * n.max(1)).next_power_of_two()
}

/// Symmetric Hann window.
pub fn hann(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    let denom = (n - 1) as f64;
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / denom).cos())
        .collect()
}

/// Symmetric Hamming window.
pub fn hamming(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    let denom = (n - 1) as f64;
    (0..n)
        .map(|i| 0.54 - 0.46 * (2.0 * PI * i as f64 / denom).cos())
        .collect()
}

/// Magnitude spectrum of the mean-removed, Hann-windowed signal zero-padded
/// to `zero_pad_to` points.
pub fn magnitude_spectrum(signal: &[f64], fps: f64, zero_pad_to: usize) -> Result<Spectrum> {
    let n = signal.len();
    if n < 2 {
        return Err(Error::SignalTooShort {
            len: n,
            required: 1,
        });
    }
    if zero_pad_to < n {
        return Err(Error::InvalidParameter(format!(
            "zero_pad_to ({zero_pad_to}) is shorter than the signal ({n})"
        )));
    }
    if !(fps > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "fps must be > 0, got {fps}"
        )));
    }
    let mean = signal.iter().sum::<f64>() / n as f64;
    let window = hann(n);
    let mut buf: Vec<Complex<f64>> = signal
        .iter()
        .zip(&window)
        .map(|(&x, &w)| Complex::new((x - mean) * w, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(zero_pad_to)
        .collect();
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(zero_pad_to));
    fft.process(&mut buf);
    let magnitudes = buf[..zero_pad_to / 2 + 1]
        .iter()
        .map(|c| c.norm())
        .collect();
    Ok(Spectrum {
        magnitudes,
        bin_hz: fps / zero_pad_to as f64,
        fps,
    })
}

/// Index of the largest in-band magnitude; the lowest frequency wins ties.
pub fn band_argmax(spectrum: &Spectrum, band: &FrequencyBand) -> Result<usize> {
    let bins = spectrum.band_bins(band);
    let count = bins.clone().count();
    if count < 3 {
        return Err(Error::BandTooNarrow { bins: count });
    }
    let mut best = *bins.start();
    for k in bins {
        if spectrum.magnitudes[k] > spectrum.magnitudes[best] {
            best = k;
        }
    }
    Ok(best)
}

/// Frequency of the largest in-band peak, refined by a parabola through the
/// peak bin and its two neighbours and clamped to the band.
pub fn band_peak_hz(spectrum: &Spectrum, band: &FrequencyBand) -> Result<f64> {
    let k = band_argmax(spectrum, band)?;
    let m = &spectrum.magnitudes;
    let mut offset = 0.0;
    if k > 0 && k + 1 < m.len() {
        let (a, b, c) = (m[k - 1], m[k], m[k + 1]);
        let denom = a - 2.0 * b + c;
        if denom < 0.0 {
            offset = (0.5 * (a - c) / denom).clamp(-0.5, 0.5);
        }
    }
    let hz = (k as f64 + offset) * spectrum.bin_hz;
    Ok(hz.clamp(band.low_hz, band.high_hz))
}

/// Outcome of [`band_snr`]. `residual_empty` marks the `+inf` sentinel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandSnr {
    pub db: f64,
    pub residual_empty: bool,
}

/// In-band signal-to-noise ratio in dB.
///
/// Signal bins lie within `guard_hz` of `peak_hz` or of `2 * peak_hz`; every
/// other in-band bin is noise. The ratio compares mean power per bin, so a
/// flat spectrum scores 0 dB regardless of how wide the guard is.
pub fn band_snr(
    spectrum: &Spectrum,
    band: &FrequencyBand,
    peak_hz: f64,
    guard_hz: f64,
) -> Result<BandSnr> {
    if !band.contains(peak_hz) {
        return Err(Error::InvalidParameter(format!(
            "peak {peak_hz} Hz lies outside [{}, {}] Hz",
            band.low_hz, band.high_hz
        )));
    }
    let (mut signal, mut n_signal) = (0.0, 0usize);
    let (mut noise, mut n_noise) = (0.0, 0usize);
    for k in spectrum.band_bins(band) {
        let f = spectrum.frequency(k);
        let p = spectrum.magnitudes[k] * spectrum.magnitudes[k];
        if (f - peak_hz).abs() <= guard_hz || (f - 2.0 * peak_hz).abs() <= guard_hz {
            signal += p;
            n_signal += 1;
        } else {
            noise += p;
            n_noise += 1;
        }
    }
    if n_noise == 0 || noise == 0.0 {
        return Ok(BandSnr {
            db: f64::INFINITY,
            residual_empty: true,
        });
    }
    if n_signal == 0 {
        return Ok(BandSnr {
            db: f64::NEG_INFINITY,
            residual_empty: false,
        });
    }
    let db = 10.0 * ((signal / n_signal as f64) / (noise / n_noise as f64)).log10();
    Ok(BandSnr {
        db,
        residual_empty: false,
    })
}

/// Odd tap count for the band-pass FIR at a given rate.
pub fn fir_taps_for(fps: f64) -> usize {
    let taps = (FIR_TAPS_AT_20_FPS as f64 * fps / 20.0).round() as usize;
    (taps | 1).max(3)
}

fn lowpass_taps(cutoff_hz: f64, fps: f64, window: &[f64]) -> Vec<f64> {
    let fc = cutoff_hz / fps;
    let centre = (window.len() - 1) as f64 / 2.0;
    let mut taps: Vec<f64> = window
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let x = i as f64 - centre;
            let sinc = if x == 0.0 {
                2.0 * fc
            } else {
                (2.0 * PI * fc * x).sin() / (PI * x)
            };
            sinc * w
        })
        .collect();
    let dc: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= dc);
    taps
}

/// Hamming-windowed sinc band-pass taps: difference of two unit-DC low-pass
/// designs, so the DC gain is zero.
pub fn design_bandpass(fps: f64, band: &FrequencyBand, taps: usize) -> Result<Vec<f64>> {
    band.check_rate(fps)?;
    if taps.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "FIR length must be odd, got {taps}"
        )));
    }
    let window = hamming(taps);
    let high = lowpass_taps(band.high_hz, fps, &window);
    let low = lowpass_taps(band.low_hz, fps, &window);
    Ok(high.iter().zip(&low).map(|(h, l)| h - l).collect())
}

// Same-length convolution with the filter centred on each output sample.
fn convolve_centred(x: &[f64], taps: &[f64]) -> Vec<f64> {
    let half = taps.len() / 2;
    let n = x.len();
    (0..n)
        .map(|i| {
            let mut acc = 0.0;
            for (j, t) in taps.iter().enumerate() {
                // x index = i + half - j
                let idx = i + half;
                if idx >= j && idx - j < n {
                    acc += t * x[idx - j];
                }
            }
            acc
        })
        .collect()
}

/// Zero-phase band-pass: linear-phase FIR applied forward and backward over a
/// mirror-padded copy of the signal.
pub fn bandpass_fir(signal: &[f64], fps: f64, band: &FrequencyBand) -> Result<Vec<f64>> {
    let taps = fir_taps_for(fps);
    if signal.len() <= taps {
        return Err(Error::SignalTooShort {
            len: signal.len(),
            required: taps,
        });
    }
    let h = design_bandpass(fps, band, taps)?;
    let pad = taps - 1;
    let n = signal.len();
    let mut padded = Vec::with_capacity(n + 2 * pad);
    padded.extend((1..=pad).rev().map(|i| signal[i]));
    padded.extend_from_slice(signal);
    padded.extend((1..=pad).map(|i| signal[n - 1 - i]));

    let forward = convolve_centred(&padded, &h);
    let mut reversed: Vec<f64> = forward.into_iter().rev().collect();
    reversed = convolve_centred(&reversed, &h);
    reversed.reverse();
    Ok(reversed[pad..pad + n].to_vec())
}
