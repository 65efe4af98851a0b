//! Hand-crafted remote photoplethysmography (rPPG) heart-rate estimation.
//!
//! The crate turns per-frame RGB channel means of a face region into a pulse
//! signal with one of four classic estimators (GREEN, ICA, CHROM, POS), reads
//! heart rate off the band-limited magnitude spectrum, and evaluates the
//! estimators against contact-PPG ground truth with sliding windows.
//!
//! Module map:
//!
//! * [`trace`] - channel traces, ROI averaging, normalization, windowing.
//! * [`spectral`] - magnitude spectrum, peak picking, SNR, FIR band-pass.
//! * [`methods`] - the four estimators and the shared HR readout.
//! * [`ingest`] - manifests, the raw video container, CSV traces and PPG.
//! * [`synth`] - seeded synthetic traces, PPG and rendered videos.
//! * [`bench`] - per-window evaluation, MAE/RMSE aggregation and reports.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod error;
pub mod ingest;
pub mod methods;
pub mod spectral;
pub mod synth;
pub mod trace;

pub use bench::{BenchConfig, BenchReport, HrSeries};
pub use error::{Error, Result};
pub use methods::{Method, PulseSignal};
pub use spectral::{FrequencyBand, Spectrum};
pub use trace::{ChannelTrace, NormalizedWindow, Roi, WindowView};
