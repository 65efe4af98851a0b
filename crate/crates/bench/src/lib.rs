//! Fixtures shared by the pipeline benchmarks.

use rppg::synth::{synth_trace, SynthOutput, SynthSpec};

/// A minute of synthetic face trace at 20 fps.
pub fn minute_recording(hr_bpm: f64, seed: u64) -> SynthOutput {
    synth_trace(&SynthSpec::default().with_hr(hr_bpm).with_seed(seed)).expect("valid synth spec")
}
