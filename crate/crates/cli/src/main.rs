use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use rppg::bench::{emit_report, estimate_series, parse_report_json, run_benchmark, ReportFormat};
use rppg::ingest::{
    is_raw_video, read_manifest, read_raw_video, read_trace_csv, video_to_trace, write_atomic,
};
use rppg::synth::{
    write_dataset, Flicker, FlickerKind, HeartRate, RecordingOptions, RenderLayout, SynthSpec,
    DEFAULT_STRENGTH, PULSE_WEIGHTS,
};
use rppg::trace::{sliding_windows, RoiSelection};
use rppg::{BenchConfig, ChannelTrace, Error, FrequencyBand, Method};

/// Remote photoplethysmography: heart rate from facial colour traces.
#[derive(Debug, Parser)]
#[command(name = "rppg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate heart rate per sliding window from a trace CSV or raw video.
    Estimate(EstimateArgs),
    /// Evaluate methods over a dataset manifest against its contact PPG.
    Bench(BenchArgs),
    /// Generate a synthetic dataset with known heart rate.
    Synth(SynthArgs),
    /// Re-emit a saved JSON report in another format.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct BandArgs {
    /// Lower edge of the heart-rate band in Hz.
    #[arg(long, default_value_t = 0.7)]
    band_low: f64,
    /// Upper edge of the heart-rate band in Hz.
    #[arg(long, default_value_t = 4.0)]
    band_high: f64,
}

impl BandArgs {
    fn band(&self) -> Result<FrequencyBand, Usage> {
        FrequencyBand::new(self.band_low, self.band_high).map_err(|e| Usage(e.to_string()))
    }
}

#[derive(Debug, Args)]
struct EstimateArgs {
    /// green, ica, chrom or pos.
    #[arg(long)]
    method: Method,
    /// Trace CSV (`t,r,g,b`) or RPPGRAW1 video.
    #[arg(long)]
    input: PathBuf,
    /// Region for video input: `full` or `x,y,width,height`.
    #[arg(long, default_value = "full")]
    roi: RoiSelection,
    /// Replace the frame rate read from the input.
    #[arg(long)]
    fps_override: Option<f64>,
    /// Window length in seconds.
    #[arg(long, default_value_t = 30.0)]
    window: f64,
    /// Window step in seconds.
    #[arg(long, default_value_t = 1.0)]
    step: f64,
    #[command(flatten)]
    band: BandArgs,
    /// Output CSV (`t,hr_bpm`); standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the in-band pulse spectrum of every window as CSV.
    #[arg(long)]
    dump_spectrum: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Comma-separated methods.
    #[arg(long, value_delimiter = ',', default_value = "green,ica,chrom,pos")]
    methods: Vec<Method>,
    /// Comma-separated window lengths in seconds.
    #[arg(long, value_delimiter = ',', default_value = "60,30,15")]
    windows: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    step: f64,
    #[command(flatten)]
    band: BandArgs,
    /// Evaluate every entry even if the manifest declares a subject split.
    #[arg(long)]
    all_entries: bool,
    /// csv, markdown or json.
    #[arg(long, default_value = "markdown")]
    format: ReportFormat,
    /// Report file; only the table is printed when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Heart rate in bpm, or a linear ramp `start:end`.
    #[arg(long, default_value = "72")]
    hr: String,
    #[arg(long, default_value_t = 60.0)]
    duration: f64,
    #[arg(long, default_value_t = 20.0)]
    fps: f64,
    /// `none`, `sin:<hz>` or `walk:<step>`.
    #[arg(long, default_value = "none")]
    flicker: String,
    /// Relative flicker amplitude; defaults to five times the green pulse amplitude.
    #[arg(long)]
    flicker_amp: Option<f64>,
    /// Standard deviation of additive sensor noise.
    #[arg(long, default_value_t = 0.001)]
    noise: f64,
    /// Pulse strength scaling the per-channel weights.
    #[arg(long, default_value_t = DEFAULT_STRENGTH)]
    strength: f64,
    /// Also render an RPPGRAW1 video of this size, e.g. `64x48`.
    #[arg(long)]
    render: Option<String>,
    /// Render a face box over a flickering background instead of a uniform frame.
    #[arg(long)]
    face_box: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of recordings; recording `i` uses seed `seed + i`.
    #[arg(long, default_value_t = 1)]
    count: usize,
    /// File name prefix.
    #[arg(long, default_value = "synth")]
    name: String,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// JSON report written by `bench --format json`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "markdown")]
    format: ReportFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A usage error discovered after argument parsing.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let result = match cli.command {
        Command::Estimate(args) => estimate(args),
        Command::Bench(args) => bench(args),
        Command::Synth(args) => synth(args),
        Command::Report(args) => report(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", error_chain(&e));
            let usage = e.downcast_ref::<Usage>().is_some()
                || matches!(e.downcast_ref::<Error>(), Some(Error::Spec(_)));
            ExitCode::from(if usage { 2 } else { 1 })
        }
    }
}

// Messages that already embed their cause are not repeated.
fn error_chain(e: &anyhow::Error) -> String {
    let mut out = String::new();
    let mut prev = String::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if !prev.contains(&msg) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&msg);
        }
        prev = msg;
    }
    out
}

fn configure_threads() -> Result<(), Usage> {
    let Ok(value) = std::env::var("RPPG_THREADS") else {
        return Ok(());
    };
    let threads: usize = value.parse().ok().filter(|n| *n > 0).ok_or_else(|| {
        Usage(format!(
            "RPPG_THREADS must be a positive integer, got `{value}`"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Usage(e.to_string()))
}

fn check_positive(name: &str, v: f64) -> Result<(), Usage> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Usage(format!("--{name} must be > 0, got {v}")))
    }
}

fn write_output(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => write_atomic(path, |w| {
            w.write_all(text.as_bytes()).map_err(|e| Error::Io {
                path: path.to_path_buf(),
                source: e,
            })
        })
        .with_context(|| format!("writing {}", path.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn load_trace(args: &EstimateArgs) -> anyhow::Result<ChannelTrace> {
    let trace = if is_raw_video(&args.input)? {
        video_to_trace(read_raw_video(&args.input)?, &args.roi)?
    } else {
        if args.roi != RoiSelection::Full {
            bail!(Usage("--roi applies to video input only".into()));
        }
        read_trace_csv(&args.input)?
    };
    Ok(match args.fps_override {
        Some(fps) => trace.with_fps(fps)?,
        None => trace,
    })
}

fn estimate(args: EstimateArgs) -> anyhow::Result<()> {
    let band = args.band.band()?;
    check_positive("window", args.window)?;
    check_positive("step", args.step)?;
    if let Some(fps) = args.fps_override {
        check_positive("fps-override", fps)?;
    }
    eprintln!(
        "rppg estimate --method {} --input {} --roi {} --window {} --step {} --band-low {} --band-high {}{}",
        args.method.cli_name(),
        args.input.display(),
        args.roi,
        args.window,
        args.step,
        band.low_hz,
        band.high_hz,
        args.fps_override.map(|f| format!(" --fps-override {f}")).unwrap_or_default()
    );

    let trace = load_trace(&args)?;
    band.check_rate(trace.fps())?;
    let series = estimate_series(&trace, args.method, args.window, args.step, &band)?;

    let mut csv = String::from("t,hr_bpm\n");
    for (t, hr) in series.window_starts_s.iter().zip(&series.hr_bpm) {
        // inferred frame rates carry float noise; microseconds are plenty
        let t = (t * 1e6).round() / 1e6;
        csv.push_str(&format!("{t},{hr}\n"));
    }
    write_output(args.out.as_deref(), &csv)?;

    if let Some(path) = &args.dump_spectrum {
        let mut out = String::from("window_start_s,freq_hz,magnitude\n");
        for view in sliding_windows(trace.len(), trace.fps(), args.window, args.step)? {
            let start = (view.start_seconds(trace.fps()) * 1e6).round() / 1e6;
            let Ok(pulse) = args.method.pulse(trace.window(&view), trace.fps(), &band) else {
                continue;
            };
            let spectrum = pulse.spectrum()?;
            for bin in spectrum.band_bins(&band) {
                out.push_str(&format!(
                    "{start},{},{}\n",
                    spectrum.frequency(bin),
                    spectrum.magnitudes[bin]
                ));
            }
        }
        write_output(Some(path), &out)?;
    }

    for s in &series.skipped {
        eprintln!("skipped window at {} s: {}", s.start_s, s.reason);
    }
    match series.mean_hr() {
        Some(mean) => eprintln!(
            "{} windows, {} skipped, mean HR {mean:.2} bpm",
            series.len(),
            series.skipped.len()
        ),
        None => bail!(
            "no window produced an estimate ({} skipped)",
            series.skipped.len()
        ),
    }
    Ok(())
}

fn bench(args: BenchArgs) -> anyhow::Result<()> {
    let band = args.band.band()?;
    check_positive("step", args.step)?;
    for w in &args.windows {
        check_positive("windows", *w)?;
    }
    if args.methods.is_empty() {
        bail!(Usage("--methods is empty".into()));
    }
    let config = BenchConfig {
        methods: args.methods.clone(),
        windows_s: args.windows.clone(),
        step_s: args.step,
        band,
    };
    let join = |v: Vec<String>| v.join(",");
    eprintln!(
        "rppg bench --manifest {} --methods {} --windows {} --step {} --band-low {} --band-high {}{}",
        args.manifest.display(),
        join(args.methods.iter().map(|m| m.cli_name().to_string()).collect()),
        join(args.windows.iter().map(|w| w.to_string()).collect()),
        args.step,
        band.low_hz,
        band.high_hz,
        if args.all_entries { " --all-entries" } else { "" }
    );

    let manifest = read_manifest(&args.manifest)?;
    let split = if args.all_entries {
        None
    } else {
        manifest.split.as_ref()
    };
    let report = run_benchmark(&manifest, split, &config)?;
    for f in &report.failures {
        eprintln!("entry `{}` failed: {}", f.origin_id, f.error);
    }
    print!("{}", emit_report(&report, ReportFormat::Markdown));
    if let Some(out) = &args.out {
        write_output(Some(out), &emit_report(&report, args.format))?;
        eprintln!("wrote {}", out.display());
    }
    Ok(())
}

fn parse_hr(text: &str) -> Result<HeartRate, Usage> {
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Usage(format!("--hr expects bpm or start:end, got `{text}`")))
    };
    match text.split_once(':') {
        Some((a, b)) => Ok(HeartRate::Ramp {
            start: num(a)?,
            end: num(b)?,
        }),
        None => Ok(HeartRate::Constant(num(text)?)),
    }
}

fn parse_flicker(kind: &str, amp: Option<f64>, strength: f64) -> Result<Flicker, Usage> {
    let amp = amp.unwrap_or(5.0 * PULSE_WEIGHTS[1] * strength);
    let bad = || {
        Usage(format!(
            "--flicker expects none, sin:<hz> or walk:<step>, got `{kind}`"
        ))
    };
    let kind = match kind.split_once(':') {
        None if kind == "none" => return Ok(Flicker::NONE),
        Some(("sin", hz)) => FlickerKind::Sinusoidal {
            freq_hz: hz.parse().map_err(|_| bad())?,
        },
        Some(("walk", step)) => FlickerKind::RandomWalk {
            step: step.parse().map_err(|_| bad())?,
        },
        _ => return Err(bad()),
    };
    Ok(Flicker { amp, kind })
}

fn parse_size(text: &str) -> Result<(usize, usize), Usage> {
    text.split_once(['x', 'X'])
        .and_then(|(w, h)| Some((w.parse().ok()?, h.parse().ok()?)))
        .filter(|&(w, h): &(usize, usize)| w > 0 && h > 0)
        .ok_or_else(|| Usage(format!("--render expects WIDTHxHEIGHT, got `{text}`")))
}

fn synth(args: SynthArgs) -> anyhow::Result<()> {
    if args.count == 0 {
        bail!(Usage("--count must be at least 1".into()));
    }
    let mut spec = SynthSpec::default()
        .with_strength(args.strength)
        .with_noise(args.noise);
    spec.hr = parse_hr(&args.hr)?;
    spec.duration_s = args.duration;
    spec.fps = args.fps;
    spec.flicker = parse_flicker(&args.flicker, args.flicker_amp, args.strength)?;
    let render = args.render.as_deref().map(parse_size).transpose()?;
    spec.validate()?;

    eprintln!(
        "rppg synth --out {} --hr {} --duration {} --fps {} --flicker {} --flicker-amp {} --noise {} --strength {} --seed {} --count {} --name {}{}{}",
        args.out.display(),
        args.hr,
        args.duration,
        args.fps,
        args.flicker,
        spec.flicker.amp,
        args.noise,
        args.strength,
        args.seed,
        args.count,
        args.name,
        args.render.as_deref().map(|r| format!(" --render {r}")).unwrap_or_default(),
        if args.face_box { " --face-box" } else { "" }
    );

    let recordings: Vec<_> = (0..args.count)
        .map(|i| {
            let name = if args.count == 1 {
                args.name.clone()
            } else {
                format!("{}-{i:03}", args.name)
            };
            let mut opts = RecordingOptions::new(name);
            opts.render = render;
            opts.layout = if args.face_box {
                RenderLayout::FaceBox
            } else {
                RenderLayout::Uniform
            };
            (spec.clone().with_seed(args.seed + i as u64), opts)
        })
        .collect();
    let (manifest, files) = write_dataset(&args.out, &recordings)?;
    for f in &files {
        for p in f.paths() {
            println!("{}", p.display());
        }
    }
    println!("{}", manifest.display());
    Ok(())
}

fn report(args: ReportArgs) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let report = parse_report_json(&text)?;
    write_output(args.out.as_deref(), &emit_report(&report, args.format))
}
