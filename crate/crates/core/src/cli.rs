//! Command-line front end.
//!
//! Every subcommand reads and writes the file formats in [`crate::io`] and
//! [`crate::map`], so the stages can be chained through files. Exit status is
//! 0 on success, 1 on a domain or configuration error and 2 on a usage error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::calib::{run_device_calibration, CalibConfig, ValidationSignal};
use crate::inverse::{adapt_signal, default_beta, design_inverse, InverseFilter, DEFAULT_BETA_RATIO, DEFAULT_G_MAX};
use crate::io::{read_frf, read_signal, read_tf, write_frf, write_signal, write_tf};
use crate::map::{load_map, loo_validate, model_at, save_map, DeviceMap};
use crate::plant::{default_plant, simulate_playback, Location, PlateModel, Preset};
use crate::signal::{generate_sweep, nrmse_aligned, SampledSignal, SweepLaw, SweepSpec};
use crate::sysid::{band_mask, estimate_frf};
use crate::tf::select_order;

#[derive(Debug, Parser)]
#[command(name = "vibrocal", version, about = "Location-specific vibrotactile output calibration")]
struct Cli {
    /// Seed for every random draw (sensor noise).
    #[arg(long, global = true, env = "VIBROCAL_SEED")]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a swept-sine excitation as signal CSV.
    SweepGen(SweepGenArgs),
    /// Play a command through the simulated plate and record at one location.
    Simulate(SimulateArgs),
    /// Estimate the FRF between an input and an output recording.
    Identify(IdentifyArgs),
    /// Fit a rational transfer function to an FRF CSV.
    Fit(FitArgs),
    /// Design the regularized inverse FIR of a transfer function.
    Invert(InvertArgs),
    /// Filter a desired input through inverse taps to get the command signal.
    Adapt(AdaptArgs),
    /// Calibrate a set of locations and write a device map.
    Calibrate(CalibrateArgs),
    /// Interpolated transfer function at an arbitrary location.
    Query(QueryArgs),
    /// Aligned NRMSE between a desired and a measured signal.
    Evaluate(EvaluateArgs),
    /// Leave-one-out interpolation error of a device map.
    Loo(LooArgs),
}

#[derive(Debug, Args)]
struct PlantArgs {
    /// Built-in plate preset (`small` or `rich`).
    #[arg(long, default_value = "small", conflicts_with = "plant_file")]
    preset: String,
    /// Plate description as JSON (overrides --preset).
    #[arg(long)]
    plant_file: Option<PathBuf>,
    /// Override the sensor noise standard deviation.
    #[arg(long)]
    noise_sigma: Option<f64>,
}

#[derive(Debug, Args)]
struct BandArgs {
    #[arg(long, default_value_t = 20.0)]
    band_low: f64,
    #[arg(long, default_value_t = 500.0)]
    band_high: f64,
}

#[derive(Debug, Args)]
struct SweepGenArgs {
    #[arg(long, default_value_t = 10.0)]
    f_start: f64,
    #[arg(long, default_value_t = 500.0)]
    f_end: f64,
    #[arg(long, default_value_t = 5.0)]
    duration: f64,
    #[arg(long, default_value_t = 1.0)]
    amplitude: f64,
    /// `linear` or `logarithmic`.
    #[arg(long, default_value = "linear")]
    law: String,
    /// Raised-cosine fade length in seconds.
    #[arg(long, default_value_t = 0.05)]
    fade: f64,
    #[arg(long, default_value_t = 4000.0)]
    sample_rate: f64,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    plant: PlantArgs,
    /// Command signal CSV.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    x: f64,
    #[arg(long)]
    y: f64,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct IdentifyArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 8192)]
    segment_len: usize,
    #[arg(long, default_value_t = 0.75)]
    overlap: f64,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[arg(long)]
    frf: PathBuf,
    /// Sample rate the FRF was measured at (not stored in the CSV).
    #[arg(long, default_value_t = 4000.0)]
    sample_rate: f64,
    #[command(flatten)]
    band: BandArgs,
    #[arg(long, default_value_t = 0.95)]
    coherence_threshold: f64,
    #[arg(long, default_value_t = 16)]
    max_order: usize,
    #[arg(long, default_value_t = 0.02)]
    fit_tol: f64,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct InvertArgs {
    #[arg(long)]
    tf: PathBuf,
    #[command(flatten)]
    band: BandArgs,
    /// Tikhonov constant; defaults to 1e-4 × median in-band |H|².
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_G_MAX)]
    g_max: f64,
    #[arg(long, default_value_t = 4096)]
    fir_len: usize,
    /// Taps as signal CSV.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct AdaptArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    taps: PathBuf,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    /// Run configuration JSON; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    plant_file: Option<PathBuf>,
    #[arg(long)]
    noise_sigma: Option<f64>,
    /// Calibrate an n×n grid of cell centres.
    #[arg(long, conflicts_with = "locations")]
    grid: Option<usize>,
    /// Explicit locations, `x,y;x,y;...`.
    #[arg(long)]
    locations: Option<String>,
    /// Device map JSON.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Per-location report CSV (stdout when absent).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct QueryArgs {
    #[arg(long)]
    map: PathBuf,
    #[arg(long)]
    x: f64,
    #[arg(long)]
    y: f64,
    #[arg(long, default_value_t = 16)]
    max_order: usize,
    #[arg(long, default_value_t = 0.02)]
    fit_tol: f64,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    desired: PathBuf,
    #[arg(long)]
    measured: PathBuf,
    #[command(flatten)]
    band: BandArgs,
    /// Largest alignment shift searched, in samples.
    #[arg(long, default_value_t = 4096)]
    max_lag: usize,
}

#[derive(Debug, Args)]
struct LooArgs {
    #[arg(long)]
    map: PathBuf,
    /// Error table CSV (stdout when absent).
    #[arg(long, short)]
    out: Option<PathBuf>,
}

/// Calibration run description as read from `--config`. Every field is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunConfig {
    preset: Option<String>,
    plant_file: Option<PathBuf>,
    noise_sigma: Option<f64>,
    grid: Option<usize>,
    locations: Option<Vec<Location>>,
    out: Option<PathBuf>,
    report: Option<PathBuf>,
    seed: Option<u64>,

    sweep: Option<SweepSpec>,
    sample_rate: Option<f64>,
    band: Option<[f64; 2]>,
    coherence_threshold: Option<f64>,
    fit_tol: Option<f64>,
    render_tol: Option<f64>,
    max_order: Option<usize>,
    max_iters: Option<usize>,
    beta: Option<f64>,
    g_max: Option<f64>,
    fir_len: Option<usize>,
    segment_len: Option<usize>,
    overlap: Option<f64>,
    align_margin: Option<usize>,
    validation_freq_hz: Option<f64>,
    validation_duration: Option<f64>,
    validation_amplitude: Option<f64>,
    /// Custom validation signal CSV, used instead of the tone burst.
    validation_file: Option<PathBuf>,
}

impl RunConfig {
    fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config `{}`", path.display()))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing config `{}`", path.display()))?;
        // paths inside the file are relative to the file
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.plant_file, &mut cfg.out, &mut cfg.report, &mut cfg.validation_file]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    fn calib_config(&self, plant_rate: f64) -> anyhow::Result<CalibConfig> {
        let d = CalibConfig::default();
        let sample_rate = self.sample_rate.unwrap_or(plant_rate);
        let validation = match &self.validation_file {
            Some(p) => ValidationSignal::Custom(
                read_signal(p).with_context(|| format!("validation_file `{}`", p.display()))?,
            ),
            None => ValidationSignal::ToneBurst {
                freq_hz: self.validation_freq_hz,
                duration: self.validation_duration.unwrap_or(0.1),
                amplitude: self.validation_amplitude.unwrap_or(1.0),
            },
        };
        Ok(CalibConfig {
            sweep: self.sweep.unwrap_or(d.sweep),
            sample_rate,
            band: self.band.map(|[lo, hi]| (lo, hi)).unwrap_or(d.band),
            coherence_threshold: self.coherence_threshold.unwrap_or(d.coherence_threshold),
            fit_tol: self.fit_tol.unwrap_or(d.fit_tol),
            render_tol: self.render_tol.unwrap_or(d.render_tol),
            max_order: self.max_order.unwrap_or(d.max_order),
            max_iters: self.max_iters.unwrap_or(d.max_iters),
            beta: self.beta.or(d.beta),
            g_max: self.g_max.unwrap_or(d.g_max),
            fir_len: self.fir_len.unwrap_or(d.fir_len),
            segment_len: self.segment_len.unwrap_or(d.segment_len),
            overlap: self.overlap.unwrap_or(d.overlap),
            align_margin: self.align_margin.unwrap_or(d.align_margin),
            validation,
        })
    }
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::SweepGen(a) => sweep_gen(a),
        Command::Simulate(a) => simulate(a, seed.unwrap_or(0)),
        Command::Identify(a) => identify(a),
        Command::Fit(a) => fit(a),
        Command::Invert(a) => invert(a),
        Command::Adapt(a) => adapt(a),
        Command::Calibrate(a) => calibrate(a, seed),
        Command::Query(a) => query(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Loo(a) => loo(a),
    }
}

fn input_signal(path: &Path) -> anyhow::Result<SampledSignal> {
    Ok(read_signal(path)?)
}

fn load_plant(preset: &str, plant_file: Option<&Path>, noise_sigma: Option<f64>) -> anyhow::Result<PlateModel> {
    let mut plant = match plant_file {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading plant file `{}`", p.display()))?;
            let plant: PlateModel =
                serde_json::from_str(&text).with_context(|| format!("parsing plant file `{}`", p.display()))?;
            plant.validate().with_context(|| format!("plant file `{}`", p.display()))?;
            plant
        }
        None => default_plant(preset.parse::<Preset>()?),
    };
    if let Some(sigma) = noise_sigma {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            bail!("invalid noise_sigma: must be finite and non-negative, got {sigma}");
        }
        plant = plant.with_noise(sigma);
    }
    Ok(plant)
}

fn sweep_gen(a: SweepGenArgs) -> anyhow::Result<()> {
    let spec = SweepSpec {
        f_start: a.f_start,
        f_end: a.f_end,
        duration: a.duration,
        amplitude: a.amplitude,
        law: a.law.parse::<SweepLaw>()?,
        fade: a.fade,
    };
    let sweep = generate_sweep(&spec, a.sample_rate)?;
    write_signal(&a.out, &sweep)?;
    Ok(())
}

fn simulate(a: SimulateArgs, seed: u64) -> anyhow::Result<()> {
    let plant = load_plant(&a.plant.preset, a.plant.plant_file.as_deref(), a.plant.noise_sigma)?;
    let command = input_signal(&a.input)?;
    let location = Location::new(a.x, a.y)?;
    let recording = simulate_playback(&plant, &command, location, seed)
        .with_context(|| format!("simulating `{}`", a.input.display()))?;
    write_signal(&a.out, &recording)?;
    Ok(())
}

fn identify(a: IdentifyArgs) -> anyhow::Result<()> {
    let input = input_signal(&a.input)?;
    let output = input_signal(&a.output)?;
    let estimate = estimate_frf(&input, &output, a.segment_len, a.overlap)?;
    write_frf(&a.out, &estimate.frf)?;
    Ok(())
}

fn fit(a: FitArgs) -> anyhow::Result<()> {
    let frf = read_frf(&a.frf, a.sample_rate)?;
    let band = (a.band.band_low, a.band.band_high);
    let mask = if frf.coherence().is_some() {
        band_mask(&frf, a.coherence_threshold, band)?
    } else {
        frf.freqs().iter().map(|&f| f >= band.0 && f <= band.1).collect()
    };
    let selection =
        select_order(&frf, &mask, a.max_order, a.fit_tol).with_context(|| format!("fitting `{}`", a.frf.display()))?;
    eprintln!("order {} fit_error {}", selection.order, selection.error);
    write_tf(&a.out, &selection.tf)?;
    Ok(())
}

fn invert(a: InvertArgs) -> anyhow::Result<()> {
    let tf = read_tf(&a.tf)?;
    let band = (a.band.band_low, a.band.band_high);
    let beta = match a.beta {
        Some(b) => b,
        None => default_beta(&tf, band, a.fir_len, DEFAULT_BETA_RATIO),
    };
    let inv = design_inverse(&tf, band, beta, a.g_max, a.fir_len)?;
    write_signal(&a.out, &SampledSignal::new(inv.taps, inv.sample_rate)?)?;
    Ok(())
}

fn adapt(a: AdaptArgs) -> anyhow::Result<()> {
    let input = input_signal(&a.input)?;
    let taps = input_signal(&a.taps)?;
    let inv = InverseFilter::from_taps(taps.samples().to_vec(), taps.sample_rate())
        .with_context(|| format!("taps file `{}`", a.taps.display()))?;
    let command = adapt_signal(&input, &inv)?;
    write_signal(&a.out, &command)?;
    Ok(())
}

fn parse_locations(text: &str) -> anyhow::Result<Vec<Location>> {
    text.split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|pair| {
            let (x, y) = pair
                .split_once(',')
                .ok_or_else(|| anyhow!("invalid locations: `{pair}` is not `x,y`"))?;
            let x: f64 = x.trim().parse().with_context(|| format!("invalid locations: x in `{pair}`"))?;
            let y: f64 = y.trim().parse().with_context(|| format!("invalid locations: y in `{pair}`"))?;
            Ok(Location::new(x, y)?)
        })
        .collect()
}

/// CSV summary of a calibrated map, one row per location.
pub fn format_report(map: &DeviceMap) -> String {
    let mut out = String::from("x,y,order,fit_error,render_error,mean_coherence,converged,iterations_used,error\n");
    for e in map.entries() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},",
            e.location.x,
            e.location.y,
            e.order,
            e.fit_error,
            e.render_error,
            e.mean_coherence,
            e.converged,
            e.iterations_used
        );
    }
    for f in map.failures() {
        let _ = writeln!(
            out,
            "{},{},,,,,false,0,\"{}\"",
            f.location.x,
            f.location.y,
            f.error.replace('"', "'")
        );
    }
    out
}

fn write_text(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing `{}`", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn calibrate(a: CalibrateArgs, seed: Option<u64>) -> anyhow::Result<()> {
    let run = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let preset = a.preset.or(run.preset.clone()).unwrap_or_else(|| "small".to_string());
    let plant_file = a.plant_file.or(run.plant_file.clone());
    let plant = load_plant(&preset, plant_file.as_deref(), a.noise_sigma.or(run.noise_sigma))?;

    let locations = match (a.grid, a.locations.as_deref()) {
        (Some(n), _) => grid(n)?,
        (None, Some(text)) => parse_locations(text)?,
        (None, None) => match (&run.locations, run.grid) {
            (Some(locs), _) => locs.clone(),
            (None, Some(n)) => grid(n)?,
            (None, None) => grid(3)?,
        },
    };
    let out = a
        .out
        .or(run.out.clone())
        .ok_or_else(|| anyhow!("missing output path: pass --out or set `out` in the config"))?;
    let report = a.report.or(run.report.clone());
    // --seed and VIBROCAL_SEED win over the config file
    let seed = seed.or(run.seed).unwrap_or(0);

    let config = run.calib_config(plant.sample_rate)?;
    let map = run_device_calibration(&plant, &locations, &config, seed)?.with_actuator_pos(plant.actuator_pos);
    save_map(&map, &out)?;
    write_text(report.as_deref(), &format_report(&map))?;
    Ok(())
}

fn grid(n: usize) -> anyhow::Result<Vec<Location>> {
    if n == 0 {
        bail!("invalid grid: must be at least 1");
    }
    Ok(Location::grid(n))
}

fn open_map(path: &Path) -> anyhow::Result<DeviceMap> {
    load_map(path).with_context(|| format!("device map `{}`", path.display()))
}

fn query(a: QueryArgs) -> anyhow::Result<()> {
    let map = open_map(&a.map)?;
    let tf = model_at(&map, Location::new(a.x, a.y)?, a.max_order, a.fit_tol)?;
    write_tf(&a.out, &tf)?;
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> anyhow::Result<()> {
    let desired = input_signal(&a.desired)?;
    let measured = input_signal(&a.measured)?;
    let nrmse = nrmse_aligned(&desired, &measured, (a.band.band_low, a.band.band_high), a.max_lag)?;
    println!("nrmse {nrmse}");
    Ok(())
}

fn loo(a: LooArgs) -> anyhow::Result<()> {
    let map = open_map(&a.map)?;
    let errors = loo_validate(&map)?;
    let mut out = String::from("x,y,loo_error\n");
    for (e, err) in map.entries().iter().zip(&errors) {
        let _ = writeln!(out, "{},{},{}", e.location.x, e.location.y, err);
    }
    write_text(a.out.as_deref(), &out)
}
