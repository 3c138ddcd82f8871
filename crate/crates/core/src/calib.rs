//! Per-location and whole-device calibration loops.
//!
//! Each iteration sweeps the device, estimates the response, fits a rational
//! model within the current order budget, designs the inverse filter and
//! checks it by rendering a validation signal. Failed iterations first raise
//! the order budget, then lengthen the sweep.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frf::FrequencyResponse;
use crate::inverse::{adapt_signal, default_beta, design_inverse, DEFAULT_BETA_RATIO, DEFAULT_G_MAX};
use crate::map::{DeviceMap, LocationFailure};
use crate::plant::{simulate_playback, Location, PlateModel};
use crate::signal::{generate_sweep, nrmse_aligned, tone_burst, SampledSignal, SweepSpec};
use crate::sysid::{band_mask, estimate_frf};
use crate::tf::{select_order, RationalTF};

/// Playback-and-record access to a physical or simulated device.
pub trait DevicePort: Sync {
    fn sample_rate(&self) -> f64;

    /// Plays `command` through the actuator and returns the acceleration
    /// recorded at `location`. `seed` drives any measurement noise.
    fn play_and_record(&self, command: &SampledSignal, location: Location, seed: u64) -> Result<SampledSignal>;
}

impl DevicePort for PlateModel {
    fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    fn play_and_record(&self, command: &SampledSignal, location: Location, seed: u64) -> Result<SampledSignal> {
        simulate_playback(self, command, location, seed)
    }
}

/// Signal rendered after each fit to measure reproduction quality.
#[derive(Debug, Clone, PartialEq)]
pub enum ValidationSignal {
    /// Hann-windowed tone burst; `freq_hz = None` uses the geometric mean of the band.
    ToneBurst {
        freq_hz: Option<f64>,
        duration: f64,
        amplitude: f64,
    },
    Custom(SampledSignal),
}

impl Default for ValidationSignal {
    fn default() -> Self {
        ValidationSignal::ToneBurst {
            freq_hz: None,
            duration: 0.1,
            amplitude: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibConfig {
    pub sweep: SweepSpec,
    pub sample_rate: f64,
    pub band: (f64, f64),
    pub coherence_threshold: f64,
    /// rms-relative FRF fit tolerance.
    pub fit_tol: f64,
    /// Target NRMSE for the rendered validation signal.
    pub render_tol: f64,
    pub max_order: usize,
    pub max_iters: usize,
    /// Tikhonov constant; `None` uses `1e-4 × median |H|²` over the band.
    pub beta: Option<f64>,
    pub g_max: f64,
    pub fir_len: usize,
    pub segment_len: usize,
    pub overlap: f64,
    /// Samples of slack kept around the validation recording and searched
    /// for alignment.
    pub align_margin: usize,
    pub validation: ValidationSignal,
}

impl Default for CalibConfig {
    fn default() -> Self {
        CalibConfig {
            sweep: SweepSpec::default(),
            sample_rate: 4000.0,
            band: (20.0, 500.0),
            coherence_threshold: 0.95,
            fit_tol: 0.02,
            render_tol: 0.05,
            max_order: 16,
            max_iters: 4,
            beta: None,
            g_max: DEFAULT_G_MAX,
            fir_len: 4096,
            segment_len: 8192,
            overlap: 0.75,
            align_margin: 200,
            validation: ValidationSignal::default(),
        }
    }
}

impl CalibConfig {
    pub fn validate(&self) -> Result<()> {
        self.sweep.validate()?;
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return Err(Error::invalid("sample_rate", "must be positive"));
        }
        let (lo, hi) = self.band;
        if !(lo > 0.0 && lo < hi) {
            return Err(Error::invalid("band", format!("need 0 < low < high, got ({lo}, {hi})")));
        }
        if lo < self.sweep.f_start || hi > self.sweep.f_end {
            return Err(Error::invalid(
                "band",
                format!(
                    "({lo}, {hi}) Hz lies outside the sweep range ({}, {}) Hz",
                    self.sweep.f_start, self.sweep.f_end
                ),
            ));
        }
        if !(0.0..=1.0).contains(&self.coherence_threshold) {
            return Err(Error::invalid("coherence_threshold", "must lie in [0, 1]"));
        }
        if !(self.fit_tol > 0.0) {
            return Err(Error::invalid("fit_tol", "must be positive"));
        }
        if !(self.render_tol >= 0.0) {
            return Err(Error::invalid("render_tol", "must be non-negative"));
        }
        if self.max_order < 1 {
            return Err(Error::invalid("max_order", "must be at least 1"));
        }
        if self.max_iters < 1 {
            return Err(Error::invalid("max_iters", "must be at least 1"));
        }
        if let Some(beta) = self.beta {
            if !(beta >= 0.0 && beta.is_finite()) {
                return Err(Error::invalid("beta", "must be finite and non-negative"));
            }
        }
        if !(self.g_max > 0.0 && self.g_max.is_finite()) {
            return Err(Error::invalid("g_max", "must be positive"));
        }
        if self.fir_len < 64 || !self.fir_len.is_multiple_of(2) {
            return Err(Error::invalid("fir_len", "must be even and >= 64"));
        }
        if !self.segment_len.is_power_of_two() || self.segment_len < 2 {
            return Err(Error::invalid("segment_len", "must be a power of two"));
        }
        if !(0.0..=0.9).contains(&self.overlap) {
            return Err(Error::invalid("overlap", "must lie in [0, 0.9]"));
        }
        Ok(())
    }

    /// Order budget of the first iteration.
    pub fn initial_order_budget(&self) -> usize {
        (self.max_order / 4).max(1)
    }

    pub fn validation_signal(&self) -> Result<SampledSignal> {
        match &self.validation {
            ValidationSignal::ToneBurst {
                freq_hz,
                duration,
                amplitude,
            } => {
                let f = freq_hz.unwrap_or_else(|| (self.band.0 * self.band.1).sqrt());
                tone_burst(f, *duration, *amplitude, self.sample_rate)
            }
            ValidationSignal::Custom(s) => {
                if s.sample_rate() != self.sample_rate {
                    return Err(Error::SampleRateMismatch {
                        left: s.sample_rate(),
                        right: self.sample_rate,
                    });
                }
                Ok(s.clone())
            }
        }
    }
}

/// Calibrated model for one target location.
#[derive(Debug, Clone, PartialEq)]
pub struct LocationModel {
    pub location: Location,
    pub tf: RationalTF,
    pub order: usize,
    pub fit_error: f64,
    pub render_error: f64,
    pub mean_coherence: f64,
    pub converged: bool,
    pub iterations_used: usize,
    /// Nonparametric estimate the fit was built from, restricted to the band.
    pub frf: FrequencyResponse,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn recording_seed(seed: u64, iteration: usize, validation: bool) -> u64 {
    splitmix(seed ^ splitmix(2 * iteration as u64 + validation as u64))
}

/// Renders `validation` through the inverse filter designed from `tf` and
/// returns the NRMSE between the desired and recorded signals.
fn render_check(
    device: &dyn DevicePort,
    location: Location,
    config: &CalibConfig,
    tf: &RationalTF,
    validation: &SampledSignal,
    seed: u64,
) -> Result<f64> {
    let beta = match config.beta {
        Some(b) => b,
        None => default_beta(tf, config.band, config.fir_len, DEFAULT_BETA_RATIO),
    };
    let inv = design_inverse(tf, config.band, beta, config.g_max, config.fir_len)?;
    let command = adapt_signal(validation, &inv)?;
    let recorded = device.play_and_record(&command, location, seed)?;

    let margin = config.align_margin.min(inv.latency).min(validation.len().saturating_sub(1));
    let mut desired = vec![0.0; margin];
    desired.extend_from_slice(validation.samples());
    let desired = SampledSignal::new(desired, validation.sample_rate())?;
    let measured = recorded.window(inv.latency - margin, validation.len() + 2 * margin);
    nrmse_aligned(&desired, &measured, config.band, margin)
}

/// Runs the sweep / fit / invert / validate loop at one location and returns
/// the best iterate (lowest render error).
pub fn run_location_calibration(
    device: &dyn DevicePort,
    location: Location,
    config: &CalibConfig,
    seed: u64,
) -> Result<LocationModel> {
    config.validate()?;
    location.validate()?;
    if device.sample_rate() != config.sample_rate {
        return Err(Error::SampleRateMismatch {
            left: device.sample_rate(),
            right: config.sample_rate,
        });
    }
    let validation = config.validation_signal()?;

    let mut budget = config.initial_order_budget();
    let mut sweep_spec = config.sweep;
    let max_duration = 4.0 * config.sweep.duration;
    let mut best: Option<LocationModel> = None;

    for iteration in 1..=config.max_iters {
        let sweep = generate_sweep(&sweep_spec, config.sample_rate)?;
        let response = device.play_and_record(&sweep, location, recording_seed(seed, iteration, false))?;
        let estimate = estimate_frf(&sweep, &response, config.segment_len, config.overlap)?;
        let frf = estimate.frf;
        let mask = band_mask(&frf, config.coherence_threshold, config.band)?;
        let selection = select_order(&frf, &mask, budget, config.fit_tol)?;
        let render_error = render_check(
            device,
            location,
            config,
            &selection.tf,
            &validation,
            recording_seed(seed, iteration, true),
        )?;

        let band_frf = frf.restrict(config.band.0, config.band.1);
        let coherence = band_frf.coherence().unwrap_or(&[]);
        let mean_coherence = if coherence.is_empty() {
            0.0
        } else {
            coherence.iter().sum::<f64>() / coherence.len() as f64
        };
        let converged = render_error <= config.render_tol;
        let candidate = LocationModel {
            location,
            tf: selection.tf,
            order: selection.order,
            fit_error: selection.error,
            render_error,
            mean_coherence: mean_coherence.clamp(0.0, 1.0),
            converged,
            iterations_used: iteration,
            frf: band_frf.without_coherence(),
        };
        if best.as_ref().is_none_or(|b| candidate.render_error < b.render_error) {
            best = Some(candidate);
        }
        if let Some(b) = best.as_mut() {
            b.iterations_used = iteration;
        }
        if converged {
            break;
        }
        if budget < config.max_order {
            budget = (2 * budget).min(config.max_order);
        } else if sweep_spec.duration < max_duration {
            sweep_spec.duration = (2.0 * sweep_spec.duration).min(max_duration);
        } else {
            break;
        }
    }
    Ok(best.expect("max_iters >= 1"))
}

/// Calibrates every location (in parallel) and assembles a [`DeviceMap`].
/// Location `i` uses seed `seed ^ i`; failures are recorded in the map.
pub fn run_device_calibration(
    device: &dyn DevicePort,
    locations: &[Location],
    config: &CalibConfig,
    seed: u64,
) -> Result<DeviceMap> {
    if locations.is_empty() {
        return Err(Error::EmptyLocations);
    }
    for (i, loc) in locations.iter().enumerate() {
        loc.validate()?;
        if locations[..i].contains(loc) {
            return Err(Error::DuplicateLocation { x: loc.x, y: loc.y });
        }
    }
    config.validate()?;

    let results: Vec<Result<LocationModel>> = locations
        .par_iter()
        .enumerate()
        .map(|(i, &loc)| run_location_calibration(device, loc, config, seed ^ i as u64))
        .collect();

    let mut entries = Vec::new();
    let mut failures = Vec::new();
    for (loc, result) in locations.iter().zip(results) {
        match result {
            Ok(model) => entries.push(model),
            Err(e) => failures.push(LocationFailure {
                location: *loc,
                error: e.to_string(),
            }),
        }
    }
    DeviceMap::new(config.sample_rate, config.band, None, entries, failures)
}
