//! Simulated touch device: a simply-supported modal plate driven by a
//! resonant actuator and observed by a single-axis accelerometer.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frf::FrequencyResponse;
use crate::signal::SampledSignal;

/// Point on the device surface in normalized coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub x: f64,
    pub y: f64,
}

impl Location {
    pub fn new(x: f64, y: f64) -> Result<Self> {
        let loc = Location { x, y };
        loc.validate()?;
        Ok(loc)
    }

    pub fn validate(&self) -> Result<()> {
        if !((0.0..=1.0).contains(&self.x) && (0.0..=1.0).contains(&self.y)) {
            return Err(Error::invalid(
                "location",
                format!("({}, {}) outside the unit square", self.x, self.y),
            ));
        }
        Ok(())
    }

    pub fn distance(&self, other: &Location) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Regular `n × n` grid at cell centres: coordinates `(i + 0.5) / n`.
    pub fn grid(n: usize) -> Vec<Location> {
        let c = |i: usize| (i as f64 + 0.5) / n as f64;
        (0..n)
            .flat_map(|j| (0..n).map(move |i| Location { x: c(i), y: c(j) }))
            .collect()
    }
}

/// One bending mode with `m × n` half-waves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlateMode {
    pub m: u32,
    pub n: u32,
    pub f_n: f64,
    pub zeta: f64,
}

impl PlateMode {
    pub fn shape(&self, at: Location) -> f64 {
        (self.m as f64 * PI * at.x).sin() * (self.n as f64 * PI * at.y).sin()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlateModel {
    pub modes: Vec<PlateMode>,
    pub actuator_pos: Location,
    pub actuator_f0: f64,
    pub actuator_zeta: f64,
    /// (m/s²)/V scale of the actuator stage.
    pub actuator_gain: f64,
    /// Standard deviation of additive sensor noise, m/s².
    pub noise_sigma: f64,
    pub sample_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Small,
    Rich,
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "small" => Ok(Preset::Small),
            "rich" => Ok(Preset::Rich),
            other => Err(Error::UnknownPreset(other.to_string())),
        }
    }
}

const ACTUATOR_POS: Location = Location { x: 0.8, y: 0.85 };

/// Canonical fixture plants.
pub fn default_plant(preset: Preset) -> PlateModel {
    let mode = |m, n, f_n, zeta| PlateMode { m, n, f_n, zeta };
    match preset {
        Preset::Small => PlateModel {
            modes: vec![mode(1, 1, 120.0, 0.03), mode(2, 1, 210.0, 0.03), mode(1, 2, 260.0, 0.03)],
            actuator_pos: ACTUATOR_POS,
            actuator_f0: 90.0,
            actuator_zeta: 0.5,
            actuator_gain: SMALL_ACTUATOR_GAIN,
            noise_sigma: 0.0,
            sample_rate: 4000.0,
        },
        Preset::Rich => PlateModel {
            modes: vec![
                mode(1, 1, 60.0, 0.03),
                mode(2, 1, 140.0, 0.025),
                mode(1, 2, 190.0, 0.025),
                mode(2, 2, 260.0, 0.02),
                mode(3, 1, 330.0, 0.02),
                mode(1, 3, 420.0, 0.02),
                mode(3, 2, 560.0, 0.02),
                mode(2, 3, 800.0, 0.02),
            ],
            actuator_pos: ACTUATOR_POS,
            actuator_f0: 90.0,
            actuator_zeta: 0.5,
            actuator_gain: SMALL_ACTUATOR_GAIN,
            noise_sigma: 0.0,
            sample_rate: 4000.0,
        },
    }
}

const SMALL_ACTUATOR_GAIN: f64 = 1.0;

impl PlateModel {
    pub fn validate(&self) -> Result<()> {
        let nyquist = self.sample_rate / 2.0;
        if !(self.sample_rate.is_finite() && self.sample_rate > 0.0) {
            return Err(Error::invalid("sample_rate", "must be positive"));
        }
        if self.modes.is_empty() {
            return Err(Error::invalid("modes", "plant needs at least one mode"));
        }
        for (i, md) in self.modes.iter().enumerate() {
            if md.m == 0 || md.n == 0 {
                return Err(Error::invalid("modes", format!("mode {i}: half-wave counts must be >= 1")));
            }
            if !(md.f_n > 0.0 && md.f_n < nyquist) {
                return Err(Error::invalid("modes", format!("mode {i}: f_n must lie in (0, fs/2)")));
            }
            if !(md.zeta > 0.0 && md.zeta < 1.0) {
                return Err(Error::invalid("modes", format!("mode {i}: zeta must lie in (0, 1)")));
            }
            if self.modes[..i].iter().any(|o| o.f_n == md.f_n) {
                return Err(Error::invalid("modes", format!("mode {i}: duplicate natural frequency")));
            }
        }
        self.actuator_pos.validate()?;
        if !(self.actuator_f0 > 0.0 && self.actuator_f0 < nyquist) {
            return Err(Error::invalid("actuator_f0", "must lie in (0, fs/2)"));
        }
        if !(self.actuator_zeta > 0.0 && self.actuator_zeta < 1.0) {
            return Err(Error::invalid("actuator_zeta", "must lie in (0, 1)"));
        }
        if !(self.actuator_gain > 0.0 && self.actuator_gain.is_finite()) {
            return Err(Error::invalid("actuator_gain", "must be positive"));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::invalid("noise_sigma", "must be non-negative"));
        }
        Ok(())
    }

    pub fn with_noise(mut self, sigma: f64) -> Self {
        self.noise_sigma = sigma;
        self
    }

    /// Resonant band-pass actuator stage.
    pub fn actuator_response(&self, f: f64) -> Complex64 {
        let w = 2.0 * PI * f;
        let wa = 2.0 * PI * self.actuator_f0;
        let damp = Complex64::new(0.0, 2.0 * self.actuator_zeta * wa * w);
        self.actuator_gain * damp / (Complex64::new(wa * wa - w * w, 0.0) + damp)
    }

    /// Modal sum from actuator force to acceleration at `sensor`.
    pub fn plate_response(&self, sensor: Location, f: f64) -> Complex64 {
        let w = 2.0 * PI * f;
        self.modes
            .iter()
            .map(|md| {
                let wk = 2.0 * PI * md.f_n;
                let coupling = md.shape(self.actuator_pos) * md.shape(sensor);
                let den = Complex64::new(wk * wk - w * w, 2.0 * md.zeta * wk * w);
                coupling * (-w * w) / den
            })
            .sum()
    }

    fn response_at(&self, sensor: Location, f: f64) -> Complex64 {
        self.actuator_response(f) * self.plate_response(sensor, f)
    }
}

/// Exact acceleration-per-volt response at `sensor` on the frequencies `freqs`.
pub fn frf_exact(plant: &PlateModel, sensor: Location, freqs: &[f64]) -> Result<FrequencyResponse> {
    let nyquist = plant.sample_rate / 2.0;
    if let Some(&f) = freqs.iter().find(|&&f| !(0.0..=nyquist).contains(&f)) {
        return Err(Error::Nyquist {
            freq_hz: f,
            nyquist_hz: nyquist,
        });
    }
    let values = freqs.iter().map(|&f| plant.response_at(sensor, f)).collect();
    FrequencyResponse::new(freqs.to_vec(), values, None, plant.sample_rate)
}

/// Plays `command` through the plant and records acceleration at `sensor`.
///
/// The command is zero-padded to twice its length and filtered in the
/// frequency domain with the exact response; the full padded length is
/// returned so the ring-down tail is kept. Noise is drawn from a ChaCha8
/// stream seeded with `seed`.
pub fn simulate_playback(
    plant: &PlateModel,
    command: &SampledSignal,
    sensor: Location,
    seed: u64,
) -> Result<SampledSignal> {
    if command.sample_rate() != plant.sample_rate {
        return Err(Error::SampleRateMismatch {
            left: command.sample_rate(),
            right: plant.sample_rate,
        });
    }
    let n = 2 * command.len();
    let fs = plant.sample_rate;
    let mut spectrum: Vec<Complex64> = command
        .samples()
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
        .take(n)
        .collect();

    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(n).process(&mut spectrum);
    for k in 0..=n / 2 {
        let h = plant.response_at(sensor, k as f64 * fs / n as f64);
        if k == 0 || 2 * k == n {
            spectrum[k] *= h.re;
        } else {
            spectrum[k] *= h;
            spectrum[n - k] = spectrum[k].conj();
        }
    }
    planner.plan_fft_inverse(n).process(&mut spectrum);

    let scale = 1.0 / n as f64;
    let mut out: Vec<f64> = spectrum.iter().map(|c| c.re * scale).collect();
    if plant.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, plant.noise_sigma)
            .map_err(|e| Error::invalid("noise_sigma", e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in out.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }
    SampledSignal::new(out, fs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_mode(m: u32, n: u32) -> PlateModel {
        PlateModel {
            modes: vec![PlateMode { m, n, f_n: 150.0, zeta: 0.05 }],
            ..default_plant(Preset::Small)
        }
    }

    #[test]
    fn presets() {
        let small = default_plant(Preset::Small);
        assert_eq!(small.modes.len(), 3);
        assert_eq!(small.noise_sigma, 0.0);
        assert_eq!(small, default_plant(Preset::Small));
        small.validate().unwrap();
        let rich = default_plant(Preset::Rich);
        assert_eq!(rich.modes.len(), 8);
        assert!(rich.modes.iter().all(|m| m.f_n < 2000.0));
        rich.validate().unwrap();
        assert!(matches!("medium".parse::<Preset>(), Err(Error::UnknownPreset(_))));
    }

    #[test]
    fn sensor_on_node_sees_nothing() {
        let plant = single_mode(2, 1);
        let freqs: Vec<f64> = (0..50).map(|i| 10.0 * i as f64).collect();
        let h = frf_exact(&plant, Location { x: 0.5, y: 0.3 }, &freqs).unwrap();
        assert!(h.values().iter().all(|v| v.norm() < 1e-12));
    }

    #[test]
    fn zero_frequency_is_zero() {
        let plant = default_plant(Preset::Small);
        let h = frf_exact(&plant, Location { x: 0.3, y: 0.7 }, &[0.0]).unwrap();
        assert_eq!(h.values()[0], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn rejects_frequency_above_nyquist() {
        let plant = default_plant(Preset::Small);
        assert!(matches!(
            frf_exact(&plant, Location { x: 0.3, y: 0.7 }, &[2000.5]),
            Err(Error::Nyquist { .. })
        ));
    }

    #[test]
    fn single_mode_at_resonance_matches_scalar_formula() {
        let mut plant = single_mode(1, 1);
        plant.actuator_pos = Location { x: 0.5, y: 0.5 };
        let f = plant.modes[0].f_n;
        let h = frf_exact(&plant, Location { x: 0.5, y: 0.5 }, &[f]).unwrap().values()[0];

        // at w = w_n the modal term is -w²/(2j ζ w²) = j/(2ζ); the actuator is
        // a second-order band-pass evaluated separately in real arithmetic
        let zeta = plant.modes[0].zeta;
        let modal = 1.0 / (2.0 * zeta);
        let r = f / plant.actuator_f0;
        let za = plant.actuator_zeta;
        let act = plant.actuator_gain * (2.0 * za * r) / ((1.0 - r * r).powi(2) + (2.0 * za * r).powi(2)).sqrt();
        let expected = act * modal;
        assert!((h.norm() - expected).abs() < 1e-9 * expected, "{} vs {expected}", h.norm());
    }

    #[test]
    fn zero_command_gives_silence() {
        let plant = default_plant(Preset::Small);
        let cmd = SampledSignal::zeros(1000, 4000.0).unwrap();
        let out = simulate_playback(&plant, &cmd, Location { x: 0.4, y: 0.4 }, 3).unwrap();
        assert_eq!(out.len(), 2000);
        assert!(out.samples().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn noise_has_requested_rms() {
        let plant = default_plant(Preset::Small).with_noise(0.1);
        let cmd = SampledSignal::zeros(1 << 15, 4000.0).unwrap();
        let out = simulate_playback(&plant, &cmd, Location { x: 0.4, y: 0.4 }, 42).unwrap();
        assert_eq!(out.len(), 1 << 16);
        assert!((out.rms() - 0.1).abs() < 0.005, "rms {}", out.rms());
    }

    #[test]
    fn steady_sine_amplitude_follows_frf() {
        let plant = default_plant(Preset::Small);
        let loc = Location { x: 0.3, y: 0.6 };
        let fs = 4000.0;
        let n = 16000;
        let x: Vec<f64> = (0..n).map(|i| (2.0 * PI * 150.0 * i as f64 / fs).sin()).collect();
        let out = simulate_playback(&plant, &SampledSignal::new(x, fs).unwrap(), loc, 0).unwrap();
        let gain = frf_exact(&plant, loc, &[150.0]).unwrap().values()[0].norm();
        // project the settled middle section onto sin/cos at 150 Hz
        let (start, len) = (8000, 4000);
        let (mut s, mut c) = (0.0, 0.0);
        for i in start..start + len {
            let ph = 2.0 * PI * 150.0 * i as f64 / fs;
            s += out.samples()[i] * ph.sin();
            c += out.samples()[i] * ph.cos();
        }
        let amp = 2.0 * s.hypot(c) / len as f64;
        assert!((amp / gain - 1.0).abs() < 0.005, "amp {amp} vs {gain}");
    }

    #[test]
    fn playback_is_linear() {
        let plant = default_plant(Preset::Small);
        let loc = Location { x: 0.7, y: 0.2 };
        let fs = 4000.0;
        let a: Vec<f64> = (0..800).map(|i| ((i * 7919) % 97) as f64 / 97.0 - 0.5).collect();
        let b: Vec<f64> = (0..800).map(|i| (i as f64 * 0.05).sin()).collect();
        let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 2.0 * x - 0.5 * y).collect();
        let run = |v: &[f64]| simulate_playback(&plant, &SampledSignal::new(v.to_vec(), fs).unwrap(), loc, 0).unwrap();
        let (ya, yb, ym) = (run(&a), run(&b), run(&mix));
        let scale = ym.samples().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..ym.len() {
            let lin = 2.0 * ya.samples()[i] - 0.5 * yb.samples()[i];
            assert!((ym.samples()[i] - lin).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn modal_sum_is_reciprocal() {
        let plant = default_plant(Preset::Rich);
        let p = Location { x: 0.27, y: 0.61 };
        let mut swapped = plant.clone();
        swapped.actuator_pos = p;
        for f in [35.0, 140.0, 333.0, 790.0] {
            let a = plant.plate_response(p, f);
            let b = swapped.plate_response(plant.actuator_pos, f);
            assert!((a - b).norm() <= 1e-12 * a.norm().max(1e-300));
        }
    }

    #[test]
    fn response_is_continuous_in_location() {
        let plant = default_plant(Preset::Small);
        let p = Location { x: 0.41, y: 0.37 };
        let q = Location { x: 0.41 + 1e-6, y: 0.37 };
        let freqs = [50.0, 120.0, 210.0, 400.0];
        let a = frf_exact(&plant, p, &freqs).unwrap();
        let b = frf_exact(&plant, q, &freqs).unwrap();
        for (u, v) in a.values().iter().zip(b.values()) {
            assert!((u - v).norm() <= 1e-3 * u.norm());
        }
    }

    #[test]
    fn noise_is_reproducible() {
        let plant = default_plant(Preset::Small).with_noise(0.05);
        let cmd = SampledSignal::new(vec![1.0; 256], 4000.0).unwrap();
        let loc = Location { x: 0.5, y: 0.5 };
        let a = simulate_playback(&plant, &cmd, loc, 9).unwrap();
        let b = simulate_playback(&plant, &cmd, loc, 9).unwrap();
        let c = simulate_playback(&plant, &cmd, loc, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn playback_rejects_rate_mismatch() {
        let plant = default_plant(Preset::Small);
        let cmd = SampledSignal::zeros(10, 8000.0).unwrap();
        assert!(matches!(
            simulate_playback(&plant, &cmd, Location { x: 0.5, y: 0.5 }, 0),
            Err(Error::SampleRateMismatch { .. })
        ));
    }

    #[test]
    fn grid_uses_cell_centres() {
        let g = Location::grid(2);
        assert_eq!(g.len(), 4);
        assert_eq!(g[0], Location { x: 0.25, y: 0.25 });
        assert_eq!(g[3], Location { x: 0.75, y: 0.75 });
        assert!(Location::new(1.1, 0.0).is_err());
    }
}
