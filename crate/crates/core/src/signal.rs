//! Sampled signals, sweep excitation and the aligned NRMSE rendering metric.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::BandPass;

/// Uniformly sampled real-valued time series.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignal {
    samples: Vec<f64>,
    sample_rate: f64,
}

impl SampledSignal {
    pub fn new(samples: Vec<f64>, sample_rate: f64) -> Result<Self> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::invalid("sample_rate", format!("must be positive, got {sample_rate}")));
        }
        if samples.is_empty() {
            return Err(Error::invalid("samples", "signal must contain at least one sample"));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid("samples", format!("sample {i} is not finite")));
        }
        Ok(SampledSignal {
            samples,
            sample_rate,
        })
    }

    /// An all-zero signal of `len` samples.
    pub fn zeros(len: usize, sample_rate: f64) -> Result<Self> {
        Self::new(vec![0.0; len], sample_rate)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    pub fn rms(&self) -> f64 {
        rms(&self.samples)
    }

    /// Multiplies every sample by `gain`.
    pub fn scaled(&self, gain: f64) -> SampledSignal {
        SampledSignal {
            samples: self.samples.iter().map(|v| v * gain).collect(),
            sample_rate: self.sample_rate,
        }
    }

    /// Samples `[start, start + len)`, zero-filled past the end.
    pub fn window(&self, start: usize, len: usize) -> SampledSignal {
        let samples = (start..start + len)
            .map(|i| self.samples.get(i).copied().unwrap_or(0.0))
            .collect();
        SampledSignal {
            samples,
            sample_rate: self.sample_rate,
        }
    }
}

pub(crate) fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepLaw {
    Linear,
    Logarithmic,
}

impl std::str::FromStr for SweepLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" | "lin" => Ok(SweepLaw::Linear),
            "logarithmic" | "log" => Ok(SweepLaw::Logarithmic),
            other => Err(Error::invalid("law", format!("expected `linear` or `logarithmic`, got `{other}`"))),
        }
    }
}

/// Chirp excitation parameters. Frequencies in Hz, times in seconds, amplitude in volts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub f_start: f64,
    pub f_end: f64,
    pub duration: f64,
    pub amplitude: f64,
    pub law: SweepLaw,
    pub fade: f64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            f_start: 10.0,
            f_end: 500.0,
            duration: 5.0,
            amplitude: 1.0,
            law: SweepLaw::Linear,
            fade: 0.05,
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("f_start", self.f_start),
            ("f_end", self.f_end),
            ("duration", self.duration),
            ("amplitude", self.amplitude),
            ("fade", self.fade),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(Error::InvalidParameter {
                    field: name,
                    reason: format!("must be finite, got {v}"),
                });
            }
        }
        if !(self.f_start > 0.0 && self.f_start < self.f_end) {
            return Err(Error::invalid(
                "f_start",
                format!("need 0 < f_start < f_end, got {} and {}", self.f_start, self.f_end),
            ));
        }
        if self.duration <= 0.0 {
            return Err(Error::invalid("duration", "must be positive"));
        }
        if self.amplitude <= 0.0 {
            return Err(Error::invalid("amplitude", "must be positive"));
        }
        if self.fade < 0.0 || self.fade > self.duration / 2.0 {
            return Err(Error::invalid("fade", "must lie in [0, duration/2]"));
        }
        Ok(())
    }

    /// Instantaneous frequency at time `t` seconds.
    pub fn instantaneous_frequency(&self, t: f64) -> f64 {
        let r = t / self.duration;
        match self.law {
            SweepLaw::Linear => self.f_start + (self.f_end - self.f_start) * r,
            SweepLaw::Logarithmic => self.f_start * (self.f_end / self.f_start).powf(r),
        }
    }

    /// Closed-form phase (radians) at time `t`: the integral of 2π·f(t).
    pub fn phase(&self, t: f64) -> f64 {
        let (f0, f1, dur) = (self.f_start, self.f_end, self.duration);
        match self.law {
            SweepLaw::Linear => 2.0 * PI * (f0 * t + (f1 - f0) * t * t / (2.0 * dur)),
            SweepLaw::Logarithmic => {
                let k = (f1 / f0).ln();
                2.0 * PI * f0 * dur / k * ((k * t / dur).exp() - 1.0)
            }
        }
    }
}

/// Generates a chirp of `round(duration * sample_rate)` samples with raised-cosine fades.
pub fn generate_sweep(spec: &SweepSpec, sample_rate: f64) -> Result<SampledSignal> {
    spec.validate()?;
    if !(sample_rate.is_finite() && sample_rate > 0.0) {
        return Err(Error::invalid("sample_rate", format!("must be positive, got {sample_rate}")));
    }
    let nyquist = sample_rate / 2.0;
    if spec.f_end >= nyquist {
        return Err(Error::Nyquist {
            freq_hz: spec.f_end,
            nyquist_hz: nyquist,
        });
    }
    let n = (spec.duration * sample_rate).round() as usize;
    if n == 0 {
        return Err(Error::invalid("duration", "shorter than one sample"));
    }
    let samples = (0..n)
        .map(|i| spec.amplitude * spec.phase(i as f64 / sample_rate).sin())
        .collect();
    let sweep = SampledSignal::new(samples, sample_rate)?;
    apply_fade(&sweep, spec.fade)
}

/// Raised-cosine fade-in and fade-out over `fade` seconds at each end.
pub fn apply_fade(signal: &SampledSignal, fade: f64) -> Result<SampledSignal> {
    if !(fade.is_finite() && fade >= 0.0) {
        return Err(Error::invalid("fade", format!("must be non-negative, got {fade}")));
    }
    let fs = signal.sample_rate;
    let ramp = (fade * fs).round() as usize;
    let n = signal.len();
    if fade > signal.duration() / 2.0 || 2 * ramp > n {
        return Err(Error::invalid(
            "fade",
            format!("{fade} s exceeds half the signal duration {} s", signal.duration()),
        ));
    }
    let mut out = signal.samples.clone();
    for i in 0..ramp {
        let g = 0.5 * (1.0 - (PI * (i as f64 / fs) / fade).cos());
        out[i] *= g;
        out[n - 1 - i] *= g;
    }
    Ok(SampledSignal {
        samples: out,
        sample_rate: fs,
    })
}

/// Sine burst under a Hann (raised-cosine) window.
pub fn tone_burst(freq_hz: f64, duration: f64, amplitude: f64, sample_rate: f64) -> Result<SampledSignal> {
    if !(freq_hz > 0.0 && freq_hz < sample_rate / 2.0) {
        return Err(Error::Nyquist {
            freq_hz,
            nyquist_hz: sample_rate / 2.0,
        });
    }
    if !(duration > 0.0 && amplitude > 0.0) {
        return Err(Error::invalid("tone_burst", "duration and amplitude must be positive"));
    }
    let n = (duration * sample_rate).round() as usize;
    if n < 2 {
        return Err(Error::invalid("duration", "tone burst shorter than two samples"));
    }
    let samples = (0..n)
        .map(|i| {
            let w = 0.5 * (1.0 - (2.0 * PI * i as f64 / (n - 1) as f64).cos());
            amplitude * w * (2.0 * PI * freq_hz * i as f64 / sample_rate).sin()
        })
        .collect();
    SampledSignal::new(samples, sample_rate)
}

/// Normalized RMS error between `desired` and `measured` after band-pass
/// filtering, integer-lag alignment and least-squares gain matching.
///
/// Both signals are zero-padded to a common length before zero-phase
/// filtering so that shifted copies are treated identically. The lag search
/// covers `[-max_lag, max_lag]`; on equal correlation magnitude the smaller
/// `|lag|` wins.
pub fn nrmse_aligned(
    desired: &SampledSignal,
    measured: &SampledSignal,
    band: (f64, f64),
    max_lag: usize,
) -> Result<f64> {
    let fs = desired.sample_rate;
    if measured.sample_rate != fs {
        return Err(Error::SampleRateMismatch {
            left: fs,
            right: measured.sample_rate,
        });
    }
    let (lo, hi) = band;
    if !(lo > 0.0 && lo < hi && hi < fs / 2.0) {
        return Err(Error::invalid("band", format!("need 0 < low < high < fs/2, got ({lo}, {hi})")));
    }
    let min_len = desired.len().min(measured.len());
    if max_lag >= min_len {
        return Err(Error::invalid(
            "max_lag",
            format!("{max_lag} must be shorter than the shorter signal ({min_len} samples)"),
        ));
    }

    let bp = BandPass::butterworth4(lo, hi, fs);
    let pad = bp.settle_len() + max_lag;
    let total = desired.len().max(measured.len()) + 2 * pad;
    let prepare = |x: &[f64]| {
        let mut v = vec![0.0; total];
        v[pad..pad + x.len()].copy_from_slice(x);
        bp.filtfilt(&mut v);
        v
    };
    let d = prepare(&desired.samples);
    let m = prepare(&measured.samples);

    let d_energy: f64 = d.iter().map(|v| v * v).sum();
    let raw_energy: f64 = desired.samples.iter().map(|v| v * v).sum();
    if d_energy == 0.0 || d_energy <= 1e-24 * raw_energy {
        return Err(Error::NoInBandEnergy);
    }

    let correlate = |lag: isize| -> f64 {
        // measured delayed by `lag`: desired[n] pairs with measured[n + lag]
        let (start, end) = if lag >= 0 {
            (0, total - lag as usize)
        } else {
            ((-lag) as usize, total)
        };
        (start..end)
            .map(|n| d[n] * m[(n as isize + lag) as usize])
            .sum()
    };

    let mut best_lag = 0isize;
    let mut best_corr = correlate(0);
    for k in 1..=max_lag as isize {
        for lag in [-k, k] {
            let c = correlate(lag);
            if c.abs() > best_corr.abs() {
                best_corr = c;
                best_lag = lag;
            }
        }
    }

    let shifted: Vec<f64> = (0..total as isize)
        .map(|n| {
            let j = n + best_lag;
            if j >= 0 && (j as usize) < total {
                m[j as usize]
            } else {
                0.0
            }
        })
        .collect();
    let s_energy: f64 = shifted.iter().map(|v| v * v).sum();
    let gain = if s_energy > 0.0 {
        d.iter().zip(&shifted).map(|(a, b)| a * b).sum::<f64>() / s_energy
    } else {
        0.0
    };
    let residual: f64 = d
        .iter()
        .zip(&shifted)
        .map(|(a, b)| {
            let e = a - gain * b;
            e * e
        })
        .sum();
    Ok((residual / d_energy).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_spec() -> SweepSpec {
        SweepSpec {
            f_start: 10.0,
            f_end: 500.0,
            duration: 1.0,
            amplitude: 1.0,
            law: SweepLaw::Linear,
            fade: 0.0,
        }
    }

    #[test]
    fn sweep_starts_at_zero() {
        let s = generate_sweep(&linear_spec(), 4000.0).unwrap();
        assert_eq!(s.samples()[0], 0.0);
        assert_eq!(s.len(), 4000);
    }

    #[test]
    fn linear_midpoint_frequency() {
        assert_eq!(linear_spec().instantaneous_frequency(0.5), 255.0);
    }

    #[test]
    fn linear_sweep_matches_analytic_phase() {
        let spec = linear_spec();
        let fs = 4000.0;
        let s = generate_sweep(&spec, fs).unwrap();
        let dur = spec.duration;
        for (i, v) in s.samples().iter().enumerate() {
            let t = i as f64 / fs;
            let phi = 2.0 * PI * (10.0 * t + 490.0 * t * t / (2.0 * dur));
            assert!((v - phi.sin()).abs() <= 1e-12 * phi.sin().abs().max(1.0));
        }
    }

    #[test]
    fn log_sweep_zero_crossings_match_integrated_phase() {
        let spec = SweepSpec {
            f_start: 10.0,
            f_end: 1000.0,
            duration: 2.0,
            amplitude: 1.0,
            law: SweepLaw::Logarithmic,
            fade: 0.0,
        };
        let fs = 8000.0;
        let s = generate_sweep(&spec, fs).unwrap();
        let x = s.samples();
        let crossings = x
            .windows(2)
            .filter(|w| (w[0] > 0.0 && w[1] <= 0.0) || (w[0] < 0.0 && w[1] >= 0.0))
            .count();
        // Oracle: trapezoidal integration of f(t) on a fine grid, independent of the closed form.
        let steps = 2_000_000;
        let dt = spec.duration / steps as f64;
        let f = |t: f64| 10.0 * 100f64.powf(t / 2.0);
        let mut cycles = 0.0;
        for k in 0..steps {
            cycles += 0.5 * (f(k as f64 * dt) + f((k + 1) as f64 * dt)) * dt;
        }
        let expected = (2.0 * PI * cycles / PI).floor() as i64;
        assert!((crossings as i64 - expected).abs() <= 1, "{crossings} vs {expected}");
    }

    #[test]
    fn sweep_rejects_nyquist_violation() {
        let spec = SweepSpec {
            f_end: 2000.0,
            ..linear_spec()
        };
        assert!(matches!(generate_sweep(&spec, 4000.0), Err(Error::Nyquist { .. })));
    }

    #[test]
    fn sweep_rejects_non_finite_fields() {
        let spec = SweepSpec {
            amplitude: f64::NAN,
            ..linear_spec()
        };
        assert!(generate_sweep(&spec, 4000.0).is_err());
    }

    #[test]
    fn zero_fade_is_identity() {
        let s = SampledSignal::new(vec![1.0, -2.0, 3.0, 0.5], 10.0).unwrap();
        assert_eq!(apply_fade(&s, 0.0).unwrap(), s);
    }

    #[test]
    fn fade_zeroes_endpoints_and_halves_midpoint() {
        let fs = 1000.0;
        let s = SampledSignal::new(vec![1.0; 1000], fs).unwrap();
        let f = apply_fade(&s, 0.1).unwrap();
        assert_eq!(f.samples()[0], 0.0);
        assert_eq!(f.samples()[999], 0.0);
        assert!((f.samples()[50] - 0.5).abs() < 1e-12);
        assert_eq!(f.samples()[500], 1.0);
    }

    #[test]
    fn fade_longer_than_half_is_rejected() {
        let s = SampledSignal::new(vec![1.0; 100], 100.0).unwrap();
        assert!(apply_fade(&s, 0.6).is_err());
    }

    #[test]
    fn signal_invariants_enforced() {
        assert!(SampledSignal::new(vec![], 10.0).is_err());
        assert!(SampledSignal::new(vec![1.0], 0.0).is_err());
        assert!(SampledSignal::new(vec![f64::INFINITY], 10.0).is_err());
    }

    fn test_burst() -> SampledSignal {
        tone_burst(120.0, 0.2, 1.0, 4000.0).unwrap()
    }

    #[test]
    fn nrmse_identity_is_zero() {
        let d = test_burst();
        assert!(nrmse_aligned(&d, &d, (20.0, 500.0), 50).unwrap() < 1e-12);
    }

    #[test]
    fn nrmse_compensates_gain_and_delay() {
        let d = test_burst();
        let mut delayed = vec![0.0; 7];
        delayed.extend(d.samples().iter().map(|v| 2.0 * v));
        let m = SampledSignal::new(delayed, 4000.0).unwrap();
        let e = nrmse_aligned(&d, &m, (20.0, 500.0), 10).unwrap();
        assert!(e < 1e-9, "{e}");
    }

    #[test]
    fn nrmse_of_silence_is_one() {
        let d = test_burst();
        let m = SampledSignal::zeros(d.len(), 4000.0).unwrap();
        assert_eq!(nrmse_aligned(&d, &m, (20.0, 500.0), 10).unwrap(), 1.0);
    }

    #[test]
    fn nrmse_requires_in_band_energy() {
        let d = SampledSignal::zeros(400, 4000.0).unwrap();
        assert!(matches!(
            nrmse_aligned(&d, &d, (20.0, 500.0), 10),
            Err(Error::NoInBandEnergy)
        ));
    }

    #[test]
    fn nrmse_rejects_rate_mismatch() {
        let d = test_burst();
        let m = SampledSignal::new(d.samples().to_vec(), 8000.0).unwrap();
        assert!(matches!(
            nrmse_aligned(&d, &m, (20.0, 500.0), 10),
            Err(Error::SampleRateMismatch { .. })
        ));
    }
}
