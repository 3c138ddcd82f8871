//! Nonparametric identification: Welch-averaged H1 estimate and coherence.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::frf::FrequencyResponse;
use crate::signal::SampledSignal;

/// H1 estimate together with the number of averaged segments.
#[derive(Debug, Clone)]
pub struct FrfEstimate {
    pub frf: FrequencyResponse,
    pub segments: usize,
}

impl FrfEstimate {
    /// Coherence is only meaningful when at least two segments were averaged;
    /// with a single segment it is reported as all ones.
    pub fn coherence_reliable(&self) -> bool {
        self.segments >= 2
    }
}

fn hann_periodic(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// Welch-averaged H1 estimator `S_xy / S_xx` with Hann-windowed segments.
///
/// Signals of unequal length are zero-padded to the longer one so a recording
/// that includes the ring-down tail pairs with the shorter excitation. Both
/// ends are also padded so segments overhang the record; with a Hann window
/// at 75% overlap the squared windows then sum to a constant over the whole
/// record, which cancels the first-order bias a swept excitation otherwise
/// picks up from the window slope. Bins with no input power are returned as
/// zero with zero coherence.
pub fn estimate_frf(
    input: &SampledSignal,
    output: &SampledSignal,
    segment_len: usize,
    overlap: f64,
) -> Result<FrfEstimate> {
    let fs = input.sample_rate();
    if output.sample_rate() != fs {
        return Err(Error::SampleRateMismatch {
            left: fs,
            right: output.sample_rate(),
        });
    }
    if segment_len < 2 || !segment_len.is_power_of_two() {
        return Err(Error::invalid(
            "segment_len",
            format!("must be a power of two >= 2, got {segment_len}"),
        ));
    }
    if !(0.0..=0.9).contains(&overlap) {
        return Err(Error::invalid("overlap", format!("must lie in [0, 0.9], got {overlap}")));
    }
    let len = input.len().max(output.len());
    if len < segment_len {
        return Err(Error::TooShort {
            len,
            needed: segment_len,
        });
    }
    let hop = ((segment_len as f64 * (1.0 - overlap)).round() as usize).max(1);
    // Zero-pad both ends by `segment_len - hop` so every recorded sample is
    // covered by the same set of window phases as an interior sample.
    let edge = segment_len - hop;
    let padded = |s: &SampledSignal| {
        let mut v = vec![0.0; edge];
        v.extend_from_slice(s.samples());
        v.resize(len + 2 * edge, 0.0);
        v
    };
    let x = padded(input);
    let y = padded(output);
    let segments = 1 + (x.len() - segment_len) / hop;
    let window = hann_periodic(segment_len);
    let bins = segment_len / 2 + 1;

    let fft = FftPlanner::<f64>::new().plan_fft_forward(segment_len);
    let mut sxx = vec![0.0; bins];
    let mut syy = vec![0.0; bins];
    let mut sxy = vec![Complex64::new(0.0, 0.0); bins];
    let mut bx = vec![Complex64::new(0.0, 0.0); segment_len];
    let mut by = vec![Complex64::new(0.0, 0.0); segment_len];
    for s in 0..segments {
        let start = s * hop;
        for i in 0..segment_len {
            bx[i] = Complex64::new(x[start + i] * window[i], 0.0);
            by[i] = Complex64::new(y[start + i] * window[i], 0.0);
        }
        fft.process(&mut bx);
        fft.process(&mut by);
        for k in 0..bins {
            sxx[k] += bx[k].norm_sqr();
            syy[k] += by[k].norm_sqr();
            sxy[k] += bx[k].conj() * by[k];
        }
    }

    let floor = sxx.iter().cloned().fold(0.0, f64::max) * 1e-24;
    let mut values = Vec::with_capacity(bins);
    let mut coherence = Vec::with_capacity(bins);
    for k in 0..bins {
        if sxx[k] <= floor || sxx[k] == 0.0 {
            values.push(Complex64::new(0.0, 0.0));
            coherence.push(0.0);
            continue;
        }
        values.push(sxy[k] / sxx[k]);
        let g = if segments < 2 {
            1.0
        } else if syy[k] > 0.0 {
            (sxy[k].norm_sqr() / (sxx[k] * syy[k])).clamp(0.0, 1.0)
        } else {
            0.0
        };
        coherence.push(g);
    }
    let freqs = (0..bins).map(|k| k as f64 * fs / segment_len as f64).collect();
    Ok(FrfEstimate {
        frf: FrequencyResponse::new(freqs, values, Some(coherence), fs)?,
        segments,
    })
}

/// Bins whose coherence reaches `threshold` and whose frequency lies in `band`.
pub fn band_mask(frf: &FrequencyResponse, coherence_threshold: f64, band: (f64, f64)) -> Result<Vec<bool>> {
    let coherence = frf.coherence().ok_or(Error::MissingCoherence)?;
    if !(0.0..=1.0).contains(&coherence_threshold) {
        return Err(Error::invalid("coherence_threshold", "must lie in [0, 1]"));
    }
    Ok(frf
        .freqs()
        .iter()
        .zip(coherence)
        .map(|(&f, &g)| g >= coherence_threshold && f >= band.0 && f <= band.1)
        .collect())
}
