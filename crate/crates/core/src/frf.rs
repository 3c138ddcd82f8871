//! Complex frequency-response samples on a frequency grid.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Complex FRF samples, in (m/s²)/V for device responses, with optional per-bin coherence.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyResponse {
    freqs: Vec<f64>,
    values: Vec<Complex64>,
    coherence: Option<Vec<f64>>,
    sample_rate: f64,
}

impl FrequencyResponse {
    /// `sample_rate` is that of the signals the response describes; every
    /// frequency must lie in `[0, sample_rate / 2]`.
    pub fn new(
        freqs: Vec<f64>,
        values: Vec<Complex64>,
        coherence: Option<Vec<f64>>,
        sample_rate: f64,
    ) -> Result<Self> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::invalid("sample_rate", format!("must be positive, got {sample_rate}")));
        }
        if freqs.len() != values.len() {
            return Err(Error::invalid(
                "values",
                format!("{} values for {} frequencies", values.len(), freqs.len()),
            ));
        }
        if freqs.iter().any(|f| !f.is_finite() || *f < 0.0) {
            return Err(Error::invalid("f_hz", "frequencies must be finite and non-negative"));
        }
        if let Some(&f) = freqs.iter().find(|&&f| f > sample_rate / 2.0) {
            return Err(Error::Nyquist {
                freq_hz: f,
                nyquist_hz: sample_rate / 2.0,
            });
        }
        if let Some(i) = freqs.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::invalid(
                "f_hz",
                format!("frequencies must be strictly increasing (row {})", i + 1),
            ));
        }
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::invalid("values", "response values must be finite"));
        }
        if let Some(c) = &coherence {
            if c.len() != freqs.len() {
                return Err(Error::invalid("coherence", "length differs from the frequency grid"));
            }
            if c.iter().any(|g| !(0.0..=1.0).contains(g)) {
                return Err(Error::invalid("coherence", "values must lie in [0, 1]"));
            }
        }
        Ok(FrequencyResponse {
            freqs,
            values,
            coherence,
            sample_rate,
        })
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn coherence(&self) -> Option<&[f64]> {
        self.coherence.as_deref()
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    pub fn without_coherence(mut self) -> Self {
        self.coherence = None;
        self
    }

    /// Keeps only bins inside `[low, high]`.
    pub fn restrict(&self, low: f64, high: f64) -> FrequencyResponse {
        let keep: Vec<usize> = (0..self.len())
            .filter(|&i| self.freqs[i] >= low && self.freqs[i] <= high)
            .collect();
        FrequencyResponse {
            freqs: keep.iter().map(|&i| self.freqs[i]).collect(),
            values: keep.iter().map(|&i| self.values[i]).collect(),
            coherence: self
                .coherence
                .as_ref()
                .map(|c| keep.iter().map(|&i| c[i]).collect()),
            sample_rate: self.sample_rate,
        }
    }
}

/// `sqrt(Σ|a−b|² / Σ|b|²)` over the bins where `mask` is set.
pub fn rms_relative_error(approx: &[Complex64], reference: &[Complex64], mask: &[bool]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for ((a, b), &m) in approx.iter().zip(reference).zip(mask) {
        if m {
            num += (a - b).norm_sqr();
            den += b.norm_sqr();
        }
    }
    if den == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (num / den).sqrt()
    }
}
