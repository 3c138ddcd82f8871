//! Regularized inverse filter design and input-to-command adaptation.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::SampledSignal;
use crate::tf::RationalTF;

/// Band-edge transition width as a fraction of the edge frequency.
const EDGE_FRACTION: f64 = 0.05;

/// Default gain cap, 40 dB.
pub const DEFAULT_G_MAX: f64 = 100.0;

/// Default regularization relative to the median in-band `|H|²`.
pub const DEFAULT_BETA_RATIO: f64 = 1e-4;

/// Linear-phase FIR approximation of the regularized inverse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InverseFilter {
    pub taps: Vec<f64>,
    /// Group delay in samples, `taps.len() / 2`.
    pub latency: usize,
    pub band: (f64, f64),
    pub beta: f64,
    pub g_max: f64,
    pub sample_rate: f64,
}

impl InverseFilter {
    /// Wraps externally stored taps (e.g. read from a file).
    pub fn from_taps(taps: Vec<f64>, sample_rate: f64) -> Result<Self> {
        if taps.is_empty() || taps.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("taps", "must be a non-empty list of finite values"));
        }
        let latency = taps.len() / 2;
        Ok(InverseFilter {
            taps,
            latency,
            band: (0.0, sample_rate / 2.0),
            beta: 0.0,
            g_max: f64::INFINITY,
            sample_rate,
        })
    }

    /// Frequency response with the latency removed.
    pub fn response_at(&self, f: f64) -> Complex64 {
        let w = -2.0 * PI * f / self.sample_rate;
        self.taps
            .iter()
            .enumerate()
            .map(|(n, &t)| t * Complex64::from_polar(1.0, w * (n as f64 - self.latency as f64)))
            .sum()
    }
}

fn band_taper(f: f64, low: f64, high: f64) -> f64 {
    let w_lo = EDGE_FRACTION * low;
    let w_hi = EDGE_FRACTION * high;
    if f >= low && f <= high {
        1.0
    } else if f < low && f > low - w_lo {
        0.5 * (1.0 - (PI * (f - (low - w_lo)) / w_lo).cos())
    } else if f > high && f < high + w_hi {
        0.5 * (1.0 + (PI * (f - high) / w_hi).cos())
    } else {
        0.0
    }
}

fn check_band(band: (f64, f64), fs: f64) -> Result<()> {
    let (lo, hi) = band;
    if !(lo >= 0.0 && lo < hi && hi <= fs / 2.0) {
        return Err(Error::invalid(
            "band",
            format!("need 0 <= low < high <= fs/2, got ({lo}, {hi})"),
        ));
    }
    Ok(())
}

/// Frequencies `k·fs/fir_len` for `k = 0..=fir_len/2`.
pub fn design_grid(fir_len: usize, sample_rate: f64) -> Vec<f64> {
    (0..=fir_len / 2)
        .map(|k| k as f64 * sample_rate / fir_len as f64)
        .collect()
}

/// `ratio × median |H|²` over the design-grid bins inside `band`.
pub fn default_beta(tf: &RationalTF, band: (f64, f64), fir_len: usize, ratio: f64) -> f64 {
    let mut mags: Vec<f64> = design_grid(fir_len, tf.sample_rate())
        .into_iter()
        .filter(|&f| f >= band.0 && f <= band.1)
        .map(|f| tf.response_at(f).norm_sqr())
        .collect();
    if mags.is_empty() {
        return 0.0;
    }
    mags.sort_by(|a, b| a.total_cmp(b));
    let n = mags.len();
    let median = if n % 2 == 1 {
        mags[n / 2]
    } else {
        0.5 * (mags[n / 2 - 1] + mags[n / 2])
    };
    ratio * median
}

/// Designs `C(f) = conj(H)/(|H|² + β)` inside `band`, capped at `g_max` and
/// faded to zero outside the band over 5% of each edge frequency, then
/// realized as a `fir_len`-tap linear-phase FIR (Hann-tapered, centred at
/// `fir_len / 2`).
pub fn design_inverse(
    tf: &RationalTF,
    band: (f64, f64),
    beta: f64,
    g_max: f64,
    fir_len: usize,
) -> Result<InverseFilter> {
    let fs = tf.sample_rate();
    check_band(band, fs)?;
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::invalid("beta", format!("must be finite and >= 0, got {beta}")));
    }
    if !(g_max > 0.0 && g_max.is_finite()) {
        return Err(Error::invalid("g_max", format!("must be finite and > 0, got {g_max}")));
    }
    if fir_len < 64 || !fir_len.is_multiple_of(2) {
        return Err(Error::invalid("fir_len", format!("must be even and >= 64, got {fir_len}")));
    }

    let n = fir_len;
    let mut spectrum = vec![Complex64::new(0.0, 0.0); n];
    for (k, f) in design_grid(n, fs).into_iter().enumerate() {
        let taper = band_taper(f, band.0, band.1);
        if taper == 0.0 {
            continue;
        }
        let h = tf.response_at(f);
        let denom = h.norm_sqr() + beta;
        let mut c = if denom > 0.0 {
            h.conj() / denom
        } else {
            // |H| = 0 with no regularization: the cap decides, phase is arbitrary.
            Complex64::new(g_max, 0.0)
        };
        let mag = c.norm();
        if mag > g_max {
            c *= g_max / mag;
        }
        c *= taper;
        if k == 0 || 2 * k == n {
            c = Complex64::new(c.re, 0.0);
        }
        spectrum[k] = c;
        if k != 0 && 2 * k != n {
            spectrum[n - k] = c.conj();
        }
    }

    FftPlanner::<f64>::new().plan_fft_inverse(n).process(&mut spectrum);
    let scale = 1.0 / n as f64;
    let peak = spectrum.iter().map(|c| c.re.abs()).fold(0.0, f64::max);
    debug_assert!(
        spectrum.iter().all(|c| (c.im * scale).abs() < 1e-12 * (1.0 + peak * scale)),
        "inverse filter spectrum is not conjugate-symmetric"
    );

    let latency = n / 2;
    let taps = (0..n)
        .map(|i| {
            let hann = 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos();
            spectrum[(i + n - latency) % n].re * scale * hann
        })
        .collect();
    Ok(InverseFilter {
        taps,
        latency,
        band,
        beta,
        g_max,
        sample_rate: fs,
    })
}

/// Full linear convolution of `input` with the filter taps; the result is
/// `input.len() + taps.len() − 1` samples long and delayed by `latency`.
pub fn adapt_signal(input: &SampledSignal, inv: &InverseFilter) -> Result<SampledSignal> {
    if input.sample_rate() != inv.sample_rate {
        return Err(Error::SampleRateMismatch {
            left: input.sample_rate(),
            right: inv.sample_rate,
        });
    }
    let x = input.samples();
    let h = &inv.taps;
    let mut out = vec![0.0; x.len() + h.len() - 1];
    for (i, &xi) in x.iter().enumerate() {
        if xi == 0.0 {
            continue;
        }
        for (j, &hj) in h.iter().enumerate() {
            out[i + j] += xi * hj;
        }
    }
    SampledSignal::new(out, input.sample_rate())
}
