//! Fourth-order Butterworth sections and zero-phase (forward-backward) filtering.

use std::f64::consts::PI;

/// Pole quality factors of a 4th-order Butterworth prototype.
const BUTTER4_Q: [f64; 2] = [0.541_196_100_146_197, 1.306_562_964_876_376_6];

#[derive(Debug, Clone, Copy)]
pub(crate) struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
}

impl Biquad {
    fn lowpass(fc: f64, q: f64, fs: f64) -> Self {
        let w0 = 2.0 * PI * fc / fs;
        let (sin, cos) = w0.sin_cos();
        let alpha = sin / (2.0 * q);
        let a0 = 1.0 + alpha;
        let b1 = (1.0 - cos) / a0;
        Biquad {
            b: [b1 / 2.0, b1, b1 / 2.0],
            a: [-2.0 * cos / a0, (1.0 - alpha) / a0],
        }
    }

    fn highpass(fc: f64, q: f64, fs: f64) -> Self {
        let w0 = 2.0 * PI * fc / fs;
        let (sin, cos) = w0.sin_cos();
        let alpha = sin / (2.0 * q);
        let a0 = 1.0 + alpha;
        let b1 = (1.0 + cos) / a0;
        Biquad {
            b: [b1 / 2.0, -b1, b1 / 2.0],
            a: [-2.0 * cos / a0, (1.0 - alpha) / a0],
        }
    }

    fn run(&self, x: &mut [f64]) {
        let (mut s1, mut s2) = (0.0, 0.0);
        for v in x.iter_mut() {
            let input = *v;
            let y = self.b[0] * input + s1;
            s1 = self.b[1] * input - self.a[0] * y + s2;
            s2 = self.b[2] * input - self.a[1] * y;
            *v = y;
        }
    }
}

/// Cascade of a 4th-order Butterworth high-pass at `low` and low-pass at `high`.
#[derive(Debug, Clone)]
pub(crate) struct BandPass {
    sections: Vec<Biquad>,
    low_hz: f64,
    fs: f64,
}

impl BandPass {
    pub(crate) fn butterworth4(low_hz: f64, high_hz: f64, fs: f64) -> Self {
        let mut sections = Vec::with_capacity(4);
        for q in BUTTER4_Q {
            sections.push(Biquad::highpass(low_hz, q, fs));
        }
        for q in BUTTER4_Q {
            sections.push(Biquad::lowpass(high_hz, q, fs));
        }
        BandPass {
            sections,
            low_hz,
            fs,
        }
    }

    /// Zero padding needed on each side so the filter transients have decayed
    /// below double precision before the signal boundary (twelve periods of
    /// the lower band edge).
    pub(crate) fn settle_len(&self) -> usize {
        (12.0 * self.fs / self.low_hz).ceil() as usize
    }

    fn run(&self, x: &mut [f64]) {
        for s in &self.sections {
            s.run(x);
        }
    }

    /// Forward-backward filtering in place. The caller is responsible for padding.
    pub(crate) fn filtfilt(&self, x: &mut [f64]) {
        self.run(x);
        x.reverse();
        self.run(x);
        x.reverse();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn response(bp: &BandPass, f: f64) -> f64 {
        let z = Complex64::from_polar(1.0, -2.0 * PI * f / bp.fs);
        bp.sections
            .iter()
            .map(|s| {
                let num = s.b[0] + s.b[1] * z + s.b[2] * z * z;
                let den = 1.0 + s.a[0] * z + s.a[1] * z * z;
                (num / den).norm()
            })
            .product()
    }

    #[test]
    fn band_edges_are_minus_three_db() {
        let bp = BandPass::butterworth4(20.0, 500.0, 4000.0);
        let half_power = std::f64::consts::FRAC_1_SQRT_2;
        assert!((response(&bp, 20.0) - half_power).abs() < 1e-3);
        assert!((response(&bp, 500.0) - half_power).abs() < 1e-2);
        assert!((response(&bp, 100.0) - 1.0).abs() < 1e-3);
        assert!(response(&bp, 2.0) < 1e-3);
    }

    #[test]
    fn filtfilt_of_symmetric_impulse_is_symmetric() {
        let bp = BandPass::butterworth4(50.0, 400.0, 4000.0);
        let n = 2 * bp.settle_len() + 1;
        let mut x = vec![0.0; n];
        x[n / 2] = 1.0;
        bp.filtfilt(&mut x);
        for i in 0..n / 2 {
            assert!((x[i] - x[n - 1 - i]).abs() < 1e-12);
        }
    }
}
