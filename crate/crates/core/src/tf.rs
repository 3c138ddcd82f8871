//! Discrete-time rational transfer functions: evaluation, Levy /
//! Sanathanan–Koerner fitting, order selection and pole stabilization.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frf::{rms_relative_error, FrequencyResponse};

/// Largest admissible denominator root magnitude.
pub const STABILITY_MARGIN: f64 = 1.0 - 1e-6;

/// Radius unstable poles are pulled back to; strictly inside the margin so
/// re-expansion round-off cannot push a root past it.
const CLAMP_RADIUS: f64 = STABILITY_MARGIN * STABILITY_MARGIN;

const SK_MAX_ITERS: usize = 20;
const SK_COEFF_TOL: f64 = 1e-10;

/// `H(z) = Σ b[k] z^-k / Σ a[k] z^-k` with `a[0] = 1` and all poles inside
/// `|z| <= 1 - 1e-6`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RationalTF {
    b: Vec<f64>,
    a: Vec<f64>,
    sample_rate: f64,
}

impl RationalTF {
    /// Validates every invariant, including the pole-radius bound.
    pub fn new(b: Vec<f64>, a: Vec<f64>, sample_rate: f64) -> Result<Self> {
        if b.is_empty() || a.is_empty() {
            return Err(Error::invalid("tf", "coefficient vectors must be non-empty"));
        }
        if b.iter().chain(&a).any(|v| !v.is_finite()) {
            return Err(Error::invalid("tf", "coefficients must be finite"));
        }
        if a[0] != 1.0 {
            return Err(Error::invalid("a", format!("a[0] must be 1, got {}", a[0])));
        }
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::invalid("sample_rate", "must be positive"));
        }
        let tf = RationalTF { b, a, sample_rate };
        let r = tf.max_pole_radius()?;
        if r > STABILITY_MARGIN {
            return Err(Error::invalid("a", format!("pole radius {r} exceeds {STABILITY_MARGIN}")));
        }
        Ok(tf)
    }

    /// Identity system `b = [1], a = [1]`.
    pub fn unity(sample_rate: f64) -> Self {
        RationalTF {
            b: vec![1.0],
            a: vec![1.0],
            sample_rate,
        }
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    /// Numerator and denominator orders.
    pub fn orders(&self) -> (usize, usize) {
        (self.b.len() - 1, self.a.len() - 1)
    }

    pub fn poles(&self) -> Result<Vec<Complex64>> {
        polynomial_roots(&self.a)
    }

    pub fn max_pole_radius(&self) -> Result<f64> {
        Ok(self.poles()?.iter().map(|p| p.norm()).fold(0.0, f64::max))
    }

    /// Response at any frequency, including above Nyquist.
    pub fn response_at(&self, f: f64) -> Complex64 {
        let w = Complex64::from_polar(1.0, -2.0 * PI * f / self.sample_rate);
        horner(&self.b, w) / horner(&self.a, w)
    }
}

/// `Σ c[k] w^k` for real coefficients.
fn horner(c: &[f64], w: Complex64) -> Complex64 {
    c.iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &ck| acc * w + ck)
}

/// Roots in `z` of `Σ c[k] z^-k`, i.e. of `c[0] z^n + c[1] z^(n-1) + … + c[n]`,
/// from the eigenvalues of the companion matrix.
pub fn polynomial_roots(c: &[f64]) -> Result<Vec<Complex64>> {
    if c.is_empty() || c[0] == 0.0 {
        return Err(Error::DegenerateDenominator);
    }
    let mut end = c.len();
    while end > 1 && c[end - 1] == 0.0 {
        end -= 1;
    }
    let zeros_at_origin = c.len() - end;
    let n = end - 1;
    let mut roots = vec![Complex64::new(0.0, 0.0); zeros_at_origin];
    if n == 0 {
        return Ok(roots);
    }
    let mut companion = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        companion[(0, j)] = -c[j + 1] / c[0];
    }
    for i in 1..n {
        companion[(i, i - 1)] = 1.0;
    }
    let eig = companion.complex_eigenvalues();
    if eig.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::Singular("companion eigenvalues did not converge".into()));
    }
    roots.extend(eig.iter().copied());
    Ok(roots)
}

/// Coefficients of `Π (1 − r z^-1)`, real parts only.
fn poly_from_roots(roots: &[Complex64]) -> Vec<f64> {
    let mut p = vec![Complex64::new(1.0, 0.0)];
    for r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); p.len() + 1];
        for (k, c) in p.iter().enumerate() {
            next[k] += c;
            next[k + 1] -= c * r;
        }
        p = next;
    }
    p.into_iter().map(|c| c.re).collect()
}

/// Evaluates `tf` on `freqs` (Hz, within `[0, fs/2]`).
pub fn evaluate_tf(tf: &RationalTF, freqs: &[f64]) -> Result<FrequencyResponse> {
    let nyquist = tf.sample_rate / 2.0;
    if let Some(&f) = freqs.iter().find(|&&f| !(0.0..=nyquist).contains(&f)) {
        return Err(Error::Nyquist {
            freq_hz: f,
            nyquist_hz: nyquist,
        });
    }
    let values = freqs.iter().map(|&f| tf.response_at(f)).collect();
    FrequencyResponse::new(freqs.to_vec(), values, None, tf.sample_rate)
}

/// Moves every pole with `|p| > 1 − 1e-6` inside the stability margin.
///
/// A pole outside the unit circle is reflected to `1/p̄` and the numerator is
/// scaled by `1/|p|`, which leaves `|H|` on the unit circle unchanged (the
/// denominator factor shrinks by `|p|`). Poles that remain too close to the
/// circle are pulled radially to `(1 − 1e-6)²`. Coefficients are normalized
/// so `a[0] = 1`; already-stable inputs are returned without re-expansion.
pub fn stabilize(b: &[f64], a: &[f64], sample_rate: f64) -> Result<RationalTF> {
    if a.is_empty() || a.iter().all(|&v| v == 0.0) {
        return Err(Error::DegenerateDenominator);
    }
    if a[0] == 0.0 {
        return Err(Error::invalid("a", "leading denominator coefficient must be non-zero"));
    }
    if b.is_empty() {
        return Err(Error::invalid("b", "numerator must be non-empty"));
    }
    let a0 = a[0];
    let mut b: Vec<f64> = b.iter().map(|v| v / a0).collect();
    let a: Vec<f64> = a.iter().map(|v| v / a0).collect();
    if b.iter().chain(&a).any(|v| !v.is_finite()) {
        return Err(Error::invalid("tf", "coefficients must be finite"));
    }

    let roots = polynomial_roots(&a)?;
    if roots.iter().all(|p| p.norm() <= STABILITY_MARGIN) {
        return Ok(RationalTF { b, a, sample_rate });
    }

    let mut gain = 1.0;
    let moved: Vec<Complex64> = roots
        .iter()
        .map(|&p| {
            let r = p.norm();
            if r <= STABILITY_MARGIN {
                return p;
            }
            let mut q = p;
            if r > 1.0 {
                q = 1.0 / p.conj();
                gain /= r;
            }
            if q.norm() > CLAMP_RADIUS {
                q *= CLAMP_RADIUS / q.norm();
            }
            q
        })
        .collect();
    let a = poly_from_roots(&moved);
    for v in b.iter_mut() {
        *v *= gain;
    }
    Ok(RationalTF { b, a, sample_rate })
}

struct FitProblem {
    /// `z_i^-1` on the masked bins.
    w: Vec<Complex64>,
    h: Vec<Complex64>,
    /// Per-bin `1/|H_i|` so the criterion is relative error.
    scale: Vec<f64>,
    nb: usize,
    na: usize,
}

impl FitProblem {
    fn unknowns(&self) -> usize {
        self.nb + 1 + self.na
    }

    /// Weighted Levy equations `w_i (B(z_i) − H_i (A(z_i) − 1)) = w_i H_i`,
    /// split into real and imaginary rows so the solution is real.
    fn solve(&self, weights: &[f64]) -> Result<Vec<f64>> {
        let rows = 2 * self.h.len();
        let cols = self.unknowns();
        let mut m = DMatrix::<f64>::zeros(rows, cols);
        let mut rhs = DVector::<f64>::zeros(rows);
        for (i, ((&w, &h), (&sk, &rel))) in self.w.iter().zip(&self.h).zip(weights.iter().zip(&self.scale)).enumerate() {
            let wt = sk * rel;
            let mut wk = Complex64::new(1.0, 0.0);
            for k in 0..=self.nb.max(self.na) {
                if k <= self.nb {
                    let v = wk * wt;
                    m[(2 * i, k)] = v.re;
                    m[(2 * i + 1, k)] = v.im;
                }
                if k >= 1 && k <= self.na {
                    let v = -h * wk * wt;
                    m[(2 * i, self.nb + k)] = v.re;
                    m[(2 * i + 1, self.nb + k)] = v.im;
                }
                wk *= w;
            }
            let r = h * wt;
            rhs[2 * i] = r.re;
            rhs[2 * i + 1] = r.im;
        }

        let scales: Vec<f64> = (0..cols)
            .map(|j| {
                let n = m.column(j).norm();
                if n > 0.0 {
                    n
                } else {
                    1.0
                }
            })
            .collect();
        for (j, s) in scales.iter().enumerate() {
            m.column_mut(j).scale_mut(1.0 / s);
        }
        if m.iter().chain(rhs.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Singular("non-finite entries in the least-squares system".into()));
        }
        let svd = m.svd(true, true);
        let smax = svd.singular_values.max();
        if smax == 0.0 {
            return Err(Error::Singular("all columns of the least-squares system vanish".into()));
        }
        let x = svd
            .solve(&rhs, smax * 1e-13)
            .map_err(|e| Error::Singular(e.to_string()))?;
        Ok(x.iter().zip(&scales).map(|(v, s)| v / s).collect())
    }

    fn split(&self, theta: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let b = theta[..=self.nb].to_vec();
        let mut a = vec![1.0];
        a.extend_from_slice(&theta[self.nb + 1..]);
        (b, a)
    }

    fn residual(&self, tf: &RationalTF) -> f64 {
        self.w
            .iter()
            .zip(&self.h)
            .zip(&self.scale)
            .map(|((&w, &h), &rel)| ((horner(&tf.b, w) / horner(&tf.a, w) - h) * rel).norm_sqr())
            .sum()
    }
}

/// `1/|H_i|`, floored at `1e-12 × max|H|` so vanishing bins stay finite.
fn relative_weights(h: &[Complex64]) -> Vec<f64> {
    let peak = h.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if peak == 0.0 {
        return vec![1.0; h.len()];
    }
    h.iter().map(|v| 1.0 / v.norm().max(1e-12 * peak)).collect()
}

/// Least-squares rational fit of orders `(nb, na)` to the masked bins.
///
/// Starts from Levy's linearized solution and refines with up to 20
/// Sanathanan–Koerner reweightings (`1/|A_prev|`). Every bin is additionally
/// weighted by `1/|H_i|`, so the fit minimizes relative rather than absolute
/// error; device responses span several decades across the band and the
/// inverse filter needs the low-magnitude bins as accurately as the peaks.
/// Each iterate is stabilized and scored by its output error; an iterate
/// that raises that error ends the refinement and the previous one is
/// returned.
pub fn fit_rational(frf: &FrequencyResponse, mask: &[bool], nb: usize, na: usize) -> Result<RationalTF> {
    if mask.len() != frf.len() {
        return Err(Error::invalid("mask", "length differs from the frequency grid"));
    }
    let fs = frf.sample_rate();
    let idx: Vec<usize> = (0..frf.len()).filter(|&i| mask[i]).collect();
    let needed = nb + na + 1;
    if idx.len() < needed {
        return Err(Error::Underdetermined {
            available: idx.len(),
            needed,
        });
    }
    let problem = FitProblem {
        w: idx
            .iter()
            .map(|&i| Complex64::from_polar(1.0, -2.0 * PI * frf.freqs()[i] / fs))
            .collect(),
        h: idx.iter().map(|&i| frf.values()[i]).collect(),
        scale: relative_weights(&idx.iter().map(|&i| frf.values()[i]).collect::<Vec<_>>()),
        nb,
        na,
    };

    let mut theta = problem.solve(&vec![1.0; idx.len()])?;
    let (b, a) = problem.split(&theta);
    let mut best = stabilize(&b, &a, fs)?;
    let mut best_err = problem.residual(&best);
    if na == 0 {
        return Ok(best);
    }

    for _ in 0..SK_MAX_ITERS {
        let (_, a_prev) = problem.split(&theta);
        let weights: Vec<f64> = problem
            .w
            .iter()
            .map(|&w| 1.0 / horner(&a_prev, w).norm().max(f64::MIN_POSITIVE))
            .collect();
        let next = match problem.solve(&weights) {
            Ok(t) => t,
            Err(_) => break,
        };
        let (b, a) = problem.split(&next);
        let candidate = stabilize(&b, &a, fs)?;
        let err = problem.residual(&candidate);
        if !(err <= best_err) {
            break;
        }
        let change = next
            .iter()
            .zip(&theta)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        best = candidate;
        best_err = err;
        theta = next;
        if change < SK_COEFF_TOL {
            break;
        }
    }
    Ok(best)
}

/// Result of [`select_order`].
#[derive(Debug, Clone)]
pub struct OrderSelection {
    pub tf: RationalTF,
    /// rms-relative complex error over the masked bins.
    pub error: f64,
    pub order: usize,
}

/// Fits `nb = na = k` for `k = 1..=max_order` and returns the lowest order
/// meeting `fit_tol`, or the most accurate one (lowest order on ties).
pub fn select_order(
    frf: &FrequencyResponse,
    mask: &[bool],
    max_order: usize,
    fit_tol: f64,
) -> Result<OrderSelection> {
    if max_order < 1 {
        return Err(Error::invalid("max_order", "must be at least 1"));
    }
    if !(fit_tol > 0.0) {
        return Err(Error::invalid("fit_tol", "must be positive"));
    }
    let mut best: Option<OrderSelection> = None;
    for k in 1..=max_order {
        let tf = fit_rational(frf, mask, k, k)?;
        let error = fit_error(&tf, frf, mask);
        let candidate = OrderSelection { tf, error, order: k };
        if error <= fit_tol {
            return Ok(candidate);
        }
        if best.as_ref().is_none_or(|b| error < b.error) {
            best = Some(candidate);
        }
    }
    Ok(best.expect("max_order >= 1"))
}

/// rms-relative complex error of `tf` against `frf` over the masked bins.
pub fn fit_error(tf: &RationalTF, frf: &FrequencyResponse, mask: &[bool]) -> f64 {
    let fitted: Vec<Complex64> = frf.freqs().iter().map(|&f| tf.response_at(f)).collect();
    rms_relative_error(&fitted, frf.values(), mask)
}
