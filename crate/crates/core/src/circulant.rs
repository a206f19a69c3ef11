//! Circulant operators on the periodic grid.
//!
//! Every LTI law built from the periodic backward difference is diagonal in
//! the DFT basis. The eigenvalue of the backward difference at bin `k` is
//! `(1 - exp(-2 pi j k / N)) / dt`, so a rational transfer function in that
//! eigenvalue gives the exact discrete operator.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_traits::Zero;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Eigenvalue of the periodic backward difference at DFT bin `k`.
pub fn backward_difference_eigenvalue(k: usize, samples: usize, dt: f64) -> Complex64 {
    let theta = -2.0 * PI * k as f64 / samples as f64;
    (Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, theta)) / dt
}

/// `x -> F^-1 diag(num(l_k) / den(l_k)) F x` for real periodic `x`.
pub struct CirculantFilter {
    gains: Vec<Complex64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    condition: f64,
}

impl fmt::Debug for CirculantFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CirculantFilter")
            .field("samples", &self.gains.len())
            .field("condition", &self.condition)
            .finish()
    }
}

impl CirculantFilter {
    /// Fails when `den` vanishes (or is non-finite) at some bin; the error
    /// carries `max |den| / min |den|` as the condition estimate.
    pub fn new(
        samples: usize,
        dt: f64,
        num: impl Fn(Complex64) -> Complex64,
        den: impl Fn(Complex64) -> Complex64,
    ) -> Result<Self> {
        let mut gains = vec![Complex64::zero(); samples];
        let (mut dmin, mut dmax) = (f64::INFINITY, 0.0f64);
        // Conjugate-symmetric by construction so real inputs stay real.
        for k in 0..=samples / 2 {
            let lambda = backward_difference_eigenvalue(k, samples, dt);
            let d = den(lambda);
            let mag = d.norm();
            dmin = dmin.min(mag);
            dmax = dmax.max(mag);
            let g = num(lambda) / d;
            gains[k] = g;
            if k != 0 && samples - k != k {
                gains[samples - k] = g.conj();
            }
        }
        let condition = if dmin > 0.0 { dmax / dmin } else { f64::INFINITY };
        if !(dmin > 0.0) || !condition.is_finite() || gains.iter().any(|g| !g.is_finite()) {
            return Err(Error::Numerical {
                message: "singular circulant system".to_string(),
                condition,
            });
        }
        let mut planner = FftPlanner::new();
        Ok(CirculantFilter {
            gains,
            forward: planner.plan_fft_forward(samples),
            inverse: planner.plan_fft_inverse(samples),
            condition,
        })
    }

    pub fn samples(&self) -> usize {
        self.gains.len()
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn gain(&self, k: usize) -> Complex64 {
        self.gains[k]
    }

    pub fn apply(&self, x: &mut [f64]) {
        debug_assert_eq!(x.len(), self.gains.len());
        let n = x.len();
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        for (b, g) in buf.iter_mut().zip(&self.gains) {
            *b *= g;
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / n as f64;
        for (xi, b) in x.iter_mut().zip(&buf) {
            *xi = b.re * scale;
        }
    }
}
