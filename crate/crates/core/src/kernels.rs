//! Kernel functions and their Fourier-domain characterization.
//!
//! Three kernels are provided: the Gaussian and Epanechnikov second-order
//! kernels used inside the NW/LL smoothers, and the flat-top trapezoidal
//! kernel
//!
//! ```text
//! K(x) = 2 (cos(x/2) - cos(x)) / (pi x^2)
//! ```
//!
//! whose Fourier transform equals 1 on `|s| <= 1/2`, falls linearly as
//! `2(1-|s|)` on `1/2 < |s| <= 1` and vanishes beyond. The flat top makes
//! the bias of the associated smoother decay faster than any polynomial
//! order; the price is that `K` takes negative values.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quad::simpson;

/// Truncation point for quadrature over the trapezoidal kernel. The kernel
/// decays like `x^-2`; the discarded tails are restored by a closed-form
/// correction so the total bias stays below 1e-7.
const TRAP_QUAD_HALF_WIDTH: f64 = 200.0;

/// Below this the direct trapezoid formula loses digits to cancellation and
/// the even Taylor series of the numerator is used instead.
const TRAP_SERIES_CUTOFF: f64 = 1e-3;

#[derive(Debug, Error, PartialEq)]
pub enum KernelError {
    #[error("kernel argument must be finite, got {0}")]
    NonFiniteArgument(f64),
}

/// Kernel selector. Gaussian and Epanechnikov are nonnegative second-order
/// kernels; the trapezoidal kernel is the flat-top infinite-order kernel
/// and is not a density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    Gaussian,
    Epanechnikov,
    Trapezoidal,
}

impl Kernel {
    /// Evaluate the kernel at `x`. The argument is assumed finite; use
    /// [`Kernel::try_eval`] on unvalidated input.
    #[inline]
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Kernel::Gaussian => (-0.5 * x * x).exp() / (2.0 * PI).sqrt(),
            Kernel::Epanechnikov => {
                let a = x.abs();
                if a >= 1.0 {
                    0.0
                } else {
                    0.75 * (1.0 - a * a)
                }
            }
            Kernel::Trapezoidal => trapezoidal(x),
        }
    }

    /// Checked evaluation; rejects NaN and infinite arguments.
    pub fn try_eval(self, x: f64) -> Result<f64, KernelError> {
        if !x.is_finite() {
            return Err(KernelError::NonFiniteArgument(x));
        }
        Ok(self.eval(x))
    }

    /// Whether the kernel is nonnegative everywhere. Sign-indefinite
    /// kernels need magnitude-based denominator checks in the smoothers.
    pub fn is_nonnegative(self) -> bool {
        !matches!(self, Kernel::Trapezoidal)
    }
}

#[inline]
fn trapezoidal(x: f64) -> f64 {
    let a = x.abs();
    if a < TRAP_SERIES_CUTOFF {
        trapezoidal_series(x)
    } else {
        2.0 * ((x / 2.0).cos() - x.cos()) / (PI * x * x)
    }
}

/// Four even terms of the Taylor expansion of `2(cos(x/2) - cos(x))/x^2`,
/// divided by pi. Relative truncation error is far below 1e-15 for
/// `|x| < 1e-3`.
#[inline]
fn trapezoidal_series(x: f64) -> f64 {
    let x2 = x * x;
    (0.75 + x2 * (-5.0 / 64.0 + x2 * (7.0 / 2560.0 - x2 * (17.0 / 344064.0)))) / PI
}

/// Fourier transform profile of the trapezoidal flat-top kernel: equal to 1
/// on `|s| <= c`, tapering linearly to 0 at `|s| = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourierProfile {
    flat_radius: f64,
}

impl FourierProfile {
    /// The trapezoid profile, flat on `|s| <= 1/2`.
    pub fn trapezoidal() -> Self {
        FourierProfile { flat_radius: 0.5 }
    }

    pub fn flat_radius(&self) -> f64 {
        self.flat_radius
    }

    /// Evaluate the profile at frequency `s`.
    #[inline]
    pub fn lambda(&self, s: f64) -> f64 {
        let a = s.abs();
        if a <= self.flat_radius {
            1.0
        } else if a <= 1.0 {
            2.0 * (1.0 - a)
        } else {
            0.0
        }
    }

    /// Checked evaluation; rejects NaN and infinite frequencies.
    pub fn try_lambda(&self, s: f64) -> Result<f64, KernelError> {
        if !s.is_finite() {
            return Err(KernelError::NonFiniteArgument(s));
        }
        Ok(self.lambda(s))
    }
}

/// Numerical `∫ K(x) dx` over the real line.
///
/// Compact and rapidly decaying kernels are integrated directly; the
/// trapezoidal kernel is integrated on `[-200, 200]` and the oscillatory
/// tails are added back from their asymptotic expansion.
pub fn kernel_integral(kernel: Kernel) -> f64 {
    match kernel {
        Kernel::Gaussian => simpson(|x| kernel.eval(x), -12.0, 12.0, 4_800),
        Kernel::Epanechnikov => simpson(|x| kernel.eval(x), -1.0, 1.0, 2_000),
        Kernel::Trapezoidal => {
            let t = TRAP_QUAD_HALF_WIDTH;
            let core = simpson(|x| kernel.eval(x), -t, t, 400_000);
            core + 2.0 * trap_tail_integral(t)
        }
    }
}

/// Numerical `∫ K(x)^2 dx` (the kernel roughness), relative error below 1e-4.
pub fn kernel_l2_norm(kernel: Kernel) -> f64 {
    match kernel {
        Kernel::Gaussian => simpson(|x| kernel.eval(x).powi(2), -12.0, 12.0, 4_800),
        Kernel::Epanechnikov => simpson(|x| kernel.eval(x).powi(2), -1.0, 1.0, 2_000),
        Kernel::Trapezoidal => {
            let t = TRAP_QUAD_HALF_WIDTH;
            let core = simpson(|x| kernel.eval(x).powi(2), -t, t, 400_000);
            // The squared integrand has local mean 4/(pi^2 x^4); one-sided
            // tail mass is 4/(3 pi^2 T^3).
            core + 2.0 * 4.0 / (3.0 * PI * PI * t * t * t)
        }
    }
}

/// One-sided tail `∫_T^∞ K(x) dx` of the trapezoidal kernel from two terms
/// of its asymptotic expansion (integration by parts).
fn trap_tail_integral(t: f64) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    (2.0 / PI)
        * ((t.sin() - 2.0 * (t / 2.0).sin()) / t2
            + (8.0 * (t / 2.0).cos() - 2.0 * t.cos()) / t3)
}
