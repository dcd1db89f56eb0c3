//! Linear smoother core: weight vectors and prediction for the
//! Nadaraya-Watson, local linear, and flat-top (IO) estimators.
//!
//! Every estimator here is a linear smoother, `r(x) ≈ Σ lᵢ(x) Yᵢ` with
//! `Σ lᵢ(x) = 1`. NW and LL use a nonnegative second-order kernel; the IO
//! estimator uses NW-form weights built on the trapezoidal flat-top kernel,
//! so its individual weights may be negative.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernels::Kernel;
use crate::quad::uniform_grid;

/// Relative tolerance that separates a truly degenerate local-linear system
/// from roundoff in `S0*S2 - S1^2`.
const LL_DEGENERACY_REL: f64 = 1e-12;

/// Per-point magnitude floor for the sign-indefinite trapezoid denominator.
const IO_DENOMINATOR_REL: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum SmootherError {
    #[error("samples need matching, nonempty x/y vectors (got {x_len} and {y_len})")]
    LengthMismatch { x_len: usize, y_len: usize },
    #[error("sample contains a non-finite value")]
    NonFiniteData,
    #[error("evaluation interval [{lo}, {hi}] is empty or non-finite")]
    InvalidInterval { lo: f64, hi: f64 },
    #[error("bandwidth must be positive and finite, got {0}")]
    InvalidBandwidth(f64),
    #[error("query point {0} is not finite")]
    NonFiniteQuery(f64),
    #[error("no kernel mass at x = {x}: bandwidth too small or query outside the data range")]
    EmptyNeighborhood { x: f64 },
    #[error("local linear system is degenerate at x = {x}")]
    DegenerateDesign { x: f64 },
    #[error("flat-top weight denominator is unstably small at x = {x}")]
    UnstableDenominator { x: f64 },
    #[error("the infinite-order smoother is defined by the trapezoidal kernel, got {0:?}")]
    WrongIoKernel(Kernel),
}

/// Closed interval `[lo, hi]` with `lo < hi`, used for ISE integrals and the
/// tilting objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self, SmootherError> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(SmootherError::InvalidInterval { lo, hi });
        }
        Ok(Interval { lo, hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    /// Uniform grid of `n` points spanning the interval.
    pub fn grid(&self, n: usize) -> Vec<f64> {
        uniform_grid(self.lo, self.hi, n)
    }
}

/// Paired design/response observations plus the interval on which L2
/// quantities (ISE, tilting objective) are evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    x: Vec<f64>,
    y: Vec<f64>,
    eval_interval: Interval,
}

impl Sample {
    pub fn new(x: Vec<f64>, y: Vec<f64>, eval_interval: Interval) -> Result<Self, SmootherError> {
        if x.is_empty() || x.len() != y.len() {
            return Err(SmootherError::LengthMismatch {
                x_len: x.len(),
                y_len: y.len(),
            });
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(SmootherError::NonFiniteData);
        }
        Ok(Sample { x, y, eval_interval })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn eval_interval(&self) -> Interval {
        self.eval_interval
    }

    /// `(min, max)` of the design points.
    pub fn x_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in &self.x {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    /// Copy of the sample with observation `i` removed.
    pub(crate) fn leave_one_out(&self, i: usize) -> Sample {
        let mut x = Vec::with_capacity(self.x.len() - 1);
        let mut y = Vec::with_capacity(self.y.len() - 1);
        x.extend_from_slice(&self.x[..i]);
        x.extend_from_slice(&self.x[i + 1..]);
        y.extend_from_slice(&self.y[..i]);
        y.extend_from_slice(&self.y[i + 1..]);
        Sample {
            x,
            y,
            eval_interval: self.eval_interval,
        }
    }

    /// Replace the responses, keeping design and interval.
    pub fn with_y(&self, y: Vec<f64>) -> Result<Sample, SmootherError> {
        Sample::new(self.x.clone(), y, self.eval_interval)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SmootherKind {
    Nw,
    Ll,
    Io,
}

/// Nadaraya-Watson weights `K((Xᵢ-x)/h) / Σⱼ K((Xⱼ-x)/h)`.
pub fn nw_weights(
    sample: &Sample,
    kernel: Kernel,
    h: f64,
    x: f64,
) -> Result<Vec<f64>, SmootherError> {
    check_query(h, x)?;
    let mut w: Vec<f64> = sample.x.iter().map(|&xi| kernel.eval((xi - x) / h)).collect();
    let denom: f64 = w.iter().sum();
    check_nw_denominator(kernel, denom, sample.len(), x)?;
    for v in &mut w {
        *v /= denom;
    }
    Ok(w)
}

/// Local linear weights `bᵢ(x) / Σⱼ bⱼ(x)` with
/// `bᵢ(x) = K((Xᵢ-x)/h) (S₂(x) - (Xᵢ-x) S₁(x))` and
/// `Sⱼ(x) = Σᵢ K((Xᵢ-x)/h)(Xᵢ-x)^j`. Reproduces affine functions exactly.
pub fn ll_weights(
    sample: &Sample,
    kernel: Kernel,
    h: f64,
    x: f64,
) -> Result<Vec<f64>, SmootherError> {
    check_query(h, x)?;
    let n = sample.len();
    let mut k = Vec::with_capacity(n);
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    let mut s2 = 0.0;
    for &xi in &sample.x {
        let d = xi - x;
        let ki = kernel.eval(d / h);
        k.push(ki);
        s0 += ki;
        s1 += ki * d;
        s2 += ki * d * d;
    }
    if s0 == 0.0 {
        return Err(SmootherError::EmptyNeighborhood { x });
    }
    let denom = s0 * s2 - s1 * s1;
    let scale = (s0 * s2).abs() + s1 * s1;
    if denom.abs() <= LL_DEGENERACY_REL * scale {
        return Err(SmootherError::DegenerateDesign { x });
    }
    let w = sample
        .x
        .iter()
        .zip(&k)
        .map(|(&xi, &ki)| ki * (s2 - (xi - x) * s1) / denom)
        .collect();
    Ok(w)
}

/// NW-form weights built on the trapezoidal flat-top kernel. Individual
/// weights may be negative; the normalized vector still sums to one.
pub fn io_weights(sample: &Sample, h: f64, x: f64) -> Result<Vec<f64>, SmootherError> {
    nw_weights(sample, Kernel::Trapezoidal, h, x)
}

fn check_query(h: f64, x: f64) -> Result<(), SmootherError> {
    if !(h.is_finite() && h > 0.0) {
        return Err(SmootherError::InvalidBandwidth(h));
    }
    if !x.is_finite() {
        return Err(SmootherError::NonFiniteQuery(x));
    }
    Ok(())
}

fn check_nw_denominator(
    kernel: Kernel,
    denom: f64,
    n: usize,
    x: f64,
) -> Result<(), SmootherError> {
    if kernel.is_nonnegative() {
        if denom <= 0.0 {
            return Err(SmootherError::EmptyNeighborhood { x });
        }
    } else if denom.abs() < IO_DENOMINATOR_REL * n as f64 {
        // Sign changes of the flat-top kernel make exact-zero tests
        // unreliable; treat a tiny magnitude as a pathological bandwidth.
        return Err(SmootherError::UnstableDenominator { x });
    }
    Ok(())
}

/// An immutable fitted linear smoother: estimator family, kernel, bandwidth
/// and the training sample. Weight evaluation and prediction are pure.
#[derive(Debug, Clone)]
pub struct FittedSmoother {
    kind: SmootherKind,
    kernel: Kernel,
    h: f64,
    sample: Sample,
}

impl FittedSmoother {
    pub fn new(
        kind: SmootherKind,
        kernel: Kernel,
        h: f64,
        sample: Sample,
    ) -> Result<Self, SmootherError> {
        if !(h.is_finite() && h > 0.0) {
            return Err(SmootherError::InvalidBandwidth(h));
        }
        if kind == SmootherKind::Io && kernel != Kernel::Trapezoidal {
            return Err(SmootherError::WrongIoKernel(kernel));
        }
        Ok(FittedSmoother {
            kind,
            kernel,
            h,
            sample,
        })
    }

    /// Infinite-order smoother: NW form with the trapezoidal kernel.
    pub fn io(sample: Sample, h: f64) -> Result<Self, SmootherError> {
        Self::new(SmootherKind::Io, Kernel::Trapezoidal, h, sample)
    }

    pub fn kind(&self) -> SmootherKind {
        self.kind
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn bandwidth(&self) -> f64 {
        self.h
    }

    pub fn sample(&self) -> &Sample {
        &self.sample
    }

    /// Weight vector `l(x)`; sums to one whenever it exists.
    pub fn weights(&self, x: f64) -> Result<Vec<f64>, SmootherError> {
        match self.kind {
            SmootherKind::Nw => nw_weights(&self.sample, self.kernel, self.h, x),
            SmootherKind::Ll => ll_weights(&self.sample, self.kernel, self.h, x),
            SmootherKind::Io => io_weights(&self.sample, self.h, x),
        }
    }

    /// Prediction `⟨l(x), y⟩` at a single query point.
    pub fn predict_one(&self, x: f64) -> Result<f64, SmootherError> {
        let w = self.weights(x)?;
        Ok(w.iter().zip(&self.sample.y).map(|(wi, yi)| wi * yi).sum())
    }

    /// Predictions at each query point; fails on the first point whose
    /// weights do not exist, naming that point.
    pub fn predict(&self, xs: &[f64]) -> Result<Vec<f64>, SmootherError> {
        xs.iter().map(|&x| self.predict_one(x)).collect()
    }

    /// `Σ |lᵢ(x)|`, of interest for the IO smoother whose weights can be
    /// negative (it equals 1 for nonnegative kernels).
    pub fn weight_abs_sum(&self, x: f64) -> Result<f64, SmootherError> {
        Ok(self.weights(x)?.iter().map(|w| w.abs()).sum())
    }
}
