//! Tilted linear smoothers.
//!
//! A tilted smoother replaces the uniform `1/n` data weights of a base
//! NW/LL fit by a probability vector `p` on the simplex:
//!
//! ```text
//! r(x | h, p) = Σᵢ (n pᵢ) lᵢ(x) Yᵢ
//! ```
//!
//! normalized so that uniform `p` recovers the base smoother exactly. The
//! vector `p` is parameterized by a handful of nonnegative values at fixed
//! design quantiles ("weighting nodes") expanded to length `n` by clamped
//! linear interpolation and renormalization. Bandwidth and node values are
//! chosen jointly to minimize the quadrature L2 distance between the tilted
//! fit and a fixed flat-top (IO) comparator fit over the evaluation
//! interval.

use rayon::prelude::*;
use thiserror::Error;

use crate::bandwidth::{self, BandwidthError};
use crate::kernels::Kernel;
use crate::optim::NelderMead;
use crate::quad::trapezoid_weights;
use crate::smoothers::{
    ll_weights, nw_weights, FittedSmoother, Sample, SmootherError, SmootherKind,
};

#[derive(Debug, Error)]
pub enum TiltError {
    #[error("need at least two weighting nodes, got {0}")]
    TooFewNodes(usize),
    #[error("bandwidth must be positive and finite, got {0}")]
    InvalidBandwidth(f64),
    #[error("node values must be finite and nonnegative with at least one positive")]
    InvalidNodeValues,
    #[error("node positions must be strictly increasing and lie within the design range")]
    InvalidNodePositions,
    #[error("node count must not exceed the number of distinct quantiles of the design")]
    NodePlacement,
    #[error("tilt vector is identically zero after interpolation")]
    ZeroTilt,
    #[error("objective grid needs at least two points")]
    InvalidGrid,
    #[error("comparator must be the infinite-order (flat-top) smoother")]
    InvalidComparator,
    #[error("objective infeasible at grid point x = {x}: {source}")]
    ObjectiveInfeasible { x: f64, source: SmootherError },
    #[error("optimizer could not start from the cross-validated seed: {0}")]
    OptimizerFailed(String),
    #[error(transparent)]
    Smoother(#[from] SmootherError),
    #[error(transparent)]
    Bandwidth(#[from] BandwidthError),
}

/// Base estimator family being tilted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaseKind {
    Nw,
    Ll,
}

impl BaseKind {
    pub fn smoother_kind(self) -> SmootherKind {
        match self {
            BaseKind::Nw => SmootherKind::Nw,
            BaseKind::Ll => SmootherKind::Ll,
        }
    }
}

/// Bandwidth plus the low-dimensional node parameterization of the tilt
/// vector: `node_values[k] >= 0` sits at `node_positions[k]`, and the full
/// `p` comes from [`expand_p`].
#[derive(Debug, Clone, PartialEq)]
pub struct TiltParams {
    h: f64,
    node_values: Vec<f64>,
    node_positions: Vec<f64>,
}

impl TiltParams {
    pub fn new(h: f64, node_values: Vec<f64>, node_positions: Vec<f64>) -> Result<Self, TiltError> {
        if !(h.is_finite() && h > 0.0) {
            return Err(TiltError::InvalidBandwidth(h));
        }
        if node_values.len() < 2 {
            return Err(TiltError::TooFewNodes(node_values.len()));
        }
        if node_values.len() != node_positions.len() {
            return Err(TiltError::InvalidNodePositions);
        }
        if node_values.iter().any(|v| !v.is_finite() || *v < 0.0)
            || node_values.iter().all(|&v| v == 0.0)
        {
            return Err(TiltError::InvalidNodeValues);
        }
        if node_positions.iter().any(|v| !v.is_finite())
            || node_positions.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(TiltError::InvalidNodePositions);
        }
        Ok(TiltParams {
            h,
            node_values,
            node_positions,
        })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn node_values(&self) -> &[f64] {
        &self.node_values
    }

    pub fn node_positions(&self) -> &[f64] {
        &self.node_positions
    }

    /// Uniform tilt (every node value equal): expands to `pᵢ = 1/n`.
    pub fn uniform(h: f64, node_positions: Vec<f64>) -> Result<Self, TiltError> {
        let m = node_positions.len();
        TiltParams::new(h, vec![1.0 / m as f64; m], node_positions)
    }
}

/// Node positions at equally spaced empirical quantiles of the design,
/// including the minimum and maximum.
pub fn quantile_node_positions(sample: &Sample, m: usize) -> Result<Vec<f64>, TiltError> {
    if m < 2 {
        return Err(TiltError::TooFewNodes(m));
    }
    let mut xs = sample.x().to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    let positions: Vec<f64> = (0..m)
        .map(|k| {
            let q = k as f64 / (m - 1) as f64;
            let idx = q * (n - 1) as f64;
            let lo = idx.floor() as usize;
            let frac = idx - lo as f64;
            if lo + 1 < n {
                xs[lo] + frac * (xs[lo + 1] - xs[lo])
            } else {
                xs[n - 1]
            }
        })
        .collect();
    if positions.windows(2).any(|w| w[0] >= w[1]) {
        return Err(TiltError::NodePlacement);
    }
    Ok(positions)
}

/// Clamped linear interpolation segment for `x`: `(k, t)` such that the
/// interpolated value is `(1-t) v[k] + t v[k+1]`.
fn interp_segment(positions: &[f64], x: f64) -> (usize, f64) {
    let m = positions.len();
    if x <= positions[0] {
        return (0, 0.0);
    }
    if x >= positions[m - 1] {
        return (m - 2, 1.0);
    }
    // positions is strictly increasing and short; linear scan is fine.
    let mut k = 0;
    while x > positions[k + 1] {
        k += 1;
    }
    let t = (x - positions[k]) / (positions[k + 1] - positions[k]);
    (k, t)
}

/// Expand node values to the full probability vector: interpolate at each
/// design point (clamping beyond the end nodes), then normalize to sum 1.
pub fn expand_p(params: &TiltParams, sample: &Sample) -> Result<Vec<f64>, TiltError> {
    let (lo, hi) = sample.x_range();
    if params.node_positions[0] < lo || *params.node_positions.last().unwrap() > hi {
        return Err(TiltError::InvalidNodePositions);
    }
    let mut raw: Vec<f64> = sample
        .x()
        .iter()
        .map(|&x| {
            let (k, t) = interp_segment(&params.node_positions, x);
            (1.0 - t) * params.node_values[k] + t * params.node_values[k + 1]
        })
        .collect();
    let total: f64 = raw.iter().sum();
    if total <= 0.0 {
        return Err(TiltError::ZeroTilt);
    }
    for v in &mut raw {
        *v /= total;
    }
    Ok(raw)
}

fn base_weights(
    sample: &Sample,
    base: BaseKind,
    kernel: Kernel,
    h: f64,
    x: f64,
) -> Result<Vec<f64>, SmootherError> {
    match base {
        BaseKind::Nw => nw_weights(sample, kernel, h, x),
        BaseKind::Ll => ll_weights(sample, kernel, h, x),
    }
}

/// Tilted prediction `Σᵢ (n pᵢ) lᵢ(x) Yᵢ` at each query point.
pub fn tilted_predict(
    sample: &Sample,
    base: BaseKind,
    kernel: Kernel,
    params: &TiltParams,
    xs: &[f64],
) -> Result<Vec<f64>, TiltError> {
    let p = expand_p(params, sample)?;
    let n = sample.len() as f64;
    let np: Vec<f64> = p.iter().map(|v| n * v).collect();
    xs.iter()
        .map(|&x| {
            let w = base_weights(sample, base, kernel, params.h, x)?;
            Ok(w
                .iter()
                .zip(&np)
                .zip(sample.y())
                .map(|((wi, npi), yi)| npi * wi * yi)
                .sum())
        })
        .collect()
}

/// Precomputed objective: a fitted IO comparator, its values on a uniform
/// quadrature grid over the evaluation interval, and trapezoid weights.
#[derive(Debug, Clone)]
pub struct TiltObjective {
    comparator: FittedSmoother,
    base_kind: BaseKind,
    grid: Vec<f64>,
    weights: Vec<f64>,
    comparator_values: Vec<f64>,
}

impl TiltObjective {
    pub fn new(
        comparator: FittedSmoother,
        base_kind: BaseKind,
        grid_points: usize,
    ) -> Result<Self, TiltError> {
        if grid_points < 2 {
            return Err(TiltError::InvalidGrid);
        }
        if comparator.kind() != SmootherKind::Io {
            return Err(TiltError::InvalidComparator);
        }
        let interval = comparator.sample().eval_interval();
        let grid = interval.grid(grid_points);
        let weights = trapezoid_weights(interval.lo(), interval.hi(), grid_points);
        let comparator_values = grid
            .iter()
            .map(|&x| {
                comparator
                    .predict_one(x)
                    .map_err(|source| TiltError::ObjectiveInfeasible { x, source })
            })
            .collect::<Result<Vec<f64>, TiltError>>()?;
        Ok(TiltObjective {
            comparator,
            base_kind,
            grid,
            weights,
            comparator_values,
        })
    }

    pub fn comparator(&self) -> &FittedSmoother {
        &self.comparator
    }

    pub fn base_kind(&self) -> BaseKind {
        self.base_kind
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn quadrature_weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn comparator_values(&self) -> &[f64] {
        &self.comparator_values
    }
}

/// Quadrature L2 distance `( Σ_g w_g (r(x_g | θ) - r̆(x_g))² )^{1/2}`
/// between the tilted fit and the comparator over the evaluation interval.
pub fn objective(
    sample: &Sample,
    obj: &TiltObjective,
    kernel: Kernel,
    params: &TiltParams,
) -> Result<f64, TiltError> {
    let p = expand_p(params, sample)?;
    let n = sample.len() as f64;
    let np: Vec<f64> = p.iter().map(|v| n * v).collect();
    let mut acc = 0.0;
    for ((&x, &wq), &comp) in obj
        .grid
        .iter()
        .zip(&obj.weights)
        .zip(&obj.comparator_values)
    {
        let w = base_weights(sample, obj.base_kind, kernel, params.h, x)
            .map_err(|source| TiltError::ObjectiveInfeasible { x, source })?;
        let pred: f64 = w
            .iter()
            .zip(&np)
            .zip(sample.y())
            .map(|((wi, npi), yi)| npi * wi * yi)
            .sum();
        let d = pred - comp;
        acc += wq * d * d;
    }
    Ok(acc.sqrt())
}

/// Search settings for [`fit_tilted`], exposed through the CLI.
#[derive(Debug, Clone)]
pub struct OptimizerConfig {
    /// Objective evaluation budget of the polytope search at each bandwidth.
    pub max_evals_per_h: usize,
    /// Size of the log-spaced bandwidth sweep.
    pub h_grid_len: usize,
    /// Relative objective-change tolerance of the polytope search.
    pub rel_tol: f64,
    /// Number of quadrature grid points of the objective.
    pub grid_points: usize,
    /// Skip the bandwidth sweep and optimize nodes at this fixed bandwidth.
    pub fixed_h: Option<f64>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            max_evals_per_h: 500,
            h_grid_len: bandwidth::DEFAULT_H_GRID_LEN,
            rel_tol: 1e-8,
            grid_points: 201,
            fixed_h: None,
        }
    }
}

/// Result of a tilted fit: the chosen parameters (node values normalized to
/// sum one), the officially evaluated objective, and search diagnostics.
#[derive(Debug, Clone)]
pub struct TiltFit {
    pub params: TiltParams,
    pub objective: f64,
    /// False when some bandwidth leg ran out of evaluation budget before
    /// meeting the tolerance; the fit is still the best point found.
    pub converged: bool,
    pub evaluations: usize,
}

#[inline]
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Data for one bandwidth leg of the search, reduced so that a single
/// objective evaluation costs `O(grid × m)`: with `raw = Φ v` linear in the
/// node values, the tilted prediction is `n (W Φ v)_g / (1ᵀ Φ v)`.
struct Leg {
    /// `grid_len × m`, row-major: Σᵢ lᵢ(x_g) yᵢ φ_k(Xᵢ).
    a: Vec<f64>,
    /// Column sums of Φ.
    phi_sums: Vec<f64>,
}

fn build_leg(
    sample: &Sample,
    obj: &TiltObjective,
    kernel: Kernel,
    segments: &[(usize, f64)],
    m: usize,
    h: f64,
) -> Option<Leg> {
    let g_len = obj.grid.len();
    let mut a = vec![0.0; g_len * m];
    for (g, &x) in obj.grid.iter().enumerate() {
        let w = base_weights(sample, obj.base_kind, kernel, h, x).ok()?;
        let row = &mut a[g * m..(g + 1) * m];
        for ((wi, yi), &(k, t)) in w.iter().zip(sample.y()).zip(segments) {
            let wy = wi * yi;
            row[k] += wy * (1.0 - t);
            row[k + 1] += wy * t;
        }
    }
    let mut phi_sums = vec![0.0; m];
    for &(k, t) in segments {
        phi_sums[k] += 1.0 - t;
        phi_sums[k + 1] += t;
    }
    Some(Leg { a, phi_sums })
}

impl Leg {
    fn objective(&self, v: &[f64], n: f64, obj: &TiltObjective) -> f64 {
        let m = v.len();
        let den: f64 = self.phi_sums.iter().zip(v).map(|(s, vi)| s * vi).sum();
        if !(den.is_finite() && den > 0.0) {
            return f64::INFINITY;
        }
        let scale = n / den;
        let mut acc = 0.0;
        for (g, (&wq, &comp)) in obj.weights.iter().zip(&obj.comparator_values).enumerate() {
            let row = &self.a[g * m..(g + 1) * m];
            let num: f64 = row.iter().zip(v).map(|(ai, vi)| ai * vi).sum();
            let d = scale * num - comp;
            acc += wq * d * d;
        }
        acc.sqrt()
    }
}

struct LegOutcome {
    h: f64,
    value: f64,
    node_values: Vec<f64>,
    converged: bool,
    evals: usize,
}

/// Jointly choose bandwidth and node values minimizing the L2 distance to
/// the comparator.
///
/// The search alternates a log-spaced bandwidth sweep with a derivative-free
/// polytope descent over softplus-transformed node values (nonnegativity by
/// construction) and is seeded at the cross-validated bandwidth with uniform
/// nodes, so the achieved objective never exceeds the untilted CV baseline.
pub fn fit_tilted(
    sample: &Sample,
    base: BaseKind,
    kernel: Kernel,
    m: usize,
    comparator: &FittedSmoother,
    config: &OptimizerConfig,
) -> Result<TiltFit, TiltError> {
    if m < 2 {
        return Err(TiltError::TooFewNodes(m));
    }
    let positions = quantile_node_positions(sample, m)?;
    let obj = TiltObjective::new(comparator.clone(), base, config.grid_points)?;

    let (seed_h, h_candidates) = match config.fixed_h {
        Some(h) => {
            if !(h.is_finite() && h > 0.0) {
                return Err(TiltError::InvalidBandwidth(h));
            }
            (h, vec![h])
        }
        None => {
            let mut grid = bandwidth::log_h_grid(sample, config.h_grid_len)?;
            let cv = bandwidth::select_h_cv(sample, base.smoother_kind(), kernel, &grid)?;
            let h_cv = cv.h_star();
            if !grid.contains(&h_cv) {
                grid.push(h_cv);
                grid.sort_by(f64::total_cmp);
            }
            (h_cv, grid)
        }
    };

    let baseline = TiltParams::uniform(seed_h, positions.clone())?;
    let baseline_value = objective(sample, &obj, kernel, &baseline)
        .map_err(|e| TiltError::OptimizerFailed(e.to_string()))?;

    let segments: Vec<(usize, f64)> = sample
        .x()
        .iter()
        .map(|&x| interp_segment(&positions, x))
        .collect();
    let n = sample.len() as f64;
    let z0 = vec![(std::f64::consts::E - 1.0).ln(); m];
    let nm = NelderMead {
        max_evals: config.max_evals_per_h,
        rel_tol: config.rel_tol,
        initial_step: 0.5,
        restarts: 0,
    };

    let legs: Vec<Option<LegOutcome>> = h_candidates
        .par_iter()
        .map(|&h| {
            let leg = build_leg(sample, &obj, kernel, &segments, m, h)?;
            let result = nm.minimize(|z| {
                let v: Vec<f64> = z.iter().map(|&zi| softplus(zi)).collect();
                leg.objective(&v, n, &obj)
            }, &z0);
            let v: Vec<f64> = result.x.iter().map(|&zi| softplus(zi)).collect();
            let total: f64 = v.iter().sum();
            if !(total.is_finite() && total > 0.0) {
                return None;
            }
            Some(LegOutcome {
                h,
                value: result.value,
                node_values: v.iter().map(|vi| vi / total).collect(),
                converged: result.converged,
                evals: result.evals,
            })
        })
        .collect();

    let mut evaluations = 1; // the baseline evaluation
    let mut best: Option<LegOutcome> = None;
    for leg in legs.into_iter().flatten() {
        evaluations += leg.evals;
        match &best {
            Some(b) if leg.value >= b.value => {}
            _ => best = Some(leg),
        }
    }

    let baseline_fit = |evaluations| TiltFit {
        params: baseline.clone(),
        objective: baseline_value,
        converged: true,
        evaluations,
    };
    let Some(winner) = best else {
        return Ok(baseline_fit(evaluations));
    };

    let candidate = TiltParams::new(winner.h, winner.node_values, positions)?;
    evaluations += 1;
    let fit = match objective(sample, &obj, kernel, &candidate) {
        Ok(value) if value <= baseline_value => TiltFit {
            params: candidate,
            objective: value,
            converged: winner.converged,
            evaluations,
        },
        // The reduced-form objective can disagree with the official one by
        // rounding; the seed wins any such tie.
        _ => baseline_fit(evaluations),
    };
    debug_assert!(fit.objective <= baseline_value + 1e-12);
    Ok(fit)
}
