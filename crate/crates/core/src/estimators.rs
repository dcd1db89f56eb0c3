//! Estimator specifications and the shared fitting protocol.
//!
//! Each estimator follows the same protocol everywhere in the crate: NW and
//! LL select their bandwidth by leave-one-out cross-validation on the
//! default log grid, IO uses the spectral rule of thumb, and the tilted
//! variants run the full joint (bandwidth, nodes) search against an IO
//! comparator whose bandwidth stays fixed at the rule-of-thumb value.
//! [`FitContext`] caches the expensive shared pieces (CV bandwidths, the
//! comparator) when several estimators are fitted to one sample.

use thiserror::Error;

use crate::bandwidth::{self, BandwidthError};
use crate::kernels::Kernel;
use crate::smoothers::{FittedSmoother, Sample, SmootherError, SmootherKind};
use crate::tilting::{fit_tilted, tilted_predict, BaseKind, OptimizerConfig, TiltError, TiltFit};

#[derive(Debug, Error)]
pub enum FitError {
    #[error(transparent)]
    Smoother(#[from] SmootherError),
    #[error(transparent)]
    Bandwidth(#[from] BandwidthError),
    #[error(transparent)]
    Tilt(#[from] TiltError),
    #[error("unknown estimator kind {0:?} (expected nw|ll|io|tilted-nw|tilted-ll)")]
    UnknownKind(String),
}

/// Which estimator to fit; tilted variants carry their node count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorSpec {
    Nw,
    Ll,
    Io,
    TiltedNw { nodes: usize },
    TiltedLl { nodes: usize },
}

impl EstimatorSpec {
    /// Table/CSV label, e.g. `NW`, `LL_p4`.
    pub fn label(&self) -> String {
        match self {
            EstimatorSpec::Nw => "NW".to_string(),
            EstimatorSpec::Ll => "LL".to_string(),
            EstimatorSpec::Io => "IO".to_string(),
            EstimatorSpec::TiltedNw { nodes } => format!("NW_p{nodes}"),
            EstimatorSpec::TiltedLl { nodes } => format!("LL_p{nodes}"),
        }
    }

    /// Parse a CLI/config kind string; `nodes` applies to tilted kinds.
    pub fn parse(kind: &str, nodes: usize) -> Result<Self, FitError> {
        match kind {
            "nw" => Ok(EstimatorSpec::Nw),
            "ll" => Ok(EstimatorSpec::Ll),
            "io" => Ok(EstimatorSpec::Io),
            "tilted-nw" => Ok(EstimatorSpec::TiltedNw { nodes }),
            "tilted-ll" => Ok(EstimatorSpec::TiltedLl { nodes }),
            other => Err(FitError::UnknownKind(other.to_string())),
        }
    }
}

/// A fitted estimator ready for prediction.
#[derive(Debug, Clone)]
pub enum FittedEstimator {
    Smoother(FittedSmoother),
    Tilted {
        sample: Sample,
        base: BaseKind,
        kernel: Kernel,
        fit: TiltFit,
    },
}

impl FittedEstimator {
    pub fn predict(&self, xs: &[f64]) -> Result<Vec<f64>, FitError> {
        match self {
            FittedEstimator::Smoother(f) => Ok(f.predict(xs)?),
            FittedEstimator::Tilted {
                sample,
                base,
                kernel,
                fit,
            } => Ok(tilted_predict(sample, *base, *kernel, &fit.params, xs)?),
        }
    }

    pub fn bandwidth(&self) -> f64 {
        match self {
            FittedEstimator::Smoother(f) => f.bandwidth(),
            FittedEstimator::Tilted { fit, .. } => fit.params.h(),
        }
    }

    /// Achieved tilting objective, if this is a tilted fit.
    pub fn objective(&self) -> Option<f64> {
        match self {
            FittedEstimator::Smoother(_) => None,
            FittedEstimator::Tilted { fit, .. } => Some(fit.objective),
        }
    }

    pub fn node_values(&self) -> Option<&[f64]> {
        match self {
            FittedEstimator::Smoother(_) => None,
            FittedEstimator::Tilted { fit, .. } => Some(fit.params.node_values()),
        }
    }

    pub fn tilt_params(&self) -> Option<&crate::tilting::TiltParams> {
        match self {
            FittedEstimator::Smoother(_) => None,
            FittedEstimator::Tilted { fit, .. } => Some(&fit.params),
        }
    }

    pub fn converged(&self) -> bool {
        match self {
            FittedEstimator::Smoother(_) => true,
            FittedEstimator::Tilted { fit, .. } => fit.converged,
        }
    }
}

/// Fits estimators to one sample, caching CV bandwidths and the IO
/// comparator across specs.
pub struct FitContext<'a> {
    sample: &'a Sample,
    kernel: Kernel,
    optimizer: OptimizerConfig,
    h_cv_nw: Option<f64>,
    h_cv_ll: Option<f64>,
    io: Option<FittedSmoother>,
}

impl<'a> FitContext<'a> {
    pub fn new(sample: &'a Sample, kernel: Kernel, optimizer: OptimizerConfig) -> Self {
        FitContext {
            sample,
            kernel,
            optimizer,
            h_cv_nw: None,
            h_cv_ll: None,
            io: None,
        }
    }

    pub fn sample(&self) -> &Sample {
        self.sample
    }

    fn h_cv(&mut self, base: BaseKind) -> Result<f64, FitError> {
        let slot = match base {
            BaseKind::Nw => &mut self.h_cv_nw,
            BaseKind::Ll => &mut self.h_cv_ll,
        };
        if let Some(h) = slot {
            return Ok(*h);
        }
        let grid = bandwidth::log_h_grid(self.sample, self.optimizer.h_grid_len)?;
        let cv = bandwidth::select_h_cv(self.sample, base.smoother_kind(), self.kernel, &grid)?;
        let h = cv.h_star();
        *match base {
            BaseKind::Nw => &mut self.h_cv_nw,
            BaseKind::Ll => &mut self.h_cv_ll,
        } = Some(h);
        Ok(h)
    }

    fn ensure_io(&mut self) -> Result<(), FitError> {
        if self.io.is_none() {
            let h = bandwidth::select_h_rot_io(self.sample)?;
            self.io = Some(FittedSmoother::io(self.sample.clone(), h)?);
        }
        Ok(())
    }

    /// The IO comparator (rule-of-thumb bandwidth), fitted lazily.
    pub fn io_comparator(&mut self) -> Result<&FittedSmoother, FitError> {
        self.ensure_io()?;
        Ok(self.io.as_ref().unwrap())
    }

    pub fn fit(&mut self, spec: EstimatorSpec) -> Result<FittedEstimator, FitError> {
        match spec {
            EstimatorSpec::Nw => {
                let h = self.h_cv(BaseKind::Nw)?;
                Ok(FittedEstimator::Smoother(FittedSmoother::new(
                    SmootherKind::Nw,
                    self.kernel,
                    h,
                    self.sample.clone(),
                )?))
            }
            EstimatorSpec::Ll => {
                let h = self.h_cv(BaseKind::Ll)?;
                Ok(FittedEstimator::Smoother(FittedSmoother::new(
                    SmootherKind::Ll,
                    self.kernel,
                    h,
                    self.sample.clone(),
                )?))
            }
            EstimatorSpec::Io => {
                self.ensure_io()?;
                Ok(FittedEstimator::Smoother(self.io.clone().unwrap()))
            }
            EstimatorSpec::TiltedNw { nodes } => self.fit_tilted_spec(BaseKind::Nw, nodes),
            EstimatorSpec::TiltedLl { nodes } => self.fit_tilted_spec(BaseKind::Ll, nodes),
        }
    }

    fn fit_tilted_spec(&mut self, base: BaseKind, nodes: usize) -> Result<FittedEstimator, FitError> {
        self.ensure_io()?;
        let comparator = self.io.as_ref().unwrap();
        let fit = fit_tilted(
            self.sample,
            base,
            self.kernel,
            nodes,
            comparator,
            &self.optimizer,
        )?;
        Ok(FittedEstimator::Tilted {
            sample: self.sample.clone(),
            base,
            kernel: self.kernel,
            fit,
        })
    }
}

/// Fit one estimator without sharing a context.
pub fn fit_estimator(
    sample: &Sample,
    spec: EstimatorSpec,
    kernel: Kernel,
    optimizer: &OptimizerConfig,
) -> Result<FittedEstimator, FitError> {
    FitContext::new(sample, kernel, optimizer.clone()).fit(spec)
}
