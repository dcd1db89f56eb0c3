//! Shared fixtures for the criterion benchmarks.

use tiltsmooth::simulate::{gen_sample, Design, RegressionFn, Scenario};
use tiltsmooth::{Interval, Sample};

/// Exponential-truth sample on a normal design, the workhorse benchmark case.
pub fn exp_normal_sample(n: usize, sigma: f64, seed: u64) -> Sample {
    let scenario = Scenario {
        regression_fn: RegressionFn::Exp,
        design: Design::Normal,
        sigma,
        n,
        ise_interval: Interval::new(-2.0, 2.0).unwrap(),
    };
    gen_sample(&scenario, seed)
}
