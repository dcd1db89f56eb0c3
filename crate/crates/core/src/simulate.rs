//! Monte Carlo harness: data generation, ISE/MISE computation, factorial
//! campaigns and table emission.
//!
//! MISE here is the *median* of the per-replication integrated squared
//! errors; the mean is emitted alongside as a diagnostic column. All
//! randomness flows from one 64-bit base seed through a fixed mixing
//! function, and replications are sealed work units, so campaign output is
//! identical for a given config regardless of thread count.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Deserialize;
use thiserror::Error;

use crate::estimators::{EstimatorSpec, FitContext};
use crate::kernels::Kernel;
use crate::quad::trapezoid_integral;
use crate::smoothers::{Interval, Sample};
use crate::tilting::OptimizerConfig;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("config: {0}")]
    InvalidConfig(String),
    #[error("config parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// True regression functions of the benchmark scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegressionFn {
    /// `x + 4 exp(-2x²) / sqrt(2π)`.
    Exp,
    /// `sin(4πx)`.
    Sin,
}

impl RegressionFn {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            RegressionFn::Exp => {
                x + 4.0 * (-2.0 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
            }
            RegressionFn::Sin => (4.0 * std::f64::consts::PI * x).sin(),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            RegressionFn::Exp => "exp",
            RegressionFn::Sin => "sin",
        }
    }
}

/// Design distribution of the X variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Design {
    Uniform { lo: f64, hi: f64 },
    Normal,
}

impl Design {
    fn draw(self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            Design::Uniform { lo, hi } => rng.random_range(lo..=hi),
            Design::Normal => StandardNormal.sample(rng),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Design::Uniform { .. } => "uniform",
            Design::Normal => "normal",
        }
    }
}

/// One simulation cell family member: truth, design, noise level, sample
/// size, and the interval over which the ISE is integrated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub regression_fn: RegressionFn,
    pub design: Design,
    pub sigma: f64,
    pub n: usize,
    pub ise_interval: Interval,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(SimError::InvalidConfig("sigma must be a finite nonnegative real".into()));
        }
        if self.n < 2 {
            return Err(SimError::InvalidConfig("n must be at least 2".into()));
        }
        if let Design::Uniform { lo, hi } = self.design {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(SimError::InvalidConfig("design_range must be a proper interval".into()));
            }
        }
        Ok(())
    }

    /// Compact identifier used in the long-format CSV.
    pub fn label(&self) -> String {
        format!(
            "{}_{}_n{}_s{}_{}",
            self.regression_fn.label(),
            self.design.label(),
            self.n,
            self.sigma,
            interval_slug(self.ise_interval),
        )
    }
}

fn interval_slug(i: Interval) -> String {
    format!("{}to{}", i.lo(), i.hi())
}

/// SplitMix64 finalizer.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive the RNG seed of replication `rep` of scenario `scenario_idx`
/// from the campaign base seed. Distinct (scenario, rep) pairs get
/// distinct seeds.
pub fn mix_seed(base_seed: u64, scenario_idx: u64, rep: u64) -> u64 {
    let a = splitmix64(base_seed ^ splitmix64(scenario_idx.wrapping_add(0x51_7C_C1_B7_27_22_0A_95)));
    splitmix64(a ^ splitmix64(rep.wrapping_add(0x63_1B_CD_83_1D_41_2D_23)))
}

/// Draw one sample: X i.i.d. from the design, `Y = r(X) + σ ε` with
/// standard normal errors. Deterministic in the seed.
pub fn gen_sample(scenario: &Scenario, seed: u64) -> Sample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<f64> = (0..scenario.n).map(|_| scenario.design.draw(&mut rng)).collect();
    let y: Vec<f64> = x
        .iter()
        .map(|&xi| {
            let z: f64 = StandardNormal.sample(&mut rng);
            scenario.regression_fn.eval(xi) + scenario.sigma * z
        })
        .collect();
    Sample::new(x, y, scenario.ise_interval).expect("generated sample is valid")
}

/// Trapezoid-rule integrated squared error between estimate and truth
/// sampled on the same uniform grid over `interval`.
pub fn ise(estimate: &[f64], truth: &[f64], interval: Interval) -> f64 {
    assert_eq!(estimate.len(), truth.len());
    let sq: Vec<f64> = estimate
        .iter()
        .zip(truth)
        .map(|(a, b)| (a - b) * (a - b))
        .collect();
    trapezoid_integral(&sq, interval.lo(), interval.hi())
}

/// ISE of two functions via a fresh uniform grid of `grid_points` points.
pub fn ise_fn<F, G>(estimate: F, truth: G, interval: Interval, grid_points: usize) -> f64
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    let grid = interval.grid(grid_points);
    let est: Vec<f64> = grid.iter().map(|&x| estimate(x)).collect();
    let tru: Vec<f64> = grid.iter().map(|&x| truth(x)).collect();
    ise(&est, &tru, interval)
}

/// Full campaign specification.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub scenarios: Vec<Scenario>,
    pub estimators: Vec<EstimatorSpec>,
    pub replications: usize,
    pub base_seed: u64,
    pub grid_points: usize,
    pub kernel: Kernel,
    pub optimizer: OptimizerConfig,
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.scenarios.is_empty() {
            return Err(SimError::InvalidConfig("scenarios must be nonempty".into()));
        }
        if self.estimators.is_empty() {
            return Err(SimError::InvalidConfig("estimators must be nonempty".into()));
        }
        if self.replications == 0 {
            return Err(SimError::InvalidConfig("replications must be >= 1".into()));
        }
        if self.grid_points < 2 {
            return Err(SimError::InvalidConfig("grid_points must be >= 2".into()));
        }
        let mut labels: Vec<String> = self.estimators.iter().map(|e| e.label()).collect();
        labels.sort();
        labels.dedup();
        if labels.len() != self.estimators.len() {
            return Err(SimError::InvalidConfig("estimators contains duplicates".into()));
        }
        for (i, sc) in self.scenarios.iter().enumerate() {
            sc.validate()
                .map_err(|e| SimError::InvalidConfig(format!("scenarios[{i}].{e}")))?;
            if sc.sigma <= 0.0 {
                return Err(SimError::InvalidConfig(format!(
                    "scenarios[{i}].sigma must be > 0 for campaigns"
                )));
            }
        }
        Ok(())
    }

    /// Parse the TOML campaign file format.
    pub fn from_toml_str(text: &str) -> Result<Self, SimError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| SimError::Parse(e.to_string()))?;
        raw.into_config()
    }

    pub fn from_path(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    replications: usize,
    base_seed: u64,
    grid_points: Option<usize>,
    kernel: Option<Kernel>,
    optimizer: Option<RawOptimizer>,
    scenarios: Vec<RawScenario>,
    estimators: Vec<RawEstimator>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOptimizer {
    max_evals_per_h: Option<usize>,
    h_grid_len: Option<usize>,
    rel_tol: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    function: String,
    design: String,
    design_range: Option<[f64; 2]>,
    sigma: f64,
    n: usize,
    ise_interval: [f64; 2],
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEstimator {
    kind: String,
    nodes: Option<usize>,
}

impl RawConfig {
    fn into_config(self) -> Result<SimConfig, SimError> {
        let mut scenarios = Vec::with_capacity(self.scenarios.len());
        for (i, raw) in self.scenarios.iter().enumerate() {
            let at = |field: &str, msg: &str| {
                SimError::InvalidConfig(format!("scenarios[{i}].{field}: {msg}"))
            };
            let regression_fn = match raw.function.as_str() {
                "exp" => RegressionFn::Exp,
                "sin" => RegressionFn::Sin,
                other => return Err(at("function", &format!("unknown function {other:?}"))),
            };
            let design = match raw.design.as_str() {
                "normal" => Design::Normal,
                "uniform" => {
                    let r = raw
                        .design_range
                        .ok_or_else(|| at("design_range", "required for uniform designs"))?;
                    Design::Uniform { lo: r[0], hi: r[1] }
                }
                other => return Err(at("design", &format!("unknown design {other:?}"))),
            };
            if raw.sigma <= 0.0 || !raw.sigma.is_finite() {
                return Err(at("sigma", "must be a finite positive real"));
            }
            let ise_interval = Interval::new(raw.ise_interval[0], raw.ise_interval[1])
                .map_err(|e| at("ise_interval", &e.to_string()))?;
            let sc = Scenario {
                regression_fn,
                design,
                sigma: raw.sigma,
                n: raw.n,
                ise_interval,
            };
            sc.validate()
                .map_err(|e| SimError::InvalidConfig(format!("scenarios[{i}]: {e}")))?;
            scenarios.push(sc);
        }

        let mut estimators = Vec::with_capacity(self.estimators.len());
        for (i, raw) in self.estimators.iter().enumerate() {
            let spec = EstimatorSpec::parse(&raw.kind, raw.nodes.unwrap_or(4)).map_err(|e| {
                SimError::InvalidConfig(format!("estimators[{i}].kind: {e}"))
            })?;
            if matches!(spec, EstimatorSpec::Nw | EstimatorSpec::Ll | EstimatorSpec::Io)
                && raw.nodes.is_some()
            {
                return Err(SimError::InvalidConfig(format!(
                    "estimators[{i}].nodes: only applies to tilted kinds"
                )));
            }
            estimators.push(spec);
        }

        let mut optimizer = OptimizerConfig::default();
        if let Some(raw) = self.optimizer {
            if let Some(v) = raw.max_evals_per_h {
                optimizer.max_evals_per_h = v;
            }
            if let Some(v) = raw.h_grid_len {
                optimizer.h_grid_len = v;
            }
            if let Some(v) = raw.rel_tol {
                optimizer.rel_tol = v;
            }
        }
        let grid_points = self.grid_points.unwrap_or(201);
        optimizer.grid_points = grid_points;

        let config = SimConfig {
            scenarios,
            estimators,
            replications: self.replications,
            base_seed: self.base_seed,
            grid_points,
            kernel: self.kernel.unwrap_or(Kernel::Gaussian),
            optimizer,
        };
        config.validate()?;
        Ok(config)
    }
}

/// Per (scenario, estimator) results across replications.
#[derive(Debug, Clone)]
pub struct CellResult {
    per_rep: Vec<Option<f64>>,
    mise: f64,
    mean: f64,
}

impl CellResult {
    pub fn from_reps(per_rep: Vec<Option<f64>>) -> Self {
        let successes: Vec<f64> = per_rep.iter().flatten().copied().collect();
        let mise = median(&successes);
        let mean = if successes.is_empty() {
            f64::NAN
        } else {
            successes.iter().sum::<f64>() / successes.len() as f64
        };
        CellResult { per_rep, mise, mean }
    }

    /// ISE of each replication; `None` marks a failed fit.
    pub fn per_rep(&self) -> &[Option<f64>] {
        &self.per_rep
    }

    pub fn ises(&self) -> Vec<f64> {
        self.per_rep.iter().flatten().copied().collect()
    }

    /// Median ISE (NaN when every replication failed).
    pub fn mise(&self) -> f64 {
        self.mise
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn failures(&self) -> usize {
        self.per_rep.iter().filter(|v| v.is_none()).count()
    }

    pub fn replications(&self) -> usize {
        self.per_rep.len()
    }
}

fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Campaign outcome: `cells[scenario][estimator]`.
#[derive(Debug, Clone)]
pub struct SimResult {
    pub scenarios: Vec<Scenario>,
    pub estimator_labels: Vec<String>,
    pub cells: Vec<Vec<CellResult>>,
    pub base_seed: u64,
    pub grid_points: usize,
    /// Wall-clock per scenario; informational only, never emitted to CSVs.
    pub runtime_ms: Vec<u128>,
}

/// Run the full factorial campaign. Replications are independent parallel
/// work units; every estimator in a replication sees the same sample.
pub fn run_campaign(config: &SimConfig) -> Result<SimResult, SimError> {
    config.validate()?;
    let mut cells = Vec::with_capacity(config.scenarios.len());
    let mut runtime_ms = Vec::with_capacity(config.scenarios.len());
    for (j, scenario) in config.scenarios.iter().enumerate() {
        let t0 = std::time::Instant::now();
        let per_rep: Vec<Vec<Option<f64>>> = (0..config.replications)
            .into_par_iter()
            .map(|k| run_replication(config, scenario, j as u64, k as u64))
            .collect();
        runtime_ms.push(t0.elapsed().as_millis());
        let mut scenario_cells = Vec::with_capacity(config.estimators.len());
        for e in 0..config.estimators.len() {
            scenario_cells.push(CellResult::from_reps(
                per_rep.iter().map(|row| row[e]).collect(),
            ));
        }
        cells.push(scenario_cells);
    }
    Ok(SimResult {
        scenarios: config.scenarios.clone(),
        estimator_labels: config.estimators.iter().map(|e| e.label()).collect(),
        cells,
        base_seed: config.base_seed,
        grid_points: config.grid_points,
        runtime_ms,
    })
}

fn run_replication(
    config: &SimConfig,
    scenario: &Scenario,
    scenario_idx: u64,
    rep: u64,
) -> Vec<Option<f64>> {
    let seed = mix_seed(config.base_seed, scenario_idx, rep);
    let sample = gen_sample(scenario, seed);
    let grid = scenario.ise_interval.grid(config.grid_points);
    let truth: Vec<f64> = grid.iter().map(|&x| scenario.regression_fn.eval(x)).collect();
    let mut ctx = FitContext::new(&sample, config.kernel, config.optimizer.clone());
    config
        .estimators
        .iter()
        .map(|&spec| {
            let est = ctx.fit(spec).ok()?;
            let pred = est.predict(&grid).ok()?;
            Some(ise(&pred, &truth, scenario.ise_interval))
        })
        .collect()
}

/// Format with six significant digits for the human-facing tables.
pub fn format_sig6(v: f64) -> String {
    if v.is_nan() {
        return "NA".to_string();
    }
    if v == 0.0 {
        return "0".to_string();
    }
    let magnitude = v.abs().log10().floor() as i32;
    let scale = 10f64.powi(5 - magnitude);
    format!("{}", (v * scale).round() / scale)
}

/// Write the wide MISE tables (one per scenario family), the long-format
/// raw ISE file, and the failure accounting file. Returns the paths written.
pub fn emit_tables(result: &SimResult, dir: &Path) -> Result<Vec<PathBuf>, SimError> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    // Group scenario indices into families and give each a unique file name.
    let mut families: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    let base_names: Vec<String> = result
        .scenarios
        .iter()
        .map(|sc| format!("{}_{}", sc.regression_fn.label(), sc.design.label()))
        .collect();
    for (j, sc) in result.scenarios.iter().enumerate() {
        // Disambiguate only when one (function, design) pair is measured
        // over several intervals or uniform ranges in the same campaign.
        let mut name = base_names[j].clone();
        let clash = result.scenarios.iter().enumerate().any(|(i, other)| {
            i != j
                && base_names[i] == base_names[j]
                && (other.ise_interval != sc.ise_interval || other.design != sc.design)
        });
        if clash {
            if let Design::Uniform { lo, hi } = sc.design {
                let same_fn_other_range = result.scenarios.iter().any(|o| {
                    o.regression_fn == sc.regression_fn && o.design != sc.design
                });
                if same_fn_other_range {
                    write!(name, "_x{}to{}", lo, hi).unwrap();
                }
            }
            write!(name, "_{}", interval_slug(sc.ise_interval)).unwrap();
        }
        families.entry(name).or_default().push(j);
    }

    for (name, mut idxs) in families {
        idxs.sort_by(|&a, &b| {
            let sa = &result.scenarios[a];
            let sb = &result.scenarios[b];
            sa.n.cmp(&sb.n).then(sa.sigma.total_cmp(&sb.sigma))
        });
        let mut text = String::new();
        write!(text, "n,sigma").unwrap();
        for label in &result.estimator_labels {
            write!(text, ",{label}").unwrap();
        }
        write!(text, ",min_estimator").unwrap();
        for label in &result.estimator_labels {
            write!(text, ",{label}_mean").unwrap();
        }
        text.push('\n');
        for &j in &idxs {
            let sc = &result.scenarios[j];
            write!(text, "{},{}", sc.n, sc.sigma).unwrap();
            let mut min_label = "NA";
            let mut min_val = f64::INFINITY;
            for (e, label) in result.estimator_labels.iter().enumerate() {
                let mise = result.cells[j][e].mise();
                write!(text, ",{}", format_sig6(mise)).unwrap();
                if mise.is_finite() && mise < min_val {
                    min_val = mise;
                    min_label = label;
                }
            }
            write!(text, ",{min_label}").unwrap();
            for e in 0..result.estimator_labels.len() {
                write!(text, ",{}", format_sig6(result.cells[j][e].mean())).unwrap();
            }
            text.push('\n');
        }
        let path = dir.join(format!("mise_{name}.csv"));
        std::fs::write(&path, text)?;
        written.push(path);
    }

    let mut raw = String::from("scenario,estimator,replication,ise\n");
    for (j, sc) in result.scenarios.iter().enumerate() {
        for (e, label) in result.estimator_labels.iter().enumerate() {
            for (k, maybe) in result.cells[j][e].per_rep().iter().enumerate() {
                if let Some(v) = maybe {
                    writeln!(raw, "{},{},{},{}", sc.label(), label, k, v).unwrap();
                }
            }
        }
    }
    let raw_path = dir.join("ise_raw.csv");
    std::fs::write(&raw_path, raw)?;
    written.push(raw_path);

    let mut failures = String::from("scenario,estimator,failed,total,flagged\n");
    for (j, sc) in result.scenarios.iter().enumerate() {
        for (e, label) in result.estimator_labels.iter().enumerate() {
            let cell = &result.cells[j][e];
            let flagged = cell.failures() * 10 > cell.replications();
            writeln!(
                failures,
                "{},{},{},{},{}",
                sc.label(),
                label,
                cell.failures(),
                cell.replications(),
                flagged
            )
            .unwrap();
        }
    }
    let failures_path = dir.join("failures.csv");
    std::fs::write(&failures_path, failures)?;
    written.push(failures_path);

    Ok(written)
}

/// Edge-vs-interior comparison row of [`run_boundary_study`].
#[derive(Debug, Clone)]
pub struct BoundaryRow {
    pub label: String,
    pub mise_full: f64,
    pub mise_inner: f64,
}

/// Fit each replication once and integrate its squared error over both the
/// scenario's own (full) interval and a nested inner interval, so the two
/// MISE columns compare the same fitted curves and isolate the boundary
/// contribution.
pub fn run_boundary_study(
    scenario: &Scenario,
    inner: Interval,
    estimators: &[EstimatorSpec],
    kernel: Kernel,
    optimizer: &OptimizerConfig,
    replications: usize,
    base_seed: u64,
    grid_points: usize,
) -> Result<Vec<BoundaryRow>, SimError> {
    scenario.validate()?;
    if inner.lo() < scenario.ise_interval.lo() || inner.hi() > scenario.ise_interval.hi() {
        return Err(SimError::InvalidConfig(
            "inner interval must nest inside the scenario interval".into(),
        ));
    }
    let full = scenario.ise_interval;
    let rows: Vec<Vec<Option<(f64, f64)>>> = (0..replications)
        .into_par_iter()
        .map(|k| {
            let seed = mix_seed(base_seed, 0, k as u64);
            let sample = gen_sample(scenario, seed);
            let grid_full = full.grid(grid_points);
            let truth_full: Vec<f64> =
                grid_full.iter().map(|&x| scenario.regression_fn.eval(x)).collect();
            let grid_inner = inner.grid(grid_points);
            let truth_inner: Vec<f64> =
                grid_inner.iter().map(|&x| scenario.regression_fn.eval(x)).collect();
            let mut ctx = FitContext::new(&sample, kernel, optimizer.clone());
            estimators
                .iter()
                .map(|&spec| {
                    let est = ctx.fit(spec).ok()?;
                    let pf = est.predict(&grid_full).ok()?;
                    let pi = est.predict(&grid_inner).ok()?;
                    Some((ise(&pf, &truth_full, full), ise(&pi, &truth_inner, inner)))
                })
                .collect()
        })
        .collect();

    Ok(estimators
        .iter()
        .enumerate()
        .map(|(e, spec)| {
            let fulls: Vec<f64> = rows.iter().filter_map(|r| r[e].map(|v| v.0)).collect();
            let inners: Vec<f64> = rows.iter().filter_map(|r| r[e].map(|v| v.1)).collect();
            BoundaryRow {
                label: spec.label(),
                mise_full: median(&fulls),
                mise_inner: median(&inners),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sin_scenario(n: usize, sigma: f64) -> Scenario {
        Scenario {
            regression_fn: RegressionFn::Sin,
            design: Design::Uniform { lo: 0.0, hi: 1.0 },
            sigma,
            n,
            ise_interval: Interval::new(0.0, 1.0).unwrap(),
        }
    }

    #[test]
    fn regression_fn_values() {
        // exp truth at 0 is 4/sqrt(2 pi); sin truth at 1/8 is sin(pi/2).
        assert!((RegressionFn::Exp.eval(0.0) - 1.595_769_121_605_730_8).abs() < 1e-15);
        assert!((RegressionFn::Sin.eval(0.125) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gen_sample_deterministic_and_noise_free_at_sigma_zero() {
        let mut sc = sin_scenario(20, 0.5);
        let a = gen_sample(&sc, 99);
        let b = gen_sample(&sc, 99);
        assert_eq!(a.x(), b.x());
        assert_eq!(a.y(), b.y());
        let c = gen_sample(&sc, 100);
        assert_ne!(a.x(), c.x());

        sc.sigma = 0.0;
        let s = gen_sample(&sc, 7);
        for (x, y) in s.x().iter().zip(s.y()) {
            assert_eq!(*y, RegressionFn::Sin.eval(*x));
        }
        assert!(s.x().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn mix_seed_unique_within_campaign() {
        let mut seen = std::collections::HashSet::new();
        for j in 0..8u64 {
            for k in 0..500u64 {
                assert!(seen.insert(mix_seed(42, j, k)), "seed collision at ({j},{k})");
            }
        }
    }

    #[test]
    fn ise_zero_for_identical_curves() {
        let grid = crate::quad::uniform_grid(0.0, 1.0, 201);
        let vals: Vec<f64> = grid.iter().map(|x| x.sin()).collect();
        assert_eq!(ise(&vals, &vals, Interval::new(0.0, 1.0).unwrap()), 0.0);
    }

    #[test]
    fn ise_constant_offset() {
        let interval = Interval::new(-1.0, 3.0).unwrap();
        let v = ise_fn(|x| x.cos() + 0.25, |x| x.cos(), interval, 201);
        assert!((v - 0.0625 * 4.0).abs() < 1e-6);
    }

    #[test]
    fn ise_matches_fine_grid_oracle() {
        // estimate - truth = 0.1 cos(3 pi x) + 0.02; 1e5-point reference.
        let interval = Interval::new(0.0, 1.0).unwrap();
        let oracle = 0.0054;
        let v = ise_fn(
            |x| (3.0 * std::f64::consts::PI * x).cos().mul_add(0.1, 0.02),
            |_| 0.0,
            interval,
            201,
        );
        assert!(((v - oracle) / oracle).abs() < 1e-3, "{v}");
    }

    #[test]
    fn median_definition() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
    }

    fn tiny_config() -> SimConfig {
        SimConfig {
            scenarios: vec![sin_scenario(40, 0.3)],
            estimators: vec![EstimatorSpec::Nw, EstimatorSpec::Io],
            replications: 3,
            base_seed: 7,
            grid_points: 101,
            kernel: Kernel::Gaussian,
            optimizer: OptimizerConfig {
                grid_points: 101,
                h_grid_len: 12,
                max_evals_per_h: 60,
                ..OptimizerConfig::default()
            },
        }
    }

    #[test]
    fn campaign_single_replication_median_is_that_ise() {
        let mut cfg = tiny_config();
        cfg.replications = 1;
        let res = run_campaign(&cfg).unwrap();
        for row in &res.cells {
            for cell in row {
                let ises = cell.ises();
                assert_eq!(ises.len(), 1);
                assert_eq!(cell.mise(), ises[0]);
            }
        }
    }

    #[test]
    fn campaign_median_matches_recomputation() {
        let res = run_campaign(&tiny_config()).unwrap();
        for row in &res.cells {
            for cell in row {
                assert_eq!(cell.mise(), median(&cell.ises()));
                assert!(cell.ises().iter().all(|&v| v >= 0.0));
            }
        }
    }

    #[test]
    fn campaign_failures_counted_not_fatal() {
        // Epanechnikov with an ISE interval wider than the design support
        // leaves grid points with no kernel mass.
        let mut cfg = tiny_config();
        cfg.kernel = Kernel::Epanechnikov;
        cfg.scenarios = vec![Scenario {
            regression_fn: RegressionFn::Sin,
            design: Design::Uniform { lo: 0.0, hi: 1.0 },
            sigma: 0.3,
            n: 30,
            ise_interval: Interval::new(-1.0, 2.0).unwrap(),
        }];
        cfg.estimators = vec![EstimatorSpec::Nw];
        let res = run_campaign(&cfg).unwrap();
        assert_eq!(res.cells[0][0].failures(), 3);
        assert!(res.cells[0][0].mise().is_nan());
    }

    #[test]
    fn campaign_rejects_bad_configs() {
        let mut cfg = tiny_config();
        cfg.estimators.clear();
        assert!(matches!(run_campaign(&cfg), Err(SimError::InvalidConfig(_))));
    }

    #[test]
    fn toml_round_trip_and_field_errors() {
        let text = r#"
replications = 2
base_seed = 11
grid_points = 101

[[scenarios]]
function = "sin"
design = "uniform"
design_range = [0.0, 1.0]
sigma = 0.5
n = 30
ise_interval = [0.0, 1.0]

[[estimators]]
kind = "nw"

[[estimators]]
kind = "tilted-nw"
nodes = 4
"#;
        let cfg = SimConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.replications, 2);
        assert_eq!(cfg.estimators.len(), 2);
        assert_eq!(cfg.estimators[1], EstimatorSpec::TiltedNw { nodes: 4 });

        let bad = text.replace("sigma = 0.5", "sigma = -0.5");
        let err = SimConfig::from_toml_str(&bad).unwrap_err();
        assert!(err.to_string().contains("sigma"), "{err}");

        let bad = text.replace("design_range = [0.0, 1.0]\n", "");
        let err = SimConfig::from_toml_str(&bad).unwrap_err();
        assert!(err.to_string().contains("design_range"), "{err}");
    }

    #[test]
    fn emit_tables_layout_and_min_marker() {
        let dir = tempfile::tempdir().unwrap();
        let res = run_campaign(&tiny_config()).unwrap();
        let paths = emit_tables(&res, dir.path()).unwrap();
        assert!(paths.iter().any(|p| p.ends_with("mise_sin_uniform.csv")));
        let table =
            std::fs::read_to_string(dir.path().join("mise_sin_uniform.csv")).unwrap();
        let mut lines = table.lines();
        assert_eq!(
            lines.next().unwrap(),
            "n,sigma,NW,IO,min_estimator,NW_mean,IO_mean"
        );
        let row = lines.next().unwrap();
        assert!(row.starts_with("40,0.3,"));
        let min_label = row.split(',').nth(4).unwrap();
        assert!(min_label == "NW" || min_label == "IO");

        let raw = std::fs::read_to_string(dir.path().join("ise_raw.csv")).unwrap();
        // header + 2 estimators x 3 replications
        assert_eq!(raw.lines().count(), 1 + 6);
        let failures = std::fs::read_to_string(dir.path().join("failures.csv")).unwrap();
        assert_eq!(failures.lines().count(), 1 + 2);
    }

    #[test]
    fn emit_tables_single_estimator_marks_itself() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_config();
        cfg.estimators = vec![EstimatorSpec::Nw];
        cfg.replications = 1;
        let res = run_campaign(&cfg).unwrap();
        emit_tables(&res, dir.path()).unwrap();
        let table = std::fs::read_to_string(dir.path().join("mise_sin_uniform.csv")).unwrap();
        let row = table.lines().nth(1).unwrap();
        assert_eq!(row.split(',').nth(3).unwrap(), "NW");
    }

    #[test]
    fn emit_tables_disambiguates_intervals() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_config();
        let mut inner = cfg.scenarios[0];
        inner.ise_interval = Interval::new(0.15, 0.85).unwrap();
        cfg.scenarios.push(inner);
        let res = run_campaign(&cfg).unwrap();
        let paths = emit_tables(&res, dir.path()).unwrap();
        let names: Vec<String> = paths
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        assert!(names.contains(&"mise_sin_uniform_0to1.csv".to_string()), "{names:?}");
        assert!(
            names.contains(&"mise_sin_uniform_0.15to0.85.csv".to_string()),
            "{names:?}"
        );
    }

    #[test]
    fn campaign_deterministic_repeat() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let cfg = tiny_config();
        emit_tables(&run_campaign(&cfg).unwrap(), dir_a.path()).unwrap();
        emit_tables(&run_campaign(&cfg).unwrap(), dir_b.path()).unwrap();
        for name in ["mise_sin_uniform.csv", "ise_raw.csv", "failures.csv"] {
            let a = std::fs::read(dir_a.path().join(name)).unwrap();
            let b = std::fs::read(dir_b.path().join(name)).unwrap();
            assert_eq!(a, b, "{name} differs between runs");
        }
    }

    #[test]
    fn boundary_study_inner_not_worse() {
        let sc = sin_scenario(60, 0.5);
        let rows = run_boundary_study(
            &sc,
            Interval::new(0.15, 0.85).unwrap(),
            &[EstimatorSpec::Nw, EstimatorSpec::Io],
            Kernel::Gaussian,
            &OptimizerConfig {
                grid_points: 101,
                h_grid_len: 10,
                max_evals_per_h: 50,
                ..OptimizerConfig::default()
            },
            5,
            3,
            101,
        )
        .unwrap();
        for row in rows {
            assert!(
                row.mise_inner < row.mise_full,
                "{}: inner {} full {}",
                row.label,
                row.mise_inner,
                row.mise_full
            );
        }
    }

    #[test]
    fn format_sig6_rounds() {
        assert_eq!(format_sig6(0.085734945), "0.0857349");
        assert_eq!(format_sig6(0.0857349512), "0.085735");
        assert_eq!(format_sig6(123456.789), "123457");
        assert_eq!(format_sig6(f64::NAN), "NA");
        assert_eq!(format_sig6(0.0), "0");
    }
}
