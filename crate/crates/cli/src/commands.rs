//! Subcommand implementations.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde_json::json;

use tiltsmooth::estimators::fit_estimator;
use tiltsmooth::realdata::{
    compare_estimators, dose_response_compare, ingest_covid_csv, list_countries, read_dose_csv,
    read_xy_csv, CountField, CsvColumns, IngestOptions,
};
use tiltsmooth::simulate::{emit_tables, format_sig6, run_campaign, SimConfig};
use tiltsmooth::tilting::expand_p;
use tiltsmooth::{
    EstimatorSpec, FittedEstimator, FittedSmoother, Interval, OptimizerConfig, Sample,
    SmootherKind,
};

use crate::manifest::write_manifest;
use crate::{CovidArgs, DoseArgs, FitArgs, SimulateArgs};

pub enum CliError {
    MissingInput(PathBuf),
    Other(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for CliError {
    fn from(err: E) -> Self {
        CliError::Other(err.into())
    }
}

type CliResult = Result<(), CliError>;

fn require_input(path: &Path) -> Result<(), CliError> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::MissingInput(path.to_path_buf()))
    }
}

fn optimizer_from(est: &crate::EstimatorArgs, fixed_h: Option<f64>) -> OptimizerConfig {
    OptimizerConfig {
        max_evals_per_h: est.max_evals,
        h_grid_len: est.h_grid_len,
        rel_tol: est.tol,
        grid_points: est.grid_points,
        fixed_h,
    }
}

fn write_curve(path: &Path, xs: &[f64], ys: &[f64]) -> std::io::Result<()> {
    let mut text = String::from("x,y_hat\n");
    for (x, y) in xs.iter().zip(ys) {
        writeln!(text, "{x},{y}").unwrap();
    }
    std::fs::write(path, text)
}

pub fn fit(args: FitArgs) -> CliResult {
    require_input(&args.input)?;
    std::fs::create_dir_all(&args.common.out).context("creating output directory")?;

    let (x, y) = read_xy_csv(&args.input)?;
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let interval = Interval::new(lo, hi).context("design points span an empty interval")?;
    let sample = Sample::new(x, y, interval)?;

    let spec = EstimatorSpec::parse(&args.estimator, args.est.nodes)?;
    let kernel = args.est.kernel.kernel();
    let fitted = match (spec, args.h) {
        // A fixed bandwidth bypasses selection for the plain smoothers and
        // pins the sweep for the tilted ones.
        (EstimatorSpec::Nw, Some(h)) => FittedEstimator::Smoother(FittedSmoother::new(
            SmootherKind::Nw,
            kernel,
            h,
            sample.clone(),
        )?),
        (EstimatorSpec::Ll, Some(h)) => FittedEstimator::Smoother(FittedSmoother::new(
            SmootherKind::Ll,
            kernel,
            h,
            sample.clone(),
        )?),
        (EstimatorSpec::Io, Some(h)) => {
            FittedEstimator::Smoother(FittedSmoother::io(sample.clone(), h)?)
        }
        (spec, fixed_h) => {
            let optimizer = optimizer_from(&args.est, fixed_h);
            fit_estimator(&sample, spec, kernel, &optimizer)?
        }
    };

    let grid = interval.grid(args.est.grid_points);
    let curve = fitted.predict(&grid)?;
    write_curve(&args.common.out.join("fitted_curve.csv"), &grid, &curve)?;

    let in_sample = fitted.predict(sample.x())?;
    let mse = in_sample
        .iter()
        .zip(sample.y())
        .map(|(p, v)| (p - v) * (p - v))
        .sum::<f64>()
        / sample.len() as f64;

    let mut summary = String::new();
    writeln!(summary, "estimator: {}", spec.label()).unwrap();
    writeln!(summary, "kernel: {:?}", kernel).unwrap();
    writeln!(summary, "n: {}", sample.len()).unwrap();
    writeln!(summary, "h: {}", fitted.bandwidth()).unwrap();
    if let Some(obj) = fitted.objective() {
        writeln!(summary, "objective: {obj}").unwrap();
        writeln!(summary, "converged: {}", fitted.converged()).unwrap();
    }
    if let Some(params) = fitted.tilt_params() {
        let values: Vec<String> = params.node_values().iter().map(|v| v.to_string()).collect();
        writeln!(summary, "node_values: {}", values.join(" ")).unwrap();
        let p = expand_p(params, &sample)?;
        writeln!(summary, "p_sum: {}", p.iter().sum::<f64>()).unwrap();
    }
    if let FittedEstimator::Smoother(smoother) = &fitted {
        // Of interest for the flat-top smoother, whose weights may be
        // negative: the largest absolute weight mass over the grid.
        let mut max_l1 = 0.0f64;
        for &g in &grid {
            max_l1 = max_l1.max(smoother.weight_abs_sum(g)?);
        }
        writeln!(summary, "max_weight_l1: {max_l1}").unwrap();
    }
    writeln!(summary, "mse: {mse}").unwrap();
    std::fs::write(args.common.out.join("summary.txt"), summary)?;

    write_manifest(
        &args.common.out,
        "fit",
        args.common.seed,
        args.common.threads,
        json!({
            "input": args.input,
            "estimator": spec.label(),
            "kernel": format!("{kernel:?}"),
            "h": args.h,
            "nodes": args.est.nodes,
            "grid_points": args.est.grid_points,
            "max_evals": args.est.max_evals,
            "h_grid_len": args.est.h_grid_len,
            "tol": args.est.tol,
        }),
    )?;
    Ok(())
}

pub fn simulate(args: SimulateArgs) -> CliResult {
    require_input(&args.config)?;
    std::fs::create_dir_all(&args.common.out).context("creating output directory")?;

    let config_text = std::fs::read_to_string(&args.config)?;
    let mut config = SimConfig::from_toml_str(&config_text).map_err(anyhow::Error::from)?;
    if let Some(seed) = args.common.seed {
        config.base_seed = seed;
    }
    let result = run_campaign(&config).map_err(anyhow::Error::from)?;
    for (scenario, ms) in result.scenarios.iter().zip(&result.runtime_ms) {
        eprintln!("scenario {} done in {} ms", scenario.label(), ms);
    }
    let written = emit_tables(&result, &args.common.out).map_err(anyhow::Error::from)?;
    for path in &written {
        println!("{}", path.display());
    }

    write_manifest(
        &args.common.out,
        "simulate",
        Some(config.base_seed),
        args.common.threads,
        json!({
            "config_path": args.config,
            "config": config_text,
            "base_seed": config.base_seed,
            "grid_points": config.grid_points,
        }),
    )?;
    Ok(())
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}

pub fn covid(args: CovidArgs) -> CliResult {
    require_input(&args.input)?;
    std::fs::create_dir_all(&args.common.out).context("creating output directory")?;

    let options = IngestOptions {
        columns: CsvColumns {
            date: args.date_col.clone(),
            country: args.country_col.clone(),
            cases: args.cases_col.clone(),
            deaths: args.deaths_col.clone(),
            date_format: args.date_format.clone(),
        },
        zero_replacement: args.zero_replacement,
    };
    let countries = match &args.country {
        Some(c) => vec![c.clone()],
        None => list_countries(&args.input, &options.columns)?,
    };
    let fields: Vec<CountField> = match args.field.as_str() {
        "cases" => vec![CountField::Cases],
        "deaths" => vec![CountField::Deaths],
        "both" => vec![CountField::Cases, CountField::Deaths],
        other => {
            return Err(anyhow::anyhow!("unknown field {other:?} (expected cases|deaths|both)").into())
        }
    };
    let specs = [
        EstimatorSpec::Io,
        EstimatorSpec::Nw,
        EstimatorSpec::TiltedNw { nodes: args.est.nodes },
    ];
    let kernel = args.est.kernel.kernel();
    let optimizer = optimizer_from(&args.est, None);

    let mut table = String::from("country,field");
    for spec in &specs {
        write!(table, ",{}", spec.label()).unwrap();
    }
    table.push_str(",min_estimator\n");

    for country in &countries {
        for &field in &fields {
            let sample = match ingest_covid_csv(&args.input, country, field, &options) {
                Ok(s) => s,
                Err(err) if args.country.is_none() => {
                    eprintln!("skipping {country}/{}: {err}", field.label());
                    continue;
                }
                Err(err) => return Err(err.into()),
            };
            let rows = compare_estimators(&sample, &specs, kernel, &optimizer, args.est.grid_points)?;
            write!(table, "{country},{}", field.label()).unwrap();
            for spec in &specs {
                let row = rows.iter().find(|r| r.label == spec.label()).unwrap();
                match row.mse {
                    Some(m) => write!(table, ",{}", format_sig6(m)).unwrap(),
                    None => table.push_str(",NA"),
                }
            }
            let min_label = rows
                .iter()
                .find(|r| r.is_min)
                .map(|r| r.label.as_str())
                .unwrap_or("NA");
            writeln!(table, ",{min_label}").unwrap();

            let grid = sample.eval_interval().grid(args.est.grid_points);
            for row in &rows {
                if let Some(curve) = &row.curve {
                    let name = format!(
                        "fitted_curve_{}_{}_{}.csv",
                        sanitize(country),
                        field.label(),
                        row.label
                    );
                    write_curve(&args.common.out.join(name), &grid, curve)?;
                }
            }
        }
    }
    std::fs::write(args.common.out.join("mse_by_country.csv"), table)?;

    write_manifest(
        &args.common.out,
        "covid",
        args.common.seed,
        args.common.threads,
        json!({
            "input": args.input,
            "country": args.country,
            "field": args.field,
            "zero_replacement": args.zero_replacement,
            "columns": {
                "date": args.date_col,
                "country": args.country_col,
                "cases": args.cases_col,
                "deaths": args.deaths_col,
                "date_format": args.date_format,
            },
            "nodes": args.est.nodes,
            "kernel": format!("{kernel:?}"),
            "grid_points": args.est.grid_points,
        }),
    )?;
    Ok(())
}

pub fn dose(args: DoseArgs) -> CliResult {
    require_input(&args.input)?;
    std::fs::create_dir_all(&args.common.out).context("creating output directory")?;

    let (doses, responses) = read_dose_csv(&args.input)?;
    let kernel = args.est.kernel.kernel();
    let optimizer = optimizer_from(&args.est, None);
    let (rows, grid) = dose_response_compare(
        &doses,
        &responses,
        kernel,
        args.est.nodes,
        &optimizer,
        args.est.grid_points,
    )?;

    let mut table = String::from("estimator,mse,is_min\n");
    for row in &rows {
        let mse = row.mse.map(format_sig6).unwrap_or_else(|| "NA".into());
        writeln!(table, "{},{},{}", row.label, mse, row.is_min).unwrap();
    }
    std::fs::write(args.common.out.join("dose_response_mse.csv"), table)?;
    for row in &rows {
        if let Some(curve) = &row.curve {
            let name = format!("fitted_curve_{}.csv", sanitize(&row.label));
            write_curve(&args.common.out.join(name), &grid, curve)?;
        }
    }

    write_manifest(
        &args.common.out,
        "dose",
        args.common.seed,
        args.common.threads,
        json!({
            "input": args.input,
            "nodes": args.est.nodes,
            "kernel": format!("{kernel:?}"),
            "grid_points": args.est.grid_points,
        }),
    )?;
    Ok(())
}
