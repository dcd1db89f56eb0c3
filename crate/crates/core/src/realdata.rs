//! Real-data pipelines: daily count-series ingestion with log transform,
//! per-series estimator comparison by in-sample MSE, and a robust
//! four-parameter logistic (4PL) baseline for dose-response curves.

use std::collections::BTreeSet;
use std::io;
use std::path::Path;

use chrono::NaiveDate;
use thiserror::Error;

use crate::estimators::{EstimatorSpec, FitContext, FitError};
use crate::kernels::Kernel;
use crate::optim::NelderMead;
use crate::smoothers::{Interval, Sample, SmootherError};
use crate::tilting::OptimizerConfig;

#[derive(Debug, Error)]
pub enum DataError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("column {0:?} not found in header")]
    MissingColumn(String),
    #[error("row {line}: {message}")]
    BadRow { line: u64, message: String },
    #[error("row {line}: negative count")]
    NegativeCount { line: u64 },
    #[error("duplicate date {date} for country {country:?}")]
    DuplicateDate { date: NaiveDate, country: String },
    #[error("unknown country {requested:?}; available: {}", available.join(", "))]
    UnknownCountry {
        requested: String,
        available: Vec<String>,
    },
    #[error("no usable observations for country {0:?}")]
    EmptySeries(String),
    #[error("dose-response fits need at least 5 distinct doses, got {0}")]
    InsufficientDesign(usize),
    #[error("dose {value} at index {index} is not positive and finite")]
    NonPositiveDose { index: usize, value: f64 },
    #[error("doses and responses differ in length ({doses} vs {responses})")]
    LengthMismatch { doses: usize, responses: usize },
    #[error("estimator list must be nonempty")]
    NoEstimators,
    #[error(transparent)]
    Sample(#[from] SmootherError),
}

/// One parsed row of a daily count series.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesRecord {
    pub date: NaiveDate,
    pub country: String,
    pub cases: i64,
    pub deaths: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CountField {
    Cases,
    Deaths,
}

impl CountField {
    pub fn label(self) -> &'static str {
        match self {
            CountField::Cases => "cases",
            CountField::Deaths => "deaths",
        }
    }
}

/// Input column mapping. The defaults target the ECDC worldwide export
/// (`dateRep`, `countriesAndTerritories`, `cases`, `deaths`, DD/MM/YYYY).
#[derive(Debug, Clone)]
pub struct CsvColumns {
    pub date: String,
    pub country: String,
    pub cases: String,
    pub deaths: String,
    pub date_format: String,
}

impl Default for CsvColumns {
    fn default() -> Self {
        CsvColumns {
            date: "dateRep".into(),
            country: "countriesAndTerritories".into(),
            cases: "cases".into(),
            deaths: "deaths".into(),
            date_format: "%d/%m/%Y".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct IngestOptions {
    pub columns: CsvColumns,
    /// Zero counts are replaced by this positive value before the log
    /// transform (half a count by default).
    pub zero_replacement: f64,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            columns: CsvColumns::default(),
            zero_replacement: 0.5,
        }
    }
}

struct ColumnIndices {
    date: usize,
    country: usize,
    cases: usize,
    deaths: usize,
}

fn resolve_columns(headers: &csv::StringRecord, cols: &CsvColumns) -> Result<ColumnIndices, DataError> {
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::MissingColumn(name.to_string()))
    };
    Ok(ColumnIndices {
        date: find(&cols.date)?,
        country: find(&cols.country)?,
        cases: find(&cols.cases)?,
        deaths: find(&cols.deaths)?,
    })
}

fn record_line(record: &csv::StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}

/// Distinct country names present in a count-series CSV, sorted.
pub fn list_countries(path: &Path, columns: &CsvColumns) -> Result<Vec<String>, DataError> {
    let mut reader = csv::Reader::from_path(path)?;
    let idx = resolve_columns(reader.headers()?, columns)?;
    let mut seen = BTreeSet::new();
    for record in reader.records() {
        let record = record?;
        if let Some(c) = record.get(idx.country) {
            seen.insert(c.to_string());
        }
    }
    Ok(seen.into_iter().collect())
}

/// Ingest one (country, field) series: X is the day offset from the first
/// observed date, Y is `log(count)` with zero counts replaced by
/// `log(zero_replacement)`. The sample is sorted by date and its evaluation
/// interval spans `[0, last offset]`.
pub fn ingest_covid_csv(
    path: &Path,
    country: &str,
    field: CountField,
    options: &IngestOptions,
) -> Result<Sample, DataError> {
    let mut reader = csv::Reader::from_path(path)?;
    let idx = resolve_columns(reader.headers()?, &options.columns)?;
    let mut rows: Vec<(NaiveDate, i64)> = Vec::new();
    let mut available = BTreeSet::new();

    for record in reader.records() {
        let record = record?;
        let line = record_line(&record);
        let row_country = record
            .get(idx.country)
            .ok_or_else(|| DataError::BadRow {
                line,
                message: "missing country field".into(),
            })?
            .to_string();
        available.insert(row_country.clone());
        if row_country != country {
            continue;
        }
        let date_text = record.get(idx.date).ok_or_else(|| DataError::BadRow {
            line,
            message: "missing date field".into(),
        })?;
        let date = NaiveDate::parse_from_str(date_text, &options.columns.date_format).map_err(
            |e| DataError::BadRow {
                line,
                message: format!("bad date {date_text:?}: {e}"),
            },
        )?;
        let count_idx = match field {
            CountField::Cases => idx.cases,
            CountField::Deaths => idx.deaths,
        };
        let raw = record.get(count_idx).ok_or_else(|| DataError::BadRow {
            line,
            message: "missing count field".into(),
        })?;
        let count: i64 = raw.trim().parse().map_err(|_| DataError::BadRow {
            line,
            message: format!("bad count {raw:?}"),
        })?;
        if count < 0 {
            return Err(DataError::NegativeCount { line });
        }
        rows.push((date, count));
    }

    if rows.is_empty() {
        return if available.contains(country) {
            Err(DataError::EmptySeries(country.to_string()))
        } else {
            Err(DataError::UnknownCountry {
                requested: country.to_string(),
                available: available.into_iter().collect(),
            })
        };
    }

    rows.sort_by_key(|(d, _)| *d);
    for pair in rows.windows(2) {
        if pair[0].0 == pair[1].0 {
            return Err(DataError::DuplicateDate {
                date: pair[0].0,
                country: country.to_string(),
            });
        }
    }

    let first = rows[0].0;
    let x: Vec<f64> = rows
        .iter()
        .map(|(d, _)| (*d - first).num_days() as f64)
        .collect();
    let y: Vec<f64> = rows
        .iter()
        .map(|(_, c)| {
            if *c == 0 {
                options.zero_replacement.ln()
            } else {
                (*c as f64).ln()
            }
        })
        .collect();
    let last = *x.last().unwrap();
    let interval = Interval::new(0.0, last.max(f64::MIN_POSITIVE))?;
    Ok(Sample::new(x, y, interval)?)
}

/// Read a plain `x,y` CSV (headers required).
pub fn read_xy_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>), DataError> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let xi = headers
        .iter()
        .position(|h| h == "x")
        .ok_or_else(|| DataError::MissingColumn("x".into()))?;
    let yi = headers
        .iter()
        .position(|h| h == "y")
        .ok_or_else(|| DataError::MissingColumn("y".into()))?;
    let mut x = Vec::new();
    let mut y = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record_line(&record);
        let parse = |i: usize| -> Result<f64, DataError> {
            record
                .get(i)
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| DataError::BadRow {
                    line,
                    message: "bad numeric field".into(),
                })
        };
        x.push(parse(xi)?);
        y.push(parse(yi)?);
    }
    Ok((x, y))
}

/// Read a `dose,response` CSV (headers required).
pub fn read_dose_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>), DataError> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let di = headers
        .iter()
        .position(|h| h == "dose")
        .ok_or_else(|| DataError::MissingColumn("dose".into()))?;
    let ri = headers
        .iter()
        .position(|h| h == "response")
        .ok_or_else(|| DataError::MissingColumn("response".into()))?;
    let mut doses = Vec::new();
    let mut responses = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record_line(&record);
        let parse = |i: usize| -> Result<f64, DataError> {
            record
                .get(i)
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| DataError::BadRow {
                    line,
                    message: "bad numeric field".into(),
                })
        };
        doses.push(parse(di)?);
        responses.push(parse(ri)?);
    }
    Ok((doses, responses))
}

/// Write a sample back out as `x,y` rows at full (round-trip) precision.
pub fn write_sample_csv(sample: &Sample, path: &Path) -> Result<(), DataError> {
    let mut text = String::from("x,y\n");
    for (x, y) in sample.x().iter().zip(sample.y()) {
        text.push_str(&format!("{x},{y}\n"));
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// One estimator's in-sample comparison entry.
#[derive(Debug, Clone)]
pub struct ComparisonRow {
    pub label: String,
    /// In-sample mean squared error; `None` when the fit failed.
    pub mse: Option<f64>,
    pub is_min: bool,
    pub bandwidth: Option<f64>,
    /// Fitted values on the uniform plotting grid, when the fit succeeded.
    pub curve: Option<Vec<f64>>,
}

fn mse(pred: &[f64], y: &[f64]) -> f64 {
    pred.iter()
        .zip(y)
        .map(|(p, v)| (p - v) * (p - v))
        .sum::<f64>()
        / y.len() as f64
}

fn rank_rows(rows: &mut [ComparisonRow]) {
    rows.sort_by(|a, b| match (a.mse, b.mse) {
        (Some(x), Some(y)) => x.total_cmp(&y).then_with(|| a.label.cmp(&b.label)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.label.cmp(&b.label),
    });
    if let Some(first) = rows.first_mut() {
        first.is_min = first.mse.is_some();
    }
}

/// Fit each estimator on the full series and rank them by in-sample MSE
/// (failed fits sink to the bottom, marked by a missing MSE). The plotting
/// grid has `grid_points` uniform points over the sample's evaluation
/// interval.
pub fn compare_estimators(
    sample: &Sample,
    specs: &[EstimatorSpec],
    kernel: Kernel,
    optimizer: &OptimizerConfig,
    grid_points: usize,
) -> Result<Vec<ComparisonRow>, DataError> {
    if specs.is_empty() {
        return Err(DataError::NoEstimators);
    }
    let grid = sample.eval_interval().grid(grid_points);
    let mut ctx = FitContext::new(sample, kernel, optimizer.clone());
    let mut rows: Vec<ComparisonRow> = specs
        .iter()
        .map(|&spec| {
            let fitted: Result<_, FitError> = ctx.fit(spec).and_then(|est| {
                let in_sample = est.predict(sample.x())?;
                let curve = est.predict(&grid)?;
                Ok((est.bandwidth(), mse(&in_sample, sample.y()), curve))
            });
            match fitted {
                Ok((h, m, curve)) => ComparisonRow {
                    label: spec.label(),
                    mse: Some(m),
                    is_min: false,
                    bandwidth: Some(h),
                    curve: Some(curve),
                },
                Err(_) => ComparisonRow {
                    label: spec.label(),
                    mse: None,
                    is_min: false,
                    bandwidth: None,
                    curve: None,
                },
            }
        })
        .collect();
    rank_rows(&mut rows);
    Ok(rows)
}

/// Four-parameter logistic curve `f(x) = d + (a - d) / (1 + (x/c)^b)` with
/// lower asymptote `a`, upper asymptote `d`, EC50 `c > 0` and slope `b`.
/// Canonical form has `d >= a` (swapping the asymptotes and negating the
/// slope leaves the curve unchanged).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourPL {
    pub lower: f64,
    pub upper: f64,
    pub ec50: f64,
    pub slope: f64,
}

impl FourPL {
    pub fn eval(&self, x: f64) -> f64 {
        self.upper + (self.lower - self.upper) / (1.0 + (x / self.ec50).powf(self.slope))
    }
}

/// Residual loss for [`fit_4pl_robust`]. `Huber { delta: None }` tunes the
/// scale as 1.345 times the MAD of the residuals at the heuristic start
/// (an all-quadratic loss when that MAD is zero).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Loss {
    Squared,
    Huber { delta: Option<f64> },
}

fn median_of(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn rho(loss_delta: Option<f64>, r: f64) -> f64 {
    match loss_delta {
        None => r * r,
        Some(delta) => {
            let a = r.abs();
            if a <= delta {
                r * r
            } else {
                2.0 * delta * a - delta * delta
            }
        }
    }
}

/// Fit the 4PL model by derivative-free direct search over
/// `(a, d, log c, b)` from heuristic starts (both slope signs), with an
/// optional Huber loss for outlier resistance. Returns the canonicalized
/// parameters and the plain in-sample MSE of the final fit.
pub fn fit_4pl_robust(
    doses: &[f64],
    responses: &[f64],
    loss: Loss,
) -> Result<(FourPL, f64), DataError> {
    if doses.len() != responses.len() {
        return Err(DataError::LengthMismatch {
            doses: doses.len(),
            responses: responses.len(),
        });
    }
    for (i, &d) in doses.iter().enumerate() {
        if !(d.is_finite() && d > 0.0) {
            return Err(DataError::NonPositiveDose { index: i, value: d });
        }
    }
    let distinct: BTreeSet<u64> = doses.iter().map(|d| d.to_bits()).collect();
    if distinct.len() < 5 {
        return Err(DataError::InsufficientDesign(distinct.len()));
    }

    let lo = responses.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = responses.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_c0 = median_of(doses.to_vec()).ln();

    let curve = |theta: &[f64], x: f64| {
        let (a, d, log_c, b) = (theta[0], theta[1], theta[2], theta[3]);
        d + (a - d) / (1.0 + (x.ln() - log_c).exp().powf(b))
    };

    // Scale for the Huber branch: MAD of residuals at the rising start.
    let start_up = [lo, hi, log_c0, 1.0];
    let delta = match loss {
        Loss::Squared => None,
        Loss::Huber { delta: Some(d) } => Some(d),
        Loss::Huber { delta: None } => {
            let resid: Vec<f64> = doses
                .iter()
                .zip(responses)
                .map(|(&x, &y)| (y - curve(&start_up, x)).abs())
                .collect();
            let mad = median_of(resid);
            (mad > 0.0 && mad.is_finite()).then_some(1.345 * mad)
        }
    };

    let total_loss = |theta: &[f64]| -> f64 {
        let mut acc = 0.0;
        for (&x, &y) in doses.iter().zip(responses) {
            let f = curve(theta, x);
            if !f.is_finite() {
                return f64::INFINITY;
            }
            acc += rho(delta, y - f);
        }
        acc
    };

    let spread = if hi > lo { hi - lo } else { 1.0 };
    let nm = NelderMead {
        max_evals: 6000,
        rel_tol: 1e-12,
        initial_step: 0.25 * spread.min(4.0).max(0.05),
        restarts: 3,
    };
    let mut best: Option<(Vec<f64>, f64)> = None;
    for b0 in [1.0, -1.0] {
        let r = nm.minimize(total_loss, &[lo, hi, log_c0, b0]);
        if best.as_ref().is_none_or(|(_, v)| r.value < *v) {
            best = Some((r.x, r.value));
        }
    }
    let theta = best.unwrap().0;

    let mut fit = FourPL {
        lower: theta[0],
        upper: theta[1],
        ec50: theta[2].exp(),
        slope: theta[3],
    };
    if fit.lower > fit.upper {
        std::mem::swap(&mut fit.lower, &mut fit.upper);
        fit.slope = -fit.slope;
    }
    // Collapse numerically constant fits so flat data has a unique report.
    let fitted: Vec<f64> = doses.iter().map(|&x| fit.eval(x)).collect();
    let fit_lo = fitted.iter().cloned().fold(f64::INFINITY, f64::min);
    let fit_hi = fitted.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if fit_hi - fit_lo <= 1e-9 * (1.0 + fit_hi.abs().max(fit_lo.abs())) {
        let level = fitted.iter().sum::<f64>() / fitted.len() as f64;
        fit.lower = level;
        fit.upper = level;
        fit.slope = 0.0;
    }

    let final_fit: Vec<f64> = doses.iter().map(|&x| fit.eval(x)).collect();
    Ok((fit, mse(&final_fit, responses)))
}

/// Compare the tilted-LL, LL and IO smoothers with the robust 4PL baseline
/// on one dose-response data set, all scored by in-sample MSE. Returns the
/// ranked rows and the plotting grid their curves are sampled on.
pub fn dose_response_compare(
    doses: &[f64],
    responses: &[f64],
    kernel: Kernel,
    nodes: usize,
    optimizer: &OptimizerConfig,
    grid_points: usize,
) -> Result<(Vec<ComparisonRow>, Vec<f64>), DataError> {
    if doses.len() != responses.len() {
        return Err(DataError::LengthMismatch {
            doses: doses.len(),
            responses: responses.len(),
        });
    }
    let mut order: Vec<usize> = (0..doses.len()).collect();
    order.sort_by(|&i, &j| doses[i].total_cmp(&doses[j]));
    let x: Vec<f64> = order.iter().map(|&i| doses[i]).collect();
    let y: Vec<f64> = order.iter().map(|&i| responses[i]).collect();
    let interval = Interval::new(x[0], *x.last().unwrap())?;
    let sample = Sample::new(x.clone(), y.clone(), interval)?;
    let grid = interval.grid(grid_points);

    let specs = [
        EstimatorSpec::TiltedLl { nodes },
        EstimatorSpec::Ll,
        EstimatorSpec::Io,
    ];
    let mut rows = compare_estimators(&sample, &specs, kernel, optimizer, grid_points)?;
    for row in &mut rows {
        row.is_min = false;
    }

    let pl_row = match fit_4pl_robust(&x, &y, Loss::Huber { delta: None }) {
        Ok((fit, m)) => ComparisonRow {
            label: "4PL".into(),
            mse: Some(m),
            is_min: false,
            bandwidth: None,
            curve: Some(grid.iter().map(|&g| fit.eval(g)).collect()),
        },
        Err(_) => ComparisonRow {
            label: "4PL".into(),
            mse: None,
            is_min: false,
            bandwidth: None,
            curve: None,
        },
    };
    rows.push(pl_row);
    rank_rows(&mut rows);
    Ok((rows, grid))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::io::Write;

    fn write_fixture(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
        let path = dir.join(name);
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(text.as_bytes()).unwrap();
        path
    }

    const COVID_FIXTURE: &str = "\
dateRep,day,month,year,cases,deaths,countriesAndTerritories
01/03/2020,1,3,2020,1,0,Avalon
02/03/2020,2,3,2020,10,1,Avalon
04/03/2020,4,3,2020,100,3,Avalon
01/03/2020,1,3,2020,5,2,Borduria
02/03/2020,2,3,2020,0,0,Borduria
03/03/2020,3,3,2020,7,1,Borduria
";

    #[test]
    fn ingest_applies_log_and_zero_rule() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_fixture(dir.path(), "covid.csv", COVID_FIXTURE);
        let s = ingest_covid_csv(&path, "Avalon", CountField::Cases, &IngestOptions::default())
            .unwrap();
        // Day offsets honor the calendar gap.
        assert_eq!(s.x(), &[0.0, 1.0, 3.0]);
        assert_eq!(s.y()[0], 0.0);
        assert!((s.y()[1] - 10f64.ln()).abs() < 1e-15);
        assert!((s.y()[2] - 100f64.ln()).abs() < 1e-15);
        assert_eq!(s.eval_interval().lo(), 0.0);
        assert_eq!(s.eval_interval().hi(), 3.0);

        let s = ingest_covid_csv(&path, "Borduria", CountField::Cases, &IngestOptions::default())
            .unwrap();
        assert!((s.y()[1] - 0.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn ingest_unknown_country_lists_available() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_fixture(dir.path(), "covid.csv", COVID_FIXTURE);
        let err = ingest_covid_csv(&path, "Atlantis", CountField::Cases, &IngestOptions::default())
            .unwrap_err();
        match err {
            DataError::UnknownCountry { requested, available } => {
                assert_eq!(requested, "Atlantis");
                assert_eq!(available, vec!["Avalon".to_string(), "Borduria".to_string()]);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn ingest_rejects_bad_rows_with_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let bad_count = COVID_FIXTURE.replace("04/03/2020,4,3,2020,100,3,Avalon", "04/03/2020,4,3,2020,-3,3,Avalon");
        let path = write_fixture(dir.path(), "neg.csv", &bad_count);
        let err = ingest_covid_csv(&path, "Avalon", CountField::Cases, &IngestOptions::default())
            .unwrap_err();
        assert!(matches!(err, DataError::NegativeCount { line: 4 }), "{err:?}");

        let bad_date = COVID_FIXTURE.replace("02/03/2020,2,3,2020,10,1,Avalon", "2020-03-02,2,3,2020,10,1,Avalon");
        let path = write_fixture(dir.path(), "baddate.csv", &bad_date);
        let err = ingest_covid_csv(&path, "Avalon", CountField::Cases, &IngestOptions::default())
            .unwrap_err();
        assert!(matches!(err, DataError::BadRow { line: 3, .. }), "{err:?}");
    }

    #[test]
    fn ingest_round_trips_through_xy_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_fixture(dir.path(), "covid.csv", COVID_FIXTURE);
        let s = ingest_covid_csv(&path, "Borduria", CountField::Deaths, &IngestOptions::default())
            .unwrap();
        let out = dir.path().join("sample.csv");
        write_sample_csv(&s, &out).unwrap();
        let (x, y) = read_xy_csv(&out).unwrap();
        assert_eq!(x, s.x());
        assert_eq!(y, s.y());
        assert!(s.x().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn list_countries_sorted() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_fixture(dir.path(), "covid.csv", COVID_FIXTURE);
        let countries = list_countries(&path, &CsvColumns::default()).unwrap();
        assert_eq!(countries, vec!["Avalon".to_string(), "Borduria".to_string()]);
    }

    fn wiggly_sample(seed: u64, n: usize) -> Sample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|&v| (6.0 * v).sin() + 0.2 * rng.random_range(-1.0..1.0))
            .collect();
        Sample::new(x, y, Interval::new(0.0, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn compare_ranks_interpolator_first() {
        // An NW fit with a tiny fixed bandwidth interpolates the data, so a
        // CV-selected NW cannot beat a forced interpolator; emulate one by
        // comparing against IO whose rule-of-thumb bandwidth is larger.
        let s = wiggly_sample(4, 25);
        let opt = OptimizerConfig {
            grid_points: 61,
            h_grid_len: 10,
            max_evals_per_h: 40,
            ..OptimizerConfig::default()
        };
        let rows = compare_estimators(
            &s,
            &[EstimatorSpec::Nw, EstimatorSpec::Io],
            Kernel::Gaussian,
            &opt,
            61,
        )
        .unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows[0].is_min);
        assert!(!rows[1].is_min);
        assert!(rows[0].mse.unwrap() <= rows[1].mse.unwrap());
    }

    #[test]
    fn shift_in_responses_leaves_mse_unchanged_at_fixed_bandwidth() {
        // Weights sum to one, so adding c to all responses shifts every
        // fitted value by c and the in-sample MSE stays put.
        use crate::smoothers::{FittedSmoother, SmootherKind};
        let s = wiggly_sample(5, 30);
        let shifted = s.with_y(s.y().iter().map(|v| v + 11.0).collect()).unwrap();
        for (kind, kernel, h) in [
            (SmootherKind::Nw, Kernel::Gaussian, 0.05),
            (SmootherKind::Ll, Kernel::Gaussian, 0.08),
            (SmootherKind::Io, Kernel::Trapezoidal, 0.05),
        ] {
            let a = FittedSmoother::new(kind, kernel, h, s.clone()).unwrap();
            let b = FittedSmoother::new(kind, kernel, h, shifted.clone()).unwrap();
            let ma = mse(&a.predict(s.x()).unwrap(), s.y());
            let mb = mse(&b.predict(shifted.x()).unwrap(), shifted.y());
            assert!((ma - mb).abs() < 1e-9, "{kind:?}: {ma} vs {mb}");
        }
    }

    #[test]
    fn compare_marks_failed_rows_and_keeps_the_rest() {
        // Epanechnikov cannot reach an evaluation interval wider than the
        // data, so every estimator relying on it fails while IO still fits.
        let x: Vec<f64> = (0..20).map(|i| i as f64 / 19.0).collect();
        let y: Vec<f64> = x.iter().map(|v| v + 1.0).collect();
        let s = Sample::new(x, y, Interval::new(-2.0, 3.0).unwrap()).unwrap();
        let opt = OptimizerConfig {
            grid_points: 41,
            h_grid_len: 8,
            max_evals_per_h: 30,
            ..OptimizerConfig::default()
        };
        let rows = compare_estimators(
            &s,
            &[EstimatorSpec::Nw, EstimatorSpec::Io],
            Kernel::Epanechnikov,
            &opt,
            41,
        )
        .unwrap();
        let nw = rows.iter().find(|r| r.label == "NW").unwrap();
        assert!(nw.mse.is_none() && nw.curve.is_none());
        let io = rows.iter().find(|r| r.label == "IO").unwrap();
        assert!(io.mse.is_some());
        assert!(io.is_min);
    }

    fn fourpl_values(a: f64, d: f64, c: f64, b: f64, doses: &[f64]) -> Vec<f64> {
        doses
            .iter()
            .map(|&x| d + (a - d) / (1.0 + (x / c).powf(b)))
            .collect()
    }

    fn log_spaced_doses(n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| 0.1 * (3000f64).powf(i as f64 / (n - 1) as f64))
            .collect()
    }

    #[test]
    fn fourpl_noiseless_recovery() {
        let doses = log_spaced_doses(12);
        let y = fourpl_values(0.0, 100.0, 10.0, 1.0, &doses);
        let (fit, m) = fit_4pl_robust(&doses, &y, Loss::Squared).unwrap();
        assert!(m < 1e-8, "mse {m}");
        assert!(fit.lower.abs() < 1e-3 * 100.0, "a {}", fit.lower);
        assert!((fit.upper - 100.0).abs() < 1e-3 * 100.0, "d {}", fit.upper);
        assert!((fit.ec50 - 10.0).abs() < 1e-3 * 10.0, "c {}", fit.ec50);
        assert!((fit.slope - 1.0).abs() < 1e-3, "b {}", fit.slope);
    }

    #[test]
    fn fourpl_flat_response_collapses() {
        let doses = log_spaced_doses(8);
        let y = vec![42.0; 8];
        let (fit, m) = fit_4pl_robust(&doses, &y, Loss::Squared).unwrap();
        assert!((fit.lower - 42.0).abs() < 1e-6);
        assert_eq!(fit.lower, fit.upper);
        assert_eq!(fit.slope, 0.0);
        assert!(m < 1e-12);
    }

    #[test]
    fn fourpl_canonicalizes_decreasing_curves() {
        // Data generated with a > d must come back with d >= a and the
        // slope sign flipped, leaving the curve unchanged.
        let doses = log_spaced_doses(12);
        let y = fourpl_values(90.0, 5.0, 8.0, 2.0, &doses);
        let (fit, m) = fit_4pl_robust(&doses, &y, Loss::Squared).unwrap();
        assert!(m < 1e-6, "mse {m}");
        assert!(fit.upper >= fit.lower);
        for (&x, &target) in doses.iter().zip(&y) {
            assert!((fit.eval(x) - target).abs() < 1e-2);
        }
    }

    #[test]
    fn fourpl_huber_resists_gross_outlier() {
        let doses = log_spaced_doses(15);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let clean = fourpl_values(0.0, 100.0, 10.0, 1.2, &doses);
        let mut y: Vec<f64> = clean
            .iter()
            .map(|v| v + rng.random_range(-2.0..2.0))
            .collect();
        y[7] += 300.0; // gross outlier
        let (fit_sq, _) = fit_4pl_robust(&doses, &y, Loss::Squared).unwrap();
        let (fit_hu, _) = fit_4pl_robust(&doses, &y, Loss::Huber { delta: None }).unwrap();
        let inlier_mse = |fit: &FourPL| {
            doses
                .iter()
                .zip(&y)
                .enumerate()
                .filter(|(i, _)| *i != 7)
                .map(|(_, (&x, &v))| (fit.eval(x) - v).powi(2))
                .sum::<f64>()
                / 14.0
        };
        assert!(
            inlier_mse(&fit_hu) < inlier_mse(&fit_sq),
            "huber {} vs squared {}",
            inlier_mse(&fit_hu),
            inlier_mse(&fit_sq)
        );
    }

    #[test]
    fn fourpl_input_validation() {
        let doses = vec![1.0, 2.0, 3.0, 4.0];
        let y = vec![0.0; 4];
        assert!(matches!(
            fit_4pl_robust(&doses, &y, Loss::Squared),
            Err(DataError::InsufficientDesign(4))
        ));
        let doses = vec![1.0, 2.0, 3.0, 4.0, 0.0];
        let y = vec![0.0; 5];
        assert!(matches!(
            fit_4pl_robust(&doses, &y, Loss::Squared),
            Err(DataError::NonPositiveDose { index: 4, .. })
        ));
    }

    #[test]
    fn dose_compare_4pl_wins_on_logistic_truth() {
        let doses = log_spaced_doses(20);
        let y = fourpl_values(2.0, 80.0, 15.0, 1.5, &doses);
        let opt = OptimizerConfig {
            grid_points: 61,
            h_grid_len: 10,
            max_evals_per_h: 60,
            ..OptimizerConfig::default()
        };
        let (rows, grid) =
            dose_response_compare(&doses, &y, Kernel::Gaussian, 4, &opt, 61).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(grid.len(), 61);
        assert_eq!(rows[0].label, "4PL");
        assert!(rows[0].is_min);
        assert!(rows[0].mse.unwrap() < 1e-6);
    }

    #[test]
    fn dose_compare_ll_exact_on_affine_truth() {
        let doses: Vec<f64> = (0..20).map(|i| 1.0 + i as f64).collect();
        let y: Vec<f64> = doses.iter().map(|d| 0.3 * d + 2.0).collect();
        let opt = OptimizerConfig {
            grid_points: 61,
            h_grid_len: 10,
            max_evals_per_h: 60,
            ..OptimizerConfig::default()
        };
        let (rows, _) = dose_response_compare(&doses, &y, Kernel::Gaussian, 4, &opt, 61).unwrap();
        let ll = rows.iter().find(|r| r.label == "LL").unwrap();
        assert!(ll.mse.unwrap() < 1e-10, "LL mse {}", ll.mse.unwrap());
        // The tilted fit is pulled toward the IO comparator, so its error
        // against the (affine) data is bounded by the comparator's own:
        // ||tilted - truth|| <= ||tilted - IO|| + ||IO - truth|| <= 2 ||IO - truth||.
        let tll = rows.iter().find(|r| r.label == "LL_p4").unwrap().mse.unwrap();
        let io = rows.iter().find(|r| r.label == "IO").unwrap().mse.unwrap();
        assert!(tll <= (4.0 * io).max(1e-8), "tilted LL mse {tll} vs IO {io}");
        let mean_y = y.iter().sum::<f64>() / y.len() as f64;
        let var_y = y.iter().map(|v| (v - mean_y).powi(2)).sum::<f64>() / y.len() as f64;
        assert!(tll < 0.05 * var_y, "tilted LL mse {tll} vs response variance {var_y}");
    }
}
