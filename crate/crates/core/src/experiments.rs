//! Replication harness: selection-proportion grids over simulation
//! scenarios and leave-one-out cross-validation on a fixed dataset.
//!
//! Every replication draws its own RNG streams from (master seed, cell
//! index, replication index), so grid runs are reproducible bit for bit for
//! any worker count. Timing is reported through the API only; the CSV
//! outputs carry no volatile fields.

use std::io::Write;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::derive_seed;
use crate::error::{Error, Result};
use crate::selector::{two_step_select, SelectorSettings};
use crate::simgen::{ScenarioGenerator, ScenarioSpec};

/// One grid cell: a scenario, a replication count, and selector settings.
#[derive(Debug, Clone)]
pub struct CellSpec {
    pub label: String,
    pub scenario: ScenarioSpec,
    pub replications: usize,
    pub settings: SelectorSettings,
}

/// A list of cells sharing one master seed.
#[derive(Debug, Clone)]
pub struct ExperimentGrid {
    pub cells: Vec<CellSpec>,
    pub master_seed: u64,
}

/// Outcome of one replication.
#[derive(Debug, Clone)]
pub struct RepRecord {
    pub rep: usize,
    pub seed: u64,
    /// Populated when the replication failed; the indicator fields are then
    /// all false.
    pub error: Option<String>,
    /// Selected set equals the true support.
    pub exact: bool,
    /// Selected set contains the true support.
    pub selected_superset: bool,
    /// Screened set contains the true support.
    pub screened_superset: bool,
    pub selected: Vec<usize>,
    pub true_support: Vec<usize>,
    pub runtime: Duration,
}

/// Aggregated cell outcome. Proportions are over successful replications.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub proportion_exact: f64,
    pub proportion_superset: f64,
    pub proportion_screened_superset: f64,
    pub errored: usize,
    pub mean_runtime: Duration,
    pub records: Vec<RepRecord>,
}

impl CellResult {
    /// A cell counts as failed when more than 10% of its replications
    /// errored.
    pub fn is_failed(&self) -> bool {
        10 * self.errored > self.records.len()
    }
}

/// Runs every replication of one cell, in parallel over the ambient rayon
/// pool.
pub fn run_replications(cell: &CellSpec, master_seed: u64, cell_index: usize) -> Result<CellResult> {
    if cell.replications == 0 {
        return Err(Error::InvalidConfig("replications must be >= 1".into()));
    }
    let generator = ScenarioGenerator::new(cell.scenario.clone())?;
    let n = cell.scenario.n;
    let p = cell.scenario.p;

    let records: Vec<RepRecord> = (0..cell.replications)
        .into_par_iter()
        .map(|rep| {
            let start = Instant::now();
            let route = [cell_index as u64, rep as u64];
            let data_seed = derive_seed(master_seed, &[1, route[0], route[1]]);
            let screen_seed = derive_seed(master_seed, &[2, route[0], route[1]]);
            let gibbs_seed = derive_seed(master_seed, &[3, route[0], route[1]]);
            let opts = cell.settings.options(n, p, screen_seed, gibbs_seed);
            let run = generator.generate(data_seed).and_then(|truth| {
                let result = two_step_select(&truth.dataset, &opts)?;
                Ok((truth, result))
            });
            match run {
                Ok((truth, result)) => RepRecord {
                    rep,
                    seed: data_seed,
                    error: None,
                    exact: result.selected == truth.true_support,
                    selected_superset: result.selected.is_superset_of(&truth.true_support),
                    screened_superset: result.screened.is_superset_of(&truth.true_support),
                    selected: result.selected.indices().to_vec(),
                    true_support: truth.true_support.indices().to_vec(),
                    runtime: start.elapsed(),
                },
                Err(e) => RepRecord {
                    rep,
                    seed: data_seed,
                    error: Some(e.to_string()),
                    exact: false,
                    selected_superset: false,
                    screened_superset: false,
                    selected: Vec::new(),
                    true_support: Vec::new(),
                    runtime: start.elapsed(),
                },
            }
        })
        .collect();

    let ok: Vec<&RepRecord> = records.iter().filter(|r| r.error.is_none()).collect();
    let denom = ok.len().max(1) as f64;
    let count = |f: fn(&RepRecord) -> bool| ok.iter().filter(|r| f(r)).count() as f64 / denom;
    let total: Duration = records.iter().map(|r| r.runtime).sum();
    Ok(CellResult {
        proportion_exact: count(|r| r.exact),
        proportion_superset: count(|r| r.selected_superset),
        proportion_screened_superset: count(|r| r.screened_superset),
        errored: records.len() - ok.len(),
        mean_runtime: total / records.len() as u32,
        records,
    })
}

/// Runs every cell of the grid in order.
pub fn run_grid(grid: &ExperimentGrid) -> Result<Vec<CellResult>> {
    grid.cells
        .iter()
        .enumerate()
        .map(|(i, cell)| run_replications(cell, grid.master_seed, i))
        .collect()
}

const REPLICATION_HEADER: &[&str] = &[
    "cell",
    "label",
    "n",
    "p",
    "cov_case",
    "error_law",
    "beta_pattern",
    "support_size",
    "d",
    "rep",
    "seed",
    "status",
    "exact",
    "selected_superset",
    "screened_superset",
    "n_selected",
    "selected",
    "true_support",
    "message",
];

const AGGREGATE_HEADER: &[&str] = &[
    "cell",
    "label",
    "n",
    "p",
    "cov_case",
    "error_law",
    "beta_pattern",
    "support_size",
    "d",
    "replications",
    "errored",
    "proportion_exact",
    "proportion_superset",
    "proportion_screened_superset",
    "status",
];

fn join_indices(v: &[usize]) -> String {
    v.iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join(";")
}

fn cell_prefix(index: usize, cell: &CellSpec) -> Vec<String> {
    let s = &cell.scenario;
    vec![
        index.to_string(),
        cell.label.clone(),
        s.n.to_string(),
        s.p.to_string(),
        s.cov_case.label().to_string(),
        s.error_law.label().to_string(),
        s.beta_pattern.label().to_string(),
        s.support_size.to_string(),
        cell.settings.resolved_d(s.n, s.p).to_string(),
    ]
}

/// One row per (cell, replication).
pub fn write_replications_csv<W: Write>(
    cells: &[CellSpec],
    results: &[CellResult],
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REPLICATION_HEADER)?;
    for (i, (cell, result)) in cells.iter().zip(results).enumerate() {
        for r in &result.records {
            let mut rec = cell_prefix(i, cell);
            rec.push(r.rep.to_string());
            rec.push(r.seed.to_string());
            rec.push(if r.error.is_none() { "ok" } else { "error" }.into());
            rec.push((r.exact as u8).to_string());
            rec.push((r.selected_superset as u8).to_string());
            rec.push((r.screened_superset as u8).to_string());
            rec.push(r.selected.len().to_string());
            rec.push(join_indices(&r.selected));
            rec.push(join_indices(&r.true_support));
            rec.push(r.error.clone().unwrap_or_default());
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One row per cell, mirroring the selection-proportion tables.
pub fn write_aggregate_csv<W: Write>(
    cells: &[CellSpec],
    results: &[CellResult],
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(AGGREGATE_HEADER)?;
    for (i, (cell, result)) in cells.iter().zip(results).enumerate() {
        let mut rec = cell_prefix(i, cell);
        rec.push(result.records.len().to_string());
        rec.push(result.errored.to_string());
        rec.push(result.proportion_exact.to_string());
        rec.push(result.proportion_superset.to_string());
        rec.push(result.proportion_screened_superset.to_string());
        rec.push(if result.is_failed() { "failed" } else { "ok" }.into());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// One leave-one-out fold.
#[derive(Debug, Clone)]
pub struct FoldRecord {
    pub fold: usize,
    pub y_true: f64,
    pub y_pred: f64,
    pub sq_err: f64,
    pub n_selected: usize,
}

/// Leave-one-out cross-validation summary.
#[derive(Debug, Clone)]
pub struct CvResult {
    pub median_sq_err: f64,
    pub mean_sq_err: f64,
    pub folds: Vec<FoldRecord>,
}

pub(crate) fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let m = values.len();
    if m % 2 == 1 {
        values[m / 2]
    } else {
        0.5 * (values[m / 2 - 1] + values[m / 2])
    }
}

/// For each observation: select on the remaining rows with screening size
/// `fixed_d`, predict the held-out response, and record the squared error.
/// Standardization statistics are computed inside each fold on its training
/// rows only.
pub fn loocv_median_square_error(
    data: &Dataset,
    fixed_d: usize,
    settings: &SelectorSettings,
    seed: u64,
) -> Result<CvResult> {
    let n = data.n();
    if n < 3 {
        return Err(Error::InvalidConfig(format!(
            "leave-one-out needs n >= 3, got {n}"
        )));
    }
    if fixed_d < 1 || fixed_d > (n - 1).min(data.p()) {
        return Err(Error::InvalidConfig(format!(
            "fixed_d={fixed_d} must lie in [1, min(n-1, p)] = [1, {}]",
            (n - 1).min(data.p())
        )));
    }
    let folds: Vec<Result<FoldRecord>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let train = data.without_row(i);
            let mut local = settings.clone();
            local.d = Some(fixed_d);
            let opts = local.options(
                train.n(),
                train.p(),
                derive_seed(seed, &[11, i as u64]),
                derive_seed(seed, &[12, i as u64]),
            );
            let result = two_step_select(&train, &opts)?;
            let y_pred = result.predict(|j| data.col(j)[i]);
            let y_true = data.y()[i];
            Ok(FoldRecord {
                fold: i,
                y_true,
                y_pred,
                sq_err: (y_true - y_pred) * (y_true - y_pred),
                n_selected: result.selected.len(),
            })
        })
        .collect();
    let folds: Vec<FoldRecord> = folds.into_iter().collect::<Result<_>>()?;
    let mut errs: Vec<f64> = folds.iter().map(|f| f.sq_err).collect();
    let mean = errs.iter().sum::<f64>() / errs.len() as f64;
    Ok(CvResult {
        median_sq_err: median(&mut errs),
        mean_sq_err: mean,
        folds,
    })
}

const FOLD_HEADER: &[&str] = &["d", "fold", "y_true", "y_pred", "sq_err", "n_selected"];
const CV_SUMMARY_HEADER: &[&str] = &["d", "n_folds", "median_sq_err", "mean_sq_err"];

/// One row per fold for each (d, CvResult) pair.
pub fn write_cv_folds_csv<W: Write>(runs: &[(usize, CvResult)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(FOLD_HEADER)?;
    for (d, cv) in runs {
        for f in &cv.folds {
            w.write_record(&[
                d.to_string(),
                f.fold.to_string(),
                f.y_true.to_string(),
                f.y_pred.to_string(),
                f.sq_err.to_string(),
                f.n_selected.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One row per evaluated d.
pub fn write_cv_summary_csv<W: Write>(runs: &[(usize, CvResult)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CV_SUMMARY_HEADER)?;
    for (d, cv) in runs {
        w.write_record(&[
            d.to_string(),
            cv.folds.len().to_string(),
            cv.median_sq_err.to_string(),
            cv.mean_sq_err.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
