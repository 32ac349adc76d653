//! `sbs cv`: leave-one-out cross-validation at a list of screening sizes.

use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use sbs_core::experiments::{
    loocv_median_square_error, write_cv_folds_csv, write_cv_summary_csv, CvResult,
};
use sbs_core::selector::SelectorSettings;
use sbs_core::{derive_seed, make_pool, SigmaMode};

use crate::config::{merge, ConfigFile};
use crate::dataio::load_csv;
use crate::util::{parse_sigma, resolve_seed, resolve_workers};

#[derive(Args, Debug)]
pub struct CvArgs {
    /// CSV file with a header row.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Name of the response column.
    #[arg(long)]
    response: Option<String>,
    /// Comma-separated screening sizes to evaluate, e.g. 5,10,15.
    #[arg(long = "d-list", value_delimiter = ',')]
    d_list: Vec<usize>,
    /// Error-variance mode: 'jeffreys' or 'known:VALUE' (default: jeffreys).
    #[arg(long)]
    sigma: Option<String>,
    /// Center and scale within each training fold (default: true).
    #[arg(long)]
    standardize: Option<bool>,
    #[arg(long = "g-screen")]
    g_screen: Option<f64>,
    #[arg(long = "g-select")]
    g_select: Option<f64>,
    #[arg(long)]
    sweeps: Option<usize>,
    #[arg(long = "max-passes")]
    max_passes: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: SBS_WORKERS or all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// key = value file supplying any of the above options.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for cv_summary.csv and cv_folds.csv; without it the
    /// summary goes to standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

const CONFIG_KEYS: &[&str] = &[
    "data",
    "response",
    "d_list",
    "sigma",
    "standardize",
    "g_screen",
    "g_select",
    "sweeps",
    "max_passes",
    "seed",
    "workers",
    "out",
];

pub fn run(args: CvArgs) -> Result<()> {
    let config = match &args.config {
        Some(path) => {
            let c = ConfigFile::load(path)?;
            c.reject_unknown(CONFIG_KEYS)?;
            c
        }
        None => ConfigFile::default(),
    };
    let data_path: PathBuf = merge(args.data, &config, "data")?
        .context("--data is required (flag or config)")?;
    let response: String = merge(args.response, &config, "response")?
        .context("--response is required (flag or config)")?;
    let d_list: Vec<usize> = if args.d_list.is_empty() {
        match config.list("d_list") {
            Some(items) => items
                .iter()
                .map(|s| {
                    s.parse::<usize>()
                        .map_err(|_| anyhow::anyhow!("d_list: cannot parse '{s}'"))
                })
                .collect::<Result<_>>()?,
            None => bail!("--d-list is required (flag or config)"),
        }
    } else {
        args.d_list
    };
    if d_list.is_empty() {
        bail!("--d-list must name at least one screening size");
    }
    let sigma_mode = match merge(args.sigma, &config, "sigma")? {
        Some(text) => parse_sigma(&text)?,
        None => SigmaMode::Jeffreys,
    };
    let seed = resolve_seed(merge(args.seed, &config, "seed")?);
    let workers = resolve_workers(merge(args.workers, &config, "workers")?)?;

    let loaded = load_csv(&data_path, &response)?;
    let settings = SelectorSettings {
        d: None,
        max_passes: merge(args.max_passes, &config, "max_passes")?.unwrap_or(30),
        sweeps: merge(args.sweeps, &config, "sweeps")?.unwrap_or(1000),
        g_screen: merge(args.g_screen, &config, "g_screen")?,
        g_select: merge(args.g_select, &config, "g_select")?,
        q_select: None,
        sigma_mode,
        standardize: merge(args.standardize, &config, "standardize")?.unwrap_or(true),
        random_init: false,
    };

    let pool = make_pool(workers)?;
    let mut runs: Vec<(usize, CvResult)> = Vec::with_capacity(d_list.len());
    for &d in &d_list {
        let cv = pool.install(|| {
            loocv_median_square_error(&loaded.dataset, d, &settings, derive_seed(seed, &[d as u64]))
        })?;
        eprintln!(
            "d={d}: median squared error {:.6}, mean {:.6} over {} folds",
            cv.median_sq_err,
            cv.mean_sq_err,
            cv.folds.len()
        );
        runs.push((d, cv));
    }

    match &args.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)
                .with_context(|| format!("creating output directory {}", dir.display()))?;
            let summary_path = dir.join("cv_summary.csv");
            let folds_path = dir.join("cv_folds.csv");
            write_cv_summary_csv(&runs, std::fs::File::create(&summary_path)?)?;
            write_cv_folds_csv(&runs, std::fs::File::create(&folds_path)?)?;
            eprintln!(
                "wrote {} and {}",
                summary_path.display(),
                folds_path.display()
            );
        }
        None => {
            let mut buf = Vec::new();
            write_cv_summary_csv(&runs, &mut buf)?;
            std::io::stdout().write_all(&buf)?;
        }
    }
    Ok(())
}
