//! `sbs simulate`: run a grid of simulation scenarios and write per-rep and
//! aggregate CSVs.
//!
//! The grid file is a key = value config. The keys n, p, cov_case,
//! error_law, and beta_pattern accept comma-separated lists; the grid is
//! their cartesian product, in that key order. An empty list yields an empty
//! grid (header-only CSVs).

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use sbs_core::experiments::{
    run_replications, write_aggregate_csv, write_replications_csv, CellResult, CellSpec,
};
use sbs_core::selector::SelectorSettings;
use sbs_core::simgen::{default_support_size, BetaPattern, CovCase, ErrorLaw, ScenarioSpec};
use sbs_core::{make_pool, SigmaMode};

use crate::config::ConfigFile;
use crate::util::{parse_sigma, resolve_seed, resolve_workers};

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Grid configuration file (key = value; lists on n, p, cov_case,
    /// error_law, beta_pattern).
    #[arg(long)]
    grid: PathBuf,
    /// Replications per cell.
    #[arg(long, default_value_t = 50)]
    reps: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: SBS_WORKERS or all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory for replications.csv and aggregate.csv.
    #[arg(long)]
    out: PathBuf,
}

const GRID_KEYS: &[&str] = &[
    "n",
    "p",
    "cov_case",
    "error_law",
    "beta_pattern",
    "beta_value",
    "support_size",
    "d",
    "sigma",
    "standardize",
    "sweeps",
    "max_passes",
    "g_screen",
    "g_select",
    "q_select",
];

fn parse_cov_case(text: &str) -> Result<CovCase> {
    match text {
        "identity" => Ok(CovCase::Identity),
        "block" => Ok(CovCase::block_default()),
        "equicorrelation" => Ok(CovCase::equicorrelated_default()),
        "ar1" => Ok(CovCase::ar1_default()),
        other => bail!(
            "cov_case must be identity|block|equicorrelation|ar1, got '{other}'"
        ),
    }
}

fn parse_error_law(text: &str) -> Result<ErrorLaw> {
    match text {
        "gaussian" => Ok(ErrorLaw::gaussian_unit()),
        "mvt2" => Ok(ErrorLaw::MultivariateT),
        "iidt2" => Ok(ErrorLaw::IidT),
        other => bail!("error_law must be gaussian|mvt2|iidt2, got '{other}'"),
    }
}

fn parse_beta_pattern(text: &str, beta_value: f64) -> Result<BetaPattern> {
    match text {
        "constant" => Ok(BetaPattern::Constant(beta_value)),
        "decaying" => Ok(BetaPattern::Decaying),
        "increasing" => Ok(BetaPattern::Increasing),
        other => bail!(
            "beta_pattern must be constant|decaying|increasing, got '{other}'"
        ),
    }
}

pub fn build_cells(config: &ConfigFile, reps: usize) -> Result<Vec<CellSpec>> {
    config.reject_unknown(GRID_KEYS)?;
    let ns = config
        .list("n")
        .context("grid key `n` is required")?;
    let ps = config
        .list("p")
        .context("grid key `p` is required")?;
    let covs = config
        .list("cov_case")
        .unwrap_or_else(|| vec!["identity".into()]);
    let errs = config
        .list("error_law")
        .unwrap_or_else(|| vec!["gaussian".into()]);
    let betas = config
        .list("beta_pattern")
        .unwrap_or_else(|| vec!["constant".into()]);

    let beta_value: f64 = config.parse("beta_value")?.unwrap_or(2.0);
    let support_size: Option<usize> = config.parse("support_size")?;
    let sigma_mode = match config.raw("sigma") {
        Some(text) => parse_sigma(text)?,
        None => SigmaMode::Known(1.0),
    };
    let settings_template = SelectorSettings {
        d: config.parse("d")?,
        max_passes: config.parse("max_passes")?.unwrap_or(30),
        sweeps: config.parse("sweeps")?.unwrap_or(1000),
        g_screen: config.parse("g_screen")?,
        g_select: config.parse("g_select")?,
        q_select: config.parse("q_select")?,
        sigma_mode,
        standardize: config.parse("standardize")?.unwrap_or(false),
        random_init: false,
    };

    let mut cells = Vec::new();
    for n_text in &ns {
        let n: usize = n_text
            .parse()
            .map_err(|_| anyhow::anyhow!("grid key `n`: cannot parse '{n_text}'"))?;
        for p_text in &ps {
            let p: usize = p_text
                .parse()
                .map_err(|_| anyhow::anyhow!("grid key `p`: cannot parse '{p_text}'"))?;
            for cov_text in &covs {
                let cov_case = parse_cov_case(cov_text)?;
                for err_text in &errs {
                    let error_law = parse_error_law(err_text)?;
                    for beta_text in &betas {
                        let beta_pattern = parse_beta_pattern(beta_text, beta_value)?;
                        let scenario = ScenarioSpec {
                            n,
                            p,
                            cov_case,
                            error_law,
                            beta_pattern,
                            support_size: support_size
                                .unwrap_or_else(|| default_support_size(p)),
                            seed: 0,
                        };
                        scenario.validate().map_err(|e| {
                            anyhow::anyhow!(
                                "invalid cell (n={n}, p={p}, {cov_text}, {err_text}, {beta_text}): {e}"
                            )
                        })?;
                        cells.push(CellSpec {
                            label: format!("n{n}-p{p}-{cov_text}-{err_text}-{beta_text}"),
                            scenario,
                            replications: reps,
                            settings: settings_template.clone(),
                        });
                    }
                }
            }
        }
    }
    Ok(cells)
}

pub fn run(args: SimulateArgs) -> Result<()> {
    if args.reps == 0 {
        bail!("--reps must be at least 1");
    }
    let config = ConfigFile::load(&args.grid)?;
    let cells = build_cells(&config, args.reps)?;
    let seed = resolve_seed(args.seed);
    let workers = resolve_workers(args.workers)?;
    let pool = make_pool(workers)?;

    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating output directory {}", args.out.display()))?;

    let mut results: Vec<CellResult> = Vec::with_capacity(cells.len());
    for (i, cell) in cells.iter().enumerate() {
        let result = pool.install(|| run_replications(cell, seed, i))?;
        eprintln!(
            "cell {i} [{}]: exact {:.3}, superset {:.3}, screened-superset {:.3}, errored {}, mean {:.2}s/rep",
            cell.label,
            result.proportion_exact,
            result.proportion_superset,
            result.proportion_screened_superset,
            result.errored,
            result.mean_runtime.as_secs_f64()
        );
        results.push(result);
    }

    let rep_path = args.out.join("replications.csv");
    let agg_path = args.out.join("aggregate.csv");
    write_replications_csv(&cells, &results, std::fs::File::create(&rep_path)?)?;
    write_aggregate_csv(&cells, &results, std::fs::File::create(&agg_path)?)?;
    eprintln!(
        "wrote {} and {}",
        rep_path.display(),
        agg_path.display()
    );

    let failed: Vec<usize> = results
        .iter()
        .enumerate()
        .filter(|(_, r)| r.is_failed())
        .map(|(i, _)| i)
        .collect();
    if !failed.is_empty() {
        bail!(
            "{} cell(s) failed (>10% of replications errored): {:?}",
            failed.len(),
            failed
        );
    }
    Ok(())
}
