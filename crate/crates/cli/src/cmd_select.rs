//! `sbs select`: run the two-step selection on a CSV dataset.

use std::io::Write;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use sbs_core::selector::{two_step_select, SelectionResult, SelectorSettings};
use sbs_core::{derive_seed, make_pool, SigmaMode};

use crate::config::{merge, ConfigFile};
use crate::dataio::{load_csv, LoadedData};
use crate::util::{parse_sigma, resolve_seed, resolve_workers, sigma_label};

#[derive(Args, Debug)]
pub struct SelectArgs {
    /// CSV file with a header row; all non-response columns are covariates.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Name of the response column.
    #[arg(long)]
    response: Option<String>,
    /// Screening model size (default: n/4, clamped to min(n, p)).
    #[arg(long)]
    d: Option<usize>,
    /// Slab scale of the screening step (default: p^2/n).
    #[arg(long = "g-screen")]
    g_screen: Option<f64>,
    /// Slab scale of the selection step (default: d^2).
    #[arg(long = "g-select")]
    g_select: Option<f64>,
    /// Inclusion prior for the selection step (default: 1/p).
    #[arg(long)]
    q: Option<f64>,
    /// Error-variance mode: 'jeffreys' or 'known:VALUE' (default: jeffreys).
    #[arg(long)]
    sigma: Option<String>,
    /// Center and scale covariates before selection (default: true).
    #[arg(long)]
    standardize: Option<bool>,
    /// Gibbs sweeps (default: 1000).
    #[arg(long)]
    sweeps: Option<usize>,
    /// Screening pass cap (default: 30).
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
    /// Output CSV (default: standard output).
    #[arg(long)]
    out: Option<PathBuf>,
}

const CONFIG_KEYS: &[&str] = &[
    "data",
    "response",
    "d",
    "g_screen",
    "g_select",
    "q",
    "sigma",
    "standardize",
    "sweeps",
    "max_passes",
    "seed",
    "workers",
    "out",
];

pub fn run(args: SelectArgs) -> Result<()> {
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
    let sigma_mode = match merge(args.sigma, &config, "sigma")? {
        Some(text) => parse_sigma(&text)?,
        None => SigmaMode::Jeffreys,
    };
    let standardize = merge(args.standardize, &config, "standardize")?.unwrap_or(true);
    let seed = resolve_seed(merge(args.seed, &config, "seed")?);
    let workers = resolve_workers(merge(args.workers, &config, "workers")?)?;
    let out: Option<PathBuf> = match args.out {
        Some(p) => Some(p),
        None => merge(None, &config, "out")?,
    };

    let loaded = load_csv(&data_path, &response)?;
    let (n, p) = (loaded.dataset.n(), loaded.dataset.p());
    let mut d = merge(args.d, &config, "d")?;
    if let Some(requested) = d {
        if requested > n.min(p) {
            eprintln!(
                "warning: --d {requested} exceeds min(n, p) = {}; clamped",
                n.min(p)
            );
            d = Some(n.min(p));
        }
    }
    let settings = SelectorSettings {
        d,
        max_passes: merge(args.max_passes, &config, "max_passes")?.unwrap_or(30),
        sweeps: merge(args.sweeps, &config, "sweeps")?.unwrap_or(1000),
        g_screen: merge(args.g_screen, &config, "g_screen")?,
        g_select: merge(args.g_select, &config, "g_select")?,
        q_select: merge(args.q, &config, "q")?,
        sigma_mode,
        standardize,
        random_init: false,
    };
    let opts = settings.options(n, p, derive_seed(seed, &[2]), derive_seed(seed, &[3]));

    let pool = make_pool(workers)?;
    let result = pool.install(|| two_step_select(&loaded.dataset, &opts))?;

    for w in &result.diagnostics.warnings {
        eprintln!("warning: {w}");
    }
    eprintln!(
        "selected {} of {} covariates (screened {}), log-weight {:.4}, {} passes, {} sweeps, {:.2}s",
        result.selected.len(),
        p,
        result.screened.len(),
        result.log_weight,
        result.diagnostics.passes,
        result.diagnostics.sweeps,
        result.diagnostics.runtime.as_secs_f64()
    );

    let report = render_csv(&loaded, &result, seed, &settings, n, p)?;
    match out {
        Some(path) => std::fs::write(&path, report)
            .with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().write_all(report.as_bytes())?,
    }
    Ok(())
}

/// Long-format CSV: section,name,index,value. Runtime never appears here so
/// reruns with the same seed are byte-identical.
fn render_csv(
    loaded: &LoadedData,
    result: &SelectionResult,
    seed: u64,
    settings: &SelectorSettings,
    n: usize,
    p: usize,
) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["section", "name", "index", "value"])?;
    let d_sel = result.screened.len();
    let summary_rows = [
        ("seed", seed.to_string()),
        ("n", n.to_string()),
        ("p", p.to_string()),
        ("d", settings.resolved_d(n, p).to_string()),
        (
            "g_screen",
            settings
                .g_screen
                .unwrap_or((p * p) as f64 / n as f64)
                .to_string(),
        ),
        (
            "g_select",
            settings
                .g_select
                .unwrap_or((d_sel * d_sel) as f64)
                .to_string(),
        ),
        ("sigma", sigma_label(settings.sigma_mode)),
        ("standardize", settings.standardize.to_string()),
        ("log_weight", result.log_weight.to_string()),
        ("n_screened", result.screened.len().to_string()),
        ("n_selected", result.selected.len().to_string()),
        ("passes", result.diagnostics.passes.to_string()),
        ("sweeps", result.diagnostics.sweeps.to_string()),
    ];
    for (name, value) in summary_rows {
        w.write_record(["summary", name, "", &value])?;
    }

    for &j in result.screened.iter() {
        w.write_record([
            "screened",
            &loaded.covariate_names[j],
            &j.to_string(),
            "1",
        ])?;
    }
    for (k, &j) in result.selected.iter().enumerate() {
        w.write_record([
            "selected",
            &loaded.covariate_names[j],
            &j.to_string(),
            &result.coefficients[k].to_string(),
        ])?;
    }
    if result.scaling.is_some() {
        let original = result.coefficients_original_scale();
        for (k, &j) in result.selected.iter().enumerate() {
            w.write_record([
                "selected_original",
                &loaded.covariate_names[j],
                &j.to_string(),
                &original[k].to_string(),
            ])?;
        }
        w.write_record([
            "selected_original",
            "_intercept",
            "",
            &result.intercept_original_scale().to_string(),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}
