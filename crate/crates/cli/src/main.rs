//! `varcast` command-line tool.

mod config;
mod svg;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use serde_json::json;
use varcast::backtest::{coefficient_summary, run_backtest, sensitivity_sweep, BacktestPlan, BacktestResult};
use varcast::benchmarks::TaggedFit;
use varcast::panel::{load_panel, CsvColumns, TimeSeriesPanel};
use varcast::preprocess::{preprocess_panel, SmoothingConfig};
use varcast::synth::{generate, to_count_panel, CountTransform, SyntheticVarSpec};
use varcast::varmodel::{LambdaPolicy, ModelTag, VarSpec};
use varcast::{Error, ErrorKind, Result};

use config::RunConfig;
use svg::{Band, LineSeries};

#[derive(Parser)]
#[command(name = "varcast", version, about = "Sparse VAR forecasting and backtesting of weekly case counts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Read a long-format CSV, report coverage, annual totals and ADF diagnostics.
    Ingest(RunArgs),
    /// Rolling two-week-ahead backtest of the selected models.
    Backtest(RunArgs),
    /// Backtest once per smoothing window and compare.
    Sweep(RunArgs),
    /// Rank lagged VAR coefficients feeding one jurisdiction.
    Coeffs(RunArgs),
    /// Generate a synthetic count panel from a VAR specification.
    Simulate(SimulateArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    /// JSON file with any of the settings below; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Centered moving-average window in weeks (1 = no smoothing).
    #[arg(long)]
    window: Option<usize>,
    /// Windows for `sweep`, comma separated.
    #[arg(long, value_delimiter = ',')]
    windows: Option<Vec<usize>>,
    /// VAR lag order.
    #[arg(long)]
    lag: Option<usize>,
    /// AR-Lasso lag order (defaults to --lag).
    #[arg(long)]
    ar_lag: Option<usize>,
    /// Penalty: cv, max, or fixed:<value>.
    #[arg(long)]
    lambda: Option<String>,
    /// Comma-separated subset of var_lasso, ar_lasso, naive.
    #[arg(long, value_delimiter = ',')]
    models: Option<Vec<String>>,
    /// First target week (YYYY-MM-DD).
    #[arg(long)]
    from: Option<NaiveDate>,
    /// Last target week (YYYY-MM-DD).
    #[arg(long)]
    to: Option<NaiveDate>,
    #[arg(long)]
    seed: Option<u64>,
    /// reuse or refit.
    #[arg(long)]
    refit_policy: Option<String>,
    /// smoothed or raw.
    #[arg(long)]
    score_target: Option<String>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    clamp_nonneg: Option<bool>,
    /// Emit 95% prediction intervals.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    intervals: Option<bool>,
    /// Keep the first week's VAR penalty for the whole run.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    freeze_lambda: Option<bool>,
    /// Jurisdiction for `coeffs`.
    #[arg(long)]
    target: Option<String>,
    /// Rows kept by `coeffs`.
    #[arg(long)]
    top: Option<usize>,
    #[arg(long)]
    date_col: Option<String>,
    #[arg(long)]
    id_col: Option<String>,
    #[arg(long)]
    value_col: Option<String>,
    #[arg(long)]
    no_csv: bool,
    #[arg(long)]
    no_json: bool,
    #[arg(long)]
    no_svg: bool,
}

impl RunArgs {
    fn resolve(self) -> Result<RunConfig> {
        let base = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let off = |b: bool| if b { Some(false) } else { None };
        Ok(base.overlay(RunConfig {
            input: self.input,
            out: self.out,
            window: self.window,
            windows: self.windows,
            lag: self.lag,
            ar_lag: self.ar_lag,
            lambda: self.lambda,
            models: self.models,
            from: self.from,
            to: self.to,
            seed: self.seed,
            refit_policy: self.refit_policy,
            score_target: self.score_target,
            clamp_nonneg: self.clamp_nonneg,
            intervals: self.intervals,
            freeze_lambda: self.freeze_lambda,
            target: self.target,
            top: self.top,
            date_col: self.date_col,
            id_col: self.id_col,
            value_col: self.value_col,
            csv: off(self.no_csv),
            json: off(self.no_json),
            svg: off(self.no_svg),
        }))
    }
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// JSON synthetic VAR specification.
    #[arg(long)]
    spec: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Series names, comma separated (default S1..SK).
    #[arg(long, value_delimiter = ',')]
    names: Option<Vec<String>>,
    /// First week start date.
    #[arg(long, default_value = "2023-01-01")]
    start: NaiveDate,
    /// round or poisson.
    #[arg(long, default_value = "round")]
    transform: String,
    /// Overrides the seed in the specification.
    #[arg(long)]
    seed: Option<u64>,
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Usage => 1,
        ErrorKind::Data => 2,
        ErrorKind::Numerical => 3,
    }
}

fn kind_label(kind: ErrorKind) -> &'static str {
    match kind {
        ErrorKind::Usage => "usage",
        ErrorKind::Data => "data",
        ErrorKind::Numerical => "numerical",
    }
}

fn fail(kind: &str, code: u8, message: &str) -> ExitCode {
    eprintln!("{}", json!({ "error": { "kind": kind, "code": code, "message": message } }));
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind as K;
            if matches!(e.kind(), K::DisplayHelp | K::DisplayVersion | K::DisplayHelpOnMissingArgumentOrSubcommand) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            return fail("usage", 1, e.to_string().trim());
        }
    };
    let res = match cli.command {
        Command::Ingest(a) => a.resolve().and_then(|c| cmd_ingest(&c)),
        Command::Backtest(a) => a.resolve().and_then(|c| cmd_backtest(&c)),
        Command::Sweep(a) => a.resolve().and_then(|c| cmd_sweep(&c)),
        Command::Coeffs(a) => a.resolve().and_then(|c| cmd_coeffs(&c)),
        Command::Simulate(a) => cmd_simulate(&a),
    };
    match res {
        Ok(summary) => {
            use std::io::Write;
            // A closed stdout (e.g. piped into `head`) is not a failure.
            let _ = writeln!(std::io::stdout(), "{}", serde_json::to_string_pretty(&summary).unwrap_or_default());
            ExitCode::SUCCESS
        }
        Err(e) => {
            let kind = e.kind();
            fail(kind_label(kind), exit_code(kind), &e.to_string())
        }
    }
}

fn columns(cfg: &RunConfig) -> CsvColumns {
    let d = CsvColumns::default();
    CsvColumns {
        date: cfg.date_col.clone().unwrap_or(d.date),
        id: cfg.id_col.clone().unwrap_or(d.id),
        value: cfg.value_col.clone().unwrap_or(d.value),
    }
}

fn load(cfg: &RunConfig) -> Result<(TimeSeriesPanel, varcast::panel::IngestionReport)> {
    let c = columns(cfg);
    let input = cfg.require_input()?;
    if !input.is_file() {
        return Err(Error::InvalidArgument(format!("input file {} not found", input.display())));
    }
    load_panel(input, &c.date, &c.id, &c.value)
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents)?;
    Ok(())
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write(path, text)
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.require_out()?.to_path_buf();
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn slug(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect()
}

fn parse_models(names: &[String]) -> Result<Vec<ModelTag>> {
    let mut out = Vec::new();
    for n in names {
        let m: ModelTag = n.parse()?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    if out.is_empty() {
        return Err(Error::InvalidArgument("--models is empty".into()));
    }
    Ok(out)
}

fn build_plan(cfg: &RunConfig, panel: &TimeSeriesPanel) -> Result<BacktestPlan> {
    let window = cfg.window.unwrap_or(4);
    SmoothingConfig::new(window)?;
    let lag = cfg.lag.unwrap_or(25);
    let ar_lag = cfg.ar_lag.unwrap_or(lag);
    if lag == 0 || ar_lag == 0 {
        return Err(Error::InvalidArgument("lag order must be >= 1".into()));
    }
    let lambda_policy: LambdaPolicy = match &cfg.lambda {
        Some(s) => s.parse()?,
        None => LambdaPolicy::default(),
    };
    let models = match &cfg.models {
        Some(m) => parse_models(m)?,
        None => ModelTag::ALL.to_vec(),
    };
    let weeks = panel.week_starts();
    let from = match cfg.from {
        Some(d) => d,
        None => {
            // Earliest week with enough history for a VAR fit.
            let idx = lag + panel.n_series() + 7;
            *weeks.get(idx).ok_or(Error::InsufficientData {
                context: format!("default first target week for lag {lag}"),
                needed: idx + 1,
                available: weeks.len(),
            })?
        }
    };
    let to = cfg.to.unwrap_or_else(|| panel.last_week());
    let mut plan = BacktestPlan::new(from, to);
    plan.models = models;
    plan.window = window;
    plan.sweep_windows = cfg.windows.clone().unwrap_or_else(|| vec![1, 2, 3, 4, 5]);
    plan.var_spec = VarSpec {
        p: lag,
        lambda_policy,
        ..VarSpec::default()
    };
    plan.ar_spec = VarSpec {
        p: ar_lag,
        lambda_policy,
        ..VarSpec::default()
    };
    plan.seed = cfg.seed.unwrap_or(0);
    if let Some(r) = &cfg.refit_policy {
        plan.refit_mode = r.parse()?;
    }
    if let Some(s) = &cfg.score_target {
        plan.score_target = s.parse()?;
    }
    plan.clamp_nonneg = cfg.clamp_nonneg.unwrap_or(false);
    plan.intervals = cfg.intervals.unwrap_or(false);
    plan.freeze_lambda = cfg.freeze_lambda.unwrap_or(false);
    plan.target_weeks(panel)?;
    Ok(plan)
}

fn cmd_ingest(cfg: &RunConfig) -> Result<serde_json::Value> {
    let (panel, report) = load(cfg)?;
    let window = cfg.window.unwrap_or(4);
    let smoothing = SmoothingConfig::new(window)?;
    let prep = preprocess_panel(&panel, smoothing)?;
    let adf: Vec<_> = prep
        .jurisdictions
        .iter()
        .zip(&prep.adf_reports)
        .map(|(j, r)| json!({ "jurisdiction": j, "smoothed": r.smoothed, "differenced": r.differenced }))
        .collect();
    let summary = json!({
        "rows_read": report.rows_read,
        "fills": report.fills,
        "date_range": [report.date_range.0, report.date_range.1],
        "n_weeks": panel.n_weeks(),
        "jurisdictions": panel.jurisdictions(),
        "annual_totals": panel.annual_totals(),
        "window": window,
        "window_flagged": smoothing.is_flagged(),
        "adf": adf,
    });
    if cfg.out.is_some() {
        let dir = out_dir(cfg)?;
        let mut buf = Vec::new();
        panel.write_csv(&mut buf, &columns(cfg))?;
        write(&dir.join("panel.csv"), buf)?;
        write_json(&dir.join("ingest.json"), &summary)?;
    }
    Ok(summary)
}

fn forecast_plot(result: &BacktestResult, jurisdiction: &str) -> String {
    let weeks = &result.target_weeks;
    let labels: Vec<String> = weeks.iter().map(|w| w.to_string()).collect();
    let lookup = |model: ModelTag| -> BTreeMap<NaiveDate, &varcast::backtest::ForecastRecord> {
        result
            .forecasts
            .iter()
            .filter(|r| r.model == model && r.jurisdiction == jurisdiction)
            .map(|r| (r.target_week, r))
            .collect()
    };
    let observed: Vec<Option<f64>> = weeks
        .iter()
        .map(|w| {
            result
                .forecasts
                .iter()
                .find(|r| r.jurisdiction == jurisdiction && r.target_week == *w)
                .and_then(|r| r.observed)
        })
        .collect();
    let mut series = vec![LineSeries {
        label: "observed".into(),
        color: "black",
        values: observed,
    }];
    let mut bands = Vec::new();
    for (model, color) in [
        (ModelTag::VarLasso, "#3465a4"),
        (ModelTag::ArLasso, "#c4007a"),
        (ModelTag::Naive, "#4e9a06"),
    ] {
        let recs = lookup(model);
        if recs.is_empty() {
            continue;
        }
        let get = |f: fn(&varcast::backtest::ForecastRecord) -> Option<f64>| -> Vec<Option<f64>> {
            weeks.iter().map(|w| recs.get(w).and_then(|r| f(r))).collect()
        };
        if recs.values().any(|r| r.lower95.is_some()) {
            bands.push(Band {
                color,
                lower: get(|r| r.lower95),
                upper: get(|r| r.upper95),
            });
        }
        series.push(LineSeries {
            label: model.as_str().into(),
            color,
            values: get(|r| Some(r.point)),
        });
    }
    svg::line_chart(&format!("{jurisdiction}: two-week-ahead forecasts"), &labels, &series, &bands)
}

fn cmd_backtest(cfg: &RunConfig) -> Result<serde_json::Value> {
    let (panel, ingestion) = load(cfg)?;
    let dir = out_dir(cfg)?;
    let plan = build_plan(cfg, &panel)?;
    let result = run_backtest(&panel, &plan)?;

    let mut files = Vec::new();
    if cfg.csv.unwrap_or(true) {
        let mut buf = Vec::new();
        result.write_forecasts_csv(&mut buf)?;
        write(&dir.join("forecasts.csv"), buf)?;
        let mut buf = Vec::new();
        result.report.write_csv(&mut buf)?;
        write(&dir.join("metrics.csv"), buf)?;
        files.extend(["forecasts.csv", "metrics.csv"].map(String::from));
    }
    if cfg.json.unwrap_or(true) {
        write_json(&dir.join("metrics.json"), &result.report.to_json())?;
        let mut manifest = serde_json::to_value(result.manifest(&plan))?;
        manifest["input"] = json!(cfg.input);
        manifest["ingestion"] = serde_json::to_value(&ingestion)?;
        write_json(&dir.join("manifest.json"), &manifest)?;
        let fits: Vec<_> = result
            .var_fits
            .iter()
            .map(|(week, fit)| {
                json!({
                    "target_week": week,
                    "fit": TaggedFit { model_tag: ModelTag::VarLasso, fit },
                    "coefficients": fit.lag_entries(),
                })
            })
            .collect();
        write_json(&dir.join("fits.json"), &fits)?;
        files.extend(["metrics.json", "manifest.json", "fits.json"].map(String::from));
    }
    if cfg.svg.unwrap_or(true) {
        for j in panel.jurisdictions() {
            let name = format!("forecast_{}.svg", slug(j));
            write(&dir.join(&name), forecast_plot(&result, j))?;
            files.push(name);
        }
    }
    Ok(json!({
        "command": "backtest",
        "out": dir,
        "target_weeks": result.target_weeks.len(),
        "forecasts": result.forecasts.len(),
        "skipped": result.skips.len(),
        "files": files,
    }))
}

fn cmd_sweep(cfg: &RunConfig) -> Result<serde_json::Value> {
    let (panel, _) = load(cfg)?;
    let dir = out_dir(cfg)?;
    let plan = build_plan(cfg, &panel)?;
    for &w in &plan.sweep_windows {
        SmoothingConfig::new(w)?;
    }
    let sweep = sensitivity_sweep(&panel, &plan)?;
    let best = sweep.best_rmse().cloned();
    let mut files = Vec::new();
    if cfg.csv.unwrap_or(true) {
        let mut buf = Vec::new();
        sweep.write_csv(&mut buf)?;
        write(&dir.join("sweep.csv"), buf)?;
        files.push("sweep.csv".to_string());
    }
    if cfg.json.unwrap_or(true) {
        let reports: BTreeMap<String, serde_json::Value> = sweep
            .reports
            .iter()
            .map(|(w, r)| (w.to_string(), r.to_json()))
            .collect();
        write_json(
            &dir.join("sweep.json"),
            &json!({ "rows": sweep.rows, "best_rmse": best, "reports": reports, "skipped": sweep.skips.len() }),
        )?;
        write_json(&dir.join("manifest.json"), &json!({ "plan": plan, "tool_version": env!("CARGO_PKG_VERSION") }))?;
        files.extend(["sweep.json", "manifest.json"].map(String::from));
    }
    if cfg.svg.unwrap_or(true) {
        let groups: Vec<String> = plan.sweep_windows.iter().map(|w| format!("{w}-week")).collect();
        let names: Vec<String> = plan.models.iter().map(|m| m.as_str().to_string()).collect();
        for (file, title, pick) in [
            ("sweep.svg", "Slope-weighted RMSE by smoothing window", 0),
            ("sweep_mae.svg", "Slope-weighted MAE by smoothing window", 1),
        ] {
            let values: Vec<Vec<Option<f64>>> = plan
                .sweep_windows
                .iter()
                .map(|&w| {
                    plan.models
                        .iter()
                        .map(|&m| {
                            let row = sweep.rows.iter().find(|r| r.window == w && r.model == m)?;
                            if pick == 0 {
                                row.slope_rmse
                            } else {
                                row.slope_mae
                            }
                        })
                        .collect()
                })
                .collect();
            write(&dir.join(file), svg::grouped_bar_chart(title, &groups, &names, &values))?;
            files.push(file.to_string());
        }
    }
    Ok(json!({
        "command": "sweep",
        "out": dir,
        "rows": sweep.rows.len(),
        "best_rmse": best,
        "files": files,
    }))
}

fn cmd_coeffs(cfg: &RunConfig) -> Result<serde_json::Value> {
    let (panel, _) = load(cfg)?;
    let dir = out_dir(cfg)?;
    let target = cfg
        .target
        .clone()
        .ok_or_else(|| Error::InvalidArgument("--target is required".into()))?;
    if panel.jurisdiction_index(&target).is_none() {
        return Err(Error::UnknownJurisdiction(target));
    }
    let top = cfg.top.unwrap_or(5);
    let mut plan = build_plan(cfg, &panel)?;
    plan.models = vec![ModelTag::VarLasso];
    let result = run_backtest(&panel, &plan)?;
    let fits: Vec<_> = result.var_fits.iter().map(|(_, f)| f.clone()).collect();
    if fits.is_empty() {
        return Err(Error::InsufficientData {
            context: "VAR fits for the coefficient summary".into(),
            needed: 1,
            available: 0,
        });
    }
    let ranks = coefficient_summary(&fits, &target, top)?;
    let mut files = Vec::new();
    if cfg.csv.unwrap_or(true) {
        let mut text = String::from("rank,target,source,lag,mean_abs,mean_signed\n");
        for (i, r) in ranks.iter().enumerate() {
            text.push_str(&format!(
                "{},{},{},{},{},{}\n",
                i + 1,
                target,
                r.source,
                r.lag,
                r.mean_abs,
                r.mean_signed
            ));
        }
        write(&dir.join("coeffs.csv"), text)?;
        files.push("coeffs.csv".to_string());
    }
    if cfg.json.unwrap_or(true) {
        write_json(
            &dir.join("coeffs.json"),
            &json!({ "target": target, "n_fits": fits.len(), "ranking": ranks }),
        )?;
        files.push("coeffs.json".to_string());
    }
    if cfg.svg.unwrap_or(true) {
        let labels: Vec<String> = ranks.iter().map(|r| format!("{} lag {}", r.source, r.lag)).collect();
        let values: Vec<f64> = ranks.iter().map(|r| r.mean_abs).collect();
        let title = format!("Mean |coefficient| for {target} over {} fits", fits.len());
        write(&dir.join("coeffs.svg"), svg::bar_chart(&title, &labels, &values))?;
        files.push("coeffs.svg".to_string());
    }
    Ok(json!({
        "command": "coeffs",
        "out": dir,
        "target": target,
        "ranking": ranks,
        "files": files,
    }))
}

fn cmd_simulate(args: &SimulateArgs) -> Result<serde_json::Value> {
    let text = fs::read_to_string(&args.spec)?;
    let mut spec: SyntheticVarSpec = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidArgument(format!("spec {}: {e}", args.spec.display())))?;
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let transform = match args.transform.as_str() {
        "round" => CountTransform::Round,
        "poisson" => CountTransform::Poisson,
        other => return Err(Error::InvalidArgument(format!("transform must be round|poisson, got '{other}'"))),
    };
    let radius = spec.validate()?;
    let names = match &args.names {
        Some(n) => n.clone(),
        None => (1..=spec.k()).map(|i| format!("S{i}")).collect(),
    };
    let series = generate(&spec)?;
    let panel = to_count_panel(&series, &names, args.start, transform, spec.seed)?;
    fs::create_dir_all(&args.out)?;
    let mut buf = Vec::new();
    panel.write_csv(&mut buf, &CsvColumns::default())?;
    write(&args.out.join("panel.csv"), buf)?;
    write_json(&args.out.join("simulate.json"), &json!({ "spec": spec, "spectral_radius": radius, "names": names }))?;
    Ok(json!({
        "command": "simulate",
        "out": args.out,
        "series": names.len(),
        "weeks": panel.n_weeks(),
        "spectral_radius": radius,
    }))
}
