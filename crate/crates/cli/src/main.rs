//! `hieralloc`: forecast active cases, allocate a scarce resource, and render
//! saved plans.
//!
//! Exit codes: 0 success, 2 bad input, 3 solver failure.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use hieralloc_core::forecast::forecast_all;
use hieralloc_core::report::{fmt2, render, ReportFormat};
use hieralloc_core::{
    run_scenario, AllocationPlan, Execution, ForecastResult, Level, RedistributionPolicy,
    RegionRecord, SmoothingParams, SolveOptions, PLAN_SCHEMA,
};
use hieralloc_ingest::{
    build_scenario, fetch_remote_history, load_case_history, load_demands, load_predicted,
    load_weights, open, CaseHistory, HistoryFormat, RemoteSource, ScenarioParts, ENDPOINT_ENV,
};

#[derive(Debug, Parser)]
#[command(name = "hieralloc", version, about = "Hierarchical allocation of a scarce resource")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Forecast active cases per region over a short horizon.
    Forecast(ForecastArgs),
    /// Run the staged allocation and print every stage.
    Allocate(AllocateArgs),
    /// Render a plan saved with `allocate --output json`.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct SourceArgs {
    /// Active-case history, CSV (`region,date,active`) or JSON.
    #[arg(long)]
    history: Option<PathBuf>,
    /// HTTP endpoint serving the history JSON shape.
    #[arg(long, env = ENDPOINT_ENV, conflicts_with = "history")]
    endpoint: Option<String>,
    /// Bearer token sent to the endpoint.
    #[arg(long, env = "ALLOC_CASE_TOKEN", requires = "endpoint", hide_env_values = true)]
    token: Option<String>,
    /// Where to keep the last good endpoint response.
    #[arg(long, requires = "endpoint")]
    cache: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SmoothingArgs {
    #[arg(long, default_value_t = 7)]
    horizon: usize,
    /// Level smoothing factor.
    #[arg(long, default_value_t = 0.8)]
    alpha: f64,
    /// Trend smoothing factor.
    #[arg(long, default_value_t = 0.2)]
    beta: f64,
}

impl SmoothingArgs {
    fn params(&self) -> SmoothingParams {
        SmoothingParams {
            level: self.alpha,
            trend: self.beta,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ForecastOutput {
    Table,
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct ForecastArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    smoothing: SmoothingArgs,
    #[arg(long, value_enum, default_value = "table")]
    output: ForecastOutput,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LevelArg {
    Center,
    District,
    Proportional,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PolicyArg {
    Equal,
    Proportional,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PlanOutput {
    Table,
    Md,
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct AllocateArgs {
    /// Demand table: `region,demand_mt[,severity]`.
    #[arg(long)]
    demands: PathBuf,
    #[command(flatten)]
    source: SourceArgs,
    /// Predicted horizon maxima (`region,predicted`); skips forecasting.
    #[arg(long, conflicts_with_all = ["history", "endpoint"])]
    predicted: Option<PathBuf>,
    /// Shares (`region,weight`) for re-optimizing the regions left after the pre-pass.
    #[arg(long)]
    reopt_weights: Option<PathBuf>,
    /// Total supply to allocate.
    #[arg(long)]
    supply: f64,
    #[arg(long, value_enum, default_value = "center")]
    level: LevelArg,
    #[arg(long, value_enum, default_value = "proportional")]
    redistribution: PolicyArg,
    /// Re-check the pre-pass after each round of full grants.
    #[arg(long)]
    reevaluate_prepass: bool,
    #[command(flatten)]
    smoothing: SmoothingArgs,
    #[arg(long, value_enum, default_value = "table")]
    output: PlanOutput,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ReportFormatArg {
    Md,
    Csv,
    Table,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[arg(long)]
    plan: PathBuf,
    #[arg(long, value_enum, default_value = "md")]
    format: ReportFormatArg,
}

/// Error plus the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn input(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: 2,
            error: error.into(),
        }
    }

    fn solver(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: 3,
            error: error.into(),
        }
    }
}

fn read_table<T, E>(path: &Path, load: impl FnOnce(std::fs::File) -> Result<T, E>) -> Result<T, Failure>
where
    E: Into<anyhow::Error>,
{
    let file = open(path).map_err(Failure::input)?;
    load(file)
        .map_err(Into::into)
        .with_context(|| path.display().to_string())
        .map_err(Failure::input)
}

fn load_history(source: &SourceArgs) -> Result<Option<CaseHistory>, Failure> {
    if let Some(path) = &source.history {
        return read_table(path, |f| load_case_history(f, HistoryFormat::from_path(path))).map(Some);
    }
    let Some(endpoint) = &source.endpoint else {
        return Ok(None);
    };
    let mut remote = RemoteSource::new(endpoint.clone());
    remote.bearer_token = source.token.clone();
    remote.cache_path = source.cache.clone();
    fetch_remote_history(&remote, None)
        .with_context(|| format!("fetching {endpoint}"))
        .map(Some)
        .map_err(Failure::input)
}

fn forecast_rows(results: &[ForecastResult], horizon: usize) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header = vec!["region".to_owned(), "level".to_owned(), "trend".to_owned()];
    header.extend((1..=horizon).map(|k| format!("h{k}")));
    header.push("horizon_max".to_owned());
    let rows = results
        .iter()
        .map(|r| {
            let mut row = vec![r.region.clone(), fmt2(r.fitted_level), fmt2(r.fitted_trend)];
            row.extend(r.predicted.iter().map(|v| fmt2(*v)));
            row.push(fmt2(r.horizon_max));
            row
        })
        .collect();
    (header, rows)
}

fn cmd_forecast(args: &ForecastArgs) -> Result<String, Failure> {
    let history = load_history(&args.source)?
        .ok_or_else(|| Failure::input(anyhow!("one of --history or --endpoint is required")))?;
    let regions: Vec<RegionRecord> = history
        .into_iter()
        .map(|(name, series)| RegionRecord::new(name, 0.0).with_history(series))
        .collect();
    let horizon = args.smoothing.horizon;
    let outcomes = forecast_all(&regions, horizon, args.smoothing.params(), Execution::default());
    let mut results = Vec::with_capacity(outcomes.len());
    for (region, outcome) in regions.iter().zip(outcomes) {
        let (result, warning) = outcome
            .with_context(|| format!("forecast for {}", region.name))
            .map_err(Failure::input)?;
        if let Some(w) = warning {
            eprintln!("warning: {w}");
        }
        results.push(result);
    }

    Ok(match args.output {
        ForecastOutput::Json => {
            serde_json::to_string_pretty(&results).map_err(Failure::solver)? + "\n"
        }
        ForecastOutput::Csv => {
            let (header, rows) = forecast_rows(&results, horizon);
            let mut out = header.join(",") + "\n";
            for row in rows {
                let mut cells = row;
                if cells[0].contains([',', '"']) {
                    cells[0] = format!("\"{}\"", cells[0].replace('"', "\"\""));
                }
                out += &(cells.join(",") + "\n");
            }
            out
        }
        ForecastOutput::Table => {
            let (header, rows) = forecast_rows(&results, horizon);
            let width = |c: usize| rows.iter().map(|r| r[c].len()).chain([header[c].len()]).max().unwrap_or(0);
            let widths: Vec<usize> = (0..header.len()).map(width).collect();
            let line = |cells: &[String]| {
                cells
                    .iter()
                    .zip(&widths)
                    .enumerate()
                    .map(|(c, (s, w))| if c == 0 { format!("{s:<w$}") } else { format!("{s:>w$}") })
                    .collect::<Vec<_>>()
                    .join("  ")
                    .trim_end()
                    .to_owned()
                    + "\n"
            };
            let mut out = line(&header);
            for row in &rows {
                out += &line(row);
            }
            out
        }
    })
}

fn cmd_allocate(args: &AllocateArgs) -> Result<String, Failure> {
    let demands = read_table(&args.demands, load_demands)?;
    let history = load_history(&args.source)?;
    let predicted: Option<BTreeMap<String, f64>> = args
        .predicted
        .as_deref()
        .map(|p| read_table(p, load_predicted))
        .transpose()?;
    let weights = args
        .reopt_weights
        .as_deref()
        .map(|p| read_table(p, load_weights))
        .transpose()?;

    let mut scenario = build_scenario(
        "cli",
        "",
        args.supply,
        &demands,
        ScenarioParts {
            history: history.as_ref(),
            predicted: predicted.as_ref(),
            reopt_weights: weights.as_ref(),
        },
    )
    .map_err(Failure::input)?;
    scenario.config.horizon = args.smoothing.horizon;
    scenario.config.smoothing = args.smoothing.params();
    scenario.config.reevaluate_prepass = args.reevaluate_prepass;

    let options = SolveOptions {
        level: match args.level {
            LevelArg::Center => Level::Center,
            LevelArg::District => Level::District,
            LevelArg::Proportional => Level::Proportional,
        },
        redistribution: match args.redistribution {
            PolicyArg::Equal => RedistributionPolicy::Equal,
            PolicyArg::Proportional => RedistributionPolicy::Proportional,
        },
        use_fixture_predicted: predicted.is_some(),
    };
    scenario.config.level = options.level;
    scenario.config.redistribution = options.redistribution;

    let plan = run_scenario(&scenario, &options, Execution::default()).map_err(|e| {
        if e.is_input_error() {
            // The message already names the cause; avoid printing the chain twice.
            Failure::input(anyhow!("{e}"))
        } else {
            Failure::solver(anyhow!("{} stage: {e}", e.stage()))
        }
    })?;
    Ok(render_plan(&plan, args.output))
}

fn render_plan(plan: &AllocationPlan, output: PlanOutput) -> String {
    match output {
        PlanOutput::Json => serde_json::to_string_pretty(plan).expect("plan serializes") + "\n",
        PlanOutput::Md => render(plan, ReportFormat::Markdown),
        PlanOutput::Csv => render(plan, ReportFormat::Csv),
        PlanOutput::Table => render(plan, ReportFormat::Text),
    }
}

fn cmd_report(args: &ReportArgs) -> Result<String, Failure> {
    let bytes = std::fs::read(&args.plan)
        .with_context(|| args.plan.display().to_string())
        .map_err(Failure::input)?;
    let value: serde_json::Value = serde_json::from_slice(&bytes)
        .with_context(|| format!("{} is not JSON", args.plan.display()))
        .map_err(Failure::input)?;
    match value.get("schema").and_then(|s| s.as_str()) {
        Some(PLAN_SCHEMA) => {}
        other => {
            return Err(Failure::input(anyhow!(
                "schema mismatch: expected \"{PLAN_SCHEMA}\", found {}",
                other.map_or("none".to_owned(), |s| format!("\"{s}\""))
            )))
        }
    }
    let plan: AllocationPlan = serde_json::from_value(value)
        .map_err(|e| Failure::input(anyhow!("schema mismatch: {e}")))?;
    Ok(render(
        &plan,
        match args.format {
            ReportFormatArg::Md => ReportFormat::Markdown,
            ReportFormatArg::Csv => ReportFormat::Csv,
            ReportFormatArg::Table => ReportFormat::Text,
        },
    ))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Forecast(args) => cmd_forecast(args),
        Command::Allocate(args) => cmd_allocate(args),
        Command::Report(args) => cmd_report(args),
    };
    match result {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(Failure { code, error }) => {
            eprintln!("error: {error:#}");
            ExitCode::from(code)
        }
    }
}
