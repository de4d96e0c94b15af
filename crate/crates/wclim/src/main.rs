use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use wclim::catalog::Catalog;
use wclim::error::{ApiError, ErrorCode};
use wclim::pipeline;
use wclim::query::{RawQuery, RawThreshold};
use wclim::server::{self, AppState, ServiceConfig, DEFAULT_CACHE_BYTES, DEFAULT_PREVIEW_ROWS};
use wclim_core::io::{render_table, write_atomic};
use wclim_core::AdminLevel;

/// Socio-economically weighted aggregation of gridded climate data.
#[derive(Parser)]
#[command(name = "wclim", version)]
struct Cli {
    /// Data directory (climate/, weights/, boundaries/, cache/).
    #[arg(long, env = "WCLIM_DATA_DIR", global = true)]
    data_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Aggregate a climate variable to administrative units.
    Aggregate(AggregateArgs),
    /// Count or sum threshold exceedances per unit.
    Extremes(ExtremesArgs),
    /// Precompute and cache coverage matrices.
    Coverage(CoverageArgs),
    /// Start the HTTP service.
    Serve(ServeArgs),
    /// Scan the data directory and write index.json.
    Index,
}

#[derive(Args)]
struct QueryArgs {
    #[arg(long)]
    source: String,
    #[arg(long)]
    variable: String,
    #[arg(long)]
    level: String,
    #[arg(long, default_value = "unweighted")]
    weight: String,
    #[arg(long)]
    base_year: Option<i32>,
    /// daily, monthly or annual.
    #[arg(long = "freq")]
    frequency: String,
    #[arg(long)]
    from: i32,
    #[arg(long)]
    to: i32,
    #[arg(long, default_value = "long")]
    layout: String,
    #[arg(long, default_value = "csv")]
    format: String,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AggregateArgs {
    #[command(flatten)]
    query: QueryArgs,
}

#[derive(Args)]
struct ExtremesArgs {
    #[command(flatten)]
    query: QueryArgs,
    /// absolute, relative or cumulative.
    #[arg(long)]
    mode: String,
    /// above or below.
    #[arg(long, default_value = "above")]
    direction: String,
    /// Threshold in variable units, or a percentile for relative mode.
    #[arg(long)]
    threshold: f64,
    /// First year of the baseline for relative thresholds.
    #[arg(long, requires = "baseline_to")]
    baseline_from: Option<i32>,
    #[arg(long, requires = "baseline_from")]
    baseline_to: Option<i32>,
}

#[derive(Args)]
struct CoverageArgs {
    /// Only this level; all levels with boundaries otherwise.
    #[arg(long)]
    level: Option<String>,
    /// Only grids of this source.
    #[arg(long)]
    source: Option<String>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: IpAddr,
    #[arg(long, default_value_t = DEFAULT_CACHE_BYTES)]
    cache_bytes: usize,
    #[arg(long, default_value_t = DEFAULT_PREVIEW_ROWS)]
    preview_rows: usize,
}

impl QueryArgs {
    fn raw(&self) -> RawQuery {
        RawQuery {
            source: Some(self.source.clone()),
            variable: Some(self.variable.clone()),
            level: Some(self.level.clone()),
            weight: Some(self.weight.clone()),
            base_year: self.base_year,
            frequency: Some(self.frequency.clone()),
            from: Some(self.from),
            to: Some(self.to),
            threshold: None,
            layout: Some(self.layout.clone()),
            format: Some(self.format.clone()),
        }
    }
}

fn data_dir(cli: &Cli) -> Result<PathBuf, ApiError> {
    cli.data_dir.clone().ok_or_else(|| {
        ApiError::new(
            ErrorCode::InvalidField,
            "no data directory: pass --data-dir or set WCLIM_DATA_DIR",
        )
    })
}

fn run_query(cli: &Cli, raw: RawQuery, out: Option<&PathBuf>) -> Result<(), ApiError> {
    let query = raw.validate()?;
    let catalog = Catalog::open(data_dir(cli)?)?;
    let plan = catalog.plan(&query)?;
    let table = pipeline::run(&catalog, &plan)?;
    let bytes = render_table(&table, query.layout, query.format)?;
    match out {
        Some(path) => {
            write_atomic(path, &bytes)?;
            eprintln!(
                "wrote {} ({} units x {} periods, id {})",
                path.display(),
                table.n_units(),
                table.time.len(),
                plan.id
            );
        }
        None => std::io::stdout()
            .write_all(&bytes)
            .map_err(ApiError::internal)?,
    }
    Ok(())
}

fn coverage(cli: &Cli, args: &CoverageArgs) -> Result<(), ApiError> {
    let bad = |e: wclim_core::Error| ApiError::new(ErrorCode::InvalidField, e.to_string());
    let level: Option<AdminLevel> = args.level.as_deref().map(str::parse).transpose().map_err(bad)?;
    let source: Option<wclim_core::Source> = args.source.as_deref().map(str::parse).transpose().map_err(bad)?;
    let catalog = Catalog::open(data_dir(cli)?)?;
    let levels: Vec<AdminLevel> = catalog
        .index()
        .boundaries
        .iter()
        .map(|b| b.level)
        .filter(|l| level.is_none_or(|want| *l == want))
        .collect();
    if levels.is_empty() {
        return Err(ApiError::new(ErrorCode::DataUnavailable, "no matching boundary files"));
    }
    let mut grids = Vec::new();
    for f in &catalog.index().climate {
        if source.is_none_or(|s| s == f.source) && !grids.contains(&f.grid) {
            grids.push(f.grid);
        }
    }
    for level in levels {
        for grid in &grids {
            let (cov, cached) = pipeline::load_coverage(&catalog, level, grid)?;
            println!(
                "{level} {}x{} @ {} ({}, {}): {} units, {} cells, {}",
                grid.n_rows,
                grid.n_cols,
                grid.resolution,
                grid.lat_origin,
                grid.lon_origin,
                cov.len(),
                cov.n_entries(),
                if cached { "cached" } else { "built" }
            );
        }
    }
    Ok(())
}

fn serve(cli: &Cli, args: &ServeArgs) -> Result<(), ApiError> {
    let state = Arc::new(AppState::open(
        data_dir(cli)?,
        ServiceConfig {
            cache_bytes: args.cache_bytes,
            preview_rows: args.preview_rows,
        },
    ));
    let addr = SocketAddr::new(args.host, args.port);
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(ApiError::internal)?
        .block_on(server::serve(addr, state))
        .map_err(ApiError::internal)
}

fn run(cli: &Cli) -> Result<(), ApiError> {
    match &cli.command {
        Command::Aggregate(args) => run_query(cli, args.query.raw(), args.query.out.as_ref()),
        Command::Extremes(args) => {
            let mut raw = args.query.raw();
            raw.threshold = Some(RawThreshold {
                mode: Some(args.mode.clone()),
                direction: Some(args.direction.clone()),
                value: Some(args.threshold),
                baseline: args.baseline_from.zip(args.baseline_to).map(|(a, b)| [a, b]),
            });
            run_query(cli, raw, args.query.out.as_ref())
        }
        Command::Coverage(args) => coverage(cli, args),
        Command::Serve(args) => serve(cli, args),
        Command::Index => {
            let catalog = Catalog::scan(data_dir(cli)?)?;
            let path = catalog.write_index()?;
            eprintln!(
                "indexed {} climate, {} weight, {} boundary files into {}",
                catalog.index().climate.len(),
                catalog.index().weights.len(),
                catalog.index().boundaries.len(),
                path.display()
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_env("WCLIM_LOG")
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_client_error() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
