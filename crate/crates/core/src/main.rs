use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use muckenhoupt::report::{self, exit, emit_plot_data, Analysis, ConfigError, Report, RunConfig};
use muckenhoupt::transform::KERNEL_CATALOG;
use muckenhoupt::weight::CATALOG;

/// Matrix Muckenhoupt weight analysis.
#[derive(Parser)]
#[command(name = "muckenhoupt", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every analysis listed in the configuration.
    Analyze(RunArgs),
    /// Projection bound only.
    Projection(RunArgs),
    /// Sufficient-condition check only.
    Sufficient(RunArgs),
    /// Roudenko constant only.
    Roudenko(RunArgs),
    /// Weighted transform norms, plus kernel conditions when configured.
    Probe(RunArgs),
    /// Fixed checks on the built-in 2x2 example weight.
    ReproduceExample(OutputArgs),
    /// Catalog weights and kernels as JSON.
    ListCatalog,
}

#[derive(Args)]
struct OutputArgs {
    /// Report path; defaults to `$MUCKENHOUPT_OUT_DIR/<command>.json`, else stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Default directory for reports.
    #[arg(long, env = "MUCKENHOUPT_OUT_DIR")]
    out_dir: Option<PathBuf>,
    /// Write a trace as CSV, e.g. `roudenko:trace.csv` or `slices/2:s2.csv`.
    #[arg(long, value_name = "BLOCK:PATH")]
    plot: Vec<String>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Overrides the configuration seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated quadrature floors, overriding the configured ladder.
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    resolution_ladder: Option<Vec<f64>>,
    #[command(flatten)]
    output: OutputArgs,
}

fn config_failure(e: &ConfigError) -> ExitCode {
    eprintln!("config error: {e}");
    ExitCode::from(exit::CONFIG)
}

fn load(args: &RunArgs, only: Option<&[Analysis]>) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(&args.config).map_err(|e| ConfigError::new("--config", e.to_string()))?;
    let mut config = RunConfig::from_json(&text)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(floors) = &args.resolution_ladder {
        config.ladder.floors = floors.clone();
    }
    if let Some(only) = only {
        config.analyses.retain(|a| only.contains(a));
        if config.analyses.is_empty() {
            config.analyses = vec![only[0]];
        }
    }
    Ok(config)
}

fn write_outputs(report: &Report, name: &str, out: &OutputArgs) -> Result<(), String> {
    let text = report.to_json();
    let path = out.out.clone().or_else(|| out.out_dir.as_ref().map(|d| d.join(format!("{name}.json"))));
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
            }
            std::fs::write(&p, text + "\n").map_err(|e| format!("{}: {e}", p.display()))?;
        }
        None => println!("{text}"),
    }
    for spec in &out.plot {
        let (block, file) = spec.split_once(':').ok_or_else(|| format!("--plot expects BLOCK:PATH, got `{spec}`"))?;
        emit_plot_data(report, block, Path::new(file)).map_err(|e| format!("--plot {spec}: {e}"))?;
    }
    Ok(())
}

fn finish(report: Report, name: &str, out: &OutputArgs) -> ExitCode {
    for b in &report.blocks {
        if let Some(e) = &b.error {
            eprintln!("{}: {} ({})", b.id.id(), e.message, e.code);
        }
    }
    if let Err(e) = write_outputs(&report, name, out) {
        eprintln!("output error: {e}");
        return ExitCode::from(exit::NUMERIC);
    }
    ExitCode::from(report.exit_code())
}

fn analyze(args: &RunArgs, name: &str, only: Option<&[Analysis]>) -> ExitCode {
    let config = match load(args, only) {
        Ok(c) => c,
        Err(e) => return config_failure(&e),
    };
    match report::run(&config) {
        Ok(r) => finish(r, name, &args.output),
        Err(e) => config_failure(&e),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Analyze(a) => analyze(a, "analyze", None),
        Command::Projection(a) => analyze(a, "projection", Some(&[Analysis::Projection])),
        Command::Sufficient(a) => analyze(a, "sufficient", Some(&[Analysis::Sufficient])),
        Command::Roudenko(a) => analyze(a, "roudenko", Some(&[Analysis::Roudenko])),
        Command::Probe(a) => analyze(a, "probe", Some(&[Analysis::Transform, Analysis::Kernel])),
        Command::ReproduceExample(out) => finish(report::reproduce_example(), "reproduce-example", out),
        Command::ListCatalog => {
            let weights: Vec<_> = CATALOG
                .iter()
                .map(|e| serde_json::json!({"name": e.name, "params": e.params, "description": e.description}))
                .collect();
            let kernels: Vec<_> = KERNEL_CATALOG
                .iter()
                .map(|(name, description)| serde_json::json!({"name": name, "description": description}))
                .collect();
            let doc = serde_json::json!({"weights": weights, "kernels": kernels});
            println!("{}", serde_json::to_string_pretty(&doc).expect("catalog serializes"));
            ExitCode::SUCCESS
        }
    }
}
