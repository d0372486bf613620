use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use opnm::report::{self, CsvTable, ExperimentConfig, RunOptions};
use opnm::Result;

#[derive(Parser)]
#[command(name = "opnm", version, about = "Conditional past-future correlations of open qubit dynamics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Evaluate grid points one after another instead of on the thread pool.
    #[arg(long, global = true)]
    serial: bool,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON experiment configuration.
    config: PathBuf,
    /// Override one key, e.g. `--set grid.n_points=11`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output file; defaults to the config's `output`, then stdout.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep t = τ and write the per-order CPF as CSV.
    Simulate(ConfigArgs),
    /// Compare the series with the configured oracle.
    Compare(ConfigArgs),
    /// Run the invariant suite and print a JSON report.
    Validate,
    /// Write the data files behind one figure.
    FigureData {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=3))]
        figure: u8,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

fn emit(table: &CsvTable, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => table.write(p),
        None => {
            std::io::stdout().write_all(table.to_csv()?.as_bytes())?;
            Ok(())
        }
    }
}

fn json(value: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(value).expect("report serializes")
}

fn load(args: &ConfigArgs) -> Result<(ExperimentConfig, Option<PathBuf>)> {
    let config = ExperimentConfig::load(&args.config, &args.overrides)?;
    let output = args.output.clone().or_else(|| config.output.as_ref().map(PathBuf::from));
    Ok((config, output))
}

/// Returns the exit code for commands that complete but report a failure.
fn run(cli: Cli) -> Result<u8> {
    let opts = RunOptions { parallel: !cli.serial };
    match cli.command {
        Command::Simulate(args) => {
            let (config, output) = load(&args)?;
            let out = report::simulate(&config, &opts)?;
            emit(&out.table, output.as_deref())?;
            Ok(0)
        }
        Command::Compare(args) => {
            let (config, output) = load(&args)?;
            let rep = report::compare(&config, &opts)?;
            if let Some(p) = output.as_deref() {
                rep.table.write(p)?;
            }
            println!("{}", json(&rep));
            Ok(if rep.passed { 0 } else { 3 })
        }
        Command::Validate => {
            let rep = report::validate(&opts);
            println!("{}", json(&rep));
            Ok(if rep.passed { 0 } else { 3 })
        }
        Command::FigureData { figure, overrides, out_dir } => {
            let bundle = report::figure_data(figure, &overrides, &opts)?;
            let mut written = Vec::new();
            for f in &bundle.files {
                let path = out_dir.join(&f.name);
                f.table.write(&path)?;
                written.push(path.display().to_string());
            }
            println!("{}", json(&serde_json::json!({ "files": written, "checks": bundle.checks })));
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(report::exit_code(&e) as u8)
        }
    }
}
