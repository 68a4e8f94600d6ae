use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use elastoplastic_control::config::ExperimentConfig;
use elastoplastic_control::experiment::{self, SweepRow};
use elastoplastic_control::Error;

/// Optimal Dirichlet control of regularized perfect plasticity.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Config file with `key = value` lines.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set n_t=64`. Repeatable.
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    n_t: Option<usize>,
    #[arg(long)]
    n_x: Option<usize>,
    #[arg(long)]
    n_y: Option<usize>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(short, long)]
    output_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// One optimization run.
    Run(Common),
    /// One run per Yosida parameter.
    SweepLambda {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "0.001,0.01,0.1,1,10,100")]
        values: Vec<String>,
    },
    /// One run per number of time steps.
    SweepNt {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "4,8,16,32,64,128,256,512,1024,2048")]
        values: Vec<String>,
    },
}

fn load(common: &Common) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    cfg.apply_overrides(common.overrides.iter().map(String::as_str))?;
    let flags = [
        ("lambda_yosida", common.lambda.map(|v| v.to_string())),
        ("n_t", common.n_t.map(|v| v.to_string())),
        ("n_x", common.n_x.map(|v| v.to_string())),
        ("n_y", common.n_y.map(|v| v.to_string())),
        ("max_iter", common.max_iter.map(|v| v.to_string())),
        ("output_dir", common.output_dir.as_ref().map(|p| p.display().to_string())),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            cfg.set(key, &v)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::Config(_) | Error::Parameter(_) => 1,
        Error::LineSearch { .. } => 3,
        _ => 2,
    }
}

fn print_sweep(key: &str, rows: &[SweepRow]) -> u8 {
    println!("{key:>8} {:>5} {:>12} {:>12} {:>10} {:>9}  termination", "iter", "<g,-g>", "quotient", "err", "dist_K");
    let mut code = 0;
    for row in rows {
        match &row.summary {
            Some(s) => {
                println!(
                    "{:>8} {:>5} {:>12.4e} {:>12.4e} {:>10} {:>9.5}  {}",
                    row.value,
                    s.iterations,
                    s.directional_derivative,
                    s.difference_quotient,
                    s.err.map_or("undefined".into(), |e| format!("{e:.6}")),
                    s.dist_k,
                    s.termination
                );
                if s.termination.starts_with("line_search_failed") {
                    code = code.max(3);
                }
            }
            None => {
                println!("{:>8} failed: {}", row.value, row.error.as_deref().unwrap_or(""));
                code = 2;
            }
        }
    }
    code
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(common) => load(common).and_then(|cfg| {
            let out = experiment::run(&cfg)?;
            let s = &out.summary;
            println!("termination  {}", s.termination);
            println!("iterations   {}", s.iterations);
            println!("objective    {:.9e}", s.objective);
            println!("<g,-g>       {:.6e}", s.directional_derivative);
            println!("quotient     {:.6e}", s.difference_quotient);
            println!("err          {}", s.err.map_or("undefined".into(), |e| format!("{e:.6}")));
            println!("dist_K       {:.6}", s.dist_k);
            println!("artifacts    {}", cfg.output_dir.display());
            Ok(if s.termination.starts_with("line_search_failed") { 3 } else { 0 })
        }),
        Command::SweepLambda { common, values } => load(common)
            .and_then(|cfg| experiment::sweep(&cfg, "lambda_yosida", values))
            .map(|rows| print_sweep("lambda", &rows)),
        Command::SweepNt { common, values } => load(common)
            .and_then(|cfg| experiment::sweep(&cfg, "n_t", values))
            .map(|rows| print_sweep("n_t", &rows)),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
