use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sparse_mom_expcli::{load_config, run_bench_to, run_experiment, run_trace, CliResult};

#[derive(Parser)]
#[command(name = "rsm", version, about = "Robust sparse mean estimation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the trial grid and write results.csv, timing.csv and manifest.json.
    Run(Common),
    /// Record SubGM and convex-baseline trajectories into trace.csv.
    Trace(Common),
    /// Time stage 1 and the full pipeline across dimensions into bench.csv.
    Bench(Common),
    /// Check the config and report the planned run count.
    Validate(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory; defaults to the config's `output_dir`, then `out`.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads; defaults to all cores.
    #[arg(long, value_name = "N", value_parser = clap::value_parser!(u64).range(1..))]
    threads: Option<u64>,
    /// Overrides the config's base seed.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
}

fn execute(cli: Cli) -> CliResult<()> {
    let (name, common) = match &cli.command {
        Command::Run(c) => ("run", c),
        Command::Trace(c) => ("trace", c),
        Command::Bench(c) => ("bench", c),
        Command::Validate(c) => ("validate", c),
    };
    let mut cfg = load_config(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.base_seed = seed;
    }
    let threads = common.threads.map(|t| t as usize);
    let out = common
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    match name {
        "run" => {
            let rows = run_experiment(&cfg, Some(&out), threads)?;
            eprintln!("wrote {} rows to {}", rows.len(), out.join("results.csv").display());
        }
        "trace" => {
            run_trace(&cfg, &out, threads)?;
            eprintln!("wrote {}", out.join("trace.csv").display());
        }
        "bench" => {
            let rows = run_bench_to(&cfg, &out, threads)?;
            for r in rows {
                eprintln!("d={:<6} {:<7} {:>10.3} ms", r.d, r.estimator.as_str(), r.wall_time_ms);
            }
        }
        _ => println!(
            "ok: {} sweep point(s) x {} trial(s) x {} estimator(s) = {} planned runs",
            cfg.sweep_values().len(),
            cfg.trials,
            cfg.estimators.len(),
            cfg.planned_runs()
        ),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let informational = !e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if informational { 0 } else { 2 });
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rsm: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
