use std::path::PathBuf;

use clap::Parser;

/// Coagulation laboratory: sectional and stochastic solvers with gelation
/// diagnostics.
#[derive(Debug, Parser)]
#[command(name = "gelab", version)]
struct Args {
    /// simulate_fv | simulate_mc | sweep_vmax | sweep_n | certify_kernel | cascade_probe
    scenario: String,
    /// Run-config file (`section.key = value` lines).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `run.out_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed (overrides `run.seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for sweeps; 1 is the reference mode.
    #[arg(long)]
    threads: Option<usize>,
}

fn main() {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let code = gelab::cli::execute(&args.scenario, &args.config, args.out.as_deref(), args.seed, args.threads);
    std::process::exit(code);
}
