use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use mlinbound_core::harness::{emit, run, Experiment, ExperimentConfig};
use mlinbound_core::Error;

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "mlinbound", version, about = "Seeded scaling experiments for multilinear Fourier multipliers.")]
struct Options {
    /// plancherel-check, decomp-verify, atomsum-oracle, scaling-N, scaling-lambda,
    /// levelset, wavelet-recon, coeff-decay, rough-decay or hormander-decay
    experiment: String,
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to the config `out` key, then `results`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, env = "MLINBOUND_WORKERS")]
    workers: Option<usize>,
}

fn is_config_error(e: &Error) -> bool {
    matches!(e, Error::InvalidArgument(_) | Error::Parse { .. } | Error::Resource(_) | Error::Resolution(_))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let opts = Options::parse();

    let kind: Experiment = match opts.experiment.parse() {
        Ok(k) => k,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let mut cfg = match ExperimentConfig::load(&opts.config) {
        Ok(c) => c,
        Err(Error::Io(e)) => {
            eprintln!("error: cannot read {}: {e}", opts.config.display());
            return ExitCode::from(EXIT_CONFIG);
        }
        Err(e) => {
            eprintln!("config error in {}: {e}", opts.config.display());
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Some(s) = opts.seed {
        cfg.seed = Some(s);
    }
    if let Some(w) = opts.workers {
        if w == 0 {
            eprintln!("error: --workers must be positive");
            return ExitCode::from(EXIT_CONFIG);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(w).build_global() {
            log::warn!("could not size the worker pool: {e}");
        }
    }
    let dir = opts.out.or_else(|| cfg.out.clone().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("results"));

    let result = match run(kind, &cfg) {
        Ok(r) => r,
        Err(e) if is_config_error(&e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CHECK_FAILED);
        }
    };
    let written = emit(&result, &dir).and_then(|mut w| {
        let echo = dir.join(format!("{kind}.config"));
        std::fs::write(&echo, cfg.to_text())?;
        w.push(echo);
        Ok(w)
    });
    let written = match written {
        Ok(w) => w,
        Err(e) => {
            eprintln!("error: writing results to {}: {e}", dir.display());
            return ExitCode::from(EXIT_CHECK_FAILED);
        }
    };

    for c in &result.checks {
        let rel = match c.relation {
            mlinbound_core::harness::Relation::AtMost => "<=",
            mlinbound_core::harness::Relation::AtLeast => ">=",
        };
        println!("{} {:<28} {:>14.6e} {rel} {:.6e}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.measured, c.threshold);
    }
    for p in &written {
        println!("wrote {}", p.display());
    }
    println!("{kind}: {} in {:.2}s (seed {})", if result.pass { "pass" } else { "FAIL" }, result.wall_clock_s, result.seed);
    if result.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_CHECK_FAILED)
    }
}
