use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use irs_bench::acceptance;
use irs_bench::config::{load_config, ConfigError, QuantileChoice, RunConfig, SweepAxis, SweepConfig};
use irs_bench::sweep::{emit_csv, run_sweep, SweepResults};
use irs_secrecy::outage::{analytic_quantiles, monte_carlo_quantiles};

const EXIT_CONFIG: u8 = 1;
const EXIT_SOLVER: u8 = 2;
const EXIT_ACCEPTANCE: u8 = 3;

#[derive(Parser)]
#[command(name = "irs-bench", version, about = "Secure IRS placement and beamforming benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one seed of each selected scheme.
    Run(Common),
    /// Run a sweep over seeds and an optional parameter axis.
    Sweep(Common),
    /// Run the acceptance suite.
    Verify {
        /// Comma-separated criterion numbers (default: all).
        #[arg(long, value_delimiter = ',')]
        criteria: Vec<u8>,
    },
    /// Print the outage quantile table.
    Quantile(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Scheme tags, comma-separated.
    #[arg(long, value_delimiter = ',')]
    scheme: Vec<String>,
    /// `axis=v1,v2,...` with axis one of power_dbm, n_irs, eve_area_index,
    /// rician_k, none.
    #[arg(long)]
    sweep: Option<String>,
    #[arg(long, value_parser = ["analytic", "mc"])]
    quantile_method: Option<String>,
    #[arg(long)]
    grid_step: Option<f64>,
}

fn resolve(c: &Common) -> Result<RunConfig, ConfigError> {
    let mut cfg = match &c.config {
        Some(p) => load_config(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(n) = c.seeds {
        cfg.n_seeds = n;
    }
    if let Some(o) = &c.out {
        cfg.output = Some(o.clone());
    }
    if !c.scheme.is_empty() {
        cfg.schemes = c.scheme.clone();
    }
    if let Some(s) = &c.sweep {
        let (axis, values) = s.split_once('=').unwrap_or((s.as_str(), ""));
        let values = values
            .split(',')
            .filter(|v| !v.trim().is_empty())
            .map(|v| {
                v.trim().parse::<f64>().map_err(|_| ConfigError::Invalid {
                    field: "sweep",
                    reason: format!("bad value {v:?}"),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        cfg.sweep = SweepConfig {
            axis: SweepAxis::parse(axis.trim())?,
            values,
        };
    }
    if let Some(m) = &c.quantile_method {
        cfg.quantile_method = if m == "mc" { QuantileChoice::Mc } else { QuantileChoice::Analytic };
    }
    if let Some(g) = c.grid_step {
        cfg.grid_step = g;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_config(cfg: &RunConfig) {
    println!("# resolved configuration");
    for line in cfg.to_toml().lines() {
        println!("# {line}");
    }
}

fn report(r: &SweepResults) {
    for row in &r.rows {
        if let Some(e) = &row.error {
            eprintln!("run failed: value {} scheme {} seed {}: {e}", row.sweep_value, row.scheme, row.seed);
        }
    }
    println!("{:>12} {:>16} {:>4} {:>10} {:>8}", "sweep_value", "scheme", "n", "mean_rate", "std_err");
    for s in &r.summary {
        println!(
            "{:>12} {:>16} {:>4} {:>10.4} {:>8.4}",
            s.sweep_value, s.scheme, s.n, s.mean_rate, s.std_err
        );
    }
}

fn sweep(mut cfg: RunConfig, single: bool) -> ExitCode {
    if single {
        cfg.n_seeds = 1;
    }
    print_config(&cfg);
    let res = match run_sweep(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    report(&res);
    if let Some(path) = &cfg.output {
        if let Err(e) = emit_csv(&res, path) {
            eprintln!("cannot write {}: {e}", path.display());
            return ExitCode::from(EXIT_SOLVER);
        }
    }
    if res.failures() > 0 {
        ExitCode::from(EXIT_SOLVER)
    } else {
        ExitCode::SUCCESS
    }
}

fn quantile_table(cfg: &RunConfig) -> ExitCode {
    print_config(cfg);
    let mut p = cfg.params();
    println!("{:>8} {:>14} {:>14}", "p_out", "alpha_e", "alpha_b");
    let mut levels = vec![0.01, 0.02, 0.05, 0.1, 0.2];
    if !levels.contains(&cfg.p_out) {
        levels.push(cfg.p_out);
        levels.sort_by(f64::total_cmp);
    }
    for po in levels {
        p.p_out = po;
        let q = match cfg.quantile_method {
            QuantileChoice::Analytic => analytic_quantiles(&p, po),
            QuantileChoice::Mc => monte_carlo_quantiles(&p, po, cfg.mc_samples, cfg.seed),
        };
        match q {
            Ok(q) => println!("{po:>8} {:>14.6} {:>14.6}", q.alpha_e, q.alpha_b),
            Err(e) => {
                eprintln!("{e}");
                return ExitCode::from(EXIT_SOLVER);
            }
        }
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = match &cli.command {
        Command::Run(c) | Command::Sweep(c) | Command::Quantile(c) => Some(c),
        Command::Verify { .. } => None,
    };
    let cfg = match common.map(resolve).transpose() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match cli.command {
        Command::Run(_) => sweep(cfg.expect("resolved"), true),
        Command::Sweep(_) => sweep(cfg.expect("resolved"), false),
        Command::Quantile(_) => quantile_table(&cfg.expect("resolved")),
        Command::Verify { criteria } => {
            print_config(&RunConfig::default());
            let ids = if criteria.is_empty() { acceptance::ALL.to_vec() } else { criteria };
            if let Some(bad) = ids.iter().find(|i| !acceptance::ALL.contains(i)) {
                eprintln!("no acceptance criterion {bad}");
                return ExitCode::from(EXIT_CONFIG);
            }
            let mut all = true;
            for id in ids {
                let r = acceptance::run(id);
                println!("{r}");
                all &= r.passed;
            }
            if all {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_ACCEPTANCE)
            }
        }
    }
}
