use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use reconfig_lifetime::config::{ApproachSelection, Overrides, RunConfig};
use reconfig_lifetime::report;

/// Monte Carlo estimate of the lifetime gained by reconfiguring parallel cells.
#[derive(Parser)]
#[command(name = "reconfsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the selected cases and write records, summaries and manifest.json.
    Run(RunArgs),
    /// Fit ageing distributions and the R-Q line from measurement CSVs.
    Fit {
        #[arg(long)]
        bol: PathBuf,
        #[arg(long)]
        eol: PathBuf,
        #[arg(long)]
        rq: PathBuf,
        /// Also write the config fragment to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Histogram and trend CSVs from a run directory.
    Report {
        /// Directory holding records_*.csv.
        records: PathBuf,
        /// Output directory (default: the records directory).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 50)]
        bins: usize,
        /// Override the N_s values of the GM trend.
        #[arg(long, value_delimiter = ',')]
        ns: Option<Vec<usize>>,
        #[arg(long, env = "RECONFSIM_WORKERS")]
        workers: Option<usize>,
    },
    /// Print the resolved case grid.
    Grid(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML config, or a manifest.json from an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all available cores).
    #[arg(long, env = "RECONFSIM_WORKERS")]
    workers: Option<usize>,
    /// 1, 2 or both.
    #[arg(long)]
    approach: Option<ApproachSelection>,
    /// Keep cases whose id contains any of these substrings.
    #[arg(long, value_delimiter = ',')]
    cases: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    np: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    ns: Option<Vec<usize>>,
    /// Experiments per case.
    #[arg(long)]
    n_exp: Option<usize>,
}

impl RunArgs {
    fn resolve(&self) -> reconfig_lifetime::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_path(p)?,
            None => RunConfig::default(),
        };
        cfg.apply(&Overrides {
            seed: self.seed,
            out: self.out.clone(),
            workers: self.workers,
            approach: self.approach,
            n_exp_pu: self.n_exp,
            cases: self.cases.clone(),
            n_p: self.np.clone(),
            n_s: self.ns.clone(),
        });
        if cfg.workers.is_none() {
            cfg.workers = Some(default_workers());
        }
        Ok(cfg)
    }
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn run(cli: Cli) -> reconfig_lifetime::Result<()> {
    match cli.command {
        Command::Run(args) => {
            let cfg = args.resolve()?;
            let out = report::cmd_run(&cfg)?;
            let n: usize = out.records.iter().map(Vec::len).sum();
            let flagged: usize = out.manifest.cases.iter().map(|c| c.n_flagged).sum();
            println!(
                "{} cases, {n} experiments ({flagged} flagged) -> {}",
                out.cases.len(),
                cfg.output_dir.display()
            );
        }
        Command::Fit { bol, eol, rq, out } => {
            let (_, text) = report::cmd_fit(&bol, &eol, &rq)?;
            print!("{text}");
            if let Some(path) = out {
                std::fs::write(&path, &text)?;
            }
        }
        Command::Report { records, out, bins, ns, workers } => {
            let gm = match ns {
                Some(ns) => {
                    let manifest = records.join("manifest.json");
                    let mut spec = if manifest.exists() {
                        report::Manifest::read(&manifest)?.config.gm
                    } else {
                        Default::default()
                    };
                    spec.n_s_values = ns;
                    Some(spec)
                }
                None => None,
            };
            let out_dir = out.unwrap_or_else(|| records.clone());
            let r = report::cmd_report(&records, &out_dir, bins, gm, workers.unwrap_or_else(default_workers))?;
            println!(
                "{} histograms, {} trends, {} GM trends -> {}",
                r.histograms.len(),
                r.trends.len(),
                r.gm_trends.len(),
                out_dir.display()
            );
        }
        Command::Grid(args) => print!("{}", report::cmd_grid(&args.resolve()?)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
