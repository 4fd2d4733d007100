use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use oblique_core::experiment::{
    report_index, run, DatumSpec, ExampleKind, ExitStatus, ExperimentConfig, ExperimentKind, RunOptions, ToleranceProfile,
};
use oblique_core::geometry::DomainConfig;
use oblique_core::{Error, Result};

/// Experiments on oblique-derivative problems in small-Lipschitz graph domains.
#[derive(Debug, Parser)]
#[command(name = "oblique", version)]
struct Cli {
    /// Experiment config (JSON). Flags given on the command line override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for reports.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    tolerance_profile: Option<ToleranceProfile>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Default)]
struct CellArgs {
    /// Domain as a JSON file or inline JSON object.
    #[arg(long)]
    domain: Option<String>,
    /// Exponents, one cell each.
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    p: Vec<f64>,
    /// Grid sizes, one cell each.
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    n: Vec<usize>,
    #[arg(long)]
    radius: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Example {
    Cusp,
    Wedge,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Regularized distance, its gradient and the sandwich ratio over a grid.
    Regdist(CellArgs),
    /// Young-type bounds of the regularized mollification.
    Mollify {
        #[command(flatten)]
        cells: CellArgs,
        #[arg(long)]
        check_young: bool,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Neumann extension of a boundary datum.
    Extend {
        #[command(flatten)]
        cells: CellArgs,
        /// Boundary datum samples as CSV rows `y1,g`.
        #[arg(long)]
        datum_csv: Option<PathBuf>,
    },
    /// Oblique problem with manufactured data and the main-estimate probe.
    Solve(CellArgs),
    /// Local model-problem probe.
    Probe(CellArgs),
    /// Certificates for the sharpness examples.
    Counterexample {
        example: Example,
        #[command(flatten)]
        cells: CellArgs,
        #[arg(long)]
        theta0: Option<f64>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
    },
    /// Summary table of the reports under a directory.
    Report {
        dir: PathBuf,
        /// Print CSV instead of the aligned table.
        #[arg(long)]
        csv: bool,
    },
}

fn config_error(path: &str, message: impl Into<String>) -> Error {
    Error::Config { path: path.into(), message: message.into() }
}

fn parse_domain(text: &str) -> Result<DomainConfig> {
    let json = if text.trim_start().starts_with('{') {
        text.to_string()
    } else {
        std::fs::read_to_string(text).map_err(|e| config_error("--domain", format!("{text}: {e}")))?
    };
    serde_json::from_str(&json).map_err(|e| config_error("--domain", e.to_string()))
}

fn read_datum_csv(path: &Path) -> Result<DatumSpec> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| config_error("--datum-csv", e.to_string()))?;
    let (mut x, mut values) = (Vec::new(), Vec::new());
    for rec in reader.records() {
        let rec = rec.map_err(|e| config_error("--datum-csv", e.to_string()))?;
        match (rec.get(0).map(|s| s.trim().parse::<f64>()), rec.get(1).map(|s| s.trim().parse::<f64>())) {
            (Some(Ok(a)), Some(Ok(b))) => {
                x.push(a);
                values.push(b);
            }
            _ if x.is_empty() => continue,
            _ => return Err(config_error("--datum-csv", format!("bad row {:?}", rec.position().map(|p| p.line())))),
        }
    }
    Ok(DatumSpec::Samples { x, values })
}

fn apply_cells(config: &mut ExperimentConfig, args: &CellArgs) -> Result<()> {
    if let Some(d) = &args.domain {
        config.domain = Some(parse_domain(d)?);
    }
    if !args.p.is_empty() {
        config.p = args.p.clone();
    }
    if !args.n.is_empty() {
        config.n = args.n.clone();
    }
    if args.radius.is_some() {
        config.radius = args.radius;
    }
    Ok(())
}

fn build_config(cli: &Cli) -> Result<ExperimentConfig> {
    let kind = match &cli.command {
        Command::Regdist(_) => ExperimentKind::Regdist,
        Command::Mollify { .. } => ExperimentKind::Mollify,
        Command::Extend { .. } => ExperimentKind::Extend,
        Command::Solve(_) => ExperimentKind::Solve,
        Command::Probe(_) => ExperimentKind::Probe,
        Command::Counterexample { .. } => ExperimentKind::Counterexample,
        Command::Report { .. } => unreachable!("report takes no config"),
    };
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::from_path(path)?,
        None => ExperimentConfig::minimal(kind),
    };
    if config.kind != kind {
        return Err(config_error("kind", format!("config is `{}` but the subcommand is `{}`", config.kind.name(), kind.name())));
    }
    match &cli.command {
        Command::Regdist(args) | Command::Solve(args) | Command::Probe(args) => apply_cells(&mut config, args)?,
        Command::Mollify { cells, check_young, trials } => {
            if !check_young {
                return Err(config_error("--check-young", "the Young-bound check is the only mollify action; pass --check-young"));
            }
            apply_cells(&mut config, cells)?;
            if let Some(t) = trials {
                config.trials = *t;
            }
        }
        Command::Extend { cells, datum_csv } => {
            apply_cells(&mut config, cells)?;
            if let Some(path) = datum_csv {
                config.datum = read_datum_csv(path)?;
            }
        }
        Command::Counterexample { example, cells, theta0, eps, beta } => {
            apply_cells(&mut config, cells)?;
            config.example = Some(match example {
                Example::Cusp => ExampleKind::Cusp,
                Example::Wedge => ExampleKind::Wedge,
            });
            config.theta0 = theta0.or(config.theta0);
            config.eps = eps.or(config.eps);
            config.beta = beta.or(config.beta);
        }
        Command::Report { .. } => {}
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(profile) = cli.tolerance_profile {
        config.tolerance_profile = profile;
    }
    config.validate()?;
    Ok(config)
}

fn execute(cli: &Cli) -> Result<ExitStatus> {
    if let Command::Report { dir, csv } = &cli.command {
        let table = report_index(dir)?;
        if *csv {
            print!("{}", table.to_csv()?);
        } else {
            print!("{table}");
        }
        return Ok(ExitStatus::Ok);
    }
    let config = build_config(cli)?;
    let out = cli.out.clone().or_else(|| config.output.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let summary = run(&config, &out, RunOptions { jobs: cli.jobs })?;
    for cell in &summary.index.cells {
        let params: Vec<String> = cell.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let detail = match (&cell.error, cell.failed_verdicts.is_empty()) {
            (Some(e), _) => format!("error: {e}"),
            (None, false) => format!("failed: {}", cell.failed_verdicts.join(", ")),
            (None, true) => String::new(),
        };
        println!("cell {:>4} {:<5} {} {detail}", cell.id, format!("{:?}", cell.status).to_uppercase(), params.join(" "));
    }
    println!("{} cells, index at {}", summary.index.cells.len(), out.join("index.json").display());
    Ok(summary.exit_status())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let status = match execute(&cli) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("oblique: {e}");
            ExitStatus::for_error(&e)
        }
    };
    ExitCode::from(status as u8)
}
