//! Monte-Carlo benchmark driver.
//!
//! `ccpd-bench run` executes an experiment grid and writes one record per
//! `(snr, method, trial)`; `ccpd-bench geometry` prints the sensor tables of
//! a preset. A TOML file passed with `--config` overrides any flag.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use ccpd_core::ccpd::AlsOptions;
use ccpd_core::bench::{
    aggregate, emit, parse_snr_grid, run_experiment, ExperimentConfig, Format, Method, Preset,
};
use ccpd_core::geometry::GeometrySpec;
use ccpd_core::sim::Region;
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

#[derive(Parser)]
#[command(name = "ccpd-bench", version, about = "Coupled-CPD localization benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte-Carlo experiment and write per-trial records.
    Run(RunArgs),
    /// Print the transmit and receive sensor tables.
    Geometry(GeometryArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment preset (A-1 .. B-3).
    #[arg(long, default_value = "A-1")]
    preset: String,
    /// SNR grid in dB: `a:b:step`, single values, `inf`, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    snr: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated subset of ccpd-jevd, ccpd-als-alg, ccpd-als-rand.
    #[arg(long)]
    methods: Option<String>,
    /// Output file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or json; inferred from the output extension when omitted.
    #[arg(long)]
    format: Option<String>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    workers: Option<usize>,
    /// Write cpu_seconds as 0 so that output is byte-reproducible.
    #[arg(long)]
    no_timing: bool,
    /// TOML file whose keys override the flags above.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Suppress the per-group summary on stdout.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct GeometryArgs {
    #[arg(long, default_value = "A-1")]
    preset: String,
    #[arg(long)]
    config: Option<PathBuf>,
}

/// Keys accepted in a `--config` file. Every key is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    preset: Option<String>,
    experiment: Option<String>,
    snr: Option<SnrSpec>,
    trials: Option<usize>,
    seed: Option<u64>,
    methods: Option<Vec<String>>,
    workers: Option<usize>,
    timing: Option<bool>,
    out: Option<PathBuf>,
    format: Option<String>,
    tx: Option<GeometrySpec>,
    rx: Option<GeometrySpec>,
    k: Option<usize>,
    r: Option<usize>,
    t: Option<usize>,
    /// Expected receive and transmit sensor counts, checked against the
    /// geometry.
    i: Option<usize>,
    j: Option<usize>,
    region: Option<Region>,
    min_separation_deg: Option<f64>,
    als: Option<AlsOptions>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum SnrSpec {
    Text(String),
    List(Vec<f64>),
}

fn load_config(path: &Path) -> Result<ConfigFile> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

fn parse_methods(list: &[&str]) -> Result<Vec<Method>> {
    let mut out = Vec::new();
    for name in list.iter().map(|s| s.trim()).filter(|s| !s.is_empty()) {
        let m: Method = name.parse()?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    if out.is_empty() {
        bail!("no methods selected");
    }
    Ok(out)
}

struct Plan {
    cfg: ExperimentConfig,
    out: Option<PathBuf>,
    format: Option<Format>,
}

fn build_plan(args: &RunArgs) -> Result<Plan> {
    let file = match &args.config {
        Some(p) => load_config(p)?,
        None => ConfigFile::default(),
    };
    let preset: Preset = file.preset.as_deref().unwrap_or(&args.preset).parse()?;
    let mut cfg = ExperimentConfig::preset(preset);

    if let Some(s) = &args.snr {
        cfg.snr_grid = parse_snr_grid(s)?;
    }
    if let Some(n) = args.trials {
        cfg.trials = n;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(m) = &args.methods {
        cfg.methods = parse_methods(&m.split(',').collect::<Vec<_>>())?;
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    if args.no_timing {
        cfg.timing = false;
    }
    let mut out = args.out.clone();
    let mut format = args.format.as_deref().map(str::parse::<Format>).transpose()?;

    match file.snr {
        Some(SnrSpec::Text(s)) => cfg.snr_grid = parse_snr_grid(&s)?,
        Some(SnrSpec::List(v)) => cfg.snr_grid = v,
        None => {}
    }
    let custom = file.tx.is_some()
        || file.rx.is_some()
        || file.k.is_some()
        || file.r.is_some()
        || file.t.is_some();
    cfg.trials = file.trials.unwrap_or(cfg.trials);
    cfg.seed = file.seed.unwrap_or(cfg.seed);
    if let Some(m) = &file.methods {
        cfg.methods = parse_methods(&m.iter().map(String::as_str).collect::<Vec<_>>())?;
    }
    cfg.workers = file.workers.unwrap_or(cfg.workers);
    cfg.timing = file.timing.unwrap_or(cfg.timing);
    cfg.tx = file.tx.unwrap_or(cfg.tx);
    cfg.rx = file.rx.unwrap_or(cfg.rx);
    cfg.k = file.k.unwrap_or(cfg.k);
    cfg.r = file.r.unwrap_or(cfg.r);
    cfg.t = file.t.unwrap_or(cfg.t);
    cfg.region = file.region.unwrap_or(cfg.region);
    cfg.min_separation_deg = file.min_separation_deg.unwrap_or(cfg.min_separation_deg);
    cfg.als = file.als.unwrap_or(cfg.als);
    if let Some(name) = file.experiment {
        cfg.experiment = name;
    } else if custom {
        cfg.experiment = "custom".to_string();
    }
    if file.out.is_some() {
        out = file.out;
    }
    if let Some(f) = &file.format {
        format = Some(f.parse()?);
    }

    cfg.validate()?;
    if let Some(i) = file.i {
        let have = cfg.i()?;
        if i != have {
            bail!(ccpd_core::Error::Config(format!(
                "config sets I = {i} but the receive geometry has {have} sensors"
            )));
        }
    }
    if let Some(j) = file.j {
        let have = cfg.j()?;
        if j != have {
            bail!(ccpd_core::Error::Config(format!(
                "config sets J = {j} but the transmit geometry has {have} sensors"
            )));
        }
    }
    Ok(Plan { cfg, out, format })
}

fn run(args: RunArgs) -> Result<()> {
    let plan = build_plan(&args)?;
    let cfg = &plan.cfg;
    let report = cfg.conditions()?;
    if !report.satisfied {
        eprintln!("warning: working conditions violated for {}:", cfg.experiment);
        for d in report.details.iter().filter(|d| !d.holds) {
            eprintln!("  {}: {} < {}", d.name, d.lhs, d.rhs);
        }
    }
    let run = run_experiment(cfg)?;
    if let Some(path) = &plan.out {
        let format = plan.format.unwrap_or_else(|| Format::from_path(path));
        emit(&run.records, path, format).with_context(|| format!("writing {}", path.display()))?;
    }
    let failures = run.records.iter().filter(|r| r.failure.is_some()).count();
    if failures > 0 {
        eprintln!("warning: {failures} of {} trials failed", run.records.len());
    }
    if !args.quiet {
        println!(
            "# {} ({}), I={} J={} K={} R={} T={}",
            cfg.experiment,
            report.scenario.label(),
            cfg.i()?,
            cfg.j()?,
            cfg.k,
            cfg.r,
            cfg.t
        );
        println!("{:>8} {:<14} {:>6} {:>12} {:>12} {:>9}", "snr_db", "method", "trials", "mae_rad", "cpu_s", "converged");
        for g in aggregate(&run.records) {
            println!(
                "{:>8} {:<14} {:>6} {:>12.4e} {:>12.4e} {:>9.3}",
                g.snr_db, g.method.name(), g.trials, g.mean_mae_rad, g.mean_cpu_seconds, g.converged_fraction
            );
        }
    }
    Ok(())
}

fn geometry(args: GeometryArgs) -> Result<()> {
    let file = match &args.config {
        Some(p) => load_config(p)?,
        None => ConfigFile::default(),
    };
    let preset: Preset = file.preset.as_deref().unwrap_or(&args.preset).parse()?;
    let base = ExperimentConfig::preset(preset);
    let tx = file.tx.unwrap_or(base.tx).build()?;
    let rx = file.rx.unwrap_or(base.rx).build()?;
    println!("## transmit array (J = {})", tx.len());
    print!("{}", tx.table());
    println!("## receive array (I = {})", rx.len());
    print!("{}", rx.table());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Geometry(a) => geometry(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
