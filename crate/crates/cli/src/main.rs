use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use eigenloc::exponents::{self, SolveMode};
use eigenloc::geometry::{check_cover, suitable_cover};
use eigenloc::harness::experiments::{self, Prepared};
use eigenloc::harness::records::write_summary;
use eigenloc::harness::{runner, ExperimentConfig, ExperimentKind};
use eigenloc::{ExponentSet, LatticeBox};

#[derive(Parser)]
#[command(name = "eigenloc", version)]
#[command(about = "Finite-volume experiments for the eigensystem multiscale analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check or complete exponent sets
    Exponents {
        #[command(subcommand)]
        action: ExponentsCmd,
    },
    /// Suitable covers
    Cover {
        #[command(subcommand)]
        action: CoverCmd,
    },
    /// Single-box diagnostics
    Box {
        #[command(subcommand)]
        action: BoxCmd,
    },
    /// Starting-scale estimates and induction steps
    Msa {
        #[command(subcommand)]
        action: MsaCmd,
    },
    /// Green's function regularity
    Green {
        #[command(subcommand)]
        action: GreenCmd,
    },
    /// Level-spacing frequency against its lower bound
    Spacing(Common),
    /// Ground-state energy above the spectral bottom
    Lifshitz(Common),
}

#[derive(Subcommand)]
enum ExponentsCmd {
    /// Validate an exponent set given by flags or the `[exponents]` table of a config
    Validate {
        #[command(flatten)]
        set: ExponentFlags,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Complete (ξ, ζ) to a valid set maximizing ϱ
    Solve {
        #[arg(long)]
        xi: f64,
        #[arg(long)]
        zeta: f64,
        #[arg(long, default_value_t = 1)]
        dim: usize,
        /// Bottom-of-spectrum mode (κ′ = 2ζ/d)
        #[arg(long)]
        bottom: bool,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
}

#[derive(Args)]
struct ExponentFlags {
    #[arg(long)]
    xi: Option<f64>,
    #[arg(long)]
    zeta: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    kappa_prime: f64,
    #[arg(long)]
    varsigma: Option<f64>,
}

#[derive(Subcommand)]
enum CoverCmd {
    /// Build the suitable cover and check its structural properties
    Check {
        #[arg(long)]
        side: f64,
        #[arg(long)]
        child: f64,
        #[arg(long, default_value_t = 0.5)]
        varsigma: f64,
        #[arg(long, default_value_t = 1)]
        dim: usize,
        /// Fixed ρ instead of the largest admissible one
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
}

#[derive(Subcommand)]
enum BoxCmd {
    /// Localizing verdict of one sampled box
    Verdict {
        #[command(flatten)]
        common: Common,
        /// Trial index selecting the realization
        #[arg(long, default_value_t = 0)]
        trial: u64,
        /// Box side, overriding the configuration
        #[arg(long)]
        side: Option<f64>,
    },
}

#[derive(Subcommand)]
enum MsaCmd {
    /// Probability that a box is localizing
    Start(Common),
    /// One step from scale ℓ to L = ℓ^γ
    Induct(Common),
    /// Inner eigenvalues against the spectrum of an enclosing box
    Match(Common),
}

#[derive(Subcommand)]
enum GreenCmd {
    /// Regularity of boxes whose localizing verdict passes
    Check(Common),
    /// Either/or regularity for two disjoint boxes
    Twobox(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// TOML configuration; the built-in preset is used without one
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    /// Directory for records.jsonl and summary.csv
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

impl Common {
    fn config(&self, kind: ExperimentKind) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => {
                let cfg = ExperimentConfig::load(p).with_context(|| format!("loading {}", p.display()))?;
                if cfg.experiment != kind {
                    bail!(
                        "{} describes a `{}` experiment, this command runs `{}`",
                        p.display(),
                        cfg.experiment.name(),
                        kind.name()
                    );
                }
                cfg
            }
            None => ExperimentConfig::preset(kind),
        };
        if let Some(s) = self.seed {
            cfg.master_seed = s;
        }
        if let Some(n) = self.trials {
            cfg.trials = n;
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        if let Some(o) = &self.out {
            cfg.output = Some(o.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn emit(value: &Value, format: Format) -> Result<()> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match format {
        Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(value)?)?,
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            match value {
                Value::Array(rows) if rows.iter().all(Value::is_object) && !rows.is_empty() => {
                    let keys: Vec<String> = rows[0].as_object().unwrap().keys().cloned().collect();
                    w.write_record(&keys)?;
                    for r in rows {
                        w.write_record(keys.iter().map(|k| cell(&r[k])))?;
                    }
                }
                Value::Object(map) => {
                    w.write_record(["field", "value"])?;
                    for (k, v) in map {
                        w.write_record([k.clone(), cell(v)])?;
                    }
                }
                other => {
                    w.write_record([cell(other)])?;
                }
            }
            w.flush()?;
        }
    }
    Ok(())
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Runs an experiment, streaming records when an output directory is set.
fn experiment(common: &Common, kind: ExperimentKind) -> Result<ExitCode> {
    let cfg = common.config(kind)?;
    let rows = match &cfg.output {
        Some(dir) => {
            let out = runner::run(&cfg, dir)?;
            eprintln!("records: {}", out.records.display());
            eprintln!("summary: {}", out.summary.display());
            out.rows
        }
        None => {
            let prepared = Prepared::new(&cfg)?;
            experiments::summarize(&prepared, &runner::collect(&cfg)?)?
        }
    };
    match common.format {
        Format::Json => emit(&serde_json::to_value(&rows)?, Format::Json)?,
        Format::Csv => write_summary(&rows, io::stdout().lock())?,
    }
    Ok(ExitCode::SUCCESS)
}

fn exponent_set(flags: &ExponentFlags, config: &Option<PathBuf>) -> Result<ExponentSet> {
    if let Some(p) = config {
        let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        let doc: toml::Table = toml::from_str(&text)?;
        let table = match doc.get("exponents") {
            Some(t) => t.clone(),
            None => toml::Value::Table(doc),
        };
        return Ok(table.try_into()?);
    }
    let need = |v: Option<f64>, name: &str| v.with_context(|| format!("missing --{name}"));
    Ok(ExponentSet {
        xi: need(flags.xi, "xi")?,
        zeta: need(flags.zeta, "zeta")?,
        beta: need(flags.beta, "beta")?,
        tau: need(flags.tau, "tau")?,
        gamma: need(flags.gamma, "gamma")?,
        kappa: need(flags.kappa, "kappa")?,
        kappa_prime: flags.kappa_prime,
        varsigma: need(flags.varsigma, "varsigma")?,
    })
}

fn box_verdict(common: &Common, trial: u64, side: Option<f64>) -> Result<ExitCode> {
    let mut cfg = common.config(ExperimentKind::Start)?;
    if let Some(s) = side {
        cfg.boxes.side = Some(s);
        cfg.validate()?;
    }
    let record = experiments::trial(&Prepared::new(&cfg)?, trial)?;
    let v = record.verdict.context("start trial carries a verdict")?;
    match common.format {
        Format::Json => emit(&serde_json::to_value(&v)?, Format::Json)?,
        Format::Csv => emit(&serde_json::to_value(&v.per_eigenvalue)?, Format::Csv)?,
    }
    Ok(if v.overall { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Exponents { action } => match action {
            ExponentsCmd::Validate { set, config, format } => {
                let e = exponent_set(&set, &config)?;
                let report = e.report();
                emit(&serde_json::to_value(&report)?, format)?;
                Ok(if report.valid { ExitCode::SUCCESS } else { ExitCode::from(1) })
            }
            ExponentsCmd::Solve { xi, zeta, dim, bottom, format } => {
                let mode = if bottom { SolveMode::BottomOfSpectrum } else { SolveMode::Generic };
                let e = exponents::solve(xi, zeta, dim, mode)?;
                emit(&serde_json::to_value(e.report())?, format)?;
                Ok(ExitCode::SUCCESS)
            }
        },
        Command::Cover { action } => match action {
            CoverCmd::Check { side, child, varsigma, dim, rho, format } => {
                let parent = LatticeBox::new(vec![0.0; dim], side)?;
                let cover = suitable_cover(&parent, child, varsigma, rho)?;
                let check = check_cover(&cover);
                let mut v = serde_json::to_value(&check)?;
                v["spacing"] = json!(cover.spacing());
                emit(&v, format)?;
                Ok(if check.all_ok() { ExitCode::SUCCESS } else { ExitCode::from(1) })
            }
        },
        Command::Box { action } => match action {
            BoxCmd::Verdict { common, trial, side } => box_verdict(&common, trial, side),
        },
        Command::Msa { action } => match action {
            MsaCmd::Start(c) => experiment(&c, ExperimentKind::Start),
            MsaCmd::Induct(c) => experiment(&c, ExperimentKind::Induction),
            MsaCmd::Match(c) => experiment(&c, ExperimentKind::Matching),
        },
        Command::Green { action } => match action {
            GreenCmd::Check(c) => experiment(&c, ExperimentKind::Bridge),
            GreenCmd::Twobox(c) => experiment(&c, ExperimentKind::Twobox),
        },
        Command::Spacing(c) => experiment(&c, ExperimentKind::Spacing),
        Command::Lifshitz(c) => experiment(&c, ExperimentKind::Lifshitz),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
