//! `bmo`: command-line front end for bmo-core.
//!
//! Every subcommand writes a JSON report echoing its configuration and a
//! tab-separated table. With `--out-prefix P` these go to `P.json` and
//! `P.tsv`; otherwise the report is printed.
//!
//! Exit status: 0 when every embedded check passes, 2 for unreadable or
//! invalid input, 3 when an embedded check fails, 4 when the input does not
//! meet a hypothesis of the requested operation.

mod commands;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bmo_core::Error;
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

#[derive(Debug, Parser, Serialize)]
#[command(name = "bmo", version, about = "BMO norms, Uchiyama partitions and BMO-map checks on finite spaces")]
pub struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Relative tolerance for comparisons made by the tool itself.
    #[arg(long, global = true, default_value_t = 1e-12)]
    pub tol: f64,
    /// Write `<prefix>.json` and `<prefix>.tsv` instead of printing.
    #[arg(long, global = true)]
    pub out_prefix: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Grid1d,
    Grid2d,
    Path,
    BinaryTree,
    RandomTree,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Command {
    /// Generate a space document.
    GenSpace {
        #[arg(long, value_enum)]
        kind: Kind,
        /// Points per side for grids and paths, depth for binary trees,
        /// vertex count for random trees.
        #[arg(long)]
        size: usize,
        /// Power-weight exponent for grids.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        exponent: f64,
        /// Rescale so the diameter is 1/2.
        #[arg(long)]
        normalize: bool,
    },
    /// BMO norm of a field, with per-ball mean oscillations.
    BmoNorm {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        field: PathBuf,
    },
    /// Dual norm of a field, checked against half and all of the BMO norm.
    DualNorm {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        field: PathBuf,
    },
    /// John–Nirenberg tails and the best constant of a field.
    JnProfile {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        field: PathBuf,
        /// Levels to tabulate; defaults to the norm times 2^i, i = -4..=6.
        #[arg(long, value_delimiter = ',')]
        lambdas: Vec<f64>,
    },
    /// Build a partition of unity with small BMO norm vanishing on the sets.
    Uchiyama {
        #[arg(long)]
        space: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        sets: Vec<PathBuf>,
        #[arg(long)]
        lambda: f64,
        /// Scale separation; defaults to the smallest admissible value.
        #[arg(long)]
        q: Option<u32>,
        #[arg(long)]
        depth: Option<u32>,
        /// Base of the density exponents; defaults to the space's c_D.
        #[arg(long)]
        c_d: Option<f64>,
    },
    /// Check a partition of unity and replay the converse argument.
    VerifyConstruction {
        #[arg(long)]
        space: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        sets: Vec<PathBuf>,
        #[arg(long, value_delimiter = ',', required = true)]
        fields: Vec<PathBuf>,
        #[arg(long)]
        lambda: f64,
        /// Norm budget; defaults to lambda times the largest field norm.
        #[arg(long)]
        c2: Option<f64>,
    },
    /// Density functional of a set family and the largest admissible lambda.
    Density {
        #[arg(long)]
        space: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        sets: Vec<PathBuf>,
        #[arg(long)]
        c_d: Option<f64>,
    },
    /// Test the two-set density conditions for a map.
    MapCheck {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        map: PathBuf,
        #[arg(long, default_value_t = 500)]
        trials: usize,
        /// Use every pair of subsets instead of sampling.
        #[arg(long)]
        exhaustive: bool,
        #[arg(long, default_value_t = 0.2)]
        gamma: f64,
        /// Threshold for condition (ii); defaults to (gamma / K)^(1 / alpha).
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Estimate the norm of the composition operator on a field family.
    ComposeNorm {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        map: PathBuf,
        #[arg(long, default_value = "default")]
        family: String,
    },
    /// Run the composition-operator bound back to the density condition.
    GotohRoundtrip {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        map: PathBuf,
        #[arg(long, default_value_t = 60)]
        trials: usize,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::GenSpace { .. } => "gen-space",
            Command::BmoNorm { .. } => "bmo-norm",
            Command::DualNorm { .. } => "dual-norm",
            Command::JnProfile { .. } => "jn-profile",
            Command::Uchiyama { .. } => "uchiyama",
            Command::VerifyConstruction { .. } => "verify-construction",
            Command::Density { .. } => "density",
            Command::MapCheck { .. } => "map-check",
            Command::ComposeNorm { .. } => "compose-norm",
            Command::GotohRoundtrip { .. } => "gotoh-roundtrip",
        }
    }
}

/// What a subcommand produced.
pub struct Outcome {
    pub result: Value,
    pub table: bmo_core::io::Table,
    /// Extra files as `(suffix, contents)`, written next to the report.
    pub files: Vec<(String, String)>,
    /// Printed instead of the report when there is no output prefix.
    pub stdout: Option<String>,
    pub failure: Option<Failure>,
}

impl Outcome {
    pub fn new(result: Value, table: bmo_core::io::Table) -> Self {
        Self {
            result,
            table,
            files: Vec::new(),
            stdout: None,
            failure: None,
        }
    }

    pub fn fail(mut self, message: impl Into<String>, witness: Value) -> Self {
        self.failure.get_or_insert(Failure {
            message: message.into(),
            witness,
        });
        self
    }
}

/// A failed embedded check.
pub struct Failure {
    pub message: String,
    pub witness: Value,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Assertion(_) | Error::Invariant { .. } => 3,
        Error::DensityTooLarge { .. } | Error::Hypothesis(_) => 4,
        _ => 2,
    }
}

fn write(path: &Path, contents: &str) -> Result<(), String> {
    fs::write(path, contents).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

fn emit(cli: &Cli, report: &Value, outcome: &Outcome) -> Result<(), String> {
    let text = serde_json::to_string_pretty(report).map_err(|e| e.to_string())? + "\n";
    match &cli.out_prefix {
        Some(prefix) => {
            write(&with_suffix(prefix, "json"), &text)?;
            write(&with_suffix(prefix, "tsv"), &outcome.table.render())?;
            for (suffix, contents) in &outcome.files {
                write(&with_suffix(prefix, suffix), contents)?;
            }
        }
        None => print!("{}", outcome.stdout.as_deref().unwrap_or(&text)),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = json!({ "seed": cli.seed, "tol": cli.tol, "command": &cli.command });
    let name = cli.command.name();
    let outcome = match commands::run(&cli) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("bmo {name}: {e}");
            let code = exit_code(&e);
            if code != 2 {
                let mut result = json!({ "error": e.to_string() });
                if let Error::DensityTooLarge { lambda_max, .. } = e {
                    result["lambda_max"] = json!(lambda_max);
                }
                let status = if code == 3 { "assertion-failed" } else { "hypothesis-failed" };
                let report = json!({ "command": name, "config": config, "status": status, "result": result });
                let outcome = Outcome::new(Value::Null, bmo_core::io::Table::new(&[]));
                if let Err(w) = emit(&cli, &report, &outcome) {
                    eprintln!("bmo {name}: {w}");
                }
            }
            return ExitCode::from(code);
        }
    };
    let status = if outcome.failure.is_some() { "assertion-failed" } else { "ok" };
    let mut report = json!({ "command": name, "config": config, "status": status, "result": outcome.result });
    if let Some(f) = &outcome.failure {
        report["witness"] = f.witness.clone();
    }
    if let Err(e) = emit(&cli, &report, &outcome) {
        eprintln!("bmo {name}: {e}");
        return ExitCode::from(2);
    }
    match &outcome.failure {
        Some(f) => {
            eprintln!("bmo {name}: assertion failed: {}", f.message);
            eprintln!("witness: {}", f.witness);
            ExitCode::from(3)
        }
        None => ExitCode::SUCCESS,
    }
}
