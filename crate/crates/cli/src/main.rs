//! `phlab`: batch driver for the phlab library.

mod commands;
mod config;
mod model;

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use phlab::{Error, Result};
use serde_json::{json, Value};

use crate::config::Config;

#[derive(Parser, Debug)]
#[command(
    name = "phlab",
    version,
    about = "Numerical laboratory for partially hyperbolic surface endomorphisms"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Configuration file with `section.key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a single key, e.g. `--set orbit.n=1000`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Master seed; overrides the `seed` key.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sampled cone and growth conditions.
    Check(Common),
    /// Orbit exponents and the Birkhoff measure.
    Orbit(Common),
    /// Curve pushforward, distortion and contact ladder.
    Curve(Common),
    /// Seminorm ladder of a measure.
    Measure(Common),
    /// Pesin block membership, multiplicity and transversality ratio.
    Pesin(Common),
    /// Piecewise affine skew product.
    Skewprod {
        #[command(subcommand)]
        action: SkewAction,
    },
    /// Curve jets and sublevel bounds.
    Jets {
        #[command(subcommand)]
        action: JetsAction,
    },
    /// Random fields and perturbation experiments.
    Perturb {
        #[command(subcommand)]
        action: PerturbAction,
    },
}

#[derive(Subcommand, Debug)]
enum SkewAction {
    Validate(Common),
    Iterate(Common),
    VerifyLy(Common),
    Density(Common),
    ExactVsGrid(Common),
}

#[derive(Subcommand, Debug)]
enum JetsAction {
    Gap(Common),
    Round(Common),
    Sublevel(Common),
}

#[derive(Subcommand, Debug)]
enum PerturbAction {
    Sample(Common),
    Experiment(Common),
}

/// State shared by one invocation.
pub struct Run {
    pub cfg: Config,
    pub seed: u64,
    files: Vec<(String, String)>,
}

impl Run {
    pub fn csv(&mut self, name: &str, content: String) {
        self.files.push((name.to_string(), content));
    }
}

/// Outcome of a command: results plus an optional verdict.
pub struct Outcome {
    pub results: Value,
    pub pass: Option<bool>,
}

fn load(common: &Common) -> Result<Run> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            Config::parse(&text)?
        }
        None => Config::default(),
    };
    for s in &common.set {
        cfg.set(s)?;
    }
    if let Some(seed) = common.seed {
        cfg.set(&format!("seed={seed}"))?;
    }
    let seed = cfg.get("seed", 0u64)?;
    Ok(Run {
        cfg,
        seed,
        files: Vec::new(),
    })
}

fn write_atomic(dir: &Path, name: &str, content: &str) -> Result<()> {
    let tmp = dir.join(format!(".{name}.tmp"));
    let dest = dir.join(name);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(content.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, &dest)?;
    Ok(())
}

fn execute(
    name: &str,
    common: &Common,
    body: fn(&mut Run) -> Result<Outcome>,
) -> Result<Option<bool>> {
    if let Ok(v) = std::env::var("PHLAB_THREADS") {
        v.parse::<usize>().map_err(|_| {
            Error::Config(format!(
                "PHLAB_THREADS must be a positive integer, got {v:?}"
            ))
        })?;
    }
    let mut run = load(common)?;
    let outcome = body(&mut run)?;
    let unused = run.cfg.unused();
    if !unused.is_empty() {
        return Err(Error::Config(format!(
            "unknown keys for {name}: {}",
            unused.join(", ")
        )));
    }
    let summary = json!({
        "command": name,
        "config": run.cfg.resolved(),
        "seed": run.seed,
        "pass": outcome.pass,
        "results": outcome.results,
    });
    let text = serde_json::to_string_pretty(&summary).map_err(|e| Error::Io(e.to_string()))? + "\n";
    fs::create_dir_all(&common.out)?;
    for (file, content) in &run.files {
        write_atomic(&common.out, file, content)?;
    }
    write_atomic(
        &common.out,
        &format!("{}.json", name.replace(' ', "-")),
        &text,
    )?;
    print!("{text}");
    Ok(outcome.pass)
}

fn error_json(kind: &str, message: &str) -> String {
    json!({ "error": kind, "message": message }).to_string()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            eprintln!("{}", error_json("usage", &e.to_string()));
            return ExitCode::from(2);
        }
    };
    use commands as c;
    let result = match &cli.command {
        Command::Check(a) => execute("check", a, c::check),
        Command::Orbit(a) => execute("orbit", a, c::orbit),
        Command::Curve(a) => execute("curve", a, c::curve),
        Command::Measure(a) => execute("measure", a, c::measure),
        Command::Pesin(a) => execute("pesin", a, c::pesin),
        Command::Skewprod { action } => match action {
            SkewAction::Validate(a) => execute("skewprod validate", a, c::skew_validate),
            SkewAction::Iterate(a) => execute("skewprod iterate", a, c::skew_iterate),
            SkewAction::VerifyLy(a) => execute("skewprod verify-ly", a, c::skew_verify_ly),
            SkewAction::Density(a) => execute("skewprod density", a, c::skew_density),
            SkewAction::ExactVsGrid(a) => {
                execute("skewprod exact-vs-grid", a, c::skew_exact_vs_grid)
            }
        },
        Command::Jets { action } => match action {
            JetsAction::Gap(a) => execute("jets gap", a, c::jets_gap),
            JetsAction::Round(a) => execute("jets round", a, c::jets_round),
            JetsAction::Sublevel(a) => execute("jets sublevel", a, c::jets_sublevel),
        },
        Command::Perturb { action } => match action {
            PerturbAction::Sample(a) => execute("perturb sample", a, c::perturb_sample),
            PerturbAction::Experiment(a) => execute("perturb experiment", a, c::perturb_experiment),
        },
    };
    match result {
        Ok(Some(false)) => ExitCode::from(1),
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_json(e.kind(), &e.to_string()));
            if e.is_numerical() {
                ExitCode::from(3)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
