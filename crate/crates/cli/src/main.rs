//! `foelner-lab`: batch runner for Følner defect experiments.

mod commands;
mod config;
mod output;
mod script;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser};

use config::{
    read_operators, read_projection, Dims, ExtenderChoice, Format, NormChoice, ObjectiveChoice, OperatorsField,
    ProjectionField, RankList, RunConfig, SchemeChoice, SuiteChoice,
};

/// Error carrying the process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub const VALIDATION: u8 = 2;
    pub const VIOLATION: u8 = 3;

    pub fn validation(message: impl Into<String>) -> Self {
        Failure { code: Self::VALIDATION, message: message.into() }
    }

    pub fn violation(message: impl Into<String>) -> Self {
        Failure { code: Self::VIOLATION, message: message.into() }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Failure { code: 1, message: message.into() }
    }
}

impl From<foelner_core::Error> for Failure {
    fn from(e: foelner_core::Error) -> Self {
        match e {
            foelner_core::Error::CertificateViolation { .. } => Failure::violation(e.to_string()),
            other => Failure::validation(other.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "foelner-lab", version, about = "Følner defects, sequences, probes and inequality checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Subcommand, Debug)]
enum Command {
    /// Defect of one projection against each operator.
    Defect(DefectArgs),
    /// Følner sequence by a chosen scheme.
    Sequence(SequenceArgs),
    /// Best defect found per rank inside a finite ambient window.
    Probe(ProbeArgs),
    /// Heuristic placement in the finite-block / Følner classification.
    Classify(ClassifyArgs),
    /// Randomized checks of the quantitative inequalities.
    Verify(VerifyArgs),
}

#[derive(Args, Debug)]
struct Common {
    /// JSON run configuration with "schema_version": 1; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file (stdout when absent).
    #[arg(short = 'o', long)]
    output: Option<PathBuf>,
    /// Output format; defaults to json for `.json` outputs and csv otherwise.
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct OperatorArg {
    /// JSON file with one operator document or a list of them.
    #[arg(long = "operator", visible_alias = "operators", value_name = "FILE")]
    operator: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DefectArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    op: OperatorArg,
    /// JSON projection document.
    #[arg(long, value_name = "FILE")]
    projection: Option<PathBuf>,
    /// Use the canonical prefix of this rank instead of a projection file.
    #[arg(long)]
    rank: Option<usize>,
    #[arg(long, value_enum)]
    norm: Option<NormChoice>,
}

#[derive(Args, Debug)]
struct SequenceArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    op: OperatorArg,
    #[arg(long, value_enum)]
    scheme: Option<SchemeChoice>,
    /// Ranks, e.g. `4,16,64` or `1..32`.
    #[arg(long)]
    ranks: Option<RankList>,
    /// Number of greedy steps.
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long, value_enum)]
    extender: Option<ExtenderChoice>,
    /// Shell command for `--extender script`.
    #[arg(long)]
    extender_cmd: Option<String>,
}

#[derive(Args, Debug)]
struct ProbeArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    op: OperatorArg,
    #[arg(long)]
    ranks: Option<RankList>,
    /// Number of canonical basis vectors in the search window.
    #[arg(long)]
    ambient: Option<usize>,
    /// Word depth L; the window holds words of length at most L − 1.
    #[arg(long)]
    ambient_depth: Option<u32>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long, value_enum)]
    objective: Option<ObjectiveChoice>,
}

#[derive(Args, Debug)]
struct ClassifyArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    op: OperatorArg,
    #[arg(long)]
    max_rank: Option<usize>,
    #[arg(long)]
    ambient: Option<usize>,
    #[arg(long)]
    ambient_depth: Option<u32>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    op: OperatorArg,
    #[arg(long, value_enum)]
    suite: Option<SuiteChoice>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    /// Number of projections for the sum suite.
    #[arg(long)]
    s: Option<usize>,
    /// Factor dimensions for the tensor suite, `AxB`.
    #[arg(long)]
    dims: Option<Dims>,
    /// Ranks for the trace/HS suite.
    #[arg(long)]
    ranks: Option<RankList>,
}

fn flags_config(common: &Common, op: &OperatorArg) -> Result<RunConfig, Failure> {
    Ok(RunConfig {
        operators: op.operator.as_deref().map(read_operators).transpose()?.map(OperatorsField::Many),
        seed: common.seed,
        format: common.format,
        output: common.output.clone(),
        ..Default::default()
    })
}

fn resolve(cli: Cli) -> Result<RunConfig, Failure> {
    let (sub, common, mut flags) = match &cli.command {
        Command::Defect(a) => {
            let mut f = flags_config(&a.common, &a.op)?;
            f.projection = a.projection.as_deref().map(read_projection).transpose()?.map(ProjectionField::Inline);
            f.rank = a.rank;
            f.norm = a.norm;
            (config::Subcommand::Defect, &a.common, f)
        }
        Command::Sequence(a) => {
            let mut f = flags_config(&a.common, &a.op)?;
            f.scheme = a.scheme;
            f.ranks = a.ranks.clone();
            f.steps = a.steps;
            f.extender = a.extender;
            f.extender_cmd = a.extender_cmd.clone();
            (config::Subcommand::Sequence, &a.common, f)
        }
        Command::Probe(a) => {
            let mut f = flags_config(&a.common, &a.op)?;
            f.ranks = a.ranks.clone();
            f.ambient = a.ambient;
            f.ambient_depth = a.ambient_depth;
            f.restarts = a.restarts;
            f.iters = a.iters;
            f.objective = a.objective;
            (config::Subcommand::Probe, &a.common, f)
        }
        Command::Classify(a) => {
            let mut f = flags_config(&a.common, &a.op)?;
            f.max_rank = a.max_rank;
            f.ambient = a.ambient;
            f.ambient_depth = a.ambient_depth;
            f.restarts = a.restarts;
            f.iters = a.iters;
            f.tol = a.tol;
            (config::Subcommand::Classify, &a.common, f)
        }
        Command::Verify(a) => {
            let mut f = flags_config(&a.common, &a.op)?;
            f.suite = a.suite;
            f.trials = a.trials;
            f.dim = a.dim;
            f.s = a.s;
            f.dims = a.dims;
            f.ranks = a.ranks.clone();
            (config::Subcommand::Verify, &a.common, f)
        }
    };
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cfg.subcommand {
        if s != sub {
            return Err(Failure::validation(format!("config is for `{s}` but the command is `{sub}`")));
        }
    }
    flags.subcommand = Some(sub);
    cfg.overlay(flags);
    cfg.schema_version = Some(config::SCHEMA_VERSION);
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = resolve(cli).and_then(commands::run);
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
