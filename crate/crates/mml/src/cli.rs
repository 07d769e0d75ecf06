//! The `mml` command line.
//!
//! Exit codes: 0 success, 1 verification found violations, 2 unreadable or
//! unparsable input, 3 invalid chain or parameters, 4 mathematical
//! precondition not met, 5 too few trials to certify a constant.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use mml_core::bounds::{self, BoundParams, ComparatorForm, DEFAULT_C, DEFAULT_C2, DEFAULT_EPSILON};
use mml_core::chain::{ROW_SUM_TOL, STATIONARY_RESIDUAL_TOL};
use mml_core::hitting::{self, hitting_table};
use mml_core::report::{BoundReport, CHECK_TOL};
use mml_core::sim::{empirical_mgf, Moments, SimConfig, Simulator, Z95, Z99};
use mml_core::{ChainSpec, StateSet, StationaryDistribution};

use crate::chainfile::{self, ChainFileError};
use crate::config::{ConfigError, ExperimentConfig};
use crate::descriptor::Descriptor;
use crate::exec::{default_workers, Parallel, WORKERS_ENV};
use crate::output::{emit, Format, Table};
use crate::verify::{run_suite, Suite, VerificationSummary, VerifyOptions};

pub const EXIT_VIOLATIONS: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;
pub const EXIT_MATH: i32 = 4;
pub const EXIT_INSUFFICIENT: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "mml", version, about = "Hitting times, missing mass and bound verification for finite Markov chains")]
pub struct Cli {
    /// Chain-spec JSON file.
    #[arg(long = "in", global = true, value_name = "FILE")]
    pub input: Option<PathBuf>,
    /// Generate the chain instead of reading it, e.g. `lazy-cycle:m=5:hold=0.5`.
    #[arg(long = "gen", global = true, value_name = "DESCRIPTOR", conflicts_with = "input")]
    pub generator: Option<Descriptor>,
    /// Output file; standard output when absent.
    #[arg(long, global = true, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for simulations.
    #[arg(long, global = true, env = WORKERS_ENV)]
    pub workers: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate, inspect or generate chains.
    #[command(subcommand)]
    Chain(ChainCmd),
    /// Exact hitting-time quantities.
    #[command(subcommand)]
    Hit(HitCmd),
    /// Monte Carlo estimates.
    #[command(subcommand)]
    Simulate(SimCmd),
    /// Direct bound evaluators.
    #[command(subcommand)]
    Bounds(BoundsCmd),
    /// Run verification suites.
    Verify(VerifyArgs),
}

#[derive(Debug, Subcommand)]
pub enum ChainCmd {
    Validate,
    Stationary,
    Generate(GenerateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FamilyName {
    Iid,
    LazyCycle,
    BirthDeath,
    RandomDense,
    TwoState,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    pub family: FamilyName,
    #[arg(long, value_delimiter = ',')]
    pub mu: Vec<f64>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub hold: Option<f64>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum HitCmd {
    /// `h_B(x)` for every state.
    Table {
        #[arg(long = "B", value_delimiter = ',', required = true)]
        b: Vec<usize>,
    },
    /// `T+(A, B) = max_{x in A} h_B(x)`.
    Tplus {
        #[arg(long = "A", value_delimiter = ',', required = true)]
        a: Vec<usize>,
        #[arg(long = "B", value_delimiter = ',', required = true)]
        b: Vec<usize>,
    },
    /// `T-(A, B) = min_{x in A} h_B(x)`.
    Tminus {
        #[arg(long = "A", value_delimiter = ',', required = true)]
        a: Vec<usize>,
        #[arg(long = "B", value_delimiter = ',', required = true)]
        b: Vec<usize>,
    },
    /// `T(eps)`, exhaustively for up to 20 states.
    Tlarge {
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        eps: f64,
        /// Allow the candidate-family estimate beyond 20 states.
        #[arg(long)]
        heuristic: bool,
    },
    Lemma1 {
        #[arg(long = "A", value_delimiter = ',', required = true)]
        a: Vec<usize>,
        #[arg(long = "B", value_delimiter = ',', required = true)]
        b: Vec<usize>,
    },
    Lemma2 {
        #[arg(long = "A", value_delimiter = ',', required = true)]
        a: Vec<usize>,
    },
}

#[derive(Debug, Args)]
pub struct TrialArgs {
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
}

#[derive(Debug, Subcommand)]
pub enum SimCmd {
    /// Missing-mass mean after `n` steps.
    Mm {
        #[arg(long)]
        n: u64,
        #[command(flatten)]
        trials: TrialArgs,
        /// Also write every sample as `trial,value,unseen_set`.
        #[arg(long, value_name = "FILE")]
        dump: Option<PathBuf>,
    },
    /// Empirical `Pr[N_B > t]`.
    Hittail {
        #[arg(long = "B", value_delimiter = ',', required = true)]
        b: Vec<usize>,
        /// Thresholds, e.g. `1,2,5` or `1..20`.
        #[arg(long, value_parser = parse_grid)]
        t: Grid,
        #[command(flatten)]
        trials: TrialArgs,
    },
    /// Empirical `Pr[tau_J > n]`.
    Jointtail {
        #[arg(long = "J", value_delimiter = ',', required = true)]
        j: Vec<usize>,
        #[arg(long, value_parser = parse_grid)]
        n: Grid,
        #[command(flatten)]
        trials: TrialArgs,
    },
    /// Empirical `E exp(s MissingMass)`.
    Mgf {
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        s: Vec<f64>,
        #[arg(long)]
        n: u64,
        #[command(flatten)]
        trials: TrialArgs,
    },
}

#[derive(Debug, Args)]
pub struct TheoremArgs {
    #[arg(long, default_value_t = DEFAULT_C)]
    pub c: f64,
    /// `T`; defaults to the exact `T(eps)` of the chain.
    #[arg(long = "T")]
    pub t_half: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub eps_t: f64,
    /// Use exact IID survivals `(1 - pi(j))^n` instead of the theorem's `q_j`.
    #[arg(long)]
    pub iid: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormArg {
    Eq3,
    Cor1,
}

#[derive(Debug, Subcommand)]
pub enum BoundsCmd {
    /// Surrogate probabilities `q_j`.
    Q {
        #[arg(long)]
        n: u64,
        #[command(flatten)]
        theorem: TheoremArgs,
    },
    /// `prod_{j in J} q_j`.
    Joint {
        #[arg(long = "J", value_delimiter = ',', required = true)]
        j: Vec<usize>,
        #[arg(long)]
        n: u64,
        #[command(flatten)]
        theorem: TheoremArgs,
    },
    /// `(1 - mass)^n`.
    IidSurvival {
        #[arg(long)]
        mass: f64,
        #[arg(long)]
        n: u64,
    },
    /// `1 - pi(J) <= prod_{j in J} (1 - pi(j))`.
    Product {
        #[arg(long = "J", value_delimiter = ',', required = true)]
        j: Vec<usize>,
    },
    /// `exp(-floor(t / ceil(e E)))`.
    Hittail {
        #[arg(long)]
        expected: f64,
        #[arg(long)]
        t: u64,
    },
    /// `exp(-c t pi(A) / T)`.
    Explicit {
        #[arg(long)]
        pi_a: f64,
        #[arg(long = "T")]
        t_half: f64,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = DEFAULT_C)]
        c: f64,
    },
    /// Missing-mass threshold and failure probability.
    Mmtail {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = DEFAULT_C2)]
        c2: f64,
        #[command(flatten)]
        theorem: TheoremArgs,
    },
    /// Bernoulli-product MGF.
    Mgf {
        #[arg(long)]
        n: u64,
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        s: Vec<f64>,
        #[arg(long, value_enum, default_value_t = FormArg::Cor1)]
        form: FormArg,
        #[command(flatten)]
        theorem: TheoremArgs,
    },
    /// Binary relative entropy in nats.
    Kl {
        #[arg(long)]
        p: f64,
        #[arg(long)]
        q: f64,
    },
    Pinsker {
        #[arg(long)]
        p: f64,
        #[arg(long)]
        q: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SuiteArg {
    Lemma1,
    Lemma2,
    Prop1,
    Iid,
    Thm1,
    Cor1,
    Cor3,
    Ergodic,
    Pinsker,
    All,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(value_enum)]
    pub suite: SuiteArg,
    /// Experiment config (JSON); flags override its values.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub random_chains: Option<usize>,
    #[arg(long)]
    pub m_max: Option<usize>,
    #[arg(long, default_value_t = 500)]
    pub pairs_max: usize,
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub c2: Option<f64>,
    /// `eps` in `T(eps)`.
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub trials: Option<u64>,
    /// State counts of the IID suite.
    #[arg(long, value_delimiter = ',')]
    pub m: Vec<usize>,
    /// Run-length grid, e.g. `1..64` or `1,2,4,8`.
    #[arg(long, value_parser = parse_grid)]
    pub n: Option<Grid>,
}

pub type Grid = Vec<u64>;

/// Comma-separated integers and inclusive ranges `a..b`.
pub fn parse_grid(s: &str) -> Result<Grid, String> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let num = |x: &str| x.trim().parse::<u64>().map_err(|_| format!("not a non-negative integer: {x:?}"));
        match part.split_once("..") {
            Some((a, b)) => {
                let (a, b) = (num(a)?, num(b)?);
                if a > b {
                    return Err(format!("empty range {part:?}"));
                }
                out.extend(a..=b);
            }
            None => out.push(num(part)?),
        }
    }
    if out.is_empty() {
        return Err("empty grid".into());
    }
    Ok(out)
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }
}

impl From<mml_core::Error> for CliError {
    fn from(e: mml_core::Error) -> Self {
        use mml_core::Error::*;
        let code = match e {
            Empty | NonSquare { .. } | NonFinite { .. } | NegativeEntry { .. } | NonStochasticRow { .. } | BadStart(_)
            | BadParams(_) => EXIT_VALIDATION,
            InsufficientTrials { .. } => EXIT_INSUFFICIENT,
            _ => EXIT_MATH,
        };
        Self::new(code, e.to_string())
    }
}

impl From<ChainFileError> for CliError {
    fn from(e: ChainFileError) -> Self {
        let code = match e {
            ChainFileError::Invalid(_) => EXIT_VALIDATION,
            _ => EXIT_PARSE,
        };
        Self::new(code, e.to_string())
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        let code = match &e {
            ConfigError::Chain { source: ChainFileError::Invalid(_), .. } | ConfigError::Generate { .. } => EXIT_VALIDATION,
            _ => EXIT_PARSE,
        };
        Self::new(code, e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::new(EXIT_PARSE, format!("output: {e}"))
    }
}

/// Parses the process arguments, runs the command and returns the exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_PARSE } else { 0 };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

pub fn run(cli: Cli) -> Result<i32, CliError> {
    match &cli.command {
        Command::Chain(cmd) => chain_cmd(&cli, cmd),
        Command::Hit(cmd) => hit_cmd(&cli, cmd),
        Command::Simulate(cmd) => simulate_cmd(&cli, cmd),
        Command::Bounds(cmd) => bounds_cmd(&cli, cmd),
        Command::Verify(args) => verify_cmd(&cli, args),
    }
}

/// The chain named by `--in` or `--gen`, with its report id.
fn load_chain(cli: &Cli) -> Result<(String, ChainSpec), CliError> {
    if let Some(path) = &cli.input {
        return Ok((path.display().to_string(), chainfile::read_chain(path)?));
    }
    if let Some(d) = &cli.generator {
        return Ok((d.to_string(), d.build()?));
    }
    Err(CliError::new(EXIT_PARSE, "no chain given: use --in FILE or --gen DESCRIPTOR"))
}

fn set(members: &[usize], m: usize) -> Result<StateSet, CliError> {
    Ok(StateSet::new(members.iter().copied(), m)?)
}

fn finish(cli: &Cli, table: Table) -> Result<i32, CliError> {
    emit(cli.out.as_deref(), &table.render(cli.format))?;
    Ok(0)
}

fn with_constants(table: Table) -> Table {
    table.meta("row_sum_tol", format_args!("{ROW_SUM_TOL:e}")).meta("check_tol", format_args!("{CHECK_TOL:e}"))
}

fn chain_cmd(cli: &Cli, cmd: &ChainCmd) -> Result<i32, CliError> {
    match cmd {
        ChainCmd::Validate => {
            let (id, spec) = load_chain(cli)?;
            let mut t = with_constants(Table::new("chain validate", &["chain_id", "m", "irreducible", "start"]));
            let start = if spec.start == mml_core::Start::Stationary { "stationary" } else { "given" };
            t.push(vec![id.into(), spec.m().into(), spec.matrix.is_irreducible().into(), start.into()]);
            finish(cli, t)
        }
        ChainCmd::Stationary => {
            let (id, spec) = load_chain(cli)?;
            let pi = spec.matrix.stationary()?;
            let shown: Vec<String> = pi.as_slice().iter().map(|p| format!("{p:.6}")).collect();
            let mut t = Table::new("chain stationary", &["state", "label", "pi"])
                .meta("chain_id", &id)
                .meta("pi", format_args!("({})", shown.join(", ")))
                .meta("residual", format_args!("{:e}", pi.residual()))
                .meta("residual_tol", format_args!("{STATIONARY_RESIDUAL_TOL:e}"));
            for (x, &p) in pi.as_slice().iter().enumerate() {
                let label = spec.matrix.labels().map_or_else(String::new, |l| l[x].clone());
                t.push(vec![x.into(), label.into(), p.into()]);
            }
            finish(cli, t)
        }
        ChainCmd::Generate(args) => {
            let d = descriptor_from_args(args, cli.seed.unwrap_or(0))?;
            let spec = d.build()?;
            let text = chainfile::to_json(&spec);
            emit(cli.out.as_deref(), &text)?;
            Ok(0)
        }
    }
}

fn descriptor_from_args(a: &GenerateArgs, seed: u64) -> Result<Descriptor, CliError> {
    let need = |v: Option<f64>, name: &str| v.ok_or_else(|| CliError::new(EXIT_PARSE, format!("--{name} is required for this family")));
    let m = || a.m.ok_or_else(|| CliError::new(EXIT_PARSE, "--m is required for this family"));
    Ok(match a.family {
        FamilyName::Iid => {
            if a.mu.is_empty() {
                return Err(CliError::new(EXIT_PARSE, "--mu is required for the iid family"));
            }
            Descriptor::Iid { mu: a.mu.clone() }
        }
        FamilyName::LazyCycle => Descriptor::LazyCycle { m: m()?, hold: a.hold.unwrap_or(0.5) },
        FamilyName::BirthDeath => Descriptor::BirthDeath { m: m()?, p: need(a.p, "p")?, q: need(a.q, "q")? },
        FamilyName::RandomDense => Descriptor::RandomDense { m: m()?, alpha: a.alpha.unwrap_or(1.0), seed },
        FamilyName::TwoState => Descriptor::TwoState { p: need(a.p, "p")?, q: need(a.q, "q")? },
    })
}

fn hit_cmd(cli: &Cli, cmd: &HitCmd) -> Result<i32, CliError> {
    let (id, spec) = load_chain(cli)?;
    let p = &spec.matrix;
    let m = p.m();
    let table = match cmd {
        HitCmd::Table { b } => {
            let b = set(b, m)?;
            let h = hitting_table(p, &b)?;
            let mut t = Table::new("hit table", &["state", "h"]).meta("chain_id", &id).meta("B", &b).meta("residual", h.residual(p));
            for (x, &v) in h.times().iter().enumerate() {
                t.push(vec![x.into(), v.into()]);
            }
            t
        }
        HitCmd::Tplus { a, b } | HitCmd::Tminus { a, b } => {
            let (a, b) = (set(a, m)?, set(b, m)?);
            let (name, v) = match cmd {
                HitCmd::Tplus { .. } => ("t_plus", hitting::t_plus(p, &a, &b)?),
                _ => ("t_minus", hitting::t_minus(p, &a, &b)?),
            };
            let mut t = Table::new(&format!("hit {}", name.replace('_', "")), &["quantity", "A", "B", "value"]).meta("chain_id", &id);
            t.push(vec![name.into(), a.to_string().into(), b.to_string().into(), v.into()]);
            t
        }
        HitCmd::Tlarge { eps, heuristic } => {
            let pi = p.stationary()?;
            let (value, witness, method) = if *heuristic {
                let est = hitting::t_large_upper(p, &pi, *eps)?;
                (est.value, est.witness, if est.heuristic { "heuristic" } else { "exhaustive" })
            } else {
                let exact = hitting::t_large(p, &pi, *eps)?;
                (exact.value, exact.argmax_set, "exhaustive")
            };
            let mut t = Table::new("hit tlarge", &["epsilon", "value", "witness", "method"]).meta("chain_id", &id);
            t.push(vec![(*eps).into(), value.into(), witness.to_string().into(), method.into()]);
            t
        }
        HitCmd::Lemma1 { a, b } => {
            let (a, b) = (set(a, m)?, set(b, m)?);
            let pi = p.stationary()?;
            let check = hitting::check_lemma1(p, &pi, &a, &b)?;
            let rows = [check.ratio_form, check.product_form].map(|r| r.with_chain(&id));
            with_constants(Table::reports("hit lemma1", &rows))
        }
        HitCmd::Lemma2 { a } => {
            let a = set(a, m)?;
            let pi = p.stationary()?;
            let r = hitting::check_lemma2(p, &pi, &a)?.with_chain(&id);
            with_constants(Table::reports("hit lemma2", &[r]))
        }
    };
    finish(cli, table)
}

fn simulate_cmd(cli: &Cli, cmd: &SimCmd) -> Result<i32, CliError> {
    let (id, spec) = load_chain(cli)?;
    let pi = spec.matrix.stationary()?;
    let sim = Simulator::new(&spec, &pi)?;
    let seed = cli.seed.unwrap_or(0);
    let exec = Parallel::new(cli.workers.unwrap_or_else(default_workers));
    let base = |command: &str, columns: &[&str]| Table::new(command, columns).meta("chain_id", &id).meta("seed", seed);
    let table = match cmd {
        SimCmd::Mm { n, trials, dump } => {
            let cfg = SimConfig { n: *n, trials: trials.trials, master_seed: seed };
            let samples = sim.sample_missing_mass(&cfg, &exec);
            if samples.is_empty() {
                return Err(mml_core::Error::NoSamples.into());
            }
            let mut mo = Moments::default();
            samples.iter().for_each(|s| mo.add(s.value));
            if let Some(path) = dump {
                let mut d = Table::new("simulate mm dump", &["trial", "value", "unseen_set"]).meta("chain_id", &id).meta("seed", seed).meta("n", n);
                for (i, s) in samples.iter().enumerate() {
                    d.push(vec![i.into(), s.value.into(), s.unseen.to_string().into()]);
                }
                emit(Some(path), &d.to_csv())?;
            }
            let mut t = base("simulate mm", &["n", "trials", "mean", "std_err", "ci95"]);
            t.push(vec![(*n).into(), trials.trials.into(), mo.mean().into(), mo.std_err().into(), (Z95 * mo.std_err()).into()]);
            t
        }
        SimCmd::Jointtail { j, n, trials } => {
            let j = set(j, spec.m())?;
            let mut t = base("simulate jointtail", &["J", "n", "hits", "trials", "p_hat", "ci95"]);
            for (k, &n) in n.iter().enumerate() {
                // every grid point gets its own stream
                let cfg = SimConfig { n, trials: trials.trials, master_seed: mml_core::rng::derive_seed(seed, k as u64) };
                let tail = sim.empirical_joint_survival(&cfg, &j, &exec)?;
                t.push(vec![j.to_string().into(), n.into(), tail.hits.into(), tail.trials.into(), tail.p_hat().into(), tail.ci95_halfwidth().into()]);
            }
            t
        }
        SimCmd::Hittail { b, t: thresholds, trials } => {
            let b = set(b, spec.m())?;
            let tail = sim.empirical_hitting_tail(&b, thresholds, trials.trials, seed, &exec)?;
            let mut t = base("simulate hittail", &["B", "t", "hits", "trials", "p_hat", "ci95", "cap_hits"]);
            for et in &tail.tails {
                t.push(vec![
                    b.to_string().into(),
                    et.threshold.into(),
                    et.hits.into(),
                    et.trials.into(),
                    et.p_hat().into(),
                    et.ci95_halfwidth().into(),
                    tail.cap_hits.into(),
                ]);
            }
            t
        }
        SimCmd::Mgf { s, n, trials } => {
            let cfg = SimConfig { n: *n, trials: trials.trials, master_seed: seed };
            let samples = sim.sample_missing_mass(&cfg, &exec);
            let mut t = base("simulate mgf", &["s", "n", "trials", "mgf", "ci95"]);
            for &s in s {
                let mgf = empirical_mgf(&samples, s)?;
                let mut mo = Moments::default();
                samples.iter().for_each(|x| mo.add((s * x.value).exp()));
                t.push(vec![s.into(), (*n).into(), trials.trials.into(), mgf.into(), (Z95 * mo.std_err()).into()]);
            }
            t
        }
    };
    finish(cli, table)
}

/// Theorem parameters for a chain: `T` is given or the exact `T(eps)`.
fn theorem_params(spec: &ChainSpec, pi: &StationaryDistribution, n: u64, a: &TheoremArgs) -> Result<BoundParams, CliError> {
    if a.iid {
        return Ok(BoundParams::iid_exact(n, pi)?);
    }
    let t = match a.t_half {
        Some(t) => t,
        None => hitting::t_large(&spec.matrix, pi, a.eps_t)?.value,
    };
    Ok(BoundParams::new(a.c, t, n, pi)?)
}

fn bounds_cmd(cli: &Cli, cmd: &BoundsCmd) -> Result<i32, CliError> {
    let chain = || -> Result<(String, ChainSpec, StationaryDistribution), CliError> {
        let (id, spec) = load_chain(cli)?;
        let pi = spec.matrix.stationary()?;
        Ok((id, spec, pi))
    };
    let table = match cmd {
        BoundsCmd::Q { n, theorem } => {
            let (id, spec, pi) = chain()?;
            let params = theorem_params(&spec, &pi, *n, theorem)?;
            let mut t = Table::new("bounds q", &["state", "pi", "q"]).meta("chain_id", &id).meta("params", params.describe());
            for (x, q) in bounds::q_probabilities(&params).into_iter().enumerate() {
                t.push(vec![x.into(), pi.get(x).into(), q.into()]);
            }
            t
        }
        BoundsCmd::Joint { j, n, theorem } => {
            let (id, spec, pi) = chain()?;
            let j = set(j, spec.m())?;
            let params = theorem_params(&spec, &pi, *n, theorem)?;
            let mut t = Table::new("bounds joint", &["J", "mass", "bound"]).meta("chain_id", &id).meta("params", params.describe());
            t.push(vec![j.to_string().into(), pi.mass(&j).into(), bounds::joint_survival_bound(&params, &j)?.into()]);
            t
        }
        BoundsCmd::IidSurvival { mass, n } => {
            if !(0.0..=1.0).contains(mass) {
                return Err(mml_core::Error::Domain(format!("mass must lie in [0, 1], got {mass}")).into());
            }
            let mut t = Table::new("bounds iid-survival", &["mass", "n", "survival"]);
            t.push(vec![(*mass).into(), (*n).into(), bounds::iid_exact_survival(*mass, *n).into()]);
            t
        }
        BoundsCmd::Product { j } => {
            let (id, spec, pi) = chain()?;
            let j = set(j, spec.m())?;
            with_constants(Table::reports("bounds product", &[bounds::product_inequality_check(&pi, &j)?.with_chain(id)]))
        }
        BoundsCmd::Hittail { expected, t } => {
            let mut table = Table::new("bounds hittail", &["expected", "t", "bound"]);
            table.push(vec![(*expected).into(), (*t).into(), bounds::hitting_tail_bound(*expected, *t).into()]);
            table
        }
        BoundsCmd::Explicit { pi_a, t_half, t, c } => {
            let mut table = Table::new("bounds explicit", &["pi_a", "T", "t", "c", "bound"]);
            table.push(vec![(*pi_a).into(), (*t_half).into(), (*t).into(), (*c).into(), bounds::explicit_hitting_tail(*pi_a, *t_half, *t, *c).into()]);
            table
        }
        BoundsCmd::Mmtail { n, eps, c2, theorem } => {
            let (id, spec, pi) = chain()?;
            let params = theorem_params(&spec, &pi, *n, theorem)?;
            let tail = bounds::missing_mass_tail_bound(&params, *eps, *c2)?;
            let mut t = Table::new("bounds mmtail", &["n", "eps", "mean_term", "threshold", "failure_bound", "c2"])
                .meta("chain_id", &id)
                .meta("params", params.describe());
            t.push(vec![(*n).into(), (*eps).into(), tail.mean_term.into(), tail.threshold.into(), tail.failure_bound.into(), tail.c2.into()]);
            t
        }
        BoundsCmd::Mgf { n, s, form, theorem } => {
            let (id, spec, pi) = chain()?;
            let params = theorem_params(&spec, &pi, *n, theorem)?;
            let form = match form {
                FormArg::Eq3 => ComparatorForm::Eq3,
                FormArg::Cor1 => ComparatorForm::Cor1,
            };
            let q = bounds::q_probabilities(&params);
            let w = form.weights(pi.as_slice(), *n);
            let mut t = Table::new("bounds mgf", &["form", "s", "n", "bound"]).meta("chain_id", &id).meta("params", params.describe());
            for &s in s {
                t.push(vec![form.name().into(), s.into(), (*n).into(), bounds::bernoulli_product_mgf(&q, &w, s).into()]);
            }
            t
        }
        BoundsCmd::Kl { p, q } => {
            let mut t = Table::new("bounds kl", &["p", "q", "kl"]);
            t.push(vec![(*p).into(), (*q).into(), bounds::kl_divergence(*p, *q)?.into()]);
            t
        }
        BoundsCmd::Pinsker { p, q } => with_constants(Table::reports("bounds pinsker", &[bounds::pinsker_check(*p, *q)?])),
    };
    finish(cli, table)
}

fn suites(arg: SuiteArg) -> Vec<Suite> {
    match arg {
        SuiteArg::All => Suite::ALL.to_vec(),
        SuiteArg::Lemma1 => vec![Suite::Lemma1],
        SuiteArg::Lemma2 => vec![Suite::Lemma2],
        SuiteArg::Prop1 => vec![Suite::Prop1],
        SuiteArg::Iid => vec![Suite::Iid],
        SuiteArg::Thm1 => vec![Suite::Thm1],
        SuiteArg::Cor1 => vec![Suite::Cor1],
        SuiteArg::Cor3 => vec![Suite::Cor3],
        SuiteArg::Ergodic => vec![Suite::Ergodic],
        SuiteArg::Pinsker => vec![Suite::Pinsker],
    }
}

/// Merges the config file and flags; flags win.
fn verify_options(cli: &Cli, args: &VerifyArgs) -> Result<(VerifyOptions, Option<PathBuf>), CliError> {
    let cfg = match &args.config {
        Some(path) => ExperimentConfig::read(path)?,
        None => ExperimentConfig::default(),
    };
    let mut opts = VerifyOptions {
        seed: cli.seed.or(cfg.master_seed).unwrap_or(0),
        c: args.c.or(cfg.c).unwrap_or(DEFAULT_C),
        c2: args.c2.or(cfg.c2).unwrap_or(DEFAULT_C2),
        epsilon: args.eps.or(cfg.epsilon).unwrap_or(DEFAULT_EPSILON),
        trials: args.trials.or(cfg.trials),
        random_chains: args.random_chains,
        m_max: args.m_max,
        pairs_max: args.pairs_max,
        n_grid: args.n.clone().or((!cfg.n_grid.is_empty()).then(|| cfg.n_grid.clone())),
        sets: (!cfg.sets.is_empty()).then(|| cfg.sets.clone()),
        ..VerifyOptions::default()
    };
    if !args.m.is_empty() {
        opts.iid_m = args.m.clone();
    }
    if !cfg.chains.is_empty() {
        opts.chains = Some(cfg.resolve_chains()?);
    } else if cli.input.is_some() || cli.generator.is_some() {
        let (id, spec) = load_chain(cli)?;
        opts.chains = Some(vec![crate::config::NamedChain { id, spec }]);
    }
    if !(opts.c.is_finite() && opts.c > 0.0) {
        return Err(CliError::new(EXIT_VALIDATION, format!("--c must be positive, got {}", opts.c)));
    }
    if opts.trials == Some(0) {
        return Err(CliError::new(EXIT_VALIDATION, "--trials must be at least 1"));
    }
    let out = cli.out.clone().or(cfg.output);
    Ok((opts, out))
}

fn summary_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map_or_else(|| "report".into(), |s| s.to_string_lossy().into_owned());
    out.with_file_name(format!("{stem}.summary.json"))
}

fn verify_cmd(cli: &Cli, args: &VerifyArgs) -> Result<i32, CliError> {
    let (opts, out) = verify_options(cli, args)?;
    let exec = Parallel::new(cli.workers.unwrap_or_else(default_workers));
    let mut summary = VerificationSummary::new(opts.seed);
    let mut reports: Vec<BoundReport> = Vec::new();
    let mut notes = Vec::new();
    let list = suites(args.suite);
    for &suite in &list {
        let res = run_suite(suite, &opts, &exec)?;
        summary.add(&res);
        notes.extend(res.notes.iter().map(|n| format!("{}: {n}", suite.name())));
        reports.extend(res.reports);
    }
    let names: Vec<&str> = list.iter().map(|s| s.name()).collect();
    let mut table = with_constants(Table::reports("verify", &reports))
        .meta("suites", names.join("|"))
        .meta("seed", opts.seed)
        .meta("c", opts.c)
        .meta("c2", opts.c2)
        .meta("epsilon", opts.epsilon)
        .meta("z99", Z99)
        .meta("trials", opts.trials.map_or_else(|| "suite-default".to_string(), |t| t.to_string()));
    for n in notes {
        table = table.meta("note", n);
    }
    let text = match cli.format {
        Format::Csv => table.to_csv(),
        Format::Json => {
            let mut doc = table.to_json_value();
            doc["summary"] = serde_json::to_value(&summary).expect("summary serialises");
            let mut s = serde_json::to_string_pretty(&doc).expect("json values serialise");
            s.push('\n');
            s
        }
    };
    emit(out.as_deref(), &text)?;
    if let (Some(path), Format::Csv) = (&out, cli.format) {
        let mut s = serde_json::to_string_pretty(&summary).expect("summary serialises");
        s.push('\n');
        emit(Some(&summary_path(path)), &s)?;
    }
    eprint!("{}", summary.render_text());
    Ok(if summary.is_clean() { 0 } else { EXIT_VIOLATIONS })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("1..4").unwrap(), vec![1, 2, 3, 4]);
        assert_eq!(parse_grid("1,2, 8..9").unwrap(), vec![1, 2, 8, 9]);
        assert!(parse_grid("5..2").is_err());
        assert!(parse_grid("x").is_err());
        assert!(parse_grid("").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn error_codes() {
        assert_eq!(CliError::from(mml_core::Error::NotIrreducible).code, EXIT_MATH);
        assert_eq!(CliError::from(mml_core::Error::NonStochasticRow { row: 0, sum: 1.1 }).code, EXIT_VALIDATION);
        assert_eq!(CliError::from(mml_core::Error::InsufficientTrials { resolution: 0.01, point: 0.5 }).code, EXIT_INSUFFICIENT);
        assert_eq!(CliError::from(ChainFileError::Invalid("x".into())).code, EXIT_VALIDATION);
    }

    #[test]
    fn summary_path_sits_next_to_report() {
        assert_eq!(summary_path(Path::new("out/r.csv")), PathBuf::from("out/r.summary.json"));
    }
}
