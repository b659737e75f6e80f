//! Argument definitions, JSON config expansion and dispatch.

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use astoc_core::framework::{AlgoConfig, Method};
use astoc_core::oracles::{CostModel, SassOracleSpec, StormOracleSpec};
use astoc_core::problems::{make_problem, NoiseSpec, Problem, ProblemClass, ProblemKind};
use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};

use crate::commands;
use crate::error::{CliError, CliResult};
use crate::table::Table;

/// Default output directory when `--out` is absent.
pub const OUT_DIR_ENV: &str = "ASTOC_OUT_DIR";

#[derive(Parser, Debug)]
#[command(name = "astoc", version, about = "Adaptive stochastic optimization experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Step-size floor vs simulated walks, one file per gamma plus a summary.
    Walk(WalkArgs),
    /// Exact, bounded and simulated probabilities of reaching each level.
    Hitting(HittingArgs),
    /// One run of the adaptive method: trace and sample totals.
    Optimize(OptimizeArgs),
    /// Monte Carlo sample totals and bounds over a list of tolerances.
    Sweep(SweepArgs),
    /// Per-call batch sizes of an oracle cost model over a step-size grid.
    Costs(CostsArgs),
}

#[derive(Args, Debug, Clone)]
pub struct OutputArgs {
    /// Output directory [default: $ASTOC_OUT_DIR or .]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON object of flag values; explicit flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl OutputArgs {
    pub fn dir(&self) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."))
    }
}

#[derive(Args, Debug, Clone)]
pub struct WalkArgs {
    #[arg(long, default_value_t = 0.8)]
    pub p: f64,
    #[arg(long, value_delimiter = ',', default_value = "0.5,0.6,0.7,0.8,0.9")]
    pub gammas: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub alpha_bar: f64,
    #[arg(long, default_value_t = 1.0)]
    pub omega: f64,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 10_000)]
    pub reps: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone)]
pub struct HittingArgs {
    #[arg(long, default_value_t = 0.8)]
    pub p: f64,
    #[arg(long, default_value_t = 20)]
    pub l_max: usize,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 100_000)]
    pub reps: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemChoice {
    Quadratic,
    Logistic,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseChoice {
    Gaussian,
    Bernoulli,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodChoice {
    Sass,
    Storm,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleChoice {
    Constant,
    Storm,
    Sass,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassChoice {
    Nonconvex,
    StronglyConvex,
}

impl From<ClassChoice> for ProblemClass {
    fn from(c: ClassChoice) -> Self {
        match c {
            ClassChoice::Nonconvex => ProblemClass::Nonconvex,
            ClassChoice::StronglyConvex => ProblemClass::StronglyConvex,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum GammaPolicy {
    Fixed,
    /// Smallest gamma keeping the step-size floor above `beta * alpha_bar`
    /// over the horizon.
    #[value(alias = "corollary")]
    Threshold,
}

#[derive(Args, Debug, Clone)]
pub struct ProblemArgs {
    #[arg(long, value_enum, default_value_t = ProblemChoice::Quadratic)]
    pub problem: ProblemChoice,
    #[arg(long, default_value_t = 10)]
    pub dim: usize,
    #[arg(long, default_value_t = 10.0)]
    pub conditioning: f64,
    #[arg(long, default_value_t = 0)]
    pub problem_seed: u64,
    #[arg(long, value_enum, default_value_t = NoiseChoice::Gaussian)]
    pub noise: NoiseChoice,
    #[arg(long, default_value_t = 0.0)]
    pub sigma_f: f64,
    #[arg(long, default_value_t = 0.0)]
    pub m_c: f64,
    #[arg(long, default_value_t = 0.0)]
    pub m_v: f64,
    /// Uniform gradient noise level. Alone it sets `m_c = sigma_g^2`.
    #[arg(long)]
    pub sigma_g: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub delta_f: f64,
    #[arg(long, default_value_t = 0.0)]
    pub delta_g: f64,
    #[arg(long, default_value_t = 1e3)]
    pub magnitude: f64,
}

impl ProblemArgs {
    pub fn noise_spec(&self) -> NoiseSpec {
        match self.noise {
            NoiseChoice::Bernoulli => NoiseSpec::bernoulli(self.delta_f, self.delta_g, self.magnitude),
            NoiseChoice::Gaussian => match self.sigma_g {
                Some(sg) if self.m_c == 0.0 && self.m_v == 0.0 => NoiseSpec::uniform(self.sigma_f, sg),
                Some(sg) => NoiseSpec {
                    sigma_g: sg,
                    ..NoiseSpec::gaussian(self.sigma_f, self.m_c, self.m_v)
                },
                None => NoiseSpec::gaussian(self.sigma_f, self.m_c, self.m_v),
            },
        }
    }

    pub fn build(&self) -> CliResult<Problem> {
        let kind = match self.problem {
            ProblemChoice::Quadratic => ProblemKind::Quadratic,
            ProblemChoice::Logistic => ProblemKind::LogisticSynthetic,
        };
        Ok(make_problem(kind, self.dim, self.conditioning, self.noise_spec(), self.problem_seed)?)
    }
}

#[derive(Args, Debug, Clone)]
pub struct OracleArgs {
    /// Cost model [default: the one matching the method]
    #[arg(long, value_enum)]
    pub oracle: Option<OracleChoice>,
    #[arg(long, default_value_t = 1)]
    pub batch0: u64,
    #[arg(long, default_value_t = 1)]
    pub batch1: u64,
    #[arg(long, default_value_t = 1.0)]
    pub kappa_ef: f64,
    #[arg(long, default_value_t = 0.1)]
    pub delta0: f64,
    #[arg(long, default_value_t = 1.0)]
    pub kappa_eg: f64,
    #[arg(long, default_value_t = 0.1)]
    pub delta1: f64,
    #[arg(long, default_value_t = 0.0)]
    pub eps_f: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.0)]
    pub eps_g: f64,
    #[arg(long, default_value_t = 1.0)]
    pub kappa: f64,
    #[arg(long, default_value_t = 1.0)]
    pub tau: f64,
    /// Constant in front of the step-search batch sizes.
    #[arg(long, default_value_t = 1.0)]
    pub multiplier: f64,
}

impl OracleArgs {
    pub fn storm_spec(&self, noise: &NoiseSpec) -> CliResult<StormOracleSpec> {
        if noise.m_v > 0.0 {
            return Err(CliError::Validation(
                "trust-region cost model needs a uniform gradient noise bound (m_v = 0)".into(),
            ));
        }
        let spec = StormOracleSpec {
            kappa_ef: self.kappa_ef,
            delta0: self.delta0,
            kappa_eg: self.kappa_eg,
            delta1: self.delta1,
            sigma_f: noise.sigma_f,
            sigma_g: noise.sigma_g,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn sass_spec(&self) -> CliResult<SassOracleSpec> {
        let spec = SassOracleSpec {
            eps_f: self.eps_f,
            lambda: self.lambda,
            eps_g: self.eps_g,
            kappa: self.kappa,
            tau: self.tau,
            delta1: self.delta1,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn choice(&self, method: MethodChoice) -> OracleChoice {
        self.oracle.unwrap_or(match method {
            MethodChoice::Sass => OracleChoice::Sass,
            MethodChoice::Storm => OracleChoice::Storm,
        })
    }

    pub fn cost_model(
        &self,
        choice: OracleChoice,
        noise: &NoiseSpec,
        epsilon: f64,
        class: ProblemClass,
    ) -> CliResult<CostModel> {
        Ok(match choice {
            OracleChoice::Constant => CostModel::Constant {
                zeroth: self.batch0,
                first: self.batch1,
            },
            OracleChoice::Storm => CostModel::Storm(self.storm_spec(noise)?),
            OracleChoice::Sass => CostModel::Sass {
                spec: self.sass_spec()?,
                noise: *noise,
                epsilon,
                class,
                multiplier: self.multiplier,
            },
        })
    }
}

#[derive(Args, Debug, Clone)]
pub struct AlgoArgs {
    #[arg(long, value_enum, default_value_t = MethodChoice::Sass)]
    pub method: MethodChoice,
    #[arg(long, default_value_t = 0.1)]
    pub theta: f64,
    #[arg(long, default_value_t = 0.5)]
    pub gamma: f64,
    /// May be `inf` [default: 1, or the trust-region scale in sweeps]
    #[arg(long)]
    pub alpha_max: Option<f64>,
    /// [default: 1, or the trust-region scale in sweeps]
    #[arg(long)]
    pub alpha0: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub r: f64,
    #[arg(long, default_value_t = 1.0)]
    pub theta2: f64,
    #[arg(long, default_value_t = 100_000)]
    pub max_iterations: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = ClassChoice::Nonconvex)]
    pub class: ClassChoice,
    /// Norm of the starting point, placed along the all-ones direction.
    #[arg(long, default_value_t = 1.0)]
    pub start: f64,
}

impl AlgoArgs {
    pub fn method(&self) -> Method {
        match self.method {
            MethodChoice::Sass => Method::sass(),
            MethodChoice::Storm => Method::Storm,
        }
    }

    pub fn config(&self, default_alpha: f64) -> AlgoConfig {
        AlgoConfig {
            theta: self.theta,
            gamma: self.gamma,
            alpha_max: self.alpha_max.unwrap_or(default_alpha),
            alpha0: self.alpha0.unwrap_or(default_alpha),
            r: self.r,
            theta2: self.theta2,
            max_iterations: self.max_iterations,
            seed: self.seed,
        }
    }

    pub fn start_point(&self, dim: usize) -> Vec<f64> {
        vec![self.start / (dim as f64).sqrt(); dim]
    }
}

#[derive(Args, Debug, Clone)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub oracle: OracleArgs,
    #[command(flatten)]
    pub algo: AlgoArgs,
    #[arg(long, default_value_t = 1e-3)]
    pub epsilon: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone)]
pub struct SweepArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub oracle: OracleArgs,
    #[command(flatten)]
    pub algo: AlgoArgs,
    #[arg(long, value_delimiter = ',', default_value = "0.2,0.1,0.05")]
    pub epsilons: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    pub reps: u64,
    #[arg(long, value_enum, default_value_t = GammaPolicy::Fixed)]
    pub gamma_policy: GammaPolicy,
    /// Target floor fraction for the threshold policy.
    #[arg(long, default_value_t = 0.25)]
    pub beta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub omega: f64,
    /// Trust-region scale: alpha_bar = epsilon / zeta.
    #[arg(long, default_value_t = 10.0)]
    pub zeta: f64,
    /// Success probability below alpha_bar [default: 1 - delta0 - delta1 for
    /// trust region, 0.8 for step search]
    #[arg(long)]
    pub walk_p: Option<f64>,
    /// [default: epsilon / zeta for trust region, the largest lattice step
    /// below (1 - theta) / L for step search]
    #[arg(long)]
    pub alpha_bar: Option<f64>,
    /// Iteration budget used as the bound horizon; required by the threshold
    /// policy.
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Without a horizon, the bound horizon is this quantile of the observed
    /// stopping times.
    #[arg(long, default_value_t = 0.95)]
    pub horizon_quantile: f64,
    /// Also write `sweep_report.csv`.
    #[arg(long)]
    pub report: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone)]
pub struct CostsArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub oracle: OracleArgs,
    #[arg(long, value_enum, default_value_t = ClassChoice::Nonconvex)]
    pub class: ClassChoice,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub alpha_lo: f64,
    #[arg(long, default_value_t = 1.0)]
    pub alpha_hi: f64,
    #[arg(long, default_value_t = 31)]
    pub points: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

fn json_token(key: &str, v: &serde_json::Value) -> CliResult<Vec<OsString>> {
    use serde_json::Value;
    let flag = OsString::from(format!("--{}", key.replace('_', "-")));
    let scalar = |v: &Value| -> CliResult<String> {
        match v {
            Value::Number(n) => Ok(n.to_string()),
            Value::String(s) => Ok(s.clone()),
            _ => Err(CliError::Validation(format!("config key `{key}`: unsupported value {v}"))),
        }
    };
    Ok(match v {
        Value::Null | Value::Bool(false) => vec![],
        Value::Bool(true) => vec![flag],
        Value::Array(items) => {
            let parts = items.iter().map(scalar).collect::<CliResult<Vec<_>>>()?;
            vec![flag, parts.join(",").into()]
        }
        other => vec![flag, scalar(other)?.into()],
    })
}

/// Replaces `--config PATH` by the flags it holds, placed right after the
/// subcommand so that explicit flags override them.
pub fn expand_config(args: Vec<OsString>) -> CliResult<Vec<OsString>> {
    let pos = args.iter().position(|a| a == "--config" || a.to_string_lossy().starts_with("--config="));
    let Some(i) = pos.filter(|&i| i >= 2) else {
        return Ok(args);
    };
    let (path, consumed) = match args[i].to_string_lossy().strip_prefix("--config=") {
        Some(p) => (PathBuf::from(p), 1),
        None => match args.get(i + 1) {
            Some(p) => (PathBuf::from(p), 2),
            None => return Err(CliError::Validation("--config needs a path".into())),
        },
    };
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    let obj = value
        .as_object()
        .ok_or_else(|| CliError::Validation(format!("{}: expected a JSON object", path.display())))?;
    let mut out: Vec<OsString> = args[..2].to_vec();
    for (k, v) in obj {
        out.extend(json_token(k, v)?);
    }
    out.extend(args[2..i].iter().cloned());
    out.extend(args[i + consumed..].iter().cloned());
    Ok(out)
}

fn command() -> clap::Command {
    Cli::command().mut_subcommands(|c| c.args_override_self(true))
}

/// Files produced by a command, relative to the output directory.
pub type Outputs = Vec<(String, Table)>;

fn dispatch(cli: &Cli) -> CliResult<(PathBuf, Outputs)> {
    Ok(match &cli.command {
        Command::Walk(a) => (a.output.dir(), commands::walk(a)?),
        Command::Hitting(a) => (a.output.dir(), commands::hitting(a)?),
        Command::Optimize(a) => (a.output.dir(), commands::optimize(a)?),
        Command::Sweep(a) => (a.output.dir(), commands::sweep(a)?),
        Command::Costs(a) => (a.output.dir(), commands::costs(a)?),
    })
}

/// Runs the program on `args` (including the program name) and returns the
/// process exit code.
pub fn run(args: Vec<OsString>) -> i32 {
    let args = match expand_config(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let matches = match command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return 1;
        }
    };
    let result = dispatch(&cli).and_then(|(dir, outputs)| {
        fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        for (name, table) in &outputs {
            table.write(&dir.join(name))?;
        }
        Ok(outputs.len())
    });
    match result {
        Ok(_) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
