//! Command-line front end.
//!
//! Exit codes: 0 when every gate passes, 1 when a gate fails, 2 for usage
//! errors, unknown names and invalid inputs.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::context::context_from;
use crate::ensemble::SamplingPlan;
use crate::error::{Error, Result};
use crate::experiments::{run_chsh, run_epr_bohm, ChshAngles};
use crate::gns::gns_construct;
use crate::models::Model;
use crate::physical_state::TrialCounter;
use crate::postulates::PostulateSuite;
use crate::statistics::verify_quantum_average_with;

const DEFAULT_EPR_SAMPLES: usize = 1000;
const DEFAULT_CHSH_SAMPLES: usize = 100_000;
const DEFAULT_AVERAGE_SAMPLES: usize = 10_000;

/// Angle selection: `"canonical"` or four radians `[a, a', b, b']`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AngleSpec {
    Named(String),
    Values(Vec<f64>),
}

impl AngleSpec {
    fn parse_flag(s: &str) -> Self {
        let values: Option<Vec<f64>> = s.split(',').map(|p| parse_angle(p.trim())).collect();
        match values {
            Some(v) if s.contains(',') => AngleSpec::Values(v),
            _ => AngleSpec::Named(s.to_string()),
        }
    }

    fn resolve(&self) -> Result<ChshAngles> {
        match self {
            AngleSpec::Named(name) if name == "canonical" => Ok(ChshAngles::canonical()),
            AngleSpec::Named(name) => Err(Error::UnknownName {
                kind: "angle set",
                name: name.clone(),
            }),
            AngleSpec::Values(v) if v.len() == 4 && v.iter().all(|x| x.is_finite()) => Ok(ChshAngles {
                a: v[0],
                a_prime: v[1],
                b: v[2],
                b_prime: v[3],
            }),
            AngleSpec::Values(v) => Err(Error::Model(format!(
                "expected four finite angles, got {v:?}"
            ))),
        }
    }
}

/// Accepts plain radians and multiples of `pi` such as `pi/4` or `3pi/4`.
fn parse_angle(s: &str) -> Option<f64> {
    if let Ok(v) = s.parse::<f64>() {
        return Some(v);
    }
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n, d.parse::<f64>().ok()?),
        None => (s, 1.0),
    };
    let coeff = match num.strip_suffix("pi")? {
        "" => 1.0,
        "-" => -1.0,
        c => c.parse::<f64>().ok()?,
    };
    Some(coeff * PI / den)
}

/// Optional JSON configuration; explicit flags take precedence.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: Option<String>,
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub angles: Option<AngleSpec>,
    pub observable: Option<String>,
    pub state: Option<String>,
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[derive(Parser, Debug)]
#[command(name = "opalab", version, about = "Finite-dimensional operator algebra experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// JSON experiment configuration
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of independent sampling partitions
    #[arg(long, default_value_t = 1)]
    partitions: usize,
    /// Write the JSON report here as well as to stdout
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct ModelArgs {
    #[arg(long)]
    model: Option<String>,
    /// JSON model file, used instead of a built-in model
    #[arg(long, conflicts_with = "model")]
    model_file: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Singlet decay: per-trial anticorrelation along z and x
    Epr {
        #[command(flatten)]
        common: Common,
    },
    /// CHSH combination of four singlet correlators
    Chsh {
        #[command(flatten)]
        common: Common,
        /// `canonical` or `a,a',b,b'` in radians (`pi/4` style accepted)
        #[arg(long)]
        angles: Option<String>,
    },
    /// Sample mean of an observable against its quantum average
    Average {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        state: Option<String>,
        #[arg(long)]
        observable: Option<String>,
        /// Running-mean trail as CSV
        #[arg(long)]
        trail_csv: Option<PathBuf>,
    },
    /// GNS representation of a named state
    Gns {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        state: Option<String>,
    },
    /// Canonical basis and labels of the context generated by observables
    InspectContext {
        #[command(flatten)]
        model: ModelArgs,
        /// Comma-separated observable names
        #[arg(long, value_delimiter = ',', required = true)]
        observables: Vec<String>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Randomized invariant suite
    Postulates {
        /// Algebra dimension; repeat for several
        #[arg(long)]
        dim: Vec<usize>,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

struct Resolved {
    config: ExperimentConfig,
    partitions: usize,
}

impl Resolved {
    fn new(common: &Common) -> Result<Self> {
        let mut config = match &common.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if common.n.is_some() {
            config.n = common.n;
        }
        if common.seed.is_some() {
            config.seed = common.seed;
        }
        if common.output.is_some() {
            config.output = common.output.clone();
        }
        Ok(Self {
            config,
            partitions: common.partitions,
        })
    }

    fn plan(&self) -> SamplingPlan {
        SamplingPlan::new(self.config.seed.unwrap_or(0)).with_partitions(self.partitions)
    }

    fn n(&self, default: usize) -> Result<usize> {
        match self.config.n.unwrap_or(default) {
            0 => Err(Error::TooFewSamples { got: 0, min: 1 }),
            n => Ok(n),
        }
    }

    fn model(&self, args: &ModelArgs, default: &str) -> Result<Model> {
        if let Some(path) = &args.model_file {
            return Model::load(path);
        }
        let name = args
            .model
            .clone()
            .or_else(|| self.config.model.clone())
            .unwrap_or_else(|| default.to_string());
        Model::builtin(&name)
    }

    fn pick(&self, flag: &Option<String>, from_config: &Option<String>, what: &'static str) -> Result<String> {
        flag.clone().or_else(|| from_config.clone()).ok_or_else(|| {
            Error::Model(format!("missing --{what} (or `{what}` in the config file)"))
        })
    }
}

fn emit<T: Serialize>(report: &T, output: Option<&Path>) -> Result<()> {
    let json = serde_json::to_string_pretty(report)?;
    println!("{json}");
    if let Some(path) = output {
        let mut file = BufWriter::new(File::create(path)?);
        writeln!(file, "{json}")?;
        file.flush()?;
    }
    Ok(())
}

#[derive(Serialize)]
struct GnsOutput<'a> {
    model: &'a str,
    state: &'a str,
    #[serde(flatten)]
    report: crate::gns::GnsReport,
    passed: bool,
}

#[derive(Serialize)]
struct AverageOutput<'a> {
    model: &'a str,
    state: &'a str,
    observable: &'a str,
    seed: u64,
    partitions: usize,
    #[serde(flatten)]
    report: crate::statistics::ConvergenceReport,
}

fn run(command: Command) -> Result<bool> {
    match command {
        Command::Epr { common } => {
            let r = Resolved::new(&common)?;
            let report = run_epr_bohm(r.n(DEFAULT_EPR_SAMPLES)?, r.plan())?;
            emit(&report, r.config.output.as_deref())?;
            Ok(report.passed)
        }
        Command::Chsh { common, angles } => {
            let r = Resolved::new(&common)?;
            let spec = angles
                .map(|a| AngleSpec::parse_flag(&a))
                .or_else(|| r.config.angles.clone())
                .unwrap_or_else(|| AngleSpec::Named("canonical".into()));
            let result = run_chsh(spec.resolve()?, r.n(DEFAULT_CHSH_SAMPLES)?, r.plan())?;
            emit(&result, r.config.output.as_deref())?;
            Ok(result.passed)
        }
        Command::Average {
            common,
            model,
            state,
            observable,
            trail_csv,
        } => {
            let r = Resolved::new(&common)?;
            let m = r.model(&model, "qubit")?;
            let state_name = r.pick(&state, &r.config.state, "state")?;
            let obs_name = r.pick(&observable, &r.config.observable, "observable")?;
            let psi = m.state(&state_name)?;
            let obs = m.observable(&obs_name)?;
            let plan = r.plan();
            let counter = TrialCounter::default();
            let report =
                verify_quantum_average_with(&psi, obs, r.n(DEFAULT_AVERAGE_SAMPLES)?, plan, &counter)?;
            if let Some(path) = trail_csv {
                report.write_trail_csv(BufWriter::new(File::create(path)?))?;
            }
            let passed = report.passed;
            let out = AverageOutput {
                model: m.name(),
                state: &state_name,
                observable: &obs_name,
                seed: plan.seed,
                partitions: plan.partitions,
                report,
            };
            emit(&out, r.config.output.as_deref())?;
            Ok(passed)
        }
        Command::Gns { common, model, state } => {
            let r = Resolved::new(&common)?;
            let m = r.model(&model, "qubit")?;
            let state_name = r.pick(&state, &r.config.state, "state")?;
            let psi = m.state(&state_name)?;
            let report = gns_construct(&psi)?.report()?;
            let passed = report.passed();
            let out = GnsOutput {
                model: m.name(),
                state: &state_name,
                report,
                passed,
            };
            emit(&out, r.config.output.as_deref())?;
            Ok(passed)
        }
        Command::InspectContext {
            model,
            observables,
            output,
        } => {
            let r = Resolved {
                config: ExperimentConfig::default(),
                partitions: 1,
            };
            let m = r.model(&model, "qubit")?;
            let generating = observables
                .iter()
                .map(|name| Ok((name.clone(), m.observable(name)?.clone())))
                .collect::<Result<Vec<_>>>()?;
            let ctx = context_from(generating)?;
            emit(&ctx.dump(), output.as_deref())?;
            Ok(true)
        }
        Command::Postulates {
            dim,
            trials,
            seed,
            output,
        } => {
            let dims = if dim.is_empty() { (2..=6).collect() } else { dim };
            if let Some(&bad) = dims.iter().find(|&&d| d == 0) {
                return Err(Error::InvalidDimension(bad));
            }
            let report = PostulateSuite { dims, trials, seed }.run()?;
            emit(&report, output.as_deref())?;
            Ok(report.passed)
        }
    }
}

/// Runs the CLI on `argv` (program name first) and returns the exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli.command) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}
