//! Command-line front end. Every command is a thin wrapper over library
//! calls; [`run_cli`] takes its output streams so it can be tested in-process.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;

use crate::dispatch::DispatchContext;
use crate::generate::{pge69, random_scenario, GenerateError, GenerateOptions, ProfileShape};
use crate::scenario::{Scenario, ScenarioError, ScenarioFile};
use crate::simulator::{plan_step, run, step, SimError, SimState, SimulationConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_SOLVER: i32 = 4;

/// Environment variable holding the log filter, e.g. `info` or `microdispatch=debug`.
pub const LOG_ENV: &str = "MICRODISPATCH_LOG";

#[derive(Debug, Parser)]
#[command(name = "microdispatch", version, about = "Cooperative dispatch of networked microgrids")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate the closed loop and write the results directory.
    Run {
        #[command(flatten)]
        input: ScenarioArgs,
        /// Results directory, created if missing.
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Generate a random scenario, or a bundled one with --preset.
    Gen {
        /// Number of buses.
        #[arg(required_unless_present = "preset")]
        buses: Option<usize>,
        /// Number of microgrids.
        #[arg(required_unless_present = "preset")]
        microgrids: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Load shape: evening, midday or flat.
        #[arg(long, default_value = "evening")]
        shape: ProfileShape,
        /// Built-in scenario instead of a random one (only `pge69`).
        #[arg(long, conflicts_with_all = ["buses", "microgrids"])]
        preset: Option<String>,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Load a scenario and check every model invariant.
    Validate {
        #[command(flatten)]
        input: ScenarioArgs,
    },
    /// Print the dispatch QP of one coalition at one step.
    DumpQp {
        #[command(flatten)]
        input: ScenarioArgs,
        /// Step; earlier steps are simulated first to reach its state.
        #[arg(long, default_value_t = 0)]
        k: usize,
        /// Any microgrid of the coalition to dump.
        #[arg(long, default_value_t = 0)]
        coalition: usize,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Scenario path plus overrides for the scenario's config.
#[derive(Debug, Clone, Args)]
pub struct ScenarioArgs {
    /// Scenario JSON file.
    #[arg(long, value_name = "FILE", required_unless_present = "path")]
    pub scenario: Option<PathBuf>,
    /// Scenario JSON file, given positionally.
    #[arg(value_name = "SCENARIO", conflicts_with = "scenario")]
    pub path: Option<PathBuf>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_repartition_iters: Option<usize>,
    /// Also solve the centralized and lower-bound problems.
    #[arg(long)]
    pub benchmark: bool,
    #[arg(long)]
    pub sampling_hours: Option<f64>,
    /// Bound on every transfer (kW).
    #[arg(long)]
    pub transfer_limit: Option<f64>,
    #[arg(long)]
    pub dual_tolerance: Option<f64>,
    #[arg(long)]
    pub dual_max_iters: Option<usize>,
}

impl ScenarioArgs {
    pub fn path(&self) -> &Path {
        self.scenario
            .as_deref()
            .or(self.path.as_deref())
            .expect("clap requires a scenario")
    }

    /// Applies the flags on top of a config read from file.
    pub fn apply(&self, config: &mut SimulationConfig) {
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field {
                    config.$field = v;
                })*
            };
        }
        set!(steps, horizon, alpha, seed, max_repartition_iters, sampling_hours, dual_tolerance, dual_max_iters);
        if self.benchmark {
            config.benchmark = true;
        }
        if self.transfer_limit.is_some() {
            config.transfer_limit = self.transfer_limit;
        }
    }

    /// Reads the file, applies overrides, then validates.
    pub fn load(&self) -> Result<Scenario, ScenarioError> {
        let path = self.path();
        let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut file: ScenarioFile = serde_json::from_str(&text)?;
        self.apply(&mut file.config);
        file.into_scenario()
    }
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Generate(#[from] GenerateError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("cannot write {path}: {source}")]
    Output {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Generate(_) => EXIT_USAGE,
            CliError::Scenario(ScenarioError::Config(_)) => EXIT_USAGE,
            CliError::Scenario(_) | CliError::Output { .. } => EXIT_INPUT,
            CliError::Sim(SimError::Config(_)) => EXIT_USAGE,
            CliError::Sim(e) if e.is_infeasible() => EXIT_INFEASIBLE,
            CliError::Sim(_) => EXIT_SOLVER,
        }
    }
}

fn output_error(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Output {
        path: path.display().to_string(),
        source,
    }
}

fn write_text(out: Option<&Path>, stdout: &mut dyn Write, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, text).map_err(output_error(path)),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(output_error(Path::new("<stdout>"))),
    }
}

/// Initializes logging from [`LOG_ENV`]; warnings only by default.
pub fn init_logging() {
    let env = env_logger::Env::new().filter_or(LOG_ENV, "warn");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

/// Parses `args` (including the program name) and executes the command.
/// Returns the process exit code.
pub fn run_cli<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = stdout.write_all(text.as_bytes());
                    EXIT_OK
                }
                _ => {
                    let _ = stderr.write_all(text.as_bytes());
                    EXIT_USAGE
                }
            };
        }
    };
    match execute(cli.command, stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn execute(command: Command, stdout: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Run { input, out } => {
            let scenario = input.load()?;
            info!(
                "running {} steps on {} buses, {} microgrids",
                scenario.config.steps,
                scenario.net.len(),
                scenario.partition.len()
            );
            let log = run(&scenario.net, &scenario.partition, &scenario.config)?;
            log.write_results(&out).map_err(output_error(&out))?;
            let _ = writeln!(stdout, "wrote {} steps to {}", log.steps.len(), out.display());
            Ok(())
        }
        Command::Gen {
            buses,
            microgrids,
            seed,
            shape,
            preset,
            out,
        } => {
            let scenario = match preset.as_deref() {
                Some("pge69") => pge69(),
                Some(other) => return Err(CliError::Usage(format!("unknown preset '{other}'"))),
                None => {
                    let mut options = GenerateOptions::new(
                        buses.expect("clap requires buses"),
                        microgrids.expect("clap requires microgrids"),
                        seed,
                    );
                    options.shape = shape;
                    random_scenario(&options)?
                }
            };
            write_text(out.as_deref(), stdout, &(scenario.to_json() + "\n"))
        }
        Command::Validate { input } => {
            let scenario = input.load()?;
            let _ = writeln!(
                stdout,
                "ok: {} buses, {} edges, {} microgrids, {} steps with horizon {}",
                scenario.net.len(),
                scenario.net.edges().len(),
                scenario.partition.len(),
                scenario.config.steps,
                scenario.config.horizon
            );
            Ok(())
        }
        Command::DumpQp {
            input,
            k,
            coalition,
            out,
        } => {
            let scenario = input.load()?;
            let listing = dump_qp(&scenario, k, coalition)?;
            write_text(out.as_deref(), stdout, &listing)
        }
    }
}

/// Listing of the QP that the coalition containing microgrid `coalition`
/// solves at step `k`, after simulating steps `0..k`.
fn dump_qp(scenario: &Scenario, k: usize, coalition: usize) -> Result<String, CliError> {
    let config = &scenario.config;
    if k >= config.steps {
        return Err(CliError::Usage(format!("step {k} is outside 0..{}", config.steps)));
    }
    if coalition >= scenario.partition.len() {
        return Err(CliError::Usage(format!(
            "microgrid {coalition} does not exist ({} microgrids)",
            scenario.partition.len()
        )));
    }
    let net = &scenario.net;
    let mut state = SimState::initial(net, scenario.partition.clone());
    for j in 0..k {
        state = step(net, &state, config, j)?.0;
    }
    let plan = plan_step(net, &state, config, k)?;
    let ctx = DispatchContext {
        net,
        start: k,
        horizon: config.horizon,
        soc: &state.soc,
        settings: config.dispatch_settings(),
    };
    let problem = ctx.build_coalition(plan.coalitions.nodes(coalition));
    let mut buf = Vec::new();
    problem.write_listing(&mut buf).expect("writing to memory");
    Ok(String::from_utf8(buf).expect("listing is UTF-8"))
}
