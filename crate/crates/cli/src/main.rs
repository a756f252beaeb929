use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use compnet::data::OutputVector;
use compnet::experiment::ExperimentConfig;
use compnet::{
    angle_concentration, emit_report, generate_synthetic, grow_greedy, multilayer_bound, no_worse_frequency,
    run_experiment, sgd_train, stack, Activation, Component, CompositeGraph, Dataset, Format, Sampler, SyntheticSpec,
    TrainConfig, TrialConfig,
};
use serde::de::DeserializeOwned;

const EXIT_CONFIG: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;
const EXIT_BOUND_FAILED: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "compnet",
    version,
    about = "Composite networks from pre-trained and trainable components"
)]
struct Cli {
    /// Overrides the seed of the loaded config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON config of the subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file (a directory for gen-data); stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Format of reports and training traces; other outputs are JSON.
    #[arg(long, global = true, value_enum)]
    format: Option<OutFormat>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

impl From<OutFormat> for Format {
    fn from(f: OutFormat) -> Self {
        match f {
            OutFormat::Csv => Format::Csv,
            OutFormat::Json => Format::Json,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Closed-form optimal linear glue of the given components.
    Stack(StackArgs),
    /// Greedy layer-wise growth to a fixed depth.
    Grow(GrowArgs),
    /// SGD on the trainable parameters of a graph.
    Train(TrainArgs),
    /// Monte Carlo check of a probabilistic bound.
    Verify(VerifyArgs),
    /// The frozen/trainable composition grid.
    Experiment,
    /// Writes a synthetic dataset as train.csv and test.csv.
    GenData,
}

#[derive(Args, Debug)]
struct StackArgs {
    #[arg(long)]
    data: PathBuf,
    /// JSON array of component documents.
    #[arg(long)]
    components: PathBuf,
}

#[derive(Args, Debug)]
struct GrowArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    components: PathBuf,
    #[arg(long, default_value_t = 2)]
    depth: usize,
    #[arg(long, default_value = "logistic")]
    activation: Activation,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    validation: Option<PathBuf>,
    /// Where to write the trained graph.
    #[arg(long)]
    graph_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(value_enum)]
    check: Check,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    h: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long, value_enum)]
    sampler: Option<SamplerArg>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    activation: Option<Activation>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Check {
    Angle,
    NoWorse,
    Multilayer,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SamplerArg {
    Gaussian,
    Correlated,
}

/// A bound check that ran but did not hold.
#[derive(Debug)]
struct BoundFailed;

impl std::fmt::Display for BoundFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("bound not met")
    }
}

impl std::error::Error for BoundFailed {}

fn read_json<T: DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| compnet::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    serde_json::from_str(&text).map_err(|e| compnet::Error::Config(format!("{}: {e}", path.display())).into())
}

fn require_config(cli: &Cli, what: &str) -> anyhow::Result<PathBuf> {
    cli.config
        .clone()
        .ok_or_else(|| compnet::Error::Config(format!("{what} needs --config <path>")).into())
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> anyhow::Result<()> {
    match out {
        Some(path) => std::fs::write(path, bytes).map_err(|e| {
            compnet::Error::Io {
                path: path.to_path_buf(),
                source: e,
            }
            .into()
        }),
        None => {
            std::io::stdout().write_all(bytes)?;
            Ok(())
        }
    }
}

fn emit_json(out: Option<&Path>, value: &impl serde::Serialize) -> anyhow::Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    emit(out, &bytes)
}

fn component_outputs(components: &[Component], data: &Dataset) -> anyhow::Result<Vec<OutputVector>> {
    let mut outputs = vec![OutputVector::ones(data.n())];
    for c in components {
        outputs.push(
            c.evaluate(data)
                .with_context(|| format!("evaluating component {}", c.id()))?,
        );
    }
    Ok(outputs)
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Stack(a) => {
            let data = Dataset::load_csv(&a.data)?;
            let components: Vec<Component> = read_json(&a.components)?;
            let solution = stack(&component_outputs(&components, &data)?, data.targets())?;
            emit_json(out, &solution)
        }
        Command::Grow(a) => {
            let data = Dataset::load_csv(&a.data)?;
            let components: Vec<Component> = read_json(&a.components)?;
            let trace = grow_greedy(&components, a.depth, &data, a.activation)?;
            emit_json(out, &trace)
        }
        Command::Train(a) => {
            let data = Dataset::load_csv(&a.data)?;
            let validation = a.validation.as_ref().map(Dataset::load_csv).transpose()?;
            let mut graph: CompositeGraph = read_json(&a.graph)?;
            let mut cfg: TrainConfig = match &cli.config {
                Some(p) => read_json(p)?,
                None => TrainConfig::default(),
            };
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            let trace = sgd_train(&mut graph, &data, validation.as_ref(), &cfg)?;
            if let Some(path) = &a.graph_out {
                emit_json(Some(path), &graph)?;
            }
            match cli.format.map(Format::from).unwrap_or(Format::Csv) {
                Format::Json => emit_json(out, &trace),
                Format::Csv => {
                    let mut bytes = Vec::new();
                    trace.write_csv(&mut bytes)?;
                    emit(out, &bytes)
                }
            }
        }
        Command::Verify(a) => verify(cli, a),
        Command::Experiment => {
            let path = require_config(cli, "experiment")?;
            let text = std::fs::read_to_string(&path).map_err(|e| compnet::Error::Io {
                path: path.clone(),
                source: e,
            })?;
            let mut cfg = ExperimentConfig::from_json(&text)
                .map_err(|e| compnet::Error::Config(format!("{}: {e}", path.display())))?;
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            let outcome = run_experiment(&cfg)?;
            let configured = cfg.output.as_ref();
            let format = cli
                .format
                .map(Format::from)
                .or(configured.map(|o| o.format))
                .unwrap_or(Format::Csv);
            match out.or(configured.map(|o| o.report.as_path())) {
                Some(p) => emit_report(&outcome.report, format, p)?,
                None => emit(None, &outcome.report.to_bytes(format)?)?,
            }
            for b in &outcome.best {
                eprintln!("best of part {}: {} (row {})", b.part, b.model, b.row);
            }
            Ok(())
        }
        Command::GenData => {
            let path = require_config(cli, "gen-data")?;
            let Some(dir) = out else {
                bail!(compnet::Error::Config("gen-data needs --out <directory>".into()));
            };
            let mut spec: SyntheticSpec = read_json(&path)?;
            if let Some(seed) = cli.seed {
                spec.seed = seed;
            }
            let (train, test) = generate_synthetic(&spec)?;
            std::fs::create_dir_all(dir).map_err(|e| compnet::Error::Io {
                path: dir.to_path_buf(),
                source: e,
            })?;
            train.save_csv(dir.join("train.csv"))?;
            test.save_csv(dir.join("test.csv"))?;
            Ok(())
        }
    }
}

fn verify(cli: &Cli, a: &VerifyArgs) -> anyhow::Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => read_json::<TrialConfig>(p)?,
        None => {
            let n =
                a.n.ok_or_else(|| compnet::Error::Config("verify needs --n or --config".into()))?;
            let trials = a
                .trials
                .ok_or_else(|| compnet::Error::Config("verify needs --trials or --config".into()))?;
            TrialConfig::new(n, 1, 1, trials, 0)
        }
    };
    if let Some(n) = a.n {
        cfg.n = n;
    }
    if let Some(k) = a.k {
        cfg.k = k;
    }
    if let Some(h) = a.h {
        cfg.h = h;
    }
    if let Some(t) = a.trials {
        cfg.trials = t;
    }
    if let Some(c) = a.c {
        cfg.c = c;
    }
    if let Some(s) = a.sampler {
        cfg.distribution = match s {
            SamplerArg::Gaussian => Sampler::Gaussian,
            SamplerArg::Correlated => Sampler::Correlated,
        };
    }
    if let Some(noise) = a.noise {
        cfg.noise = noise;
    }
    if let Some(act) = a.activation {
        cfg.activation = act;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let report = match a.check {
        Check::Angle => angle_concentration(&cfg)?,
        Check::NoWorse => no_worse_frequency(&cfg)?,
        Check::Multilayer => multilayer_bound(&cfg)?,
    };
    emit_json(cli.out.as_deref(), &report)?;
    eprintln!("{}", report.summary());
    if report.pass {
        Ok(())
    } else {
        Err(BoundFailed.into())
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<BoundFailed>().is_some() {
        return EXIT_BOUND_FAILED;
    }
    match err.downcast_ref::<compnet::Error>() {
        Some(e) if !e.is_config() => EXIT_NUMERICAL,
        _ => EXIT_CONFIG,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) if err.downcast_ref::<BoundFailed>().is_some() => ExitCode::from(EXIT_BOUND_FAILED),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
