use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hsets::cli;
use hsets::config::RunConfig;
use hsets::error::Error;

#[derive(Parser)]
#[command(
    name = "hsets",
    about = "Hessian-guided interaction-set detection and attribution for small image classifiers"
)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// Path to a key=value config file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the master RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the worker count (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    Error::Config(format!("cannot read {}: {e}", path.display()))
                })?;
                RunConfig::parse(&text)?
            }
            None => RunConfig::default(),
        };
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(workers) = self.workers {
            cfg.workers = workers;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train a model on the configured dataset and save it.
    Train(ConfigArgs),
    /// Write segmentation label maps for every image.
    Segment(ConfigArgs),
    /// Detect interaction sets and write one set file per image.
    Detect(ConfigArgs),
    /// Full pipeline: detection, set attribution, saliency maps.
    Attribute(ConfigArgs),
    /// Compute Gini / ROAD metrics for one or more methods.
    Evaluate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Comma-separated methods: hsets, ig, random, oracle.
        #[arg(long, value_delimiter = ',', default_value = "hsets,ig,random")]
        methods: Vec<String>,
    },
    /// Sweep one hyperparameter and report sparsity/AOPC/runtime.
    Ablate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Axis: nu, mu, k, seed_strategy, segmentation.
        #[arg(long)]
        axis: String,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',')]
        values: Vec<String>,
    },
    /// Run the nine-axiom property suite on synthetic networks.
    Axioms {
        #[arg(long, default_value_t = 100)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-3)]
        tau: f64,
    },
    /// Print the default configuration in config-file form.
    PrintConfig,
}

fn run(args: Args) -> Result<ExitCode, Error> {
    match args.command {
        Command::Train(c) => cli::cmd_train(&c.load()?)?,
        Command::Segment(c) => cli::cmd_segment(&c.load()?)?,
        Command::Detect(c) => cli::cmd_detect(&c.load()?)?,
        Command::Attribute(c) => cli::cmd_attribute(&c.load()?)?,
        Command::Evaluate { config, methods } => cli::cmd_evaluate(&config.load()?, &methods)?,
        Command::Ablate { config, axis, values } => {
            cli::cmd_ablate(&config.load()?, &axis, &values)?
        }
        Command::Axioms { instances, seed, tau } => {
            if !cli::cmd_axioms(instances, seed, tau)? {
                return Ok(ExitCode::from(3));
            }
        }
        Command::PrintConfig => print!("{}", RunConfig::default().to_text()),
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(args) => args,
        Err(e) => {
            // help/version requests are not errors
            use clap::error::ErrorKind;
            let kind = e.kind();
            let _ = e.print();
            return if matches!(kind, ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            };
        }
    };
    match run(args) {
        Ok(code) => code,
        Err(Error::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
