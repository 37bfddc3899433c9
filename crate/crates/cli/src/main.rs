mod artifacts;
mod config;
mod stages;
mod synth;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::Config;
use crate::stages::Ctx;

#[derive(Parser, Debug)]
#[command(name = "polispace", version, about = "Ideological scaling of follower networks")]
struct Cli {
    /// TOML configuration with one section per module.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every random stream; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for artifacts and the manifest.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Minimum number of elites a follower must follow.
    #[arg(long, global = true)]
    min_mps: Option<u32>,
    /// Minimum follower count of a follower's own account.
    #[arg(long, global = true)]
    min_followers: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Filter and pseudonymize the raw follow edges; derive activity tables.
    Ingest,
    /// Correspondence analysis of the filtered network.
    Embed,
    /// Fit party-centroid → survey maps for every configured dimension.
    Calibrate,
    /// Project followers and elites into survey space.
    Positions,
    /// Profile shared media domains.
    Media,
    /// Run the label-based validation battery.
    Validate,
    /// Sample a synthetic network and run the full pipeline on it.
    Synth,
    /// Summarize existing artifacts as Markdown.
    Report,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Ingest => "ingest",
            Command::Embed => "embed",
            Command::Calibrate => "calibrate",
            Command::Positions => "positions",
            Command::Media => "media",
            Command::Validate => "validate",
            Command::Synth => "synth",
            Command::Report => "report",
        }
    }
}

fn build_context(cli: &Cli) -> anyhow::Result<Ctx> {
    let mut cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(m) = cli.min_mps {
        cfg.model.min_elites_followed = m;
    }
    if let Some(m) = cli.min_followers {
        cfg.model.min_account_followers = Some(m);
    }
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(Ctx {
        cfg,
        out: cli.out.clone(),
    })
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let ctx = build_context(cli)?;
    match cli.command {
        Command::Ingest => stages::ingest(&ctx),
        Command::Embed => stages::embed(&ctx),
        Command::Calibrate => stages::calibrate(&ctx),
        Command::Positions => stages::positions(&ctx),
        Command::Media => stages::media(&ctx),
        Command::Validate => stages::validate(&ctx),
        Command::Synth => synth::run(ctx),
        Command::Report => stages::report(&ctx),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e:#}", cli.command.name());
            ExitCode::FAILURE
        }
    }
}
