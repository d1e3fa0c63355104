use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, ValueEnum};

use softspace::corpus::Level;
use softspace::pipeline::{error_line, Pipeline, PipelineConfig, Stage};
use softspace::Result;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum StageArg {
    Ingest,
    Rca,
    Proximity,
    Backbone,
    Communities,
    Portfolio,
    Dynamics,
    Powerlaw,
    Synth,
    All,
}

impl From<StageArg> for Stage {
    fn from(s: StageArg) -> Stage {
        match s {
            StageArg::Ingest => Stage::Ingest,
            StageArg::Rca => Stage::Rca,
            StageArg::Proximity => Stage::Proximity,
            StageArg::Backbone => Stage::Backbone,
            StageArg::Communities => Stage::Communities,
            StageArg::Portfolio => Stage::Portfolio,
            StageArg::Dynamics => Stage::Dynamics,
            StageArg::Powerlaw => Stage::Powerlaw,
            StageArg::Synth => Stage::Synth,
            StageArg::All => Stage::All,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LevelArg {
    Division,
    Group,
}

/// Software-space analysis pipeline.
///
/// Settings come from the optional TOML file given by --config; any flag
/// overrides the corresponding setting.
#[derive(Debug, Parser)]
#[command(name = "softspace", version)]
struct Cli {
    /// Stage to run; `all` chains ingest through powerlaw.
    #[arg(value_enum)]
    stage: StageArg,

    /// Pipeline configuration file (TOML).
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Mention records; `-` reads standard input.
    #[arg(long, value_name = "PATH")]
    records: Option<PathBuf>,
    /// Alias table (variant, canonical).
    #[arg(long, value_name = "PATH")]
    aliases: Option<PathBuf>,
    /// Discipline taxonomy (code, label, parent_code, category).
    #[arg(long, value_name = "PATH")]
    taxonomy: Option<PathBuf>,
    /// Output directory; `-` sends `synth` records to standard output.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,

    #[arg(long)]
    first_year: Option<i32>,
    #[arg(long)]
    last_year: Option<i32>,
    /// Keep tools whose total exceeds this quantile of tool totals.
    #[arg(long)]
    percentile: Option<f64>,
    #[arg(long, value_enum)]
    level: Option<LevelArg>,

    /// RCA specialization threshold.
    #[arg(long)]
    threshold: Option<f64>,
    /// Specialize at RCA >= threshold instead of RCA > threshold.
    #[arg(long)]
    inclusive: bool,

    /// Disparity filter significance level.
    #[arg(long)]
    alpha: Option<f64>,
    /// Leave the maximum spanning tree out of the backbone.
    #[arg(long)]
    no_mst: bool,

    /// Top-level seed for every random stage.
    #[arg(long)]
    seed: Option<u64>,
    /// Independent block-model fits; the lowest description length wins.
    #[arg(long)]
    restarts: Option<usize>,
    /// Maximum node-move sweeps per relaxation.
    #[arg(long)]
    sweeps: Option<usize>,
    /// Use edge multiplicities ceil(phi * Q) instead of binarized edges.
    #[arg(long, value_name = "Q")]
    weighted_multiplicity: Option<u32>,

    #[arg(long)]
    window_length: Option<i32>,
    #[arg(long)]
    step: Option<i32>,

    /// Fixed power-law cutoff.
    #[arg(long)]
    x_min: Option<u64>,
    /// Bootstrap replicates for the power-law p-value.
    #[arg(long)]
    bootstrap: Option<usize>,

    /// Also write GraphML for the network and backbone.
    #[arg(long)]
    graphml: bool,

    #[arg(long)]
    n_papers: Option<usize>,
    #[arg(long)]
    n_tools: Option<usize>,
    #[arg(long)]
    n_disciplines: Option<usize>,
    #[arg(long)]
    tail_exponent: Option<f64>,

    /// More log output (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,
}

impl Cli {
    fn resolve(&self) -> Result<PipelineConfig> {
        let mut c = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        let set = |slot: &mut _, v: Option<_>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        if self.records.is_some() {
            c.paths.records = self.records.clone();
        }
        if self.aliases.is_some() {
            c.paths.aliases = self.aliases.clone();
        }
        if self.taxonomy.is_some() {
            c.paths.taxonomy = self.taxonomy.clone();
        }
        if let Some(o) = &self.out {
            c.paths.out_dir = o.clone();
        }
        set(&mut c.corpus.first_year, self.first_year);
        set(&mut c.corpus.last_year, self.last_year);
        if let Some(p) = self.percentile {
            c.corpus.percentile = p;
        }
        if let Some(l) = self.level {
            c.corpus.level = match l {
                LevelArg::Division => Level::Division,
                LevelArg::Group => Level::Group,
            };
        }
        if let Some(t) = self.threshold {
            c.specialization.threshold = t;
        }
        c.specialization.inclusive |= self.inclusive;
        if let Some(a) = self.alpha {
            c.backbone.alpha = a;
        }
        if self.no_mst {
            c.backbone.mst = false;
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(r) = self.restarts {
            c.community.restarts = r;
        }
        if let Some(s) = self.sweeps {
            c.community.sweeps = s;
        }
        if let Some(q) = self.weighted_multiplicity {
            c.community.binarize = false;
            c.community.multiplicity_scale = q;
        }
        set(&mut c.dynamics.window_length, self.window_length);
        set(&mut c.dynamics.window_step, self.step);
        if self.x_min.is_some() {
            c.powerlaw.x_min = self.x_min;
        }
        if let Some(b) = self.bootstrap {
            c.powerlaw.bootstrap = b;
        }
        c.output.graphml |= self.graphml;
        if let Some(n) = self.n_papers {
            c.synth.n_papers = n;
        }
        if let Some(n) = self.n_tools {
            c.synth.n_tools = n;
        }
        if let Some(n) = self.n_disciplines {
            c.synth.n_disciplines = n;
        }
        if self.tail_exponent.is_some() {
            c.synth.tail_exponent = self.tail_exponent;
        }
        Ok(c)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => {
            let message = e.to_string();
            let first = message.lines().next().unwrap_or("usage error").trim_start_matches("error: ");
            eprintln!(
                "{}",
                serde_json::json!({ "error": "usage", "message": first, "exit_code": 2 })
            );
            return ExitCode::from(2);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = cli
        .resolve()
        .and_then(Pipeline::new)
        .and_then(|mut p| p.run(cli.stage.into()));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_line(&e));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
