//! Command-line front end: `careerrec <synth|train|topics|eval|serve|analyze>`.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on runtime failures.

use std::ffi::OsString;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::artifact::{save_variant, variant_file_name};
use crate::classifier::LrConfig;
use crate::dataset::{generate_synthetic, load_dataset, SyntheticConfig};
use crate::error::{Error, Result};
use crate::fairmetrics::{render_table, run_comparison, ComparisonConfig};
use crate::interests::{build_questionnaire, fit_lda_with, read_overrides, LdaConfig};
use crate::ncf::NcfConfig;
use crate::pipeline::{build_variant, VariantKind};
use crate::service::{serve, ServiceConfig, ServiceState, ADMIN_TOKEN_ENV};
use crate::study::{analyze, load_responses, render_report};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAILURE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "careerrec", version, about = "Gender-debiased career recommender")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic interaction dataset.
    Synth(SynthArgs),
    /// Train variant artifacts.
    Train(TrainArgs),
    /// Fit interest topics and emit the questionnaire.
    Topics(TopicsArgs),
    /// Offline comparison of the gender-aware and gender-debiased systems.
    Eval(EvalArgs),
    /// Run the study service.
    Serve(ServeArgs),
    /// Analyze exported survey responses.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 2000)]
    pub users: usize,
    #[arg(long, default_value_t = 500)]
    pub items: usize,
    #[arg(long, default_value_t = 20)]
    pub concentrations: usize,
    #[arg(long, default_value_t = 0.9)]
    pub skew: f64,
    #[arg(long, default_value_t = 20)]
    pub likes_per_user: usize,
    #[arg(long, default_value_t = 0.5)]
    pub female_fraction: f64,
    #[arg(long, default_value_t = 0.7)]
    pub affinity: f64,
    #[arg(long, default_value_t = 0.15)]
    pub proxy_rate: f64,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Hyperparameters suited to corpora of a few thousand users.
    Desk,
    /// The library defaults (20 epochs, learning rate 0.001).
    Reference,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value_t = Preset::Desk)]
    pub preset: Preset,
    /// JSON file with optional `ncf` and `lr` sections overriding the preset.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Variant to train; all three when omitted.
    #[arg(long)]
    pub kind: Option<VariantKind>,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct TopicsArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub topics: usize,
    #[arg(long, default_value_t = 1000)]
    pub iterations: usize,
    #[arg(long, default_value_t = 2)]
    pub picks_per_topic: usize,
    #[arg(long, default_value_t = 48)]
    pub target: usize,
    /// Item ids to pin, one per line.
    #[arg(long)]
    pub overrides: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 0.7)]
    pub train_fraction: f64,
    #[arg(long, default_value_t = 3)]
    pub min_count: usize,
    /// Also write the reports as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Directory holding the three variant artifacts.
    #[arg(long)]
    pub models: PathBuf,
    #[arg(long)]
    pub questionnaire: PathBuf,
    #[arg(long, env = "CAREERREC_DATA_DIR")]
    pub data_dir: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
    #[arg(long, default_value_t = 0)]
    pub assignment_seed: u64,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub responses: PathBuf,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelConfigFile {
    ncf: Option<NcfConfig>,
    lr: Option<LrConfig>,
}

fn require_file(p: &Path) -> Result<()> {
    if p.is_file() {
        Ok(())
    } else {
        Err(Error::invalid(format!("input file {} does not exist", p.display())))
    }
}

fn require_dir(p: &Path) -> Result<()> {
    if p.is_dir() {
        Ok(())
    } else {
        Err(Error::invalid(format!("directory {} does not exist", p.display())))
    }
}

fn require_parent(p: &Path) -> Result<()> {
    match p.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => require_dir(dir),
        _ => Ok(()),
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

impl ModelArgs {
    fn resolve(&self) -> Result<(NcfConfig, LrConfig)> {
        let (mut ncf, mut lr) = match self.preset {
            Preset::Desk => (NcfConfig::desk_scale(), LrConfig::default()),
            Preset::Reference => (NcfConfig::default(), LrConfig::default()),
        };
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let file: ModelConfigFile = serde_json::from_str(&text)?;
            ncf = file.ncf.unwrap_or(ncf);
            lr = file.lr.unwrap_or(lr);
        }
        ncf.seed = self.seed;
        lr.seed = self.seed;
        ncf.validate()?;
        Ok((ncf, lr))
    }

    fn check_paths(&self) -> Result<()> {
        self.config.as_deref().map_or(Ok(()), require_file)
    }
}

fn synth(a: &SynthArgs) -> Result<()> {
    require_parent(&a.output)?;
    let d = generate_synthetic(&SyntheticConfig {
        n_users: a.users,
        n_items: a.items,
        n_concentrations: a.concentrations,
        gender_skew: a.skew,
        likes_per_user: a.likes_per_user,
        female_fraction: a.female_fraction,
        cluster_affinity: a.affinity,
        gender_proxy_rate: a.proxy_rate,
        seed: a.seed,
    })?;
    d.save(&a.output)?;
    log::info!(
        "wrote {} users, {} items, {} likes to {}",
        d.n_users(),
        d.n_items(),
        d.likes().len(),
        a.output.display()
    );
    Ok(())
}

fn train(a: &TrainArgs) -> Result<()> {
    require_file(&a.data)?;
    require_dir(&a.out_dir)?;
    a.model.check_paths()?;
    let (ncf, lr) = a.model.resolve()?;
    let d = load_dataset(&a.data)?;
    let kinds = a.kind.map_or_else(|| VariantKind::ALL.to_vec(), |k| vec![k]);
    for kind in kinds {
        let v = build_variant(&d, kind, &ncf, &lr)?;
        let path = a.out_dir.join(variant_file_name(kind));
        save_variant(&v, &path)?;
        log::info!("wrote {}", path.display());
    }
    Ok(())
}

fn topics(a: &TopicsArgs) -> Result<()> {
    require_file(&a.data)?;
    require_parent(&a.output)?;
    if let Some(p) = &a.overrides {
        require_file(p)?;
    }
    let overrides = a.overrides.as_deref().map(read_overrides).transpose()?.unwrap_or_default();
    let d = load_dataset(&a.data)?;
    let model = fit_lda_with(
        &d,
        &LdaConfig {
            n_topics: a.topics,
            iterations: a.iterations,
            seed: a.seed,
            ..LdaConfig::default()
        },
    )?;
    let q = build_questionnaire(&model, a.picks_per_topic, a.target, &overrides)?;
    write_file(&a.output, q.to_json()? + "\n")?;
    log::info!("wrote {} questionnaire items to {}", q.len(), a.output.display());
    Ok(())
}

fn eval(a: &EvalArgs) -> Result<()> {
    require_file(&a.data)?;
    a.model.check_paths()?;
    if let Some(p) = &a.json {
        require_parent(p)?;
    }
    let (ncf, lr) = a.model.resolve()?;
    let d = load_dataset(&a.data)?;
    let cfg = ComparisonConfig {
        train_fraction: a.train_fraction,
        min_concentration_count: a.min_count,
        ..ComparisonConfig::new(ncf, lr, a.model.seed)
    };
    let cmp = run_comparison(&d, &cfg)?;
    print!("{}", render_table(&cmp.reports));
    if let Some(p) = &a.json {
        write_file(p, serde_json::to_string_pretty(&cmp.reports)? + "\n")?;
    }
    Ok(())
}

fn serve_cmd(a: &ServeArgs) -> Result<()> {
    require_dir(&a.models)?;
    require_file(&a.questionnaire)?;
    let config = ServiceConfig {
        data_dir: a.data_dir.clone(),
        admin_token: std::env::var(ADMIN_TOKEN_ENV).ok().filter(|t| !t.is_empty()),
        assignment_seed: a.assignment_seed,
    };
    if config.admin_token.is_none() {
        log::warn!("{ADMIN_TOKEN_ENV} is not set; /api/export is disabled");
    }
    let state = Arc::new(ServiceState::load(&a.models, &a.questionnaire, config)?);
    let rt = tokio::runtime::Runtime::new().map_err(|e| Error::io("tokio runtime", e))?;
    rt.block_on(serve(state, a.addr))
}

fn analyze_cmd(a: &AnalyzeArgs) -> Result<()> {
    require_file(&a.responses)?;
    if let Some(p) = &a.json {
        require_parent(p)?;
    }
    let report = analyze(&load_responses(&a.responses)?)?;
    print!("{}", render_report(&report));
    if let Some(p) = &a.json {
        write_file(p, report.to_json()? + "\n")?;
    }
    Ok(())
}

fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Synth(a) => synth(a),
        Command::Train(a) => train(a),
        Command::Topics(a) => topics(a),
        Command::Eval(a) => eval(a),
        Command::Serve(a) => serve_cmd(a),
        Command::Analyze(a) => analyze_cmd(a),
    }
}

/// Parse `argv` (including the program name) and run the subcommand.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_FAILURE
        }
    }
}
