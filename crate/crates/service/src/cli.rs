//! Command-line driver: `serve`, `recommend`, `simulate` and `report`.

use std::fmt::Write as _;
use std::future::Future;
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use reqrec_core::analytics::{
    simulate_study, synthetic_ratings, PopulationSpec, SelectionMode, SimulatedPopulation,
    HUMAN_STUDY_SATISFACTION_PERCENT,
};
use reqrec_core::datastore::{
    load_catalog_file, load_ratings_file, load_state, save_state, seed_catalog,
};
use reqrec_core::{
    recommend, Dataset, EducationLevel, Error, PredictionForm, RatingMatrix, Requirement,
    RequirementId, Result, SessionConfig, Stakeholder, StakeholderId,
};
use tracing::{info, warn};

use crate::api::{app, AppState};

/// Seed of the built-in synthetic ratings used when no ratings file is given.
pub const DEFAULT_RATINGS_SEED: u64 = 2024;
/// Stakeholders in the built-in synthetic ratings.
pub const DEFAULT_RATINGS_SIZE: usize = 50;

#[derive(Debug, Parser)]
#[command(
    name = "reqrec",
    version,
    about = "Requirement recommendation from repertory-grid ratings"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP API.
    Serve(ServeArgs),
    /// Print the top-K recommendations for one stakeholder.
    Recommend(RecommendArgs),
    /// Run a seeded population through the session workflow.
    Simulate(SimulateArgs),
    /// Print the satisfaction report of a state store.
    Report(ReportArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FormArg {
    Standard,
    PaperLiteral,
}

impl From<FormArg> for PredictionForm {
    fn from(f: FormArg) -> Self {
        match f {
            FormArg::Standard => PredictionForm::Standard,
            FormArg::PaperLiteral => PredictionForm::PaperLiteral,
        }
    }
}

#[derive(Clone, Debug, Args)]
pub struct EngineArgs {
    /// Seed requirements shown first.
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
    pub n: u64,
    /// Neighbourhood size.
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    pub m: u64,
    /// Recommendations returned.
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    pub k: u64,
    #[arg(long, value_enum, default_value_t = FormArg::Standard)]
    pub form: FormArg,
}

impl EngineArgs {
    pub fn config(&self) -> SessionConfig {
        SessionConfig {
            n_seeds: self.n as usize,
            m_neighbors: self.m as usize,
            k_recommendations: self.k as usize,
            prediction_form: self.form.into(),
            ..SessionConfig::default()
        }
    }
}

#[derive(Clone, Debug, Args)]
pub struct DataArgs {
    /// Catalog CSV (`id,label,left_pole,right_pole,description`); built-in catalog when absent.
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    /// Ratings CSV (`stakeholder_id,education_level,requirement_id,score`).
    #[arg(long)]
    pub ratings: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// JSON state store; created when missing.
    #[arg(long)]
    pub store: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub engine: EngineArgs,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value_t = IpAddr::V4(Ipv4Addr::LOCALHOST))]
    pub host: IpAddr,
}

#[derive(Debug, Args)]
pub struct RecommendArgs {
    /// Target stakeholder.
    #[arg(long)]
    pub stakeholder: String,
    /// Extra ratings for the target as `REQUIREMENT=SCORE`; registers the target if needed.
    #[arg(long = "rate", value_parser = parse_rating)]
    pub rate: Vec<(RequirementId, i64)>,
    /// Education level used when the target is registered here.
    #[arg(long, default_value = "unspecified")]
    pub education: String,
    #[command(flatten)]
    pub data: DataArgs,
    /// Read ratings from a state store instead of a CSV.
    #[arg(long, conflicts_with_all = ["ratings", "catalog"])]
    pub store: Option<PathBuf>,
    /// Seed of the built-in synthetic ratings when neither `--ratings` nor `--store` is given.
    #[arg(long, default_value_t = DEFAULT_RATINGS_SEED)]
    pub seed: u64,
    #[command(flatten)]
    pub engine: EngineArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BaselineArg {
    /// Also score K requirements drawn uniformly at random.
    Random,
    None,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Simulated session participants.
    #[arg(long, default_value_t = 127, value_parser = clap::value_parser!(u64).range(1..))]
    pub trials: u64,
    /// Stakeholders with complete ratings before the study starts.
    #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u64).range(1..))]
    pub core: u64,
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u64).range(1..))]
    pub clusters: u64,
    /// Standard deviation of rating noise.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, value_enum, default_value_t = BaselineArg::Random)]
    pub baseline: BaselineArg,
    /// Write the simulated dataset to this state store.
    #[arg(long)]
    pub store: Option<PathBuf>,
    #[command(flatten)]
    pub engine: EngineArgs,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub store: PathBuf,
    /// Print JSON instead of a table.
    #[arg(long)]
    pub json: bool,
}

fn parse_rating(s: &str) -> std::result::Result<(RequirementId, i64), String> {
    let (id, score) = s
        .split_once('=')
        .ok_or_else(|| format!("expected REQUIREMENT=SCORE, got `{s}`"))?;
    let score = score
        .trim()
        .parse()
        .map_err(|_| format!("score `{score}` is not an integer"))?;
    Ok((RequirementId::new(id.trim()), score))
}

fn catalog_from(path: Option<&Path>) -> Result<Vec<Requirement>> {
    match path {
        Some(p) => load_catalog_file(p),
        None => Ok(seed_catalog()),
    }
}

fn matrix_from(
    data: &DataArgs,
    catalog: &[Requirement],
    config: &SessionConfig,
    seed: u64,
) -> Result<RatingMatrix> {
    match &data.ratings {
        Some(path) => {
            let loaded = load_ratings_file(path, catalog, config.scale)?;
            if loaded.overwritten > 0 {
                warn!(
                    rows = loaded.overwritten,
                    "duplicate rating rows replaced earlier scores"
                );
            }
            Ok(loaded.matrix)
        }
        None => synthetic_ratings(catalog, config.scale, DEFAULT_RATINGS_SIZE, seed),
    }
}

/// Output of `recommend`, one line per ranked requirement.
pub fn run_recommend(args: &RecommendArgs) -> Result<String> {
    let mut config = args.engine.config();
    let (catalog, mut matrix) = match &args.store {
        Some(path) => {
            let d = load_state(path)?;
            config.scale = d.config.scale;
            (d.catalog, d.matrix)
        }
        None => {
            let catalog = catalog_from(args.data.catalog.as_deref())?;
            let matrix = matrix_from(&args.data, &catalog, &config, args.seed)?;
            (catalog, matrix)
        }
    };
    let target = StakeholderId::new(args.stakeholder.trim());
    if !args.rate.is_empty() && !matrix.contains_stakeholder(&target) {
        let level: EducationLevel = args.education.parse()?;
        matrix.register_stakeholder(Stakeholder::new(target.clone(), level))?;
    }
    for (requirement, score) in &args.rate {
        matrix.rate(&target, requirement, *score)?;
    }
    let rec = recommend(&matrix, &target, config.params(), config.prediction_form)?;
    let mut out = String::new();
    for (rank, p) in rec.items.iter().enumerate() {
        let label = catalog
            .iter()
            .find(|r| r.id == p.requirement)
            .map_or("", |r| r.label.as_str());
        let _ = writeln!(
            out,
            "{}\t{}\t{}\traw={:.6}\tclamped={:.6}\tsupport={}",
            rank + 1,
            p.requirement,
            label,
            p.raw_value,
            p.clamped_value,
            p.neighbor_support
        );
    }
    Ok(out)
}

/// Output of `simulate`.
pub fn run_simulate(args: &SimulateArgs) -> Result<String> {
    let catalog = catalog_from(args.catalog.as_deref())?;
    let config = args.engine.config();
    if !(args.noise.is_finite() && args.noise >= 0.0) {
        return Err(Error::Invalid(
            "--noise must be a non-negative number".into(),
        ));
    }
    let spec = PopulationSpec {
        seed: args.seed,
        core_size: args.core as usize,
        participants: args.trials as usize,
        clusters: args.clusters as usize,
        noise_level: args.noise,
    };
    let population = SimulatedPopulation::generate(spec, &catalog, config.n_seeds, config.scale)?;
    let study = simulate_study(&catalog, &config, &population, SelectionMode::Collaborative)?;
    let baseline = match args.baseline {
        BaselineArg::Random => Some(simulate_study(
            &catalog,
            &config,
            &population,
            SelectionMode::RandomBaseline,
        )?),
        BaselineArg::None => None,
    };
    if let Some(path) = &args.store {
        save_state(path, &study.dataset)?;
    }
    let mut out = String::new();
    let _ = writeln!(
        out,
        "seed={} trials={} core={} clusters={} noise={} n={} m={} k={} form={}",
        args.seed,
        args.trials,
        args.core,
        args.clusters,
        args.noise,
        config.n_seeds,
        config.m_neighbors,
        config.k_recommendations,
        config.prediction_form
    );
    let _ = writeln!(out, "hit_rate: {:.4}", study.hit_rate);
    if let Some(b) = &baseline {
        let _ = writeln!(out, "baseline_hit_rate: {:.4}", b.hit_rate);
    }
    out.push('\n');
    out.push_str(&study.report.to_table());
    let _ = writeln!(
        out,
        "reference (human study, not simulated): {HUMAN_STUDY_SATISFACTION_PERCENT:.1}%"
    );
    Ok(out)
}

/// Output of `report`.
pub fn run_report(args: &ReportArgs) -> Result<String> {
    let d = load_state(&args.store)?;
    let report = reqrec_core::analytics::satisfaction_report(&d.feedback());
    if args.json {
        let mut s = serde_json::to_string_pretty(&report).map_err(|e| Error::Io(e.to_string()))?;
        s.push('\n');
        Ok(s)
    } else {
        Ok(report.to_table())
    }
}

/// Loads the store, or builds a fresh dataset and writes it.
pub fn open_store(args: &ServeArgs) -> Result<Dataset> {
    if args.store.exists() {
        let d = load_state(&args.store)?;
        info!(path = %args.store.display(), sessions = d.sessions.len(), "loaded state store");
        return Ok(d);
    }
    let config = args.engine.config();
    let catalog = catalog_from(args.data.catalog.as_deref())?;
    let d = match &args.data.ratings {
        Some(_) => {
            let matrix = matrix_from(&args.data, &catalog, &config, DEFAULT_RATINGS_SEED)?;
            Dataset::with_matrix(catalog, config, matrix)?
        }
        None => Dataset::new(catalog, config)?,
    };
    save_state(&args.store, &d)?;
    info!(path = %args.store.display(), "created state store");
    Ok(d)
}

pub async fn run_serve(args: &ServeArgs) -> Result<()> {
    let addr = SocketAddr::new(args.host, args.port);
    let listener = tokio::net::TcpListener::bind(addr).await?;
    serve_until(args, listener, async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await
}

/// Serves on `listener` until `shutdown` resolves, then saves the state.
pub async fn serve_until(
    args: &ServeArgs,
    listener: tokio::net::TcpListener,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<()> {
    let dataset = open_store(args)?;
    let state = Arc::new(AppState::new(dataset, Some(args.store.clone())));
    info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, app(state.clone()))
        .with_graceful_shutdown(shutdown)
        .await?;
    state.persist().await?;
    info!("state saved, shutting down");
    Ok(())
}
