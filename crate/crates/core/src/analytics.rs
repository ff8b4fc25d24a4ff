//! Satisfaction reporting over star feedback, and a seeded synthetic
//! population that runs the whole elicitation workflow end to end.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use chrono::{DateTime, TimeZone, Utc};
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::datastore::Dataset;
use crate::domain::{
    EducationLevel, RatingMatrix, RatingScale, Requirement, RequirementId, Stakeholder,
};
use crate::error::{Error, Result};
use crate::session::{self, FeedbackRecord, SessionConfig, SessionId, MAX_STARS};

/// Satisfaction the original human study reported, in percent. Shown next
/// to simulated numbers for reference only; it is not reproducible here.
pub const HUMAN_STUDY_SATISFACTION_PERCENT: f64 = 57.0;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub participant_count: usize,
    /// Mean over records with at least one star; `None` when there are none.
    pub mean_stars: Option<f64>,
    pub rated_count: usize,
    pub no_idea_count: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OverallSummary {
    pub participant_count: usize,
    pub mean_stars: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SatisfactionReport {
    pub per_level: BTreeMap<EducationLevel, LevelSummary>,
    pub overall: OverallSummary,
    /// `mean_stars / 5 * 100`.
    pub normalized_percentage: Option<f64>,
}

#[derive(Default)]
struct Tally {
    participants: BTreeSet<SessionId>,
    star_sum: u64,
    rated: usize,
    no_idea: usize,
}

impl Tally {
    fn add(&mut self, r: &FeedbackRecord) {
        self.participants.insert(r.session_id.clone());
        if r.is_no_idea() {
            self.no_idea += 1;
        } else {
            self.rated += 1;
            self.star_sum += r.stars as u64;
        }
    }

    fn mean(&self) -> Option<f64> {
        (self.rated > 0).then(|| self.star_sum as f64 / self.rated as f64)
    }
}

/// Groups feedback by education level. Each distinct session counts as one
/// participant; zero-star ("no idea") records are counted but kept out of
/// every mean.
pub fn satisfaction_report(feedback: &[FeedbackRecord]) -> SatisfactionReport {
    let mut levels: BTreeMap<EducationLevel, Tally> = BTreeMap::new();
    let mut overall = Tally::default();
    for r in feedback {
        levels.entry(r.education_level).or_default().add(r);
        overall.add(r);
    }
    let per_level = EducationLevel::ALL
        .iter()
        .map(|level| {
            let summary = levels
                .get(level)
                .map_or_else(LevelSummary::default, |t| LevelSummary {
                    participant_count: t.participants.len(),
                    mean_stars: t.mean(),
                    rated_count: t.rated,
                    no_idea_count: t.no_idea,
                });
            (*level, summary)
        })
        .collect();
    let mean = overall.mean();
    SatisfactionReport {
        per_level,
        overall: OverallSummary {
            participant_count: overall.participants.len(),
            mean_stars: mean,
        },
        normalized_percentage: mean.map(|m| m / MAX_STARS as f64 * 100.0),
    }
}

impl SatisfactionReport {
    /// Plain-text table for terminals.
    pub fn to_table(&self) -> String {
        let fmt_mean = |m: Option<f64>| m.map_or_else(|| "-".to_owned(), |v| format!("{v:.3}"));
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<12} {:>12} {:>10} {:>8} {:>8}",
            "level", "participants", "mean", "rated", "no-idea"
        );
        for (level, s) in &self.per_level {
            let _ = writeln!(
                out,
                "{:<12} {:>12} {:>10} {:>8} {:>8}",
                level.as_str(),
                s.participant_count,
                fmt_mean(s.mean_stars),
                s.rated_count,
                s.no_idea_count
            );
        }
        let _ = writeln!(
            out,
            "{:<12} {:>12} {:>10}",
            "overall",
            self.overall.participant_count,
            fmt_mean(self.overall.mean_stars)
        );
        let _ = writeln!(
            out,
            "satisfaction: {}",
            self.normalized_percentage
                .map_or_else(|| "-".to_owned(), |p| format!("{p:.1}%"))
        );
        out
    }
}

/// Population shape for the simulator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub seed: u64,
    /// Stakeholders who rate the whole catalog before any session runs.
    pub core_size: usize,
    /// Simulated session participants.
    pub participants: usize,
    pub clusters: usize,
    /// Standard deviation of Gaussian rating noise, in scale units.
    pub noise_level: f64,
}

impl Default for PopulationSpec {
    fn default() -> Self {
        Self {
            seed: 42,
            core_size: 50,
            participants: 127,
            clusters: 2,
            noise_level: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulatedStakeholder {
    pub stakeholder: Stakeholder,
    pub cluster: usize,
    /// Latent score per catalog requirement, in catalog order.
    pub profile: Vec<i32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulatedPopulation {
    pub seed: u64,
    pub noise_level: f64,
    pub core: Vec<SimulatedStakeholder>,
    pub participants: Vec<SimulatedStakeholder>,
}

const POPULATION_STREAM: u64 = 0;
const CORE_NOISE_STREAM: u64 = 1;
const PARTICIPANT_STREAM_BASE: u64 = 1 << 32;
const BASELINE_STREAM_BASE: u64 = 2 << 32;
const PROFILE_REDRAWS: usize = 1000;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Education levels drawn in proportion 60 : 46 : 21.
fn draw_level(rng: &mut ChaCha8Rng) -> EducationLevel {
    match rng.random_range(0..127) {
        0..60 => EducationLevel::PhD,
        60..106 => EducationLevel::Master,
        _ => EducationLevel::Bachelor,
    }
}

/// Scores spread evenly over the scale: rank 0 gets the maximum, the last
/// rank the minimum.
/// Descending ranks mapped evenly onto the scale. The multiset is symmetric
/// about the midpoint, so a mirrored profile has the same score distribution.
fn spread(len: usize, scale: RatingScale) -> Vec<i32> {
    let steps = (scale.max() - scale.min()) as f64;
    let last = len.saturating_sub(1).max(1) as f64;
    (0..len)
        .map(|rank| scale.max() - (rank as f64 / last * steps).round() as i32)
        .collect()
}

fn shuffled_profile(rng: &mut ChaCha8Rng, base: &[i32], seeds: &[usize]) -> Vec<i32> {
    let mut profile = base.to_vec();
    for _ in 0..PROFILE_REDRAWS {
        profile.shuffle(rng);
        // A constant seed row gives no usable correlation.
        let first = seeds.first().map(|&i| profile[i]);
        if seeds.iter().any(|&i| Some(profile[i]) != first) {
            break;
        }
    }
    profile
}

impl SimulatedPopulation {
    /// Draws cluster profiles and assigns stakeholders to clusters round-robin.
    /// The second cluster mirrors the first across the scale midpoint; any
    /// further clusters are independent shuffles.
    pub fn generate(
        spec: PopulationSpec,
        catalog: &[Requirement],
        n_seeds: usize,
        scale: RatingScale,
    ) -> Result<Self> {
        let catalog_len = catalog.len();
        if catalog_len == 0 || spec.clusters == 0 || spec.participants == 0 {
            return Err(Error::Invalid(
                "population needs a catalog, at least one cluster and one participant".into(),
            ));
        }
        if !(spec.noise_level >= 0.0 && spec.noise_level.is_finite()) {
            return Err(Error::Invalid(
                "noise level must be finite and non-negative".into(),
            ));
        }
        let mut rng = stream(spec.seed, POPULATION_STREAM);
        let base = spread(catalog_len, scale);
        // With a dense core matrix every requirement ties on rater count, so
        // the seeds are the lowest-id requirements.
        let mut by_id: Vec<usize> = (0..catalog_len).collect();
        by_id.sort_by(|&a, &b| catalog[a].id.cmp(&catalog[b].id));
        let seed_positions = &by_id[..n_seeds.min(catalog_len)];
        let mut profiles: Vec<Vec<i32>> = Vec::with_capacity(spec.clusters);
        for c in 0..spec.clusters {
            let profile = if c == 1 {
                profiles[0]
                    .iter()
                    .map(|v| scale.min() + scale.max() - v)
                    .collect()
            } else {
                shuffled_profile(&mut rng, &base, seed_positions)
            };
            profiles.push(profile);
        }
        let make = |prefix: &str, i: usize, rng: &mut ChaCha8Rng| {
            let cluster = i % spec.clusters;
            SimulatedStakeholder {
                stakeholder: Stakeholder::new(format!("{prefix}{:05}", i + 1), draw_level(rng)),
                cluster,
                profile: profiles[cluster].clone(),
            }
        };
        let core = (0..spec.core_size)
            .map(|i| make("core-", i, &mut rng))
            .collect();
        let participants = (0..spec.participants)
            .map(|i| make("participant-", i, &mut rng))
            .collect();
        Ok(Self {
            seed: spec.seed,
            noise_level: spec.noise_level,
            core,
            participants,
        })
    }

    fn observe(
        &self,
        latent: i32,
        scale: RatingScale,
        noise: Option<&Normal<f64>>,
        rng: &mut ChaCha8Rng,
    ) -> i64 {
        let value = match noise {
            Some(n) => latent as f64 + n.sample(rng),
            None => latent as f64,
        };
        scale.clamp(value.round()) as i64
    }

    fn noise(&self) -> Option<Normal<f64>> {
        (self.noise_level > 0.0).then(|| Normal::new(0.0, self.noise_level).expect("validated"))
    }

    /// Dense matrix of the core stakeholders' noisy ratings.
    pub fn core_matrix(&self, catalog: &[Requirement], scale: RatingScale) -> Result<RatingMatrix> {
        let mut matrix = RatingMatrix::with_catalog(scale, catalog)?;
        let noise = self.noise();
        let mut rng = stream(self.seed, CORE_NOISE_STREAM);
        for member in &self.core {
            matrix.register_stakeholder(member.stakeholder.clone())?;
            for (req, &latent) in catalog.iter().zip(&member.profile) {
                let score = self.observe(latent, scale, noise.as_ref(), &mut rng);
                matrix.rate(&member.stakeholder.id, &req.id, score)?;
            }
        }
        Ok(matrix)
    }
}

/// Seeded, fully dense synthetic ratings: `size` stakeholders in three taste
/// clusters with Gaussian rating noise. Used as a stand-in dataset wherever a
/// realistic populated matrix is needed.
pub fn synthetic_ratings(
    catalog: &[Requirement],
    scale: RatingScale,
    size: usize,
    seed: u64,
) -> Result<RatingMatrix> {
    let spec = PopulationSpec {
        seed,
        core_size: size,
        participants: 1,
        clusters: 3,
        noise_level: 0.75,
    };
    SimulatedPopulation::generate(spec, catalog, 3, scale)?.core_matrix(catalog, scale)
}

/// How recommendations are chosen in a simulated study.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionMode {
    /// The collaborative-filtering session workflow.
    #[default]
    Collaborative,
    /// K requirements drawn uniformly from the whole catalog.
    RandomBaseline,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudyOutcome {
    pub dataset: Dataset,
    pub report: SatisfactionReport,
    /// Mean fraction of recommended items inside the participant's latent top-K.
    pub hit_rate: f64,
    pub feedback: Vec<FeedbackRecord>,
}

/// Maps a latent score linearly onto 1..=5 stars.
pub fn latent_stars(latent: i32, scale: RatingScale) -> u8 {
    let span = (scale.max() - scale.min()) as f64;
    let frac = (latent - scale.min()) as f64 / span;
    (1.0 + (MAX_STARS as f64 - 1.0) * frac)
        .round()
        .clamp(1.0, MAX_STARS as f64) as u8
}

/// Fraction of `chosen` whose latent score reaches the K-th best latent
/// score inside `pool`. Items tied with the K-th best count as hits.
pub fn latent_hit_fraction(chosen: &[usize], pool: &[usize], profile: &[i32], k: usize) -> f64 {
    if chosen.is_empty() {
        return 0.0;
    }
    let mut scores: Vec<i32> = pool.iter().map(|&i| profile[i]).collect();
    scores.sort_unstable_by(|a, b| b.cmp(a));
    let threshold = match scores.get(k.saturating_sub(1)) {
        Some(&t) if k > 0 => t,
        _ => i32::MIN,
    };
    let hits = chosen.iter().filter(|&&i| profile[i] >= threshold).count();
    hits as f64 / chosen.len() as f64
}

fn base_time() -> DateTime<Utc> {
    Utc.timestamp_opt(1_600_000_000, 0)
        .single()
        .expect("valid epoch")
}

/// Runs every simulated participant through the chosen selection mode.
///
/// In collaborative mode each participant's session runs against the core
/// stakeholders only; the completed session and its seed ratings are then
/// added to the returned dataset. Stars are the latent score of each
/// recommended requirement mapped onto 1..=5.
pub fn simulate_study(
    catalog: &[Requirement],
    config: &SessionConfig,
    population: &SimulatedPopulation,
    mode: SelectionMode,
) -> Result<StudyOutcome> {
    if catalog.is_empty() || population.participants.is_empty() {
        return Err(Error::Invalid(
            "simulation needs a catalog and participants".into(),
        ));
    }
    if population
        .core
        .iter()
        .chain(&population.participants)
        .any(|m| m.profile.len() != catalog.len())
    {
        return Err(Error::Invalid(
            "profile length differs from catalog size".into(),
        ));
    }
    let scale = config.scale;
    let core = population.core_matrix(catalog, scale)?;
    let mut dataset = Dataset::with_matrix(catalog.to_vec(), *config, core.clone())?;
    let index_of: BTreeMap<&RequirementId, usize> = catalog
        .iter()
        .enumerate()
        .map(|(i, r)| (&r.id, i))
        .collect();
    let noise = population.noise();
    let k = config.k_recommendations;

    let mut hit_sum = 0.0;
    let mut feedback = Vec::new();
    for (p, member) in population.participants.iter().enumerate() {
        let now = base_time() + chrono::Duration::seconds(p as i64);
        match mode {
            SelectionMode::Collaborative => {
                let mut rng = stream(population.seed, PARTICIPANT_STREAM_BASE + p as u64);
                let mut working = core.clone();
                let id = SessionId::new(format!("sim-{:06}", p + 1));
                let mut s = session::start_session(
                    id,
                    member.stakeholder.clone(),
                    config,
                    catalog,
                    &mut working,
                    now,
                )?;
                let ratings: Vec<(RequirementId, i64)> = s
                    .presented_seeds
                    .iter()
                    .map(|r| {
                        let latent = member.profile[index_of[r]];
                        (
                            r.clone(),
                            population.observe(latent, scale, noise.as_ref(), &mut rng),
                        )
                    })
                    .collect();
                session::submit_seed_ratings(&mut s, &mut working, &ratings, now)?;
                session::get_recommendations(&mut s, config, &working, now)?;
                let rec = s.recommendation.as_ref().expect("recommended");
                let chosen: Vec<usize> =
                    rec.items.iter().map(|p| index_of[&p.requirement]).collect();
                let seeds: BTreeSet<usize> =
                    s.presented_seeds.iter().map(|r| index_of[r]).collect();
                let pool: Vec<usize> = (0..catalog.len()).filter(|i| !seeds.contains(i)).collect();
                hit_sum += latent_hit_fraction(&chosen, &pool, &member.profile, k);
                let stars: Vec<(RequirementId, i64)> = chosen
                    .iter()
                    .map(|&i| {
                        (
                            catalog[i].id.clone(),
                            latent_stars(member.profile[i], scale) as i64,
                        )
                    })
                    .collect();
                session::submit_feedback(&mut s, &stars, now)?;
                feedback.extend(s.feedback.iter().cloned());

                dataset
                    .matrix
                    .register_stakeholder(member.stakeholder.clone())?;
                for (r, v) in &ratings {
                    dataset.matrix.rate(&member.stakeholder.id, r, *v)?;
                }
                dataset.sessions.push(s);
            }
            SelectionMode::RandomBaseline => {
                let mut rng = stream(population.seed, BASELINE_STREAM_BASE + p as u64);
                let amount = k.min(catalog.len());
                let chosen: Vec<usize> = index::sample(&mut rng, catalog.len(), amount).into_vec();
                let pool: Vec<usize> = (0..catalog.len()).collect();
                hit_sum += latent_hit_fraction(&chosen, &pool, &member.profile, k);
                let id = SessionId::new(format!("baseline-{:06}", p + 1));
                feedback.extend(chosen.iter().map(|&i| FeedbackRecord {
                    session_id: id.clone(),
                    requirement_id: catalog[i].id.clone(),
                    stars: latent_stars(member.profile[i], scale),
                    education_level: member.stakeholder.education_level,
                }));
            }
        }
    }
    Ok(StudyOutcome {
        report: satisfaction_report(&feedback),
        hit_rate: hit_sum / population.participants.len() as f64,
        dataset,
        feedback,
    })
}
