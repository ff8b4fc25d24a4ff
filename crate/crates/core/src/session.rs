//! Per-stakeholder elicitation sessions.
//!
//! A session moves strictly forward through
//! `SeedsPresented -> SeedsRated -> Recommended -> FeedbackCollected`.
//! Every transition validates its whole input before touching the session
//! or the matrix, so a rejected call leaves both unchanged.

use std::collections::BTreeSet;
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::cf::{self, PredictionForm, RecommendParams, Recommendation};
use crate::domain::{
    EducationLevel, RatingMatrix, RatingScale, RepertoryGrid, Requirement, RequirementId,
    Stakeholder,
};
use crate::error::{Error, Result};

/// Highest star count a stakeholder can give a recommendation.
pub const MAX_STARS: u8 = 5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub n_seeds: usize,
    pub m_neighbors: usize,
    pub k_recommendations: usize,
    pub scale: RatingScale,
    pub prediction_form: PredictionForm,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            n_seeds: 3,
            m_neighbors: 5,
            k_recommendations: 5,
            scale: RatingScale::default(),
            prediction_form: PredictionForm::Standard,
        }
    }
}

impl SessionConfig {
    pub fn params(&self) -> RecommendParams {
        RecommendParams {
            seeds: self.n_seeds,
            neighbors: self.m_neighbors,
            top_k: self.k_recommendations,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_seeds == 0 || self.m_neighbors == 0 || self.k_recommendations == 0 {
            return Err(Error::Invalid(
                "seed, neighbour and recommendation counts must all be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SessionId(String);

impl SessionId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SessionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SessionState {
    SeedsPresented,
    SeedsRated,
    Recommended,
    FeedbackCollected,
}

impl fmt::Display for SessionState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackRecord {
    pub session_id: SessionId,
    pub requirement_id: RequirementId,
    /// 0 means "no idea"; 1..=5 is ascending satisfaction.
    pub stars: u8,
    pub education_level: EducationLevel,
}

impl FeedbackRecord {
    pub fn is_no_idea(&self) -> bool {
        self.stars == 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: SessionId,
    pub stakeholder: Stakeholder,
    pub state: SessionState,
    pub presented_seeds: Vec<RequirementId>,
    pub recommendation: Option<Recommendation>,
    pub feedback: Vec<FeedbackRecord>,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
}

impl Session {
    fn expect_state(&self, expected: SessionState, operation: &'static str) -> Result<()> {
        if self.state != expected {
            return Err(Error::WrongState {
                operation,
                state: self.state.to_string(),
            });
        }
        Ok(())
    }

    /// The seed rows as a repertory grid in presentation order.
    pub fn seed_grid(&self, catalog: &[Requirement], scale: RatingScale) -> Result<RepertoryGrid> {
        RepertoryGrid::for_items(catalog, &self.presented_seeds, scale)
    }

    /// Checks the structural invariants of a stored session.
    pub fn validate(&self, n_seeds: usize) -> Result<()> {
        let distinct: BTreeSet<_> = self.presented_seeds.iter().collect();
        if self.presented_seeds.len() != n_seeds || distinct.len() != n_seeds {
            return Err(Error::Invalid(format!(
                "session `{}` must present {n_seeds} distinct seeds",
                self.id
            )));
        }
        let recommended = self.state >= SessionState::Recommended;
        if recommended != self.recommendation.is_some() {
            return Err(Error::Invalid(format!(
                "session `{}` recommendation does not match state {}",
                self.id, self.state
            )));
        }
        if self.state < SessionState::FeedbackCollected && !self.feedback.is_empty() {
            return Err(Error::Invalid(format!(
                "session `{}` holds feedback before it was collected",
                self.id
            )));
        }
        if let Some(rec) = &self.recommendation {
            for f in &self.feedback {
                if !rec.contains(&f.requirement_id)
                    || f.session_id != self.id
                    || f.stars > MAX_STARS
                {
                    return Err(Error::Invalid(format!(
                        "session `{}` holds inconsistent feedback",
                        self.id
                    )));
                }
            }
        }
        Ok(())
    }
}

/// The `n` most-rated catalog requirements, ties by ascending id. On an
/// empty matrix the first `n` in catalog order are used.
pub fn select_seeds(
    catalog: &[Requirement],
    matrix: &RatingMatrix,
    n: usize,
) -> Result<Vec<RequirementId>> {
    if catalog.len() < n {
        return Err(Error::CatalogTooSmall {
            needed: n,
            available: catalog.len(),
        });
    }
    if matrix.is_empty() {
        return Ok(catalog.iter().take(n).map(|r| r.id.clone()).collect());
    }
    let mut counted: Vec<(usize, &RequirementId)> = catalog
        .iter()
        .map(|r| (matrix.rater_count(&r.id), &r.id))
        .collect();
    counted.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(b.1)));
    Ok(counted
        .into_iter()
        .take(n)
        .map(|(_, id)| id.clone())
        .collect())
}

/// Opens a session and presents the seed requirements.
///
/// The stakeholder is registered in `matrix` if needed. A stakeholder who
/// already holds ratings is rejected so the seed ratings are the only
/// entries the session adds.
pub fn start_session(
    id: SessionId,
    stakeholder: Stakeholder,
    config: &SessionConfig,
    catalog: &[Requirement],
    matrix: &mut RatingMatrix,
    now: DateTime<Utc>,
) -> Result<Session> {
    config.validate()?;
    let presented_seeds = select_seeds(catalog, matrix, config.n_seeds)?;
    match matrix.stakeholder(&stakeholder.id) {
        Some(_) if matrix.rating_count(&stakeholder.id) > 0 => {
            return Err(Error::StakeholderHasRatings(stakeholder.id.to_string()));
        }
        Some(existing) if existing != &stakeholder => {
            return Err(Error::DuplicateStakeholder(stakeholder.id.to_string()));
        }
        Some(_) => {}
        None => matrix.register_stakeholder(stakeholder.clone())?,
    }
    Ok(Session {
        id,
        stakeholder,
        state: SessionState::SeedsPresented,
        presented_seeds,
        recommendation: None,
        feedback: Vec::new(),
        created_at: now,
        updated_at: now,
    })
}

/// Writes the stakeholder's seed ratings into the shared matrix.
pub fn submit_seed_ratings(
    session: &mut Session,
    matrix: &mut RatingMatrix,
    ratings: &[(RequirementId, i64)],
    now: DateTime<Utc>,
) -> Result<()> {
    session.expect_state(SessionState::SeedsPresented, "submit_seed_ratings")?;
    let presented: BTreeSet<_> = session.presented_seeds.iter().collect();
    let mut rated = BTreeSet::new();
    for (req, _) in ratings {
        if !rated.insert(req) {
            return Err(Error::WrongItems);
        }
    }
    if rated != presented {
        return Err(Error::WrongItems);
    }
    let scale = matrix.scale();
    for (_, score) in ratings {
        scale.check(*score)?;
    }
    for (req, score) in ratings {
        matrix.rate(&session.stakeholder.id, req, *score)?;
    }
    session.state = SessionState::SeedsRated;
    session.updated_at = now;
    Ok(())
}

/// Runs the recommender for the session's stakeholder.
pub fn get_recommendations(
    session: &mut Session,
    config: &SessionConfig,
    matrix: &RatingMatrix,
    now: DateTime<Utc>,
) -> Result<()> {
    session.expect_state(SessionState::SeedsRated, "get_recommendations")?;
    let rec = cf::recommend(
        matrix,
        &session.stakeholder.id,
        config.params(),
        config.prediction_form,
    )?;
    session.recommendation = Some(rec);
    session.state = SessionState::Recommended;
    session.updated_at = now;
    Ok(())
}

/// Records star feedback for some or all recommended requirements.
pub fn submit_feedback(
    session: &mut Session,
    feedback: &[(RequirementId, i64)],
    now: DateTime<Utc>,
) -> Result<()> {
    session.expect_state(SessionState::Recommended, "submit_feedback")?;
    let rec = session
        .recommendation
        .as_ref()
        .expect("recommended session holds a recommendation");
    let mut seen = BTreeSet::new();
    for (req, stars) in feedback {
        if !rec.contains(req) {
            return Err(Error::UnknownRecommendedItem(req.to_string()));
        }
        if !(0..=MAX_STARS as i64).contains(stars) {
            return Err(Error::StarsOutOfRange(*stars));
        }
        if !seen.insert(req) {
            return Err(Error::DuplicateItem(req.to_string()));
        }
    }
    session.feedback = feedback
        .iter()
        .map(|(req, stars)| FeedbackRecord {
            session_id: session.id.clone(),
            requirement_id: req.clone(),
            stars: *stars as u8,
            education_level: session.stakeholder.education_level,
        })
        .collect();
    session.state = SessionState::FeedbackCollected;
    session.updated_at = now;
    Ok(())
}
