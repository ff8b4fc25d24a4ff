//! User-based collaborative filtering: Pearson similarity over co-rated
//! requirements, top-M neighbourhoods, Resnick mean-offset prediction and
//! top-K ranking.
//!
//! Every function here is a pure function of its inputs. The engine reads
//! ratings through [`RatingSource`], so the integer [`RatingMatrix`] and the
//! real-valued [`RealRatings`] view share one implementation.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::domain::{RatingMatrix, RatingScale, RequirementId, StakeholderId};
use crate::error::{Error, Result};

/// One stakeholder's ratings keyed by requirement.
pub type Row = BTreeMap<RequirementId, f64>;

/// Sums of squared deviations at or below this fraction of the co-rated
/// energy count as zero variance.
const DEGENERACY_EPS: f64 = 1e-20;

/// Read access to a rating matrix.
pub trait RatingSource {
    fn scale(&self) -> RatingScale;
    /// Registered stakeholders, ascending.
    fn stakeholder_ids(&self) -> Vec<StakeholderId>;
    /// Registered requirements, ascending.
    fn requirement_ids(&self) -> Vec<RequirementId>;
    fn has_requirement(&self, id: &RequirementId) -> bool;
    /// `None` when the stakeholder is not registered.
    fn row(&self, stakeholder: &StakeholderId) -> Option<Row>;
}

impl RatingSource for RatingMatrix {
    fn scale(&self) -> RatingScale {
        RatingMatrix::scale(self)
    }

    fn stakeholder_ids(&self) -> Vec<StakeholderId> {
        self.stakeholders().map(|s| s.id.clone()).collect()
    }

    fn requirement_ids(&self) -> Vec<RequirementId> {
        RatingMatrix::requirement_ids(self).cloned().collect()
    }

    fn has_requirement(&self, id: &RequirementId) -> bool {
        self.contains_requirement(id)
    }

    fn row(&self, stakeholder: &StakeholderId) -> Option<Row> {
        if !self.contains_stakeholder(stakeholder) {
            return None;
        }
        Some(
            RatingMatrix::row(self, stakeholder)
                .map(|(r, s)| (r.clone(), s as f64))
                .collect(),
        )
    }
}

/// Real-valued ratings that need not sit on an integer scale, e.g. affinely
/// transformed copies of a matrix. Predictions are still clamped to `scale`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RealRatings {
    pub scale: RatingScale,
    pub requirements: Vec<RequirementId>,
    pub rows: BTreeMap<StakeholderId, Row>,
}

impl RealRatings {
    pub fn from_matrix(matrix: &RatingMatrix) -> Self {
        Self {
            scale: matrix.scale(),
            requirements: RatingSource::requirement_ids(matrix),
            rows: RatingSource::stakeholder_ids(matrix)
                .into_iter()
                .map(|s| {
                    let row = RatingSource::row(matrix, &s).unwrap_or_default();
                    (s, row)
                })
                .collect(),
        }
    }

    /// Replaces every rating `r` of `stakeholder` by `alpha * r + beta`.
    pub fn transform(&mut self, stakeholder: &StakeholderId, alpha: f64, beta: f64) {
        if let Some(row) = self.rows.get_mut(stakeholder) {
            for v in row.values_mut() {
                *v = alpha * *v + beta;
            }
        }
    }
}

impl RatingSource for RealRatings {
    fn scale(&self) -> RatingScale {
        self.scale
    }

    fn stakeholder_ids(&self) -> Vec<StakeholderId> {
        self.rows.keys().cloned().collect()
    }

    fn requirement_ids(&self) -> Vec<RequirementId> {
        let mut ids = self.requirements.clone();
        ids.sort();
        ids.dedup();
        ids
    }

    fn has_requirement(&self, id: &RequirementId) -> bool {
        self.requirements.contains(id)
    }

    fn row(&self, stakeholder: &StakeholderId) -> Option<Row> {
        self.rows.get(stakeholder).cloned()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityScore {
    pub neighbor: StakeholderId,
    /// In [-1, 1]; 0 when the similarity is degenerate.
    pub value: f64,
    pub corated_count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeighborSet {
    pub target: StakeholderId,
    /// Descending by value, ties by ascending id.
    pub neighbors: Vec<SimilarityScore>,
}

impl NeighborSet {
    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }
}

/// Which Resnick variant to evaluate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictionForm {
    /// Target mean plus the similarity-weighted neighbour deviation.
    #[default]
    Standard,
    /// Weighted neighbour deviation only, with no target-mean offset.
    PaperLiteral,
}

impl PredictionForm {
    pub fn as_str(self) -> &'static str {
        match self {
            PredictionForm::Standard => "standard",
            PredictionForm::PaperLiteral => "paper-literal",
        }
    }
}

impl fmt::Display for PredictionForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PredictionForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(PredictionForm::Standard),
            "paper-literal" => Ok(PredictionForm::PaperLiteral),
            other => Err(Error::Invalid(format!("unknown prediction form `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub requirement: RequirementId,
    pub raw_value: f64,
    pub clamped_value: f64,
    /// Neighbours with non-zero similarity that rated the requirement.
    /// Zero marks the target-mean fallback.
    pub neighbor_support: usize,
}

impl Prediction {
    pub fn is_fallback(&self) -> bool {
        self.neighbor_support == 0
    }
}

/// Seeds shown first, neighbourhood size, and list length.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecommendParams {
    pub seeds: usize,
    pub neighbors: usize,
    pub top_k: usize,
}

impl Default for RecommendParams {
    fn default() -> Self {
        Self {
            seeds: 3,
            neighbors: 5,
            top_k: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub target: StakeholderId,
    pub items: Vec<Prediction>,
    pub parameters: RecommendParams,
}

impl Recommendation {
    pub fn contains(&self, requirement: &RequirementId) -> bool {
        self.items.iter().any(|p| &p.requirement == requirement)
    }
}

fn row_mean(row: &Row) -> Option<f64> {
    if row.is_empty() {
        None
    } else {
        Some(row.values().sum::<f64>() / row.len() as f64)
    }
}

/// Pearson correlation of two rating rows over their co-rated requirements,
/// each row centred on its own full mean. Returns `(value, corated_count)`;
/// value is 0 when fewer than two requirements are co-rated or either side
/// has no variance on them.
///
/// Passing the same row twice gives the self-correlation (1 for any row
/// with variance), which [`pearson_similarity`] refuses to compute.
pub fn pearson_rows(a: &Row, b: &Row) -> (f64, usize) {
    let (Some(mean_a), Some(mean_b)) = (row_mean(a), row_mean(b)) else {
        return (0.0, 0);
    };
    let mut cross = 0.0;
    let mut ss_a = 0.0;
    let mut ss_b = 0.0;
    let mut energy_a = 0.0;
    let mut energy_b = 0.0;
    let mut count = 0;
    for (item, &ra) in a {
        let Some(&rb) = b.get(item) else { continue };
        let da = ra - mean_a;
        let db = rb - mean_b;
        cross += da * db;
        ss_a += da * da;
        ss_b += db * db;
        energy_a += ra * ra;
        energy_b += rb * rb;
        count += 1;
    }
    if count < 2
        || ss_a <= DEGENERACY_EPS * (1.0 + energy_a)
        || ss_b <= DEGENERACY_EPS * (1.0 + energy_b)
    {
        return (0.0, count);
    }
    let value = cross / (ss_a.sqrt() * ss_b.sqrt());
    // Rounding residue of an uncorrelated pair must not count as support.
    if value.abs() <= TIE_EPSILON {
        return (0.0, count);
    }
    (value.clamp(-1.0, 1.0), count)
}

fn require_row<S: RatingSource + ?Sized>(source: &S, id: &StakeholderId) -> Result<Row> {
    source
        .row(id)
        .ok_or_else(|| Error::UnknownStakeholder(id.to_string()))
}

pub fn pearson_similarity<S: RatingSource + ?Sized>(
    source: &S,
    a: &StakeholderId,
    b: &StakeholderId,
) -> Result<SimilarityScore> {
    let row_a = require_row(source, a)?;
    let row_b = require_row(source, b)?;
    if a == b {
        return Err(Error::SelfSimilarity(a.to_string()));
    }
    let (value, corated_count) = pearson_rows(&row_a, &row_b);
    Ok(SimilarityScore {
        neighbor: b.clone(),
        value,
        corated_count,
    })
}

/// Values closer than this rank as ties, so rounding noise between
/// mathematically equal scores cannot override the id tie-break.
const TIE_EPSILON: f64 = 1e-12;

fn tie_key(v: f64) -> i64 {
    (v / TIE_EPSILON).round() as i64
}

fn by_similarity(x: &SimilarityScore, y: &SimilarityScore) -> Ordering {
    tie_key(y.value)
        .cmp(&tie_key(x.value))
        .then_with(|| x.neighbor.cmp(&y.neighbor))
}

/// The `m` stakeholders most similar to `target`.
pub fn select_neighbors<S: RatingSource + ?Sized>(
    source: &S,
    target: &StakeholderId,
    m: usize,
) -> Result<NeighborSet> {
    if m == 0 {
        return Err(Error::Invalid(
            "neighbourhood size must be at least 1".into(),
        ));
    }
    let target_row = require_row(source, target)?;
    let mut scores: Vec<SimilarityScore> = source
        .stakeholder_ids()
        .into_iter()
        .filter(|id| id != target)
        .map(|id| {
            let row = source.row(&id).unwrap_or_default();
            let (value, corated_count) = pearson_rows(&target_row, &row);
            SimilarityScore {
                neighbor: id,
                value,
                corated_count,
            }
        })
        .collect();
    scores.sort_by(by_similarity);
    scores.truncate(m);
    Ok(NeighborSet {
        target: target.clone(),
        neighbors: scores,
    })
}

struct NeighborRow {
    similarity: f64,
    row: Row,
    mean: Option<f64>,
}

fn resnick(
    target_mean: f64,
    item: &RequirementId,
    neighbors: &[NeighborRow],
    form: PredictionForm,
    scale: RatingScale,
) -> Prediction {
    let mut weighted = 0.0;
    let mut norm = 0.0;
    let mut support = 0;
    for n in neighbors {
        let (Some(&rating), Some(mean)) = (n.row.get(item), n.mean) else {
            continue;
        };
        weighted += (rating - mean) * n.similarity;
        norm += n.similarity.abs();
        if n.similarity != 0.0 {
            support += 1;
        }
    }
    let (raw_value, neighbor_support) = if norm == 0.0 {
        (target_mean, 0)
    } else {
        let offset = weighted / norm;
        match form {
            PredictionForm::Standard => (target_mean + offset, support),
            PredictionForm::PaperLiteral => (offset, support),
        }
    };
    Prediction {
        requirement: item.clone(),
        raw_value,
        clamped_value: scale.clamp(raw_value),
        neighbor_support,
    }
}

fn neighbor_rows<S: RatingSource + ?Sized>(
    source: &S,
    neighbors: &NeighborSet,
) -> Vec<NeighborRow> {
    neighbors
        .neighbors
        .iter()
        .map(|n| {
            let row = source.row(&n.neighbor).unwrap_or_default();
            let mean = row_mean(&row);
            NeighborRow {
                similarity: n.value,
                row,
                mean,
            }
        })
        .collect()
}

/// Resnick prediction of `target`'s score for `item` from `neighbors`.
///
/// Neighbours that did not rate `item` are skipped. When none remain, or
/// their similarities are all zero, the target's mean is returned with
/// `neighbor_support == 0`.
pub fn predict_rating<S: RatingSource + ?Sized>(
    source: &S,
    target: &StakeholderId,
    item: &RequirementId,
    neighbors: &NeighborSet,
    form: PredictionForm,
) -> Result<Prediction> {
    let target_row = require_row(source, target)?;
    if !source.has_requirement(item) {
        return Err(Error::UnknownRequirement(item.to_string()));
    }
    if target_row.contains_key(item) {
        return Err(Error::AlreadyRated {
            stakeholder: target.to_string(),
            requirement: item.to_string(),
        });
    }
    let target_mean =
        row_mean(&target_row).ok_or_else(|| Error::TargetHasNoRatings(target.to_string()))?;
    let rows = neighbor_rows(source, neighbors);
    Ok(resnick(target_mean, item, &rows, form, source.scale()))
}

fn by_prediction(x: &Prediction, y: &Prediction) -> Ordering {
    tie_key(y.clamped_value)
        .cmp(&tie_key(x.clamped_value))
        .then_with(|| x.is_fallback().cmp(&y.is_fallback()))
        .then_with(|| x.requirement.cmp(&y.requirement))
}

/// Full pipeline: neighbourhood, predictions for every requirement the
/// target has not rated, and the top `params.top_k` of them.
pub fn recommend<S: RatingSource + ?Sized>(
    source: &S,
    target: &StakeholderId,
    params: RecommendParams,
    form: PredictionForm,
) -> Result<Recommendation> {
    if params.top_k == 0 {
        return Err(Error::Invalid("top_k must be at least 1".into()));
    }
    let target_row = require_row(source, target)?;
    let target_mean =
        row_mean(&target_row).ok_or_else(|| Error::TargetHasNoRatings(target.to_string()))?;
    let neighbors = select_neighbors(source, target, params.neighbors)?;
    let rows = neighbor_rows(source, &neighbors);
    let scale = source.scale();

    let mut items: Vec<Prediction> = source
        .requirement_ids()
        .into_iter()
        .filter(|id| !target_row.contains_key(id))
        .map(|id| resnick(target_mean, &id, &rows, form, scale))
        .collect();
    items.sort_by(by_prediction);
    items.truncate(params.top_k);
    Ok(Recommendation {
        target: target.clone(),
        items,
        parameters: params,
    })
}
