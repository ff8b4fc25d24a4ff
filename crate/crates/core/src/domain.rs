//! Shared domain types: requirements with their bipolar construct pair,
//! stakeholders, the rating scale, the sparse rating matrix and the
//! repertory grid used to collect ratings.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

macro_rules! id_newtype {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }
    };
}

id_newtype!(
    /// Opaque requirement identifier, unique within a catalog.
    RequirementId
);
id_newtype!(
    /// Opaque stakeholder identifier, unique within a dataset.
    StakeholderId
);

/// The two opposite poles of a grid row. Low scores lean to the left pole,
/// high scores to the right pole.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstructPair {
    pub left_pole: String,
    pub right_pole: String,
}

impl ConstructPair {
    pub fn new(left_pole: impl Into<String>, right_pole: impl Into<String>) -> Result<Self> {
        let pair = Self {
            left_pole: left_pole.into(),
            right_pole: right_pole.into(),
        };
        pair.validate()?;
        Ok(pair)
    }

    pub fn validate(&self) -> Result<()> {
        if self.left_pole.trim().is_empty() || self.right_pole.trim().is_empty() {
            return Err(Error::Invalid("construct poles must be non-empty".into()));
        }
        if self.left_pole == self.right_pole {
            return Err(Error::Invalid(format!(
                "construct poles must differ (both `{}`)",
                self.left_pole
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Requirement {
    pub id: RequirementId,
    pub label: String,
    #[serde(default)]
    pub description: String,
    pub construct_pair: ConstructPair,
}

impl Requirement {
    pub fn new(
        id: impl Into<RequirementId>,
        label: impl Into<String>,
        description: impl Into<String>,
        construct_pair: ConstructPair,
    ) -> Result<Self> {
        let req = Self {
            id: id.into(),
            label: label.into(),
            description: description.into(),
            construct_pair,
        };
        req.validate()?;
        Ok(req)
    }

    pub fn validate(&self) -> Result<()> {
        if self.id.as_str().trim().is_empty() {
            return Err(Error::Invalid("requirement id must be non-empty".into()));
        }
        if self.label.trim().is_empty() {
            return Err(Error::Invalid(format!(
                "requirement `{}` has an empty label",
                self.id
            )));
        }
        self.construct_pair.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EducationLevel {
    PhD,
    Master,
    Bachelor,
    Unspecified,
}

impl EducationLevel {
    pub const ALL: [EducationLevel; 4] = [
        EducationLevel::PhD,
        EducationLevel::Master,
        EducationLevel::Bachelor,
        EducationLevel::Unspecified,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EducationLevel::PhD => "PhD",
            EducationLevel::Master => "Master",
            EducationLevel::Bachelor => "Bachelor",
            EducationLevel::Unspecified => "Unspecified",
        }
    }
}

impl fmt::Display for EducationLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EducationLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "phd" | "ph.d." | "ph.d" => Ok(EducationLevel::PhD),
            "master" => Ok(EducationLevel::Master),
            "bachelor" => Ok(EducationLevel::Bachelor),
            "unspecified" | "" => Ok(EducationLevel::Unspecified),
            other => Err(Error::Invalid(format!("unknown education level `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stakeholder {
    pub id: StakeholderId,
    pub education_level: EducationLevel,
}

impl Stakeholder {
    pub fn new(id: impl Into<StakeholderId>, education_level: EducationLevel) -> Self {
        Self {
            id: id.into(),
            education_level,
        }
    }
}

/// Inclusive integer rating range.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingScale {
    min: i32,
    max: i32,
}

impl RatingScale {
    pub fn new(min: i32, max: i32) -> Result<Self> {
        if min >= max {
            return Err(Error::Invalid(format!(
                "rating scale needs min < max (got {min}..={max})"
            )));
        }
        Ok(Self { min, max })
    }

    pub fn min(&self) -> i32 {
        self.min
    }

    pub fn max(&self) -> i32 {
        self.max
    }

    pub fn contains(&self, score: i64) -> bool {
        (self.min as i64..=self.max as i64).contains(&score)
    }

    pub fn check(&self, score: i64) -> Result<i32> {
        if self.contains(score) {
            Ok(score as i32)
        } else {
            Err(Error::OutOfScale {
                score,
                min: self.min,
                max: self.max,
            })
        }
    }

    pub fn clamp(&self, value: f64) -> f64 {
        value.max(self.min as f64).min(self.max as f64)
    }

    /// Number of distinct cells a grid row offers.
    pub fn cells(&self) -> usize {
        (self.max - self.min + 1) as usize
    }
}

impl Default for RatingScale {
    fn default() -> Self {
        Self { min: 1, max: 5 }
    }
}

/// Sparse stakeholder x requirement score store.
///
/// Stakeholders and requirements must be registered before they can be
/// rated. Every stored score lies inside the matrix scale and each
/// (stakeholder, requirement) pair holds at most one score.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RatingMatrix {
    scale: RatingScale,
    stakeholders: BTreeMap<StakeholderId, Stakeholder>,
    requirements: BTreeSet<RequirementId>,
    rows: BTreeMap<StakeholderId, BTreeMap<RequirementId, i32>>,
}

impl RatingMatrix {
    pub fn new(scale: RatingScale) -> Self {
        Self {
            scale,
            ..Default::default()
        }
    }

    /// Empty matrix with every catalog requirement registered.
    pub fn with_catalog(scale: RatingScale, catalog: &[Requirement]) -> Result<Self> {
        let mut matrix = Self::new(scale);
        for req in catalog {
            matrix.register_requirement(req.id.clone())?;
        }
        Ok(matrix)
    }

    pub fn scale(&self) -> RatingScale {
        self.scale
    }

    pub fn register_stakeholder(&mut self, stakeholder: Stakeholder) -> Result<()> {
        if self.stakeholders.contains_key(&stakeholder.id) {
            return Err(Error::DuplicateStakeholder(stakeholder.id.to_string()));
        }
        self.stakeholders
            .insert(stakeholder.id.clone(), stakeholder);
        Ok(())
    }

    pub fn register_requirement(&mut self, id: RequirementId) -> Result<()> {
        if !self.requirements.insert(id.clone()) {
            return Err(Error::DuplicateId(id.to_string()));
        }
        Ok(())
    }

    /// Stores `score`, returning the previous score for the pair if any.
    pub fn rate(
        &mut self,
        stakeholder: &StakeholderId,
        requirement: &RequirementId,
        score: i64,
    ) -> Result<Option<i32>> {
        if !self.stakeholders.contains_key(stakeholder) {
            return Err(Error::UnknownStakeholder(stakeholder.to_string()));
        }
        if !self.requirements.contains(requirement) {
            return Err(Error::UnknownRequirement(requirement.to_string()));
        }
        let score = self.scale.check(score)?;
        Ok(self
            .rows
            .entry(stakeholder.clone())
            .or_default()
            .insert(requirement.clone(), score))
    }

    pub fn score(&self, stakeholder: &StakeholderId, requirement: &RequirementId) -> Option<i32> {
        self.rows.get(stakeholder)?.get(requirement).copied()
    }

    pub fn contains_stakeholder(&self, id: &StakeholderId) -> bool {
        self.stakeholders.contains_key(id)
    }

    pub fn contains_requirement(&self, id: &RequirementId) -> bool {
        self.requirements.contains(id)
    }

    pub fn stakeholder(&self, id: &StakeholderId) -> Option<&Stakeholder> {
        self.stakeholders.get(id)
    }

    /// Registered stakeholders in ascending id order.
    pub fn stakeholders(&self) -> impl Iterator<Item = &Stakeholder> {
        self.stakeholders.values()
    }

    /// Registered requirements in ascending id order.
    pub fn requirement_ids(&self) -> impl Iterator<Item = &RequirementId> {
        self.requirements.iter()
    }

    /// The stakeholder's ratings keyed by requirement; empty when none.
    pub fn row(&self, stakeholder: &StakeholderId) -> impl Iterator<Item = (&RequirementId, i32)> {
        self.rows
            .get(stakeholder)
            .into_iter()
            .flat_map(|row| row.iter().map(|(r, s)| (r, *s)))
    }

    pub fn rating_count(&self, stakeholder: &StakeholderId) -> usize {
        self.rows.get(stakeholder).map_or(0, BTreeMap::len)
    }

    /// How many stakeholders rated `requirement`.
    pub fn rater_count(&self, requirement: &RequirementId) -> usize {
        self.rows
            .values()
            .filter(|row| row.contains_key(requirement))
            .count()
    }

    /// All entries as (stakeholder, requirement, score), ordered by
    /// stakeholder then requirement.
    pub fn entries(&self) -> impl Iterator<Item = (&StakeholderId, &RequirementId, i32)> {
        self.rows
            .iter()
            .flat_map(|(s, row)| row.iter().map(move |(r, v)| (s, r, *v)))
    }

    /// Total number of stored scores.
    pub fn len(&self) -> usize {
        self.rows.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Arithmetic mean over every requirement the stakeholder rated.
    pub fn mean_rating(&self, stakeholder: &StakeholderId) -> Result<f64> {
        if !self.contains_stakeholder(stakeholder) {
            return Err(Error::UnknownStakeholder(stakeholder.to_string()));
        }
        match self.rows.get(stakeholder) {
            Some(row) if !row.is_empty() => {
                Ok(row.values().map(|&s| s as f64).sum::<f64>() / row.len() as f64)
            }
            _ => Err(Error::NoRatings(stakeholder.to_string())),
        }
    }

    /// Requirements rated by both `a` and `b`. Unknown ids give the empty set.
    pub fn corated_items(&self, a: &StakeholderId, b: &StakeholderId) -> BTreeSet<RequirementId> {
        match (self.rows.get(a), self.rows.get(b)) {
            (Some(ra), Some(rb)) => ra.keys().filter(|r| rb.contains_key(*r)).cloned().collect(),
            _ => BTreeSet::new(),
        }
    }
}

/// Which side of a construct pair a score leans to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PoleLean {
    Left,
    Neutral,
    Right,
}

/// A repertory grid: requirements as rows, each framed by its construct
/// pair, and per-stakeholder partial response rows.
#[derive(Clone, Debug, PartialEq)]
pub struct RepertoryGrid {
    requirements: Vec<Requirement>,
    scale: RatingScale,
    responses: BTreeMap<StakeholderId, BTreeMap<RequirementId, i32>>,
}

impl RepertoryGrid {
    /// Rows are kept in the given order.
    pub fn new(requirements: Vec<Requirement>, scale: RatingScale) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for req in &requirements {
            req.validate()?;
            if !seen.insert(&req.id) {
                return Err(Error::DuplicateId(req.id.to_string()));
            }
        }
        Ok(Self {
            requirements,
            scale,
            responses: BTreeMap::new(),
        })
    }

    /// Grid restricted to `ids`, in the order given.
    pub fn for_items(
        catalog: &[Requirement],
        ids: &[RequirementId],
        scale: RatingScale,
    ) -> Result<Self> {
        let rows = ids
            .iter()
            .map(|id| {
                catalog
                    .iter()
                    .find(|r| &r.id == id)
                    .cloned()
                    .ok_or_else(|| Error::UnknownRequirement(id.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(rows, scale)
    }

    pub fn rows(&self) -> &[Requirement] {
        &self.requirements
    }

    pub fn scale(&self) -> RatingScale {
        self.scale
    }

    pub fn respond(
        &mut self,
        stakeholder: &StakeholderId,
        requirement: &RequirementId,
        score: i64,
    ) -> Result<()> {
        if !self.requirements.iter().any(|r| &r.id == requirement) {
            return Err(Error::UnknownRequirement(requirement.to_string()));
        }
        let score = self.scale.check(score)?;
        self.responses
            .entry(stakeholder.clone())
            .or_default()
            .insert(requirement.clone(), score);
        Ok(())
    }

    pub fn response(&self, stakeholder: &StakeholderId) -> Option<&BTreeMap<RequirementId, i32>> {
        self.responses.get(stakeholder)
    }

    /// True once the stakeholder scored every row.
    pub fn is_complete(&self, stakeholder: &StakeholderId) -> bool {
        self.responses
            .get(stakeholder)
            .is_some_and(|row| self.requirements.iter().all(|r| row.contains_key(&r.id)))
    }

    pub fn lean(&self, score: i32) -> PoleLean {
        // Compare 2*score against min+max to avoid halves.
        let twice = 2 * score as i64;
        let mid = self.scale.min as i64 + self.scale.max as i64;
        match twice.cmp(&mid) {
            std::cmp::Ordering::Less => PoleLean::Left,
            std::cmp::Ordering::Equal => PoleLean::Neutral,
            std::cmp::Ordering::Greater => PoleLean::Right,
        }
    }
}
