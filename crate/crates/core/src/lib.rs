//! Requirements elicitation with a collaborative-filtering recommender.
//!
//! Stakeholders rate a few seed requirements on a bipolar repertory grid.
//! Their ratings are correlated with every other stakeholder's (Pearson over
//! co-rated requirements), the most similar stakeholders' deviations are
//! combined into Resnick predictions, and the best-predicted requirements are
//! recommended back. Star feedback on those recommendations is aggregated
//! per education level.
//!
//! - [`domain`]: requirements, stakeholders, rating matrix, repertory grid
//! - [`cf`]: similarity, neighbourhoods, prediction, ranking
//! - [`session`]: the per-stakeholder elicitation state machine
//! - [`datastore`]: CSV ingestion and the JSON state store
//! - [`analytics`]: satisfaction reports and the population simulator

pub mod analytics;
pub mod cf;
pub mod datastore;
pub mod domain;
pub mod error;
pub mod session;

pub use cf::{
    pearson_rows, pearson_similarity, predict_rating, recommend, select_neighbors, NeighborSet,
    Prediction, PredictionForm, RatingSource, RealRatings, RecommendParams, Recommendation,
    SimilarityScore,
};
pub use datastore::Dataset;
pub use domain::{
    ConstructPair, EducationLevel, RatingMatrix, RatingScale, RepertoryGrid, Requirement,
    RequirementId, Stakeholder, StakeholderId,
};
pub use error::{Error, Result};
pub use session::{FeedbackRecord, Session, SessionConfig, SessionId, SessionState};
