//! Catalog and rating ingestion from CSV, the in-memory [`Dataset`], and the
//! versioned JSON state store.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::domain::{
    ConstructPair, EducationLevel, RatingMatrix, RatingScale, Requirement, RequirementId,
    Stakeholder, StakeholderId,
};
use crate::error::{Error, Result};
use crate::session::{self, FeedbackRecord, Session, SessionConfig, SessionId};

pub const SCHEMA_VERSION: u64 = 1;

const SEED_CATALOG: &str = include_str!("../data/catalog.csv");

/// The bundled twelve-requirement catalog for a university enrolment system.
pub fn seed_catalog() -> Vec<Requirement> {
    load_catalog(SEED_CATALOG.as_bytes()).expect("bundled catalog is valid")
}

fn parse_err(line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    parse_err(line, e.to_string())
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| parse_err(1, format!("missing column `{name}`")))
}

/// Parses a catalog CSV with header `id,label,left_pole,right_pole[,description]`.
/// Requirements are returned in file order.
pub fn load_catalog<R: Read>(source: R) -> Result<Vec<Requirement>> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers().map_err(csv_err)?.clone();
    // An empty file has no header row at all.
    if headers.is_empty() {
        return Ok(Vec::new());
    }
    let id_col = column(&headers, "id")?;
    let label_col = column(&headers, "label")?;
    let left_col = column(&headers, "left_pole")?;
    let right_col = column(&headers, "right_pole")?;
    let desc_col = headers.iter().position(|h| h.trim() == "description");

    let mut seen = BTreeSet::new();
    let mut catalog = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |col: usize, name: &str| {
            record
                .get(col)
                .map(str::to_owned)
                .ok_or_else(|| parse_err(line, format!("missing `{name}`")))
        };
        let id = field(id_col, "id")?;
        let pair = ConstructPair::new(
            field(left_col, "left_pole")?,
            field(right_col, "right_pole")?,
        )
        .map_err(|e| parse_err(line, e.to_string()))?;
        let description = desc_col
            .and_then(|c| record.get(c))
            .unwrap_or_default()
            .to_owned();
        let req = Requirement::new(id.as_str(), field(label_col, "label")?, description, pair)
            .map_err(|e| parse_err(line, e.to_string()))?;
        if !seen.insert(req.id.clone()) {
            return Err(Error::DuplicateId(id));
        }
        catalog.push(req);
    }
    Ok(catalog)
}

pub fn load_catalog_file(path: impl AsRef<Path>) -> Result<Vec<Requirement>> {
    load_catalog(fs::File::open(path)?)
}

pub fn write_catalog<W: Write>(catalog: &[Requirement], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["id", "label", "left_pole", "right_pole", "description"])
        .map_err(csv_err)?;
    for r in catalog {
        w.write_record([
            r.id.as_str(),
            &r.label,
            &r.construct_pair.left_pole,
            &r.construct_pair.right_pole,
            &r.description,
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// A parsed ratings file.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadedRatings {
    pub matrix: RatingMatrix,
    /// Rows that replaced an earlier score for the same pair.
    pub overwritten: usize,
}

/// Parses a ratings CSV with header
/// `stakeholder_id,education_level,requirement_id,score`.
///
/// Stakeholders are registered as they first appear. A later row for the
/// same (stakeholder, requirement) pair replaces the earlier score.
pub fn load_ratings<R: Read>(
    source: R,
    catalog: &[Requirement],
    scale: RatingScale,
) -> Result<LoadedRatings> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers().map_err(csv_err)?.clone();
    let mut matrix = RatingMatrix::with_catalog(scale, catalog)?;
    if headers.is_empty() {
        return Ok(LoadedRatings {
            matrix,
            overwritten: 0,
        });
    }
    let s_col = column(&headers, "stakeholder_id")?;
    let e_col = column(&headers, "education_level")?;
    let r_col = column(&headers, "requirement_id")?;
    let v_col = column(&headers, "score")?;

    let mut overwritten = 0;
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, |p| p.line());
        let stakeholder = StakeholderId::new(&record[s_col]);
        let level: EducationLevel = record[e_col]
            .parse()
            .map_err(|e: Error| parse_err(line, e.to_string()))?;
        let requirement = RequirementId::new(&record[r_col]);
        let score: i64 = record[v_col].parse().map_err(|_| {
            parse_err(
                line,
                format!("score `{}` is not an integer", &record[v_col]),
            )
        })?;
        if stakeholder.as_str().is_empty() {
            return Err(parse_err(line, "empty stakeholder id"));
        }
        match matrix.stakeholder(&stakeholder) {
            Some(existing) if existing.education_level != level => {
                return Err(parse_err(
                    line,
                    format!("stakeholder `{stakeholder}` listed with two education levels"),
                ));
            }
            Some(_) => {}
            None => matrix.register_stakeholder(Stakeholder::new(stakeholder.clone(), level))?,
        }
        if !matrix.contains_requirement(&requirement) {
            return Err(Error::UnknownReference(format!(
                "line {line}: requirement `{requirement}` is not in the catalog"
            )));
        }
        if matrix.rate(&stakeholder, &requirement, score)?.is_some() {
            overwritten += 1;
        }
    }
    Ok(LoadedRatings {
        matrix,
        overwritten,
    })
}

pub fn load_ratings_file(
    path: impl AsRef<Path>,
    catalog: &[Requirement],
    scale: RatingScale,
) -> Result<LoadedRatings> {
    load_ratings(fs::File::open(path)?, catalog, scale)
}

/// Writes every entry as a ratings CSV row.
pub fn write_ratings<W: Write>(matrix: &RatingMatrix, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record([
        "stakeholder_id",
        "education_level",
        "requirement_id",
        "score",
    ])
    .map_err(csv_err)?;
    for (s, r, v) in matrix.entries() {
        let level = matrix
            .stakeholder(s)
            .map_or(EducationLevel::Unspecified, |st| st.education_level);
        w.write_record([s.as_str(), level.as_str(), r.as_str(), &v.to_string()])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Catalog, ratings and sessions of one elicitation project.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub config: SessionConfig,
    pub catalog: Vec<Requirement>,
    pub matrix: RatingMatrix,
    pub sessions: Vec<Session>,
}

impl Dataset {
    pub fn new(catalog: Vec<Requirement>, config: SessionConfig) -> Result<Self> {
        config.validate()?;
        let matrix = RatingMatrix::with_catalog(config.scale, &catalog)?;
        let dataset = Self {
            config,
            catalog,
            matrix,
            sessions: Vec::new(),
        };
        dataset.validate()?;
        Ok(dataset)
    }

    /// Uses an already loaded matrix; its requirements must match the catalog.
    pub fn with_matrix(
        catalog: Vec<Requirement>,
        config: SessionConfig,
        matrix: RatingMatrix,
    ) -> Result<Self> {
        config.validate()?;
        let dataset = Self {
            config,
            catalog,
            matrix,
            sessions: Vec::new(),
        };
        dataset.validate()?;
        Ok(dataset)
    }

    pub fn stakeholders(&self) -> impl Iterator<Item = &Stakeholder> {
        self.matrix.stakeholders()
    }

    /// All feedback, in session order.
    pub fn feedback(&self) -> Vec<FeedbackRecord> {
        self.sessions
            .iter()
            .flat_map(|s| s.feedback.iter().cloned())
            .collect()
    }

    pub fn session(&self, id: &SessionId) -> Result<&Session> {
        self.sessions
            .iter()
            .find(|s| &s.id == id)
            .ok_or_else(|| Error::SessionNotFound(id.to_string()))
    }

    fn session_index(&self, id: &SessionId) -> Result<usize> {
        self.sessions
            .iter()
            .position(|s| &s.id == id)
            .ok_or_else(|| Error::SessionNotFound(id.to_string()))
    }

    fn next_session_id(&self) -> SessionId {
        let mut n = self.sessions.len() + 1;
        loop {
            let id = SessionId::new(format!("s{n:06}"));
            if self.sessions.iter().all(|s| s.id != id) {
                return id;
            }
            n += 1;
        }
    }

    pub fn start_session(
        &mut self,
        stakeholder: Stakeholder,
        now: DateTime<Utc>,
    ) -> Result<&Session> {
        let id = self.next_session_id();
        let session = session::start_session(
            id,
            stakeholder,
            &self.config,
            &self.catalog,
            &mut self.matrix,
            now,
        )?;
        self.sessions.push(session);
        Ok(self.sessions.last().expect("just pushed"))
    }

    pub fn submit_seed_ratings(
        &mut self,
        id: &SessionId,
        ratings: &[(RequirementId, i64)],
        now: DateTime<Utc>,
    ) -> Result<&Session> {
        let idx = self.session_index(id)?;
        session::submit_seed_ratings(&mut self.sessions[idx], &mut self.matrix, ratings, now)?;
        Ok(&self.sessions[idx])
    }

    pub fn recommend(&mut self, id: &SessionId, now: DateTime<Utc>) -> Result<&Session> {
        let idx = self.session_index(id)?;
        session::get_recommendations(&mut self.sessions[idx], &self.config, &self.matrix, now)?;
        Ok(&self.sessions[idx])
    }

    pub fn submit_feedback(
        &mut self,
        id: &SessionId,
        feedback: &[(RequirementId, i64)],
        now: DateTime<Utc>,
    ) -> Result<&Session> {
        let idx = self.session_index(id)?;
        session::submit_feedback(&mut self.sessions[idx], feedback, now)?;
        Ok(&self.sessions[idx])
    }

    /// Referential integrity across catalog, matrix and sessions.
    pub fn validate(&self) -> Result<()> {
        let mut ids = BTreeSet::new();
        for r in &self.catalog {
            r.validate()?;
            if !ids.insert(&r.id) {
                return Err(Error::DuplicateId(r.id.to_string()));
            }
        }
        let registered: BTreeSet<_> = self.matrix.requirement_ids().collect();
        if registered != ids {
            return Err(Error::UnknownReference(
                "matrix requirements differ from the catalog".into(),
            ));
        }
        if self.matrix.scale() != self.config.scale {
            return Err(Error::Invalid(
                "matrix scale differs from the configured scale".into(),
            ));
        }
        let mut session_ids = BTreeSet::new();
        for s in &self.sessions {
            if !session_ids.insert(&s.id) {
                return Err(Error::DuplicateId(s.id.to_string()));
            }
            if self.matrix.stakeholder(&s.stakeholder.id) != Some(&s.stakeholder) {
                return Err(Error::UnknownReference(format!(
                    "session `{}` references unregistered stakeholder `{}`",
                    s.id, s.stakeholder.id
                )));
            }
            for r in &s.presented_seeds {
                if !ids.contains(r) {
                    return Err(Error::UnknownReference(format!(
                        "session `{}` presents unknown requirement `{r}`",
                        s.id
                    )));
                }
            }
            s.validate(self.config.n_seeds)?;
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct RatingEntry {
    stakeholder_id: StakeholderId,
    requirement_id: RequirementId,
    score: i64,
}

#[derive(Serialize, Deserialize)]
struct StateFile {
    schema_version: u64,
    config: SessionConfig,
    catalog: Vec<Requirement>,
    stakeholders: Vec<Stakeholder>,
    ratings: Vec<RatingEntry>,
    sessions: Vec<Session>,
    feedback: Vec<FeedbackRecord>,
}

impl StateFile {
    fn from_dataset(d: &Dataset) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            config: d.config,
            catalog: d.catalog.clone(),
            stakeholders: d.stakeholders().cloned().collect(),
            ratings: d
                .matrix
                .entries()
                .map(|(s, r, v)| RatingEntry {
                    stakeholder_id: s.clone(),
                    requirement_id: r.clone(),
                    score: v as i64,
                })
                .collect(),
            sessions: d.sessions.clone(),
            feedback: d.feedback(),
        }
    }

    fn into_dataset(self) -> Result<Dataset> {
        let mut matrix = RatingMatrix::with_catalog(self.config.scale, &self.catalog)?;
        for s in self.stakeholders {
            matrix.register_stakeholder(s)?;
        }
        let mut pairs = BTreeMap::new();
        for e in &self.ratings {
            if pairs
                .insert((&e.stakeholder_id, &e.requirement_id), ())
                .is_some()
            {
                return Err(Error::Invalid(format!(
                    "duplicate rating for ({}, {})",
                    e.stakeholder_id, e.requirement_id
                )));
            }
            matrix.rate(&e.stakeholder_id, &e.requirement_id, e.score)?;
        }
        let dataset = Dataset {
            config: self.config,
            catalog: self.catalog,
            matrix,
            sessions: self.sessions,
        };
        dataset.validate()?;
        if dataset.feedback() != self.feedback {
            return Err(Error::Invalid(
                "feedback section disagrees with session feedback".into(),
            ));
        }
        Ok(dataset)
    }
}

/// Serialises the dataset as versioned, pretty-printed JSON.
pub fn to_state_string(dataset: &Dataset) -> Result<String> {
    serde_json::to_string_pretty(&StateFile::from_dataset(dataset))
        .map_err(|e| Error::Io(e.to_string()))
}

pub fn from_state_str(text: &str) -> Result<Dataset> {
    let json_err = |e: serde_json::Error| parse_err(e.line() as u64, e.to_string());
    let value: serde_json::Value = serde_json::from_str(text).map_err(json_err)?;
    let version = value
        .get("schema_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| parse_err(0, "missing schema_version"))?;
    if version != SCHEMA_VERSION {
        return Err(Error::SchemaVersionMismatch {
            found: version,
            expected: SCHEMA_VERSION,
        });
    }
    let state: StateFile = serde_json::from_str(text).map_err(json_err)?;
    state.into_dataset()
}

/// Writes the store via a sibling temporary file and a rename, so readers
/// never observe a partial file.
pub fn save_state(path: impl AsRef<Path>, dataset: &Dataset) -> Result<()> {
    let path = path.as_ref();
    let text = to_state_string(dataset)?;
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, text)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_state(path: impl AsRef<Path>) -> Result<Dataset> {
    from_state_str(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_catalog_has_twelve_requirements() {
        let cat = seed_catalog();
        let labels: Vec<_> = cat.iter().map(|r| r.label.as_str()).collect();
        assert_eq!(
            labels,
            [
                "Reliability of the system",
                "Professor's information",
                "Ability to reserve courses",
                "Online support and how-to content",
                "Effective filtering",
                "Privacy",
                "User-friendliness",
                "Speed and performance",
                "Responsive layout",
                "Accurate online data",
                "Easy to use",
                "Cross-platform",
            ]
        );
    }

    #[test]
    fn empty_catalog_file() {
        assert!(load_catalog("".as_bytes()).unwrap().is_empty());
        assert!(load_catalog("id,label,left_pole,right_pole\n".as_bytes())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn duplicate_catalog_id() {
        let text = "id,label,left_pole,right_pole\nr1,A,x,y\nr1,B,x,y\n";
        assert_eq!(
            load_catalog(text.as_bytes()),
            Err(Error::DuplicateId("r1".into()))
        );
    }

    #[test]
    fn catalog_errors_carry_line_numbers() {
        let text = "id,label,left_pole,right_pole\nr1,A,x,y\nr2,,x,y\n";
        match load_catalog(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let text = "id,label,left\nr1,A,x\n";
        assert!(matches!(
            load_catalog(text.as_bytes()),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn description_column_is_optional() {
        let text = "id,label,left_pole,right_pole\nr1,A,x,y\n";
        let cat = load_catalog(text.as_bytes()).unwrap();
        assert_eq!(cat[0].description, "");
    }

    #[test]
    fn catalog_csv_round_trips() {
        let cat = seed_catalog();
        let mut buf = Vec::new();
        write_catalog(&cat, &mut buf).unwrap();
        assert_eq!(load_catalog(buf.as_slice()).unwrap(), cat);
    }

    const HEADER: &str = "stakeholder_id,education_level,requirement_id,score\n";

    #[test]
    fn single_rating_row() {
        let cat = seed_catalog();
        let text = format!("{HEADER}u1,phd,r01,4\n");
        let loaded = load_ratings(text.as_bytes(), &cat, RatingScale::default()).unwrap();
        assert_eq!(loaded.matrix.len(), 1);
        assert_eq!(loaded.matrix.score(&"u1".into(), &"r01".into()), Some(4));
        assert_eq!(
            loaded
                .matrix
                .stakeholder(&"u1".into())
                .unwrap()
                .education_level,
            EducationLevel::PhD
        );
    }

    #[test]
    fn out_of_scale_row() {
        let cat = seed_catalog();
        let text = format!("{HEADER}u1,Master,r01,99\n");
        assert!(matches!(
            load_ratings(text.as_bytes(), &cat, RatingScale::default()),
            Err(Error::OutOfScale { score: 99, .. })
        ));
    }

    #[test]
    fn unknown_requirement_row() {
        let cat = seed_catalog();
        let text = format!("{HEADER}u1,Master,r77,3\n");
        assert_eq!(
            load_ratings(text.as_bytes(), &cat, RatingScale::default())
                .unwrap_err()
                .code(),
            "unknown_reference"
        );
    }

    #[test]
    fn duplicate_rows_overwrite_and_are_counted() {
        let cat = seed_catalog();
        let text = format!("{HEADER}u1,Master,r01,3\nu1,master,r01,5\n");
        let loaded = load_ratings(text.as_bytes(), &cat, RatingScale::default()).unwrap();
        assert_eq!(loaded.overwritten, 1);
        assert_eq!(loaded.matrix.score(&"u1".into(), &"r01".into()), Some(5));
    }

    #[test]
    fn conflicting_levels_and_bad_scores_are_parse_errors() {
        let cat = seed_catalog();
        let text = format!("{HEADER}u1,Master,r01,3\nu1,PhD,r02,5\n");
        assert!(matches!(
            load_ratings(text.as_bytes(), &cat, RatingScale::default()),
            Err(Error::Parse { line: 3, .. })
        ));
        let text = format!("{HEADER}u1,Master,r01,three\n");
        assert!(matches!(
            load_ratings(text.as_bytes(), &cat, RatingScale::default()),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn ingestion_is_idempotent() {
        let cat = seed_catalog();
        let text = format!("{HEADER}u1,Master,r01,3\nu2,PhD,r02,5\n");
        let a = load_ratings(text.as_bytes(), &cat, RatingScale::default()).unwrap();
        let b = load_ratings(text.as_bytes(), &cat, RatingScale::default()).unwrap();
        assert_eq!(a, b);
        let mut buf = Vec::new();
        write_ratings(&a.matrix, &mut buf).unwrap();
        assert_eq!(
            load_ratings(buf.as_slice(), &cat, RatingScale::default()).unwrap(),
            a
        );
    }

    #[test]
    fn empty_dataset_round_trip() {
        let d = Dataset::new(seed_catalog(), SessionConfig::default()).unwrap();
        assert_eq!(from_state_str(&to_state_string(&d).unwrap()).unwrap(), d);
    }

    #[test]
    fn corrupted_state_is_rejected() {
        let d = Dataset::new(seed_catalog(), SessionConfig::default()).unwrap();
        let text = to_state_string(&d).unwrap();
        let truncated = &text[..text.len() / 2];
        assert_eq!(from_state_str(truncated).unwrap_err().code(), "parse_error");
        let bumped = text.replacen("\"schema_version\": 1", "\"schema_version\": 2", 1);
        assert_eq!(
            from_state_str(&bumped),
            Err(Error::SchemaVersionMismatch {
                found: 2,
                expected: 1
            })
        );
        assert_eq!(from_state_str("{}").unwrap_err().code(), "parse_error");
    }

    #[test]
    fn save_and_load_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.json");
        let d = Dataset::new(seed_catalog(), SessionConfig::default()).unwrap();
        save_state(&path, &d).unwrap();
        assert_eq!(load_state(&path).unwrap(), d);
        assert!(matches!(
            load_state(dir.path().join("missing.json")),
            Err(Error::Io(_))
        ));
    }

    #[test]
    fn dangling_session_reference_fails_validation() {
        let mut d = Dataset::new(seed_catalog(), SessionConfig::default()).unwrap();
        d.start_session(Stakeholder::new("u1", EducationLevel::PhD), Utc::now())
            .unwrap();
        d.sessions[0].presented_seeds[0] = "r99".into();
        let text = to_state_string(&d).unwrap();
        assert_eq!(
            from_state_str(&text).unwrap_err().code(),
            "unknown_reference"
        );
    }
}
