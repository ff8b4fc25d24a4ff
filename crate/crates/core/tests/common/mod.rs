//! Test-only helpers: random matrices and a naive, independent
//! re-implementation of the recommender pipeline used as an oracle.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reqrec_core::{
    EducationLevel, PredictionForm, RatingMatrix, RatingScale, RequirementId, Stakeholder,
    StakeholderId,
};

/// Dense grid of optional ratings; row = stakeholder, column = requirement.
#[derive(Clone, Debug)]
pub struct Grid {
    pub cells: Vec<Vec<Option<f64>>>,
}

pub fn user_id(i: usize) -> StakeholderId {
    StakeholderId::new(format!("u{i:02}"))
}

pub fn item_id(j: usize) -> RequirementId {
    RequirementId::new(format!("i{j:02}"))
}

impl Grid {
    pub fn users(&self) -> usize {
        self.cells.len()
    }

    pub fn items(&self) -> usize {
        self.cells.first().map_or(0, Vec::len)
    }

    pub fn to_matrix(&self) -> RatingMatrix {
        let mut m = RatingMatrix::new(RatingScale::default());
        for j in 0..self.items() {
            m.register_requirement(item_id(j)).unwrap();
        }
        for (i, row) in self.cells.iter().enumerate() {
            m.register_stakeholder(Stakeholder::new(user_id(i), EducationLevel::Unspecified))
                .unwrap();
            for (j, v) in row.iter().enumerate() {
                if let Some(v) = v {
                    m.rate(&user_id(i), &item_id(j), *v as i64).unwrap();
                }
            }
        }
        m
    }

    pub fn rated(&self, u: usize) -> Vec<usize> {
        (0..self.items())
            .filter(|&j| self.cells[u][j].is_some())
            .collect()
    }
}

pub fn random_grid(rng: &mut ChaCha8Rng, max_users: usize, max_items: usize) -> Grid {
    let users = rng.random_range(2..=max_users);
    let items = rng.random_range(2..=max_items);
    let density: f64 = rng.random_range(0.3..=1.0);
    let cells = (0..users)
        .map(|_| {
            (0..items)
                .map(|_| {
                    rng.random_bool(density)
                        .then(|| rng.random_range(1..=5) as f64)
                })
                .collect()
        })
        .collect();
    Grid { cells }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---- oracle ------------------------------------------------------------

pub fn oracle_mean(g: &Grid, u: usize) -> Option<f64> {
    let vals: Vec<f64> = g.cells[u].iter().flatten().copied().collect();
    if vals.is_empty() {
        None
    } else {
        let mut total = 0.0;
        for v in vals.iter().rev() {
            total += v;
        }
        Some(total / vals.len() as f64)
    }
}

/// Direct evaluation of the correlation over co-rated columns, summed in
/// reverse column order. Returns (value, corated).
pub fn oracle_pearson(g: &Grid, a: usize, b: usize) -> (f64, usize) {
    let (Some(ma), Some(mb)) = (oracle_mean(g, a), oracle_mean(g, b)) else {
        return (0.0, 0);
    };
    let common: Vec<usize> = (0..g.items())
        .rev()
        .filter(|&j| g.cells[a][j].is_some() && g.cells[b][j].is_some())
        .collect();
    let mut num = 0.0;
    let mut da = 0.0;
    let mut db = 0.0;
    for &j in &common {
        let x = g.cells[a][j].unwrap() - ma;
        let y = g.cells[b][j].unwrap() - mb;
        num += x * y;
        da += x * x;
        db += y * y;
    }
    if common.len() < 2 || da == 0.0 || db == 0.0 {
        return (0.0, common.len());
    }
    (num / (da.sqrt() * db.sqrt()), common.len())
}

/// All other users sorted by similarity (desc), index (asc); first `m`.
/// Orders values, counting anything within 1e-9 as a tie.
pub fn cmp_tol(a: f64, b: f64) -> std::cmp::Ordering {
    if (a - b).abs() <= 1e-9 {
        std::cmp::Ordering::Equal
    } else {
        a.partial_cmp(&b).unwrap()
    }
}

pub fn oracle_neighbors(g: &Grid, target: usize, m: usize) -> Vec<(usize, f64)> {
    let mut all: Vec<(usize, f64)> = (0..g.users())
        .filter(|&u| u != target)
        .map(|u| (u, oracle_pearson(g, target, u).0))
        .collect();
    all.sort_by(|x, y| cmp_tol(y.1, x.1).then(x.0.cmp(&y.0)));
    all.truncate(m);
    all
}

/// (raw, support) for one item.
pub fn oracle_predict(
    g: &Grid,
    target: usize,
    item: usize,
    neighbors: &[(usize, f64)],
    form: PredictionForm,
) -> (f64, usize) {
    let target_mean = oracle_mean(g, target).unwrap();
    let contributing: Vec<(f64, f64)> = neighbors
        .iter()
        .filter(|&&(_, sim)| sim.abs() > 1e-9)
        .filter_map(|&(b, sim)| g.cells[b][item].map(|r| (r - oracle_mean(g, b).unwrap(), sim)))
        .collect();
    let denom: f64 = contributing.iter().map(|(_, s)| s.abs()).sum();
    if denom == 0.0 {
        return (target_mean, 0);
    }
    let num: f64 = contributing.iter().map(|(d, s)| d * s).sum();
    let support = contributing.len();
    let offset = num / denom;
    match form {
        PredictionForm::Standard => (target_mean + offset, support),
        PredictionForm::PaperLiteral => (offset, support),
    }
}

/// (item, raw, clamped, support), ranked.
pub fn oracle_recommend(
    g: &Grid,
    target: usize,
    m: usize,
    k: usize,
    form: PredictionForm,
) -> Vec<(usize, f64, f64, usize)> {
    let neighbors = oracle_neighbors(g, target, m);
    let mut preds: Vec<(usize, f64, f64, usize)> = (0..g.items())
        .filter(|&j| g.cells[target][j].is_none())
        .map(|j| {
            let (raw, support) = oracle_predict(g, target, j, &neighbors, form);
            (j, raw, raw.clamp(1.0, 5.0), support)
        })
        .collect();
    preds.sort_by(|x, y| {
        cmp_tol(y.2, x.2)
            .then((x.3 == 0).cmp(&(y.3 == 0)))
            .then(x.0.cmp(&y.0))
    });
    preds.truncate(k);
    preds
}

/// Grid view of a matrix; rows and columns in ascending id order.
pub fn grid_from_matrix(m: &RatingMatrix) -> (Grid, Vec<StakeholderId>, Vec<RequirementId>) {
    let users: Vec<StakeholderId> = m.stakeholders().map(|s| s.id.clone()).collect();
    let items: Vec<RequirementId> = m.requirement_ids().cloned().collect();
    let cells = users
        .iter()
        .map(|u| items.iter().map(|r| m.score(u, r).map(f64::from)).collect())
        .collect();
    (Grid { cells }, users, items)
}

pub fn fixture() -> RatingMatrix {
    let catalog = reqrec_core::datastore::seed_catalog();
    reqrec_core::analytics::synthetic_ratings(&catalog, RatingScale::default(), 50, 2024).unwrap()
}

/// Random dataset with sessions left in every state.
pub fn random_dataset(rng: &mut ChaCha8Rng) -> reqrec_core::Dataset {
    use chrono::{TimeZone, Utc};
    use reqrec_core::{ConstructPair, Dataset, Requirement, SessionConfig};

    let items = rng.random_range(3..=12);
    let catalog: Vec<Requirement> = (0..items)
        .map(|j| {
            Requirement::new(
                format!("req-{j:02}"),
                format!("Requirement {j} \u{2013} \"quoted\""),
                if rng.random_bool(0.5) {
                    format!("desc {j}")
                } else {
                    String::new()
                },
                ConstructPair::new(format!("low {j}"), format!("high {j}")).unwrap(),
            )
            .unwrap()
        })
        .collect();
    let config = SessionConfig {
        n_seeds: rng.random_range(1..=3),
        m_neighbors: rng.random_range(1..=5),
        k_recommendations: rng.random_range(1..=5),
        prediction_form: if rng.random_bool(0.5) {
            PredictionForm::Standard
        } else {
            PredictionForm::PaperLiteral
        },
        ..Default::default()
    };
    let mut d = Dataset::new(catalog.clone(), config).unwrap();
    let levels = EducationLevel::ALL;
    for u in 0..rng.random_range(0..8) {
        let id = StakeholderId::new(format!("core-{u}"));
        d.matrix
            .register_stakeholder(Stakeholder::new(id.clone(), levels[rng.random_range(0..4)]))
            .unwrap();
        for r in &catalog {
            if rng.random_bool(0.7) {
                d.matrix.rate(&id, &r.id, rng.random_range(1..=5)).unwrap();
            }
        }
    }
    for s in 0..rng.random_range(0..5) {
        let t = Utc
            .timestamp_opt(1_700_000_000 + s * 60, rng.random_range(0..1_000_000_000))
            .unwrap();
        let stakeholder = Stakeholder::new(format!("p-{s}"), levels[rng.random_range(0..4)]);
        let id = d.start_session(stakeholder, t).unwrap().id.clone();
        let stop = rng.random_range(0..4);
        if stop == 0 {
            continue;
        }
        let seeds = d.session(&id).unwrap().presented_seeds.clone();
        let ratings: Vec<_> = seeds
            .into_iter()
            .map(|r| (r, rng.random_range(1..=5)))
            .collect();
        d.submit_seed_ratings(&id, &ratings, t).unwrap();
        if stop == 1 {
            continue;
        }
        d.recommend(&id, t).unwrap();
        if stop == 2 {
            continue;
        }
        let items = d
            .session(&id)
            .unwrap()
            .recommendation
            .clone()
            .unwrap()
            .items;
        let fb: Vec<_> = items
            .iter()
            .filter_map(|p| {
                let keep = rng.random_bool(0.8);
                let stars = rng.random_range(0..=5);
                keep.then(|| (p.requirement.clone(), stars))
            })
            .collect();
        d.submit_feedback(&id, &fb, t).unwrap();
    }
    d
}
