mod common;

use common::*;
use reqrec_core::{
    pearson_similarity, predict_rating, recommend, select_neighbors, PredictionForm,
    RecommendParams,
};

const TOL: f64 = 1e-9;

#[test]
fn random_matrices_match_oracle() {
    let mut r = rng(7);
    for case in 0..60 {
        let g = random_grid(&mut r, 20, 15);
        let m = g.to_matrix();
        for a in 0..g.users() {
            for b in 0..g.users() {
                if a == b {
                    continue;
                }
                let got = pearson_similarity(&m, &user_id(a), &user_id(b)).unwrap();
                let (want, corated) = oracle_pearson(&g, a, b);
                assert!((got.value - want).abs() < TOL, "case {case} ({a},{b})");
                assert_eq!(got.corated_count, corated);
            }
        }
    }
}

#[test]
fn fifty_user_neighbourhood_matches_exhaustive_sort() {
    let m = fixture();
    let (g, users, _) = grid_from_matrix(&m);
    assert_eq!(users.len(), 50);
    for t in [0, 17, 49] {
        let got = select_neighbors(&m, &users[t], 5).unwrap();
        let want = oracle_neighbors(&g, t, 5);
        assert_eq!(got.len(), 5);
        for (n, (idx, sim)) in got.neighbors.iter().zip(&want) {
            assert_eq!(n.neighbor, users[*idx]);
            assert!((n.value - sim).abs() < TOL);
        }
    }
}

#[test]
fn fifty_user_pipeline_matches_oracle() {
    let mut m = fixture();
    let (_, _, items) = grid_from_matrix(&m);
    let target = reqrec_core::Stakeholder::new("zz-target", reqrec_core::EducationLevel::PhD);
    m.register_stakeholder(target.clone()).unwrap();
    for (r, v) in items.iter().take(3).zip([5, 2, 4]) {
        m.rate(&target.id, r, v).unwrap();
    }
    let (g, users, items) = grid_from_matrix(&m);
    let t = users.iter().position(|u| *u == target.id).unwrap();
    for form in [PredictionForm::Standard, PredictionForm::PaperLiteral] {
        let params = RecommendParams {
            seeds: 3,
            neighbors: 5,
            top_k: 5,
        };
        let got = recommend(&m, &target.id, params, form).unwrap();
        let want = oracle_recommend(&g, t, 5, 5, form);
        assert_eq!(got.items.len(), want.len());
        for (p, (j, raw, clamped, support)) in got.items.iter().zip(&want) {
            assert_eq!(p.requirement, items[*j]);
            assert!((p.raw_value - raw).abs() < TOL);
            assert!((p.clamped_value - clamped).abs() < TOL);
            assert_eq!(p.neighbor_support, *support);
        }
    }
}

#[test]
fn single_predictions_match_oracle() {
    let mut r = rng(99);
    for _ in 0..40 {
        let g = random_grid(&mut r, 12, 10);
        let m = g.to_matrix();
        for t in 0..g.users() {
            if g.rated(t).is_empty() {
                continue;
            }
            let nb = select_neighbors(&m, &user_id(t), 3).unwrap();
            let oracle_nb = oracle_neighbors(&g, t, 3);
            for j in (0..g.items()).filter(|&j| g.cells[t][j].is_none()) {
                let p = predict_rating(&m, &user_id(t), &item_id(j), &nb, PredictionForm::Standard)
                    .unwrap();
                let (raw, support) = oracle_predict(&g, t, j, &oracle_nb, PredictionForm::Standard);
                assert!((p.raw_value - raw).abs() < TOL);
                assert_eq!(p.neighbor_support, support);
            }
        }
    }
}
