"""Smoke test for the reqrec extension module.

Build and install first, e.g. `pip install maturin && maturin develop -m crates/python/Cargo.toml`.
"""

import math
import os
import tempfile

import reqrec


def check_similarity():
    m = reqrec.RatingMatrix()
    for r in ("a", "b", "c", "d"):
        m.add_requirement(r)
    m.add_stakeholder("u1", "PhD")
    m.add_stakeholder("u2", "Master")
    for r, s in zip("abc", (1, 3, 5)):
        m.rate("u1", r, s)
        m.rate("u2", r, 6 - s)
    value, corated = reqrec.pearson_similarity(m, "u1", "u2")
    assert math.isclose(value, -1.0), value
    assert corated == 3
    assert m.mean_rating("u1") == 3.0
    assert m.corated_items("u1", "u2") == ["a", "b", "c"]
    try:
        m.rate("u1", "d", 9)
    except reqrec.ReqRecError as e:
        assert e.args[0] == "out_of_scale"
    else:
        raise AssertionError("out-of-scale score accepted")


def check_pipeline():
    catalog = reqrec.seed_catalog()
    assert len(catalog) == 12
    m = reqrec.synthetic_ratings(50, 2024)
    assert len(m) == 600
    m.add_stakeholder("newcomer", "Bachelor")
    for r, s in zip(("r01", "r02", "r03"), (5, 2, 4)):
        m.rate("newcomer", r, s)
    recs = reqrec.recommend(m, "newcomer", m=5, k=5)
    assert len(recs) == 5
    assert all(r.requirement not in ("r01", "r02", "r03") for r in recs)
    assert all(1.0 <= r.clamped_value <= 5.0 for r in recs)
    values = [r.clamped_value for r in recs]
    assert values == sorted(values, reverse=True)
    neighbors = reqrec.select_neighbors(m, "newcomer", 5)
    assert len(neighbors) == 5
    p = reqrec.predict_rating(m, "newcomer", recs[0].requirement)
    assert math.isclose(p.raw_value, recs[0].raw_value)
    literal = reqrec.recommend(m, "newcomer", form="paper-literal")
    assert len(literal) == 5


def check_sessions():
    store = reqrec.Store(ratings=reqrec.synthetic_ratings())
    s = store.start_session("alice", "PhD")
    assert s["state"] == "SeedsPresented"
    seeds = s["presented_seeds"]
    s = store.submit_seed_ratings(s["id"], [(r, v) for r, v in zip(seeds, (4, 1, 5))])
    s = store.recommend(s["id"])
    items = s["recommendation"]["items"]
    assert len(items) == 5
    s = store.submit_feedback(s["id"], [(items[0]["requirement"], 5), (items[1]["requirement"], 0)])
    assert s["state"] == "FeedbackCollected"
    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "state.json")
        store.save(path)
        again = reqrec.Store.load(path)
        assert again.session(s["id"]) == s
        report = again.satisfaction_report()
        assert report["overall"]["participant_count"] == 1
        assert report["overall"]["mean_stars"] == 5.0
        assert report["per_level"]["PhD"]["no_idea_count"] == 1


def check_analytics():
    records = [(f"s{i}", "PhD", i % 6) for i in range(60)]
    records += [(f"m{i}", "Master", 3) for i in range(46)]
    records += [(f"b{i}", "Bachelor", 0) for i in range(21)]
    report = reqrec.satisfaction_report(records)
    counts = [report["per_level"][lvl]["participant_count"] for lvl in ("PhD", "Master", "Bachelor")]
    assert counts == [60, 46, 21]
    assert report["overall"]["participant_count"] == 127
    assert report["per_level"]["Bachelor"]["mean_stars"] is None

    sim = reqrec.simulate(seed=42, trials=200, noise=0.0, clusters=2)
    assert sim["hit_rate"] == 1.0
    assert sim["baseline_hit_rate"] < sim["hit_rate"]
    assert sim == reqrec.simulate(seed=42, trials=200, noise=0.0, clusters=2)


if __name__ == "__main__":
    check_similarity()
    check_pipeline()
    check_sessions()
    check_analytics()
    print("reqrec smoke test: ok")
