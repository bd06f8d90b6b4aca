import math
import os
import pathlib

import pytest

import cjscore

ROOT = pathlib.Path(os.environ.get("CJSCORE_SOURCE_DIR", pathlib.Path(__file__).resolve().parents[2]))


def test_predict_prob():
    assert cjscore.predict_prob(0.0, 0.0) == 0.5
    assert abs(cjscore.predict_prob(math.log(3), 0.0) - 0.75) < 1e-12


def test_fit_two_essays():
    comps = [("a", "b", "first")] * 3 + [("a", "b", "second")]
    est = cjscore.fit_bradley_terry(comps, pseudo_count=0.0, tolerance=1e-12)
    assert est.converged
    assert abs(est.lambda_["a"] - est.lambda_["b"] - math.log(3)) < 1e-6
    assert abs(sum(est.lambda_.values())) < 1e-9
    trace = est.log_likelihood_trace
    assert all(b >= a - 1e-12 for a, b in zip(trace, trace[1:]))


def test_fit_errors():
    with pytest.raises(cjscore.SeparationError):
        cjscore.fit_bradley_terry([("a", "b", "first"), ("a", "c", "first"), ("b", "c", "first")],
                                  pseudo_count=0.0)
    with pytest.raises(cjscore.DisconnectedGraph):
        cjscore.fit_bradley_terry([("a", "b", "first"), ("c", "d", "first")])
    with pytest.raises(cjscore.InvalidArgument):
        cjscore.fit_bradley_terry([("a", "b", "maybe")])
    assert issubclass(cjscore.SeparationError, cjscore.Error)


def test_scaling():
    fine = [1.0, 1.5, 2.0, 2.3, 2.5, 2.7, 3.0, 3.3, 3.5, 3.7, 4.0, 4.3, 4.5, 4.7, 5.0, 5.5, 6.0]
    assert cjscore.transform_to_scale(0.0, fine) == 1.0
    assert cjscore.transform_to_scale(1.0, fine) == 6.0
    assert cjscore.transform_to_scale(0.26, fine) == 2.3
    assert cjscore.nearest_scale_value(1.5, [0, 1, 2, 3]) == 1.0
    p = cjscore.normalize_minmax({"a": -1.0, "b": 0.0, "c": 3.0})
    assert p == {"a": 0.0, "b": 0.25, "c": 1.0}
    with pytest.raises(cjscore.DegenerateSpread):
        cjscore.normalize_minmax({"a": 1.0, "b": 1.0})


def test_metrics():
    assert cjscore.qwk([0, 1, 2, 3], [0, 1, 2, 3], [0, 1, 2, 3]) == 1.0
    assert abs(cjscore.qwk([0, 1, 2, 3], [3, 2, 1, 0], [0, 1, 2, 3]) + 1.0) < 1e-12
    w = cjscore.wilcoxon_signed_rank([1, 2, 3, 4, 5, 6, 7], [0] * 7)
    assert w["method"] == "exact"
    assert w["p_value"] == pytest.approx(2 / 128)
    u = cjscore.mann_whitney_u([1, 2, 3, 4], [5, 6, 7, 8])
    assert u["p_value"] == pytest.approx(2 / 70)
    assert cjscore.spearman_rho([1, 2, 3], [10, 20, 30]) == pytest.approx(1.0)


def test_pairing_and_prompts():
    ids = [str(i) for i in range(12)]
    assert len(cjscore.round_robin_pairs(ids)) == 66
    a = cjscore.random_k_pairs(ids, 4, 3)
    assert a == cjscore.random_k_pairs(ids, 4, 3)
    prompt = cjscore.build_cj_prompt("Ideas", {0: "none", 1: "some"}, "first text", "second text", "Task.")
    assert "//Essay A: first text" in prompt
    assert "//Essay B: second text" in prompt
    assert cjscore.classify_cj_response("Essay B") == "B"
    assert cjscore.classify_cj_response("no idea") == "unparsable"
    score, _ = cjscore.parse_score_response("Score: 2\nExplanation: fine.", [0, 1, 2, 3])
    assert score == 2.0


def test_stratified_sample():
    rows = cjscore.stratified_sample(str(ROOT / "data/fixtures/set7_synthetic.tsv"), 7, "trait1", 5, 1)
    assert len(rows) == 35
    assert rows == cjscore.stratified_sample(str(ROOT / "data/fixtures/set7_synthetic.tsv"), 7, "trait1", 5, 1)
    assert sorted(r[0] for r in rows)[:3] == ["20002", "20003", "20004"]
    with pytest.raises(cjscore.IngestError):
        cjscore.stratified_sample(str(ROOT / "no/such.tsv"), 7, "trait1")


def test_simulation():
    report = cjscore.run_simulation(n=12, rounds=1, mode="argmax")
    assert report["comparisons"] == 66
    assert report["spearman"] == pytest.approx(1.0)
    assert report["qwk"] == 1.0
    assert len(report["essays"]) == 12
