from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from fcbench.aggregate import (
    ELO_SCALE,
    BootstrapConfig,
    average_rank,
    average_win_rate,
    bootstrap_intervals,
    bootstrap_replicates,
    bradley_terry,
    build_error_matrix,
    build_report,
    pairwise_skill,
    pairwise_win_rate,
    resample_counts,
    skill_scores,
)
from fcbench.dataset import DatasetManifest
from fcbench.errors import (
    BaselineIncompleteError,
    MissingTaskScoreError,
    NonConvergenceError,
    ZeroBaselineError,
    ZeroReferenceError,
)
from fcbench.task import EvaluationWindow, Task, summarize

E3 = np.array([[1.0, 2.0, 2.0], [2.0, 1.0, 3.0], [1.5, 1.5, 1.0]])  # tasks x models A, B, C


@st.composite
def error_matrices(draw, max_m=10, max_r=50, tie_p=0.2):
    M = draw(st.integers(2, max_m))
    R = draw(st.integers(1, max_r))
    rng = np.random.default_rng(draw(st.integers(0, 2**32 - 1)))
    E = rng.uniform(0.5, 2.0, size=(R, M))
    tie = rng.random((R, M)) < tie_p
    E[tie] = E[:, [0]].repeat(M, 1)[tie]
    return E


# ---------------------------------------------------------------------------
# worked examples


def test_win_rate_example():
    np.testing.assert_allclose(average_win_rate(E3), [7 / 12, 0.5, 5 / 12], atol=1e-15)
    W = pairwise_win_rate(E3)
    assert W[0, 1] == 0.5 and W[0, 2] == pytest.approx(2 / 3, abs=1e-15)
    np.testing.assert_array_equal(np.diag(W), 0.5)


def test_win_rate_simple_cases():
    E = np.array([[1.0, 2.0], [3.0, 4.0]])
    np.testing.assert_array_equal(average_win_rate(E), [1.0, 0.0])
    same = np.array([[1.0, 1.0, 2.0], [3.0, 3.0, 1.0]])
    w = average_win_rate(same)
    assert w[0] == w[1]
    assert pairwise_win_rate(same)[0, 1] == 0.5


def test_skill_example():
    S = skill_scores(E3, baseline_index=2)
    expected = 1 - (0.5 * (2 / 3) * 1.5) ** (1 / 3)
    assert S[0] == pytest.approx(expected, abs=1e-12) and S[1] == pytest.approx(expected, abs=1e-12)
    assert S[2] == 0.0
    assert expected == pytest.approx(0.2063, abs=1e-4)
    assert pairwise_skill(E3)[0, 2] == pytest.approx(S[0], abs=1e-15)


def test_skill_clipping():
    E = np.array([[1e5, 1.0], [1.0, 1.0]])
    assert skill_scores(E, 1)[0] == pytest.approx(1 - math.sqrt(100.0))
    E = np.array([[1e-9, 1.0]])
    assert skill_scores(E, 1)[0] == pytest.approx(1 - 1e-2)


def test_skill_zero_baseline():
    with pytest.raises(ZeroBaselineError):
        skill_scores(np.array([[1.0, 0.0]]), 1)
    # 0/0 counts as a ratio of one
    assert skill_scores(np.array([[0.0, 0.0], [1.0, 2.0]]), 1)[0] == pytest.approx(1 - math.sqrt(0.5))
    with pytest.raises(ZeroReferenceError):
        pairwise_skill(np.array([[1.0, 0.0]]))


def test_rank_example():
    r = average_rank(E3)
    np.testing.assert_allclose(r, [11 / 6, 2.0, 13 / 6], atol=1e-15)
    assert average_win_rate(E3)[0] == pytest.approx(1 - (r[0] - 1) / 2, abs=1e-15)
    np.testing.assert_array_equal(average_rank(np.ones((4, 5))), 3.0)
    np.testing.assert_array_equal(average_rank(np.array([[1.0, 2.0, 3.0], [3.0, 1.0, 2.0]])), [2.0, 1.5, 2.5])


def test_bradley_terry_examples():
    theta = bradley_terry(pairwise_win_rate(E3), anchor_index=2)
    assert theta[2] == 1000.0
    assert theta[0] > theta[1] > theta[2]
    np.testing.assert_allclose(bradley_terry(np.full((4, 4), 0.5), anchor_index=1), 1000.0, atol=1e-9)
    W2 = np.array([[0.5, 0.75], [0.25, 0.5]])
    t = bradley_terry(W2, anchor_index=1)
    assert t[0] - t[1] == pytest.approx(math.log(3) / ELO_SCALE, abs=1e-8)


def test_bradley_terry_requires_existing_mle():
    with pytest.raises(NonConvergenceError):
        bradley_terry(np.array([[0.5, 1.0], [0.0, 0.5]]))


# ---------------------------------------------------------------------------
# identities and oracles


@settings(max_examples=150, deadline=None)
@given(error_matrices())
def test_win_rates_equal_exact_enumeration(E):
    marginal, pair = oracles.win_credits(E.tolist())
    M = E.shape[1]
    W = pairwise_win_rate(E)
    w = average_win_rate(E)
    # each float is the correctly rounded value of the exact rational
    for j in range(M):
        assert w[j] == float(marginal[j])
        for k in range(M):
            if j != k:
                assert W[j, k] == float(pair[j, k])
                assert W[j, k] + W[k, j] == 1.0
    assert sum(marginal) == Fraction(M, 2)
    assert abs(w.sum() - M / 2) <= 4 * M * np.finfo(float).eps


@settings(max_examples=150, deadline=None)
@given(error_matrices())
def test_rank_identity(E):
    M = E.shape[1]
    r = average_rank(E)
    np.testing.assert_allclose(average_win_rate(E), 1 - (r - 1) / (M - 1), rtol=0, atol=1e-12)
    exact = oracles.midranks(E.tolist())
    np.testing.assert_allclose(r, [float(x) for x in exact], rtol=0, atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(error_matrices(tie_p=0.0))
def test_pairwise_skill_reciprocal_without_clipping(E):
    S = pairwise_skill(E)  # ratios stay within [0.25, 4], far from the clip bounds
    np.testing.assert_allclose((1 - S) * (1 - S.T), 1.0, rtol=0, atol=1e-10)
    np.testing.assert_array_equal(np.diag(S), 0.0)


@settings(max_examples=100, deadline=None)
@given(error_matrices(), st.data())
def test_skill_ordering_invariant_to_baseline(E, data):
    M = E.shape[1]
    b1 = data.draw(st.integers(0, M - 1))
    b2 = data.draw(st.integers(0, M - 1))
    s1, s2 = skill_scores(E, b1), skill_scores(E, b2)
    # switching the reference rescales 1 - S by a common positive factor
    ratio = (1 - s1) / (1 - s2)
    np.testing.assert_allclose(ratio, ratio[0], rtol=1e-12)
    # same ordering for every pair that is not a tie up to float noise
    d1 = s1[:, None] - s1[None, :]
    d2 = s2[:, None] - s2[None, :]
    clear = (np.abs(d1) > 1e-9) | (np.abs(d2) > 1e-9)
    assert np.array_equal(np.sign(d1[clear]), np.sign(d2[clear]))


@settings(max_examples=30, deadline=None)
@given(error_matrices(max_m=8, max_r=20))
def test_bradley_terry_ordering_matches_win_rate(E):
    W = pairwise_win_rate(E)
    try:
        theta = bradley_terry(W)
    except NonConvergenceError:
        return  # some model never loses: no finite estimate
    w = average_win_rate(E)
    for j in range(len(w)):
        for k in range(len(w)):
            dw = np.sign(round(w[j] - w[k], 12))
            dt = 0.0 if abs(theta[j] - theta[k]) < 1e-6 else np.sign(theta[j] - theta[k])
            assert dw == dt


# ---------------------------------------------------------------------------
# bootstrap


def test_bootstrap_is_reproducible_and_seeded():
    E = np.random.default_rng(0).uniform(size=(30, 4))
    cfg = BootstrapConfig(200, 0.05, seed=3)
    a = bootstrap_intervals(E, "pairwise_win_rate", cfg)
    b = bootstrap_intervals(E, "pairwise_win_rate", cfg)
    assert a.lower.tobytes() == b.lower.tobytes() and a.upper.tobytes() == b.upper.tobytes()
    c = bootstrap_intervals(E, "pairwise_win_rate", BootstrapConfig(200, 0.05, seed=4))
    assert not np.array_equal(a.lower, c.lower) or not np.array_equal(a.upper, c.upper)


def test_bootstrap_substreams_are_independent_of_b():
    short = resample_counts(17, BootstrapConfig(10, seed=9))
    long = resample_counts(17, BootstrapConfig(50, seed=9))
    np.testing.assert_array_equal(short, long[:10])
    assert np.all(long.sum(axis=1) == 17)


def test_bootstrap_single_task_is_degenerate():
    E = np.array([[1.0, 2.0, 0.5]])
    for stat in ("pairwise_win_rate", "pairwise_skill"):
        iv = bootstrap_intervals(E, stat, BootstrapConfig(100))
        np.testing.assert_array_equal(iv.lower, iv.upper)
    iv = bootstrap_intervals(E, "pairwise_skill", BootstrapConfig(100))
    np.testing.assert_allclose(iv.lower, pairwise_skill(E), atol=1e-15)


def test_bootstrap_dominance_gives_unit_interval():
    rng = np.random.default_rng(1)
    E = rng.uniform(1, 2, size=(25, 3))
    E[:, 0] = E[:, 1] / 2  # model 0 beats model 1 on every task
    iv = bootstrap_intervals(E, "pairwise_win_rate", BootstrapConfig(500))
    assert iv.lower[0, 1] == 1.0 and iv.upper[0, 1] == 1.0
    assert iv.lower[1, 0] == 0.0 and iv.upper[1, 0] == 0.0


def test_bootstrap_replicates_match_direct_recomputation():
    rng = np.random.default_rng(2)
    E = rng.uniform(0.5, 2, size=(12, 4))
    cfg = BootstrapConfig(20, seed=5)
    counts = resample_counts(12, cfg)
    reps_w = bootstrap_replicates(E, "pairwise_win_rate", cfg)
    reps_s = bootstrap_replicates(E, "pairwise_skill", cfg)
    reps_m = bootstrap_replicates(E, "skill_score", cfg, baseline_index=3)
    for b in range(cfg.num_samples):
        rows = np.repeat(np.arange(12), counts[b])
        np.testing.assert_array_equal(reps_w[b], pairwise_win_rate(E[rows]))
        np.testing.assert_allclose(reps_s[b], pairwise_skill(E[rows]), atol=1e-13)
        np.testing.assert_allclose(reps_m[b], skill_scores(E[rows], 3), atol=1e-13)


@settings(max_examples=30, deadline=None)
@given(error_matrices(max_m=5, max_r=15))
def test_bootstrap_bounds_are_ordered_and_in_range(E):
    iv = bootstrap_intervals(E, "pairwise_win_rate", BootstrapConfig(50))
    assert np.all(iv.lower <= iv.upper)
    assert np.all(iv.lower >= 0) and np.all(iv.upper <= 1)


# ---------------------------------------------------------------------------
# error matrix and imputation

MANIFEST = DatasetManifest("x.csv", "csv", "id", "ts", "H", ("y",))


def _summary(task_name, model, value=None, failed=False, leaked=False, runtime=1.0, metric="mase"):
    task = Task(task_name, MANIFEST, 2, eval_metric=metric)
    win = [EvaluationWindow(1, 10, 12)]
    if failed:
        return summarize(task, model, [], win, failed=True, failure_reason="x", trained_on_this_dataset=leaked)
    row = {"mase": value, "sql": 2 * value, "wql": value / 10, "wape": value / 20}
    return summarize(task, model, [row], win, runtime_s=runtime, trained_on_this_dataset=leaked)


def _grid(values: dict[str, list[float]]):
    out = []
    for model, vals in values.items():
        for r, v in enumerate(vals):
            out.append(_summary(f"t{r}", model, v))
    return out


def test_matrix_equals_raw_scores_without_imputation():
    em = build_error_matrix(_grid({"seasonal_naive": [1, 2], "a": [0.5, 3]}))
    np.testing.assert_array_equal(em.values, [[1, 0.5], [2, 3]])
    assert em.imputation_log == () and em.baseline_index == 0


def test_failure_imputed_from_baseline():
    s = _grid({"seasonal_naive": [1, 2, 3, 4], "a": [0.5, 0.5, 0.5, 0.5]})
    s[6] = _summary("t2", "a", failed=True)
    em = build_error_matrix(s)
    assert em.values[2, 1] == em.values[2, 0] == 3
    assert em.failure_mask[2, 1]
    (imp,) = em.imputation_log
    assert (imp.task_name, imp.model_name, imp.reason, imp.source_model) == ("t2", "a", "failure", "seasonal_naive")


def test_leakage_imputed_from_reference():
    s = _grid({"seasonal_naive": [1, 2, 3], "ref": [0.7, 0.8, 0.9], "a": [0.1, 0.1, 0.1]})
    s[7] = _summary("t1", "a", 0.1, leaked=True)
    em = build_error_matrix(s, reference_model_name="ref")
    assert em.values[1, 2] == 0.8 and em.leakage_mask[1, 2]
    assert em.imputation_log[0].reason == "leakage" and em.imputation_log[0].source_model == "ref"
    # default reference is the baseline
    em = build_error_matrix(s)
    assert em.values[1, 2] == 2


def test_leaked_reference_falls_back_to_baseline():
    s = _grid({"seasonal_naive": [1, 2], "ref": [0.7, 0.8], "a": [0.1, 0.1]})
    s[2] = _summary("t0", "ref", 0.7, leaked=True)
    s[4] = _summary("t0", "a", 0.1, leaked=True)
    em = build_error_matrix(s, reference_model_name="ref")
    assert em.values[0, 1] == 1 and em.values[0, 2] == 1


def test_imputation_is_idempotent():
    s = _grid({"seasonal_naive": [1, 2, 3], "a": [0.1, 0.2, 0.3]})
    s[4] = _summary("t1", "a", failed=True)
    a, b = build_error_matrix(s), build_error_matrix(s)
    np.testing.assert_array_equal(a.values, b.values)
    assert a.imputation_log == b.imputation_log


def test_metric_selection():
    s = _grid({"seasonal_naive": [1, 2], "a": [3, 4]})
    np.testing.assert_array_equal(build_error_matrix(s, "sql").values, [[2, 6], [4, 8]])


def test_baseline_incomplete_and_missing_scores():
    s = _grid({"seasonal_naive": [1, 2], "a": [3, 4]})
    with pytest.raises(BaselineIncompleteError):
        build_error_matrix(s[1:])
    with pytest.raises(MissingTaskScoreError):
        build_error_matrix(s[:3])
    bad = list(s)
    bad[0] = _summary("t0", "seasonal_naive", failed=True)
    with pytest.raises(BaselineIncompleteError):
        build_error_matrix(bad)
    with pytest.raises(BaselineIncompleteError):
        build_error_matrix(s, baseline_name="naive")


# ---------------------------------------------------------------------------
# report


def test_report_rows_and_checks():
    s = _grid({"seasonal_naive": [1, 2, 3, 1.5], "a": [0.5, 3, 1, 1.5], "b": [2, 2.5, 4, 1]})
    s[5] = _summary("t1", "a", failed=True)
    rep = build_report(build_error_matrix(s), BootstrapConfig(100))
    names = [r.model for r in rep.rows]
    wr = {r.model: r.win_rate for r in rep.rows}
    assert names == sorted(names, key=lambda n: -wr[n]) or len(set(wr.values())) < 3
    sn = next(r for r in rep.rows if r.model == "seasonal_naive")
    assert sn.skill_score == 0.0
    a = next(r for r in rep.rows if r.model == "a")
    assert a.failures == 1 and a.median_runtime_s == 1.0
    assert rep.checks["rank_identity_max_abs_error"] <= 1e-12
    assert rep.checks["bt_ordering_matches_win_rate"] is True
    assert rep.to_dict()["num_models"] == 3
