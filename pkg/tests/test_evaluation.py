import math

import numpy as np
import pytest

from oskm.datagen import StreamConfig, gen_stream
from oskm.evaluation import (Algorithm, RunTrace, bound_formula, ci_half_width, default_rho_grid,
                             mistake_bound, paired_compare, run_experiment, run_paired, run_sweep)
from oskm.kernel import KernelSpec
from oskm.machine import OskmConfig


def trace(acc_mistakes, seed, algo=Algorithm.OSKM):
    m = np.asarray(acc_mistakes, dtype=bool)
    y = np.ones(len(m), dtype=int)
    return RunTrace(algo, seed, np.zeros(len(m)), np.where(m, -1, 1), y, y, np.zeros(len(m), bool))


def test_single_sample_stream():
    s = gen_stream(StreamConfig(n_samples=1, seed=0))
    for algo in Algorithm:
        t = run_experiment(algo, s, OskmConfig())
        assert t.n_samples == 1 and t.raw_score[0] == 0 and t.predicted_label[0] == 1


def test_empty_stream_rejected():
    with pytest.raises(ValueError, match="empty"):
        run_experiment("oskm", gen_stream(StreamConfig(n_samples=0)), OskmConfig())


def test_trace_summaries():
    s = gen_stream(StreamConfig(n_samples=300, label_flip_prob=0.2, seed=1))
    for algo in Algorithm:
        t = run_experiment(algo, s, OskmConfig(), seed=1)
        assert t.accuracy_vs_clean == 1 - t.mistake_vs_clean.sum() / 300
        assert 0 <= t.accuracy_vs_noisy <= 1
        assert t.n_updates == t.update_made.sum() <= 300
        assert t.cumulative_mistakes[-1] == t.mistake_vs_clean.sum()
        assert np.array_equal(t.predicted_label, np.where(t.raw_score >= 0, 1, -1))
        again = run_experiment(algo, s, OskmConfig(), seed=1)
        assert np.array_equal(t.raw_score, again.raw_score)


def test_oskm_trace_equals_norma_trace_without_consensus():
    s = gen_stream(StreamConfig(n_samples=300, label_flip_prob=0.1, seed=2))
    cfg = OskmConfig(rho=0.0, tau_p=1, tau_e=1, admm_iters=1)
    a, b = run_experiment("oskm", s, cfg), run_experiment("norma", s, cfg)
    np.testing.assert_allclose(a.raw_score, b.raw_score, atol=1e-10, rtol=0)
    assert np.array_equal(a.update_made, b.update_made)


def test_divergence_gives_aborted_trace():
    s = gen_stream(StreamConfig(n_samples=400, seed=3))
    t = run_experiment("oskm", s, OskmConfig(rho=1e4, eta=0.99))
    assert t.aborted and "divergence" in t.error
    assert t.n_samples < 400


def test_ci_half_width():
    assert math.isnan(ci_half_width([1.0]))
    v = np.random.default_rng(0).normal(size=50)
    assert ci_half_width(v) == pytest.approx(1.959963984540054 * v.std(ddof=1) / math.sqrt(50), rel=1e-12)


def test_paired_compare_identical_and_constant_shift():
    a = [trace([0, 1, 0, 0], s) for s in range(5)]
    c = paired_compare(a, a)
    assert c.mean_diff == 0 and not c.significant
    better = [trace([0] * 10, s) for s in range(40)]
    worse = [trace([1] + [0] * 9, s, Algorithm.NORMA) for s in range(40)]
    c = paired_compare(better, worse)
    assert c.mean_diff == pytest.approx(0.1, abs=1e-15) and c.diff_ci == 0.0 and c.significant


def test_paired_compare_rejects_unpaired():
    a = [trace([0], s) for s in range(3)]
    with pytest.raises(ValueError, match="unpaired"):
        paired_compare(a, a[::-1])
    with pytest.raises(ValueError, match="duplicate"):
        paired_compare(a + a[:1], a + a[:1])


def test_sweep_report_shape_and_parallel_consistency():
    base = StreamConfig(dim=16, n_samples=100)
    serial = run_sweep("label-noise", [0.0, 0.3], base, OskmConfig(), range(3), workers=1)
    parallel = run_sweep("label-noise", [0.0, 0.3], base, OskmConfig(), range(3), workers=2)
    rows = list(serial.rows())
    assert len(rows) == 4 and {r["algo"] for r in rows} == {"oskm", "norma"}
    assert rows == list(parallel.rows())
    assert all(r["n_seeds"] == 3 for r in rows)


def test_run_paired_order():
    cfgs = [StreamConfig(dim=8, n_samples=50, seed=s) for s in (5, 2, 9)]
    assert [a.seed for a, _ in run_paired(cfgs, OskmConfig(), workers=1)] == [5, 2, 9]


# -- mistake bound ----------------------------------------------------------

def bound_fixture(points, labels):
    points = np.asarray(points, dtype=float)
    n = len(points)
    labels = np.asarray(labels)
    from oskm.datagen import Stream
    stream = Stream(points, labels, labels, np.zeros(n, int))
    t = RunTrace(Algorithm.OSKM, 0, np.zeros(n), labels, labels, labels, np.ones(n, bool))
    return t, stream


def test_bound_zero_losses_is_trace_over_rho():
    t, s = bound_fixture([[3.0, 0.0], [-2.0, 0.0]], [1, -1])
    rep = mistake_bound(t, s, [1.0, 0.0], rho_grid=[1.0])
    assert rep.loss_norm == 0 and rep.bound_value == pytest.approx(13.0)


def test_bound_unit_points_zero_losses_rho_one_equals_count():
    t, s = bound_fixture([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]], [1, 1, -1])
    rep = mistake_bound(t, s, np.array([1.0, 1.0]) / math.sqrt(2), rho_grid=[0.5])
    # margins 1/sqrt(2) >= 0.5, so the losses vanish; tr K = 3
    assert rep.bound_value == pytest.approx(6.0)
    t, s = bound_fixture(np.eye(3), [1, 1, 1])
    assert mistake_bound(t, s, np.ones(3) / math.sqrt(3), rho_grid=[1 / math.sqrt(3)]).bound_value \
        == pytest.approx(3 * math.sqrt(3))


def test_bound_minimises_over_grid_and_checks_inputs():
    t, s = bound_fixture(np.random.default_rng(0).normal(size=(20, 3)), np.ones(20, int))
    z = np.array([0.6, 0.0, 0.0])
    rep = mistake_bound(t, s, z)
    values = []
    for r in default_rho_grid():
        L = np.maximum(1 - s.y_noisy * (s.x @ z) / r, 0)
        values.append(bound_formula(np.linalg.norm(L), float(np.sum(s.x**2)), r))
    assert rep.bound_value == pytest.approx(min(values), rel=1e-12)
    assert len(default_rho_grid()) == 20
    assert rep.holds == (rep.M_N <= rep.bound_value)
    with pytest.raises(ValueError, match="comparator norm"):
        mistake_bound(t, s, [2.0, 0.0, 0.0])
    with pytest.raises(ValueError, match="linear kernel"):
        mistake_bound(t, s, z, spec=KernelSpec("gaussian"))


def test_bound_with_no_updates():
    t, s = bound_fixture([[1.0]], [1])
    t.update_made[:] = False
    rep = mistake_bound(t, s, [1.0])
    assert rep.M_N == 0 and rep.bound_value == 0 and rep.holds
