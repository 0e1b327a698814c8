import math

import numpy as np
import pytest

from reachlearn.experiment import (
    ANGLE_STEP,
    bootstrap_ci,
    compute_metrics,
    generate_corpus,
    heldout_walks,
    normalize_trajectory,
    random_policy_baseline,
    run_experiment,
    run_test_block,
    unsigned_angle,
)
from reachlearn.model import OracleArmModel, RecurrentForwardModel
from reachlearn.planner import CemConfig
from reachlearn.seeding import stream
from reachlearn.transforms import pure_rotation

FAST = CemConfig(population=16, elite_count=2, iterations=2, horizon=3)


def test_rot_corpus_is_pure_rotations():
    corpus = generate_corpus("rot", 50, np.random.default_rng(0))
    assert len(corpus) == 50
    for tr in corpus:
        m = tr.transform.m
        assert np.linalg.det(m) == pytest.approx(1, abs=1e-12)
        np.testing.assert_allclose(m.T @ m, np.eye(2), atol=1e-12)
        assert tr.steps == 42


def test_rotplus_corpus_respects_band():
    corpus = generate_corpus("rotplus", 400, np.random.default_rng(1))
    for tr in corpus:
        spec = tr.transform.spec
        if 50 < abs(spec.rotation) < 70:
            assert abs(spec.rotation) == 60 and spec.is_pure_rotation


def test_corpus_reproducible_and_paired():
    a = generate_corpus("rot", 4, np.random.default_rng(2))
    b = generate_corpus("rot", 4, np.random.default_rng(2))
    c = generate_corpus("rotplus", 4, np.random.default_rng(2))
    for x, y, z in zip(a, b, c):
        assert x.cursors.tobytes() == y.cursors.tobytes()
        np.testing.assert_array_equal(x.actions, z.actions)
        np.testing.assert_array_equal(x.goal, z.goal)


def test_corpus_rejects_empty():
    with pytest.raises(ValueError):
        generate_corpus("rot", 0, np.random.default_rng(0))
    with pytest.raises(ValueError):
        generate_corpus("scale", 3, np.random.default_rng(0))


def test_equal_exposure_to_test_rotation():
    """Rot+ substitution mass matches Rot's probability of landing in the band."""
    n = 20_000
    rp = generate_corpus("rotplus", n, np.random.default_rng(3), steps=1)
    exact = sum(abs(t.transform.spec.rotation) == 60.0 for t in rp)
    band = sum(50 < abs(t.transform.spec.rotation) < 70
               for t in generate_corpus("rot", n, np.random.default_rng(4), steps=1))
    p = 40 / 360
    sd = math.sqrt(n * p * (1 - p))
    assert abs(exact - n * p) < 4 * sd and abs(band - n * p) < 4 * sd


def test_metrics_straight_path():
    path = np.array([[0, 0], [2, 0], [4, 0], [6, 0], [8, 0]], float)
    m = compute_metrics(path, (8, 0), dt=0.5, reached=True)
    assert m.angular_error_200ms == 0.0 and m.min_goal_distance == 0.0
    assert m.cumulative_penalty == pytest.approx(6 + 4 + 2 + 0)
    np.testing.assert_allclose(m.speeds, [4, 4, 4, 4])
    assert m.reached and m.steps == 4


def test_metrics_hand_built():
    # three steps: (0,0) -> (1,1) -> (3,1) -> (3,4), goal (4,0)
    path = np.array([[0, 0], [1, 1], [3, 1], [3, 4]], float)
    m = compute_metrics(path, (4, 0), dt=0.1)
    d = [math.hypot(3, 1), math.hypot(1, 1), math.hypot(1, 4)]
    assert m.cumulative_penalty == pytest.approx(sum(d))
    assert m.min_goal_distance == pytest.approx(math.sqrt(2))
    assert m.angular_error_200ms == pytest.approx(math.degrees(math.atan2(4, 3)))
    np.testing.assert_allclose(m.speeds, [math.sqrt(2) / 0.1, 20.0, 30.0])
    assert m.mean_speed == pytest.approx(np.mean([math.sqrt(2) * 10, 20, 30]))
    assert m.peak_speed == pytest.approx(30.0)


def test_metrics_undefined_angle():
    path = np.zeros((6, 2))
    m = compute_metrics(path, (8, 0), dt=0.1)
    assert math.isnan(m.angular_error_200ms)
    assert m.cumulative_penalty == pytest.approx(40.0)


def test_angle_step_is_two_hundred_ms():
    assert ANGLE_STEP == math.ceil(0.2 * 14)


def test_unsigned_angle():
    assert unsigned_angle((1, 0), (0, -1)) == pytest.approx(90)
    assert unsigned_angle((1, 0), (-1, 1e-12)) == pytest.approx(180)


def test_normalize_fixed_point():
    path = np.array([[0, 0], [3, 1], [8, 0.5]])
    np.testing.assert_allclose(normalize_trajectory(path, 60, (8, 0)), path, atol=1e-12)
    once = normalize_trajectory(path, 60, (8, 0))
    np.testing.assert_allclose(normalize_trajectory(once, 60, (8, 0)), once, atol=1e-12)


def test_normalize_mirrored_pair():
    rng = np.random.default_rng(5)
    canonical = np.cumsum(rng.normal(size=(10, 2)), axis=0)
    phi = 1.1
    goal = 8 * np.array([np.cos(phi), np.sin(phi)])
    rot = np.array([[np.cos(phi), -np.sin(phi)], [np.sin(phi), np.cos(phi)]])
    plus = canonical @ rot.T
    minus = (canonical * [1, -1]) @ rot.T
    np.testing.assert_allclose(normalize_trajectory(plus, 60, goal), canonical, atol=1e-12)
    np.testing.assert_allclose(normalize_trajectory(minus, -60, goal), canonical, atol=1e-12)


def test_block_with_oracle():
    model = OracleArmModel(pure_rotation(60))
    res = run_test_block(model, +1, 5, np.random.default_rng(0), cem=FAST)
    assert len(res) == 5
    for m in res:
        assert m.cumulative_penalty >= 0 and m.min_goal_distance >= 0
        assert np.linalg.norm(m.goal) == pytest.approx(8)
        np.testing.assert_array_equal(m.trajectory[0], (0, 0))
        assert 1 <= m.steps <= 28


def test_block_freezes_weights():
    corpus = generate_corpus("rot", 4, np.random.default_rng(0))
    model = RecurrentForwardModel(hidden_size=4, epochs=1).fit(corpus)
    before = model.weights_.checksum()
    run_test_block(model, -1, 2, np.random.default_rng(1), cem=FAST)
    assert model.weights_.checksum() == before


def test_block_deterministic():
    model = OracleArmModel(pure_rotation(-60))
    a = run_test_block(model, -1, 2, np.random.default_rng(4), cem=FAST)
    b = run_test_block(model, -1, 2, np.random.default_rng(4), cem=FAST)
    for x, y in zip(a, b):
        assert x.trajectory.tobytes() == y.trajectory.tobytes()


def test_baseline():
    mean, se, pens = random_policy_baseline(30, np.random.default_rng(0))
    assert mean > 0 and se > 0 and len(pens) == 30
    again = random_policy_baseline(30, np.random.default_rng(0))
    assert again[0] == mean
    assert random_policy_baseline(5, np.random.default_rng(0), max_steps=0)[0] == 0.0


def test_bootstrap_ci():
    values = np.random.default_rng(0).normal(10, 1, size=200)
    m, lo, hi = bootstrap_ci(values, seed=1)
    assert lo < m < hi and hi - lo < 0.5
    assert bootstrap_ci([3.0, 3.0]) == (3.0, 3.0, 3.0)
    assert all(math.isnan(v) for v in bootstrap_ci([]))
    assert bootstrap_ci(values, seed=1) == (m, lo, hi)


def test_heldout_walks_alternate_sign():
    walks = heldout_walks(4, np.random.default_rng(0))
    assert [w.transform.spec.rotation for w in walks] == [60, -60, 60, -60]
    assert all(w.steps == 28 for w in walks)


def test_run_experiment_schema():
    models = {("rot", 0): OracleArmModel(pure_rotation(60)),
              ("rotplus", 0): OracleArmModel(pure_rotation(60))}
    table = run_experiment(models, n_blocks=2, n_reaches=3, cem=FAST, n_eval_walks=2)
    assert len(table.rows) == 2 * 2 * 3
    assert {r["reach"] for r in table.rows} == {1, 2, 3}
    assert table.model_errors[("rot", 0)].shape == (2, 28)
    summary = table.summary_rows(n_resamples=50)
    assert len(summary) == 2 * 3
    # conditions share goals for the same block
    goals = {(r["condition"], r["block"], r["reach"]): (r["goal_x"], r["goal_y"]) for r in table.rows}
    assert goals[("rot", 1, 2)] == goals[("rotplus", 1, 2)]


def test_streams_independent():
    a = stream(0, "goals").random(4)
    assert np.array_equal(a, stream(0, "goals").random(4))
    assert not np.array_equal(a, stream(0, "transforms").random(4))
    assert not np.array_equal(a, stream(1, "goals").random(4))
    assert not np.array_equal(stream(0, "test-block", 0, 1).random(2), stream(0, "test-block", 0, 2).random(2))
