import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from reachlearn.transforms import (
    SamplerParams,
    TransformSpec,
    apply,
    compose,
    decompose,
    rotplus_from_draw,
    sample_rot,
    sample_rotplus,
)


def test_identity():
    np.testing.assert_array_equal(compose(TransformSpec()).m, np.eye(2))


def test_quarter_turn():
    np.testing.assert_allclose(apply(compose(TransformSpec(90)), [1, 0]), [0, 1], atol=1e-15)


def test_sixty_degrees():
    out = apply(compose(TransformSpec(60)), [8, 0])
    np.testing.assert_allclose(out, [8 * np.cos(np.pi / 3), 8 * np.sin(np.pi / 3)], atol=1e-12)
    np.testing.assert_allclose(out, [4.0, 6.9282], atol=1e-4)


def test_scale_and_shear():
    np.testing.assert_allclose(apply(compose(TransformSpec(0, 0, 1.3, 1.3)), [2, -1]), [2.6, -1.3])
    np.testing.assert_allclose(apply(compose(TransformSpec(0, 0.37)), [0, 1]), [0.37, 1])


def test_rejects_non_positive_scale():
    with pytest.raises(ValueError):
        TransformSpec(0, 0, 0.0, 1.0)
    with pytest.raises(ValueError):
        TransformSpec(0, 0, 1.0, -2.0)


@settings(max_examples=50, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5), st.floats(-3, 3))
def test_linearity(x1, y1, x2, y2, a):
    t = compose(TransformSpec(33.0, 0.2, 1.4, 0.9))
    p, q = np.array([x1, y1]), np.array([x2, y2])
    np.testing.assert_allclose(apply(t, a * p + q), a * apply(t, p) + apply(t, q), atol=1e-9)


def test_rot_samples_are_rotations():
    rng = np.random.default_rng(0)
    for _ in range(200):
        m = sample_rot(rng).m
        assert np.linalg.det(m) == pytest.approx(1, abs=1e-12)
        np.testing.assert_allclose(m.T @ m, np.eye(2), atol=1e-12)


def test_samplers_reproducible():
    a = [sample_rot(np.random.default_rng(5)).spec for _ in range(3)]
    b = [sample_rot(np.random.default_rng(5)).spec for _ in range(3)]
    assert a == b
    r1, r2 = np.random.default_rng(9), np.random.default_rng(9)
    assert [sample_rotplus(r1).spec for _ in range(20)] == [sample_rotplus(r2).spec for _ in range(20)]


def test_rot_angles_uniform():
    rng = np.random.default_rng(2024)
    angles = np.array([sample_rot(rng).spec.rotation for _ in range(100_000)])
    counts, _ = np.histogram(angles, bins=36, range=(-180, 180))
    assert stats.chisquare(counts).pvalue > 0.01


@pytest.mark.parametrize("drawn, expected", [(55.0, 60.0), (-65.0, -60.0)])
def test_substitution_rule(drawn, expected):
    t = rotplus_from_draw(drawn, 0.3, 1.8, 0.9)
    assert t.spec == TransformSpec(expected, 0.0, 1.0, 1.0)


def test_outside_band_keeps_shear_and_scale():
    t = rotplus_from_draw(45.0, 0.2, 1.3, 1.1)
    c, s = np.cos(np.pi / 4), np.sin(np.pi / 4)
    # R(45) @ [[1, .2], [0, 1]] @ diag(1.3, 1.1), multiplied out by hand
    expected = np.array([[1.3 * c, (0.2 * c - s) * 1.1], [1.3 * s, (0.2 * s + c) * 1.1]])
    np.testing.assert_allclose(t.m, expected, atol=1e-12)


def test_band_edges_not_substituted():
    assert rotplus_from_draw(50.0, 0.1, 1.2, 1.2).spec.rotation == 50.0
    assert rotplus_from_draw(-70.0, 0.1, 1.2, 1.2).spec.rotation == -70.0


def test_rotplus_never_inside_band():
    rng = np.random.default_rng(77)
    for _ in range(100_000):
        spec = sample_rotplus(rng).spec
        if 50 < abs(spec.rotation) < 70:
            assert abs(spec.rotation) == 60.0 and spec.is_pure_rotation


def test_rotplus_invariants():
    rng = np.random.default_rng(3)
    scales = []
    for _ in range(5000):
        t = sample_rotplus(rng)
        assert 0.1 <= abs(t.det) <= 10
        np.testing.assert_allclose(t.m, compose(t.spec).m, atol=1e-12)
        scales += [t.spec.scale_x, t.spec.scale_y]
    # log-uniform on [0.77, 2.2]: geometric mean sqrt(0.77 * 2.2) ~= 1.30
    assert np.exp(np.mean(np.log(scales))) == pytest.approx(np.sqrt(0.77 * 2.2), rel=0.05)


@settings(max_examples=100, deadline=None)
@given(st.floats(-179.9, 179.9))
def test_decompose_round_trip_rotation(angle):
    assert decompose(compose(TransformSpec(angle)).m).rotation == pytest.approx(angle, abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(st.floats(-179, 179), st.floats(-0.5, 0.5), st.floats(0.77, 2.2), st.floats(0.77, 2.2))
def test_decompose_round_trip_general(rot, sh, sx, sy):
    spec = decompose(compose(TransformSpec(rot, sh, sx, sy)).m)
    np.testing.assert_allclose(spec.as_array(), [rot, sh, sx, sy], atol=1e-9)


def test_sampler_params_validation():
    with pytest.raises(ValueError):
        SamplerParams(rotation_range=(10, -10))
    with pytest.raises(ValueError):
        SamplerParams(scale_range=(0, 2))
