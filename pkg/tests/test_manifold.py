import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from entroflow.entropy import _feature_table
from entroflow.manifold import (
    CAT,
    CIRCLE,
    LAMBDA,
    PRODUCT_NS,
    SUSPENSION,
    TORUS2,
    Annulus,
    DomainError,
    Point,
    TangentVector,
    canonicalize,
    dist,
    product_ta,
    sample_grid,
)

SPACES = [TORUS2, CIRCLE, SUSPENSION, Annulus(0.1), PRODUCT_NS, product_ta(0.1)]
IDS = [s.name for s in SPACES]


def test_torus_wrap():
    p = canonicalize(Point.torus2(1.3, -0.2))
    assert p.coords == pytest.approx((0.3, 0.8), abs=1e-15)


def test_suspension_roof_crossing_applies_cat():
    p = canonicalize(Point.suspension((0.1, 0.2), 1.0))
    expected = np.mod(CAT @ np.array([0.1, 0.2]), 1.0)
    np.testing.assert_allclose(p.coords[:2], expected, atol=1e-15)
    assert p.coords[2] == 0.0


def test_suspension_negative_roof_applies_inverse():
    p = canonicalize(Point.suspension((0.4, 0.3), -1.0))
    np.testing.assert_allclose(p.coords, (0.1, 0.2, 0.0), atol=1e-14)


def test_circle_identity_on_canonical_input():
    assert canonicalize(Point.circle(0.5)).coords == (0.5,)


def test_annulus_out_of_domain():
    with pytest.raises(DomainError):
        canonicalize(Point.annulus(0.2, 0.0))


def test_non_finite_rejected():
    with pytest.raises(DomainError):
        TORUS2.canonicalize([np.nan, 0.0])


def test_point_dimension_checked():
    with pytest.raises(ValueError):
        Point(TORUS2, (0.1, 0.2, 0.3))
    with pytest.raises(ValueError):
        TangentVector(Point.circle(0.1), (1.0, 2.0))


def test_distance_examples():
    assert dist(Point.torus2(0.1, 0.1), Point.torus2(0.9, 0.9)) == pytest.approx(np.hypot(0.2, 0.2))
    assert dist(Point.circle(0.0), Point.circle(0.5)) == pytest.approx(0.5)
    with pytest.raises(TypeError):
        dist(Point.circle(0.0), Point.torus2(0.0, 0.0))


def test_grid_examples():
    assert [p.coords for p in sample_grid(CIRCLE, 4)] == [(0.0,), (0.25,), (0.5,), (0.75,)]
    torus = sample_grid(TORUS2, (3, 3))
    assert len(torus) == 9
    np.testing.assert_allclose(np.array([p.coords for p in torus]) * 3, np.round(np.array([p.coords for p in torus]) * 3))
    ann = Annulus(0.1).grid((3, 4))
    assert ann.shape == (12, 2)
    np.testing.assert_allclose(np.unique(ann[:, 0]), [-0.1, 0.0, 0.1])


def test_grid_is_lexicographic():
    g = TORUS2.grid((4, 5))
    keys = [tuple(r) for r in g]
    assert keys == sorted(keys)


def test_grid_box_restricts_and_defaults_to_full_grid():
    np.testing.assert_array_equal(TORUS2.grid(7), TORUS2.grid(7, box=[(0, 1), (0, 1)]))
    g = SUSPENSION.grid((10, 10, 2), box=[(0, 0.1), (0.2, 0.3), (0, 1)])
    assert g.shape == (200, 3)
    assert g[:, 0].max() < 0.1 and 0.2 <= g[:, 1].min() and g[:, 1].max() < 0.3
    with pytest.raises(ValueError):
        TORUS2.grid(3, box=[(0, 1)])


@pytest.mark.parametrize("space", SPACES, ids=IDS)
def test_canonicalize_idempotent(space):
    rng = np.random.default_rng(1)
    x = space.uniform(rng, 500)
    if space.name != "annulus" and "annulus" not in space.name:
        x = x + rng.integers(-3, 4, size=x.shape)
    once = space.canonicalize(x)
    np.testing.assert_array_equal(space.canonicalize(once), once)


@pytest.mark.parametrize("space", SPACES, ids=IDS)
def test_metric_axioms(space):
    rng = np.random.default_rng(2)
    a, b, c = (space.uniform(rng, 10_000) for _ in range(3))
    dab, dbc, dac = space.dist(a, b), space.dist(b, c), space.dist(a, c)
    assert np.all(dab >= 0)
    np.testing.assert_allclose(dab, space.dist(b, a), atol=1e-15)
    assert np.all(dac <= dab + dbc + 1e-12)
    assert np.all(space.dist(a, a) == 0)


def _deck_shift(space, x, rng):
    """Integer shift of every periodic coordinate; the suspension roof stays put."""
    shift = rng.integers(-2, 3, size=x.shape).astype(float)
    if space.name == "annulus":
        shift[..., 0] = 0
    elif space.name == "suspension":
        shift[..., 2] = 0
    elif space is PRODUCT_NS:
        shift[..., 2] = 0
    elif space.name == "torus2xannulus":
        shift[..., 2] = 0
    return x + shift


@pytest.mark.parametrize("space", SPACES, ids=IDS)
def test_deck_translation_invariance(space):
    rng = np.random.default_rng(3)
    a, b = space.uniform(rng, 2000), space.uniform(rng, 2000)
    moved = space.canonicalize(_deck_shift(space, a, rng))
    np.testing.assert_allclose(space.dist(moved, b), space.dist(a, b), atol=1e-12)


def test_suspension_identification_is_continuous():
    rng = np.random.default_rng(4)
    x = rng.random((100, 2))
    for h in (1e-3, 1e-6, 1e-9):
        below = np.c_[x, np.full(100, 1 - h)]
        above = np.c_[np.mod(x @ CAT.T, 1.0), np.full(100, h)]
        assert SUSPENSION.dist(SUSPENSION.canonicalize(below), above).max() < 10 * h


@pytest.mark.parametrize("space", SPACES, ids=IDS)
def test_features_are_isometric(space):
    rng = np.random.default_rng(5)
    a, b = space.uniform(rng, 3000), space.uniform(rng, 3000)
    feats, periods = _feature_table(space, np.stack([a, b])[:, :, :])
    diff = np.abs(feats[0] - feats[1])
    diff = np.minimum(diff, periods - diff)
    np.testing.assert_allclose(np.linalg.norm(diff, axis=-1), space.dist(a, b), atol=1e-12)


def test_suspension_metric_continuous_across_roof():
    rng = np.random.default_rng(6)
    v = rng.normal(size=(50, 3))
    top = SUSPENSION.metric_norm(np.c_[rng.random((50, 2)), np.ones(50)], v)
    pushed = np.c_[v[:, :2] @ CAT.T, v[:, 2]]
    bottom = SUSPENSION.metric_norm(np.zeros((50, 3)), pushed)
    np.testing.assert_allclose(top, bottom, rtol=1e-12)


def test_suspension_metric_scales_unstable_direction():
    from entroflow.manifold import E_UNSTABLE

    v = np.r_[E_UNSTABLE, 0.0]
    assert SUSPENSION.metric_norm(np.array([0.2, 0.3, 0.5]), v) == pytest.approx(LAMBDA**0.5)


@settings(max_examples=200, deadline=None)
@given(st.floats(-50, 50), st.floats(-50, 50), st.floats(-5, 5))
def test_suspension_canonical_form_range(x1, x2, tau):
    out = SUSPENSION.canonicalize([x1, x2, tau])
    assert np.all((0 <= out) & (out < 1))
