import numpy as np
import pytest

from entroflow.dynamics import (
    LOG_LAMBDA,
    STABLE_DIR,
    UNSTABLE_DIR,
    CatSuspension,
    FamilyR,
    HamiltonianAnnulus,
    IdentityFlow,
    ProductSuspensionIdentity,
    TimeReversed,
    TimeScaled,
    find_critical_points,
)
from entroflow.hyperbolicity import (
    FrameDegenerationError,
    domination_check,
    flow_direction_exponent,
    lyapunov_spectrum,
    stable_directions,
    unstable_directions,
    unstable_vector,
)
from entroflow.manifold import Point

P_SUSP = Point.suspension((0.137, 0.522), 0.31)
P_NS = Point.product_ns((0.137, 0.522), 0.31, 0.77)


def test_cat_suspension_spectrum():
    rep = lyapunov_spectrum(CatSuspension(), P_SUSP, T=200)
    np.testing.assert_allclose(rep.exponents, [LOG_LAMBDA, 0, -LOG_LAMBDA], atol=0.02)
    assert len(rep.history) == 200 and rep.history.shape[1] == 3
    assert abs(rep.exponents.sum()) < 0.02


def test_product_identity_spectrum():
    rep = lyapunov_spectrum(ProductSuspensionIdentity(), P_NS, T=200)
    np.testing.assert_allclose(rep.exponents, [LOG_LAMBDA, 0, 0, -LOG_LAMBDA], atol=0.02)


def test_family_r0_spectrum_scales_with_profile():
    spec = FamilyR(0.0)
    rep = lyapunov_spectrum(spec, P_NS, T=200)
    a = float(spec.profile(P_NS.coords[3]))
    np.testing.assert_allclose(rep.exponents[[0, -1]], [a * LOG_LAMBDA, -a * LOG_LAMBDA], atol=0.02)


def test_identity_flow_spectrum():
    rep = lyapunov_spectrum(IdentityFlow(), P_SUSP, T=20)
    np.testing.assert_array_equal(rep.exponents, 0.0)


def test_spectrum_independent_of_starting_frame():
    rng = np.random.default_rng(0)
    base = lyapunov_spectrum(CatSuspension(), P_SUSP, T=200).exponents
    for _ in range(3):
        frame = np.linalg.qr(rng.normal(size=(3, 3)))[0]
        other = lyapunov_spectrum(CatSuspension(), P_SUSP, T=200, frame=frame).exponents
        np.testing.assert_allclose(other, base, atol=0.02)


def test_spectrum_time_scaling():
    base = lyapunov_spectrum(CatSuspension(), P_SUSP, T=200).exponents
    fast = lyapunov_spectrum(TimeScaled(CatSuspension(), 2.0), P_SUSP, T=100, renorm_interval=0.5).exponents
    np.testing.assert_allclose(fast, 2 * base, atol=0.02)


def test_spectrum_preconditions():
    with pytest.raises(ValueError):
        lyapunov_spectrum(CatSuspension(), P_SUSP, T=5, renorm_interval=1.0)
    with pytest.raises(FrameDegenerationError):
        lyapunov_spectrum(CatSuspension(), P_SUSP, T=400, renorm_interval=40.0)


@pytest.mark.parametrize("spec", [CatSuspension(), FamilyR(0.0), FamilyR(0.1), ProductSuspensionIdentity(),
                                  TimeScaled(CatSuspension(), 2.0), TimeReversed(FamilyR(0.2))],
                         ids=["cat-suspension", "family-r0", "family-r0.1", "product-identity", "scaled", "reversed"])
def test_flow_direction_exponent_vanishes(spec):
    p = P_SUSP if spec.space.dim == 3 else P_NS
    res = flow_direction_exponent(spec, p, T=100)
    assert abs(res.exponent) < 0.05
    assert len(res.history) == 100


def test_flow_direction_exponent_near_hamiltonian_center():
    ham = HamiltonianAnnulus()
    center = next(c for c in find_critical_points(ham) if c.kind == "center")
    p = Point.annulus(center.y + 0.003, center.z)
    assert abs(flow_direction_exponent(ham, p, T=100).exponent) < 0.05


def test_flow_direction_exponent_needs_nonzero_field():
    ham = HamiltonianAnnulus()
    saddle = next(c for c in find_critical_points(ham) if c.kind == "saddle")
    with pytest.raises(ValueError):
        flow_direction_exponent(ham, Point.annulus(saddle.y, saddle.z), T=10)


def test_unstable_vector_converges_to_eigendirection():
    v = unstable_vector(CatSuspension(), P_SUSP, T_back=30).array
    assert min(np.linalg.norm(v - np.r_[UNSTABLE_DIR, 0]), np.linalg.norm(v + np.r_[UNSTABLE_DIR, 0])) < 1e-6


def test_reversed_unstable_is_stable():
    v = unstable_vector(TimeReversed(CatSuspension()), P_SUSP).array
    assert abs(abs(v @ np.r_[STABLE_DIR, 0]) - 1) < 1e-6
    w = stable_directions(CatSuspension(), P_SUSP.array[None])[0]
    assert abs(abs(w @ np.r_[STABLE_DIR, 0]) - 1) < 1e-6


@pytest.mark.parametrize("spec", [CatSuspension(), FamilyR(0.1)], ids=["cat-suspension", "family-r0.1"])
def test_unstable_direction_is_equivariant(spec):
    p = P_SUSP if spec.space.dim == 3 else P_NS
    x = spec.space.canonicalize(p.array)[None]
    v = unstable_directions(spec, x)[0]
    pushed = spec.jacobian(x, 1.0)[0] @ v
    pushed /= np.linalg.norm(pushed)
    w = unstable_directions(spec, spec.flow(x, 1.0))[0]
    assert min(np.linalg.norm(pushed - w), np.linalg.norm(pushed + w)) < 1e-5


def test_domination_center_vs_unstable():
    rng = np.random.default_rng(1)
    pts = CatSuspension().space.uniform(rng, 20)
    rep = domination_check(CatSuspension(), pts, t_max=10, E="center", F="unstable")
    assert rep.rate == pytest.approx(-LOG_LAMBDA, abs=0.05)
    assert rep.passed


def test_domination_fails_for_a_bundle_against_itself():
    rng = np.random.default_rng(2)
    pts = CatSuspension().space.uniform(rng, 10)
    rep = domination_check(CatSuspension(), pts, t_max=10, E="unstable", F="unstable")
    assert abs(rep.rate) < 1e-6
    assert not rep.passed


@pytest.mark.parametrize("r", [0.0, 0.1])
def test_domination_family(r):
    rng = np.random.default_rng(3)
    pts = FamilyR(r).space.uniform(rng, 10)
    assert domination_check(FamilyR(r), pts, t_max=10).passed
