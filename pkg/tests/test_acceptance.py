"""Acceptance suite.

Each test is tagged with the criterion it covers; the terminal summary
prints one PASS/FAIL line per criterion (see conftest.py).  The experiment
fixtures run the shipped default configurations once per session, so this
module takes several minutes on one core.
"""
import numpy as np
import pytest

from entroflow.dynamics import (
    LOG_LAMBDA,
    CatSuspension,
    DoublingCircle,
    FamilyR,
    HamiltonianAnnulus,
    IdentityMap,
    ProductSuspensionIdentity,
    Profile,
)
from entroflow.entropy import entropy_fit, estimate_entropy
from entroflow.hyperbolicity import domination_check, flow_direction_exponent
from entroflow.lab.config import EXPERIMENTS, ExperimentConfig
from entroflow.lab.harness import run_to_dir
from entroflow.manifold import CIRCLE, TORUS2, Point

FAMILY_R_ZERO = FamilyR(0.0).profile.max * LOG_LAMBDA  # 1.5 * log(lambda)


def _rows(report, system=None, quantity=None):
    return [r for r in report.rows
            if (system is None or r.system == system) and (quantity is None or r.quantity == quantity)]


def _one(report, system, quantity, value=None):
    rows = [r for r in _rows(report, system, quantity) if value is None or r.value == value]
    assert len(rows) == 1, f"expected one {system}/{quantity} row, found {len(rows)}"
    return rows[0]


def _no_errors(report):
    errors = [f"{s.name}: {s.error}" for s in report.sections if s.error]
    assert not errors, errors


@pytest.fixture(scope="module")
def run_default(tmp_path_factory):
    cache = {}

    def get(name):
        if name not in cache:
            cache[name] = run_to_dir(ExperimentConfig.default(name), tmp_path_factory.mktemp(name))
        return cache[name]

    return get


# 1. cat-map entropy


@pytest.mark.criterion(1)
def test_cat_map_entropy(run_default, record_property):
    cfg = ExperimentConfig.default("ent-vs-growth").estimator["entropy"]["cat-map"]
    assert cfg["grid"] == [300, 300] and cfg["eps"] == [0.05] and cfg["n"] == list(range(2, 11))
    report = run_default("ent-vs-growth")
    row = _one(report, "cat-map", "h_top")
    seconds = report.timings["cat-map entropy"]
    record_property("detail", f"h={row.estimate:.4f} target {LOG_LAMBDA:.4f}+-0.10, {seconds:.1f}s")
    assert abs(row.estimate - LOG_LAMBDA) <= 0.10
    assert seconds <= 120


# 2. entropy of the time-one map against max(chi_u, chi_s)


@pytest.mark.criterion(2)
@pytest.mark.parametrize("system", ["cat-suspension", "family-r0"])
def test_entropy_matches_growth(run_default, record_property, system):
    report = run_default("ent-vs-growth")
    _no_errors(report)
    gap = _one(report, system, "abs(h_top - max(chi_u, chi_s))").estimate
    h = _one(report, system, "h_top_time_one").estimate
    chi_u = _one(report, system, "chi_u").estimate
    chi_s = _one(report, system, "chi_s").estimate
    record_property("detail", f"h={h:.4f} chi_u={chi_u:.4f} chi_s={chi_s:.4f} gap={gap:.4f}<0.15")
    assert gap == pytest.approx(abs(h - max(chi_u, chi_s)), abs=1e-9)
    assert gap < 0.15


@pytest.mark.criterion(2)
def test_entropy_vs_growth_runtime(run_default, record_property):
    seconds = run_default("ent-vs-growth").timings["total"]
    record_property("detail", f"{seconds:.1f}s<=300s")
    assert seconds <= 300


# 3. entropy drop of the time-changed family


@pytest.mark.criterion(3)
def test_entropy_drop(run_default, record_property):
    cfg = ExperimentConfig.default("entropy-drop")
    assert cfg.system["r"] == [0.0, 0.05, 0.1, 0.2]
    assert (cfg.system["c0"], cfg.system["c1"]) == (1.0, 0.5)
    report = run_default("entropy-drop")
    _no_errors(report)
    rates = {r.value: r.estimate for r in _rows(report, "family-r", "chi_u")}
    gap = _one(report, "family-r", "chi_u(0) - max chi_u(r>0)").estimate
    seconds = report.timings["total"]
    record_property("detail", " ".join(f"r={k:g}:{v:.4f}" for k, v in rates.items())
                    + f" gap={gap:.4f} {seconds:.1f}s")
    assert abs(rates[0.0] - FAMILY_R_ZERO) <= 0.06
    for r in (0.05, 0.1, 0.2):
        assert abs(rates[r] - LOG_LAMBDA) <= 0.06
    assert gap > 0.35
    assert seconds <= 600


# 4. time scaling


@pytest.mark.criterion(4)
def test_time_scaling(run_default, record_property):
    cfg = ExperimentConfig.default("time-scaling")
    assert cfg.system["t"] == [2.0] and cfg.system["systems"] == ["cat-suspension"]
    report = run_default("time-scaling")
    _no_errors(report)
    disc = _one(report, "cat-suspension", "discrepancy", 2.0).estimate
    record_property("detail", f"discrepancy={disc:.4f}<0.05")
    assert disc < 0.05


# 5. Hamiltonian g0 diagnostics


@pytest.mark.criterion(5)
def test_g0_diagnostics(run_default, record_property):
    cfg = ExperimentConfig.default("g0-diagnostics")
    assert cfg.estimator["integrator"]["area_points"] == 1000
    assert cfg.estimator["integrator"]["conservation_time"] == 100.0
    report = run_default("g0-diagnostics")
    _no_errors(report)
    h = _one(report, "g0", "h_top").estimate
    area = _one(report, "g0", "max abs(det Dg0 - 1)").estimate
    drift = _one(report, "g0", "max energy drift").estimate
    saddles = _one(report, "g0", "saddle count").estimate
    centers = _one(report, "g0", "center count").estimate
    newton = _one(report, "g0", "max Newton residual").estimate
    gap = _one(report, "cat x g0", "abs(h_top(product) - h_top(cat))").estimate
    record_property("detail", f"h={h:.4f} area={area:.2e} drift={drift:.2e} saddles={saddles} "
                              f"centers={centers} newton={newton:.1e} product_gap={gap:.4f}")
    assert h < 0.05
    assert area < 1e-6
    assert drift < 1e-8
    assert saddles >= 1 and centers >= 1
    assert newton < 1e-8
    assert gap <= 0.15


# 6. tail entropy


@pytest.mark.criterion(6)
@pytest.mark.parametrize("system", ["product-identity", "family-r"])
def test_tail_entropy(run_default, record_property, system):
    cfg = ExperimentConfig.default("tail-entropy")
    tail = cfg.estimator["tail"]
    assert tail["centers"] == 16 and tail["radius"] == 0.02 and tail["horizon"] <= 12
    assert tail["n_ball"] == [5, 10, 15, 20] and cfg.system["r"] == 0.1
    report = run_default("tail-entropy")
    _no_errors(report)
    sups = [r.estimate for r in sorted(_rows(report, system, "sup tail slope"), key=lambda r: r.value)]
    record_property("detail", "sup slopes " + ", ".join(f"{s:.4f}" for s in sups))
    assert sups[-1] < 0.05
    assert all(b <= a + 0.01 for a, b in zip(sups, sups[1:]))


# 7. Lyapunov and structure suite

FIXED_POINT_FREE = {
    "cat-suspension": CatSuspension(),
    "family-r0": FamilyR(0.0),
    "family-r0.1": FamilyR(0.1),
    "family-r-0.3": FamilyR(-0.3, Profile(1.0, -0.4)),
    "product-identity": ProductSuspensionIdentity(),
}
ALL_BUILTINS = dict(FIXED_POINT_FREE, hamiltonian=HamiltonianAnnulus())


def _sample(spec, n, seed):
    return spec.space.uniform(np.random.default_rng(seed), n)


@pytest.mark.criterion(7)
@pytest.mark.parametrize("name", FIXED_POINT_FREE)
def test_flow_direction_exponent(record_property, name):
    spec = FIXED_POINT_FREE[name]
    worst = 0.0
    for x in _sample(spec, 4, 11):
        worst = max(worst, abs(flow_direction_exponent(spec, Point(spec.space, x), T=100).exponent))
    record_property("detail", f"max |exponent|={worst:.2e}<0.05")
    assert worst < 0.05


@pytest.mark.criterion(7)
def test_domination_rate(record_property):
    rep = domination_check(CatSuspension(), _sample(CatSuspension(), 32, 12), t_max=10, E="center", F="unstable")
    record_property("detail", f"rate={rep.rate:.4f}<=-0.8")
    assert rep.rate <= -0.8


@pytest.mark.criterion(7)
@pytest.mark.parametrize("name", ALL_BUILTINS)
def test_group_law(record_property, name):
    spec = ALL_BUILTINS[name]
    rng = np.random.default_rng(13)
    x = _sample(spec, 1000, 13)
    worst = 0.0
    for _ in range(3):
        t, s = rng.uniform(-5, 5, size=2)
        worst = max(worst, spec.space.dist(spec.flow(x, t + s), spec.flow(spec.flow(x, s), t)).max())
    record_property("detail", f"max dist={worst:.1e}<1e-7")
    assert worst < 1e-7


@pytest.mark.criterion(7)
@pytest.mark.parametrize("name", ALL_BUILTINS)
def test_cocycle_law(record_property, name):
    spec = ALL_BUILTINS[name]
    x = _sample(spec, 50, 14)
    s, t = 1.7, -2.4
    lhs = spec.jacobian(x, s + t)
    rhs = spec.jacobian(spec.flow(x, s), t) @ spec.jacobian(x, s)
    rel = float(np.max(np.linalg.norm(lhs - rhs, axis=(-2, -1)) / np.linalg.norm(lhs, axis=(-2, -1))))
    record_property("detail", f"max relative error={rel:.1e}<1e-6")
    assert rel < 1e-6


# 8. oracles


@pytest.mark.criterion(8)
def test_doubling_oracle(record_property):
    est = estimate_entropy(DoublingCircle(), CIRCLE.grid(100_000), range(4, 13), [0.01])
    record_property("detail", f"h={est.headline:.4f} target {np.log(2):.4f}+-0.05")
    assert abs(est.headline - np.log(2)) <= 0.05


@pytest.mark.criterion(8)
def test_identity_oracle(record_property):
    est = estimate_entropy(IdentityMap(TORUS2), TORUS2.grid(100), range(1, 9), [0.1, 0.2])
    record_property("detail", f"h={est.headline!r}")
    assert est.headline == 0.0
    assert all(v == 0.0 for v in est.slopes.values())


@pytest.mark.criterion(8)
@pytest.mark.parametrize("slope", [0.25, np.log(2), LOG_LAMBDA, 1.6])
def test_synthetic_count_oracle(record_property, slope):
    rows = [(n, int(round(3 * np.exp(slope * n) * 1e9))) for n in range(1, 13)]
    est = entropy_fit({0.05: rows})
    err = abs(est.headline - slope)
    record_property("detail", f"slope error={err:.1e}<1e-6")
    assert err < 1e-6


# 9. determinism


def _reduced(name):
    """Small but complete configuration that exercises every section of an experiment."""
    cfg = ExperimentConfig.default(name)
    small_growth = {"seeds": 4, "horizon": 6.0, "cap": 5000, "spacing": 2e-3}
    if "growth" in cfg.estimator:
        for key, value in small_growth.items():
            cfg = cfg.with_value(("estimator", "growth", key), value)
    if name == "ent-vs-growth":
        for system, grid, n in [("cat-map", [80, 80], [2, 3, 4, 5]), ("cat-suspension", [40, 40, 2], [1, 2, 3, 4]),
                                ("family-r0", [30, 30, 2, 2], [1, 2, 3, 4])]:
            cfg = cfg.with_value(("estimator", "entropy", system, "grid"), grid)
            cfg = cfg.with_value(("estimator", "entropy", system, "n"), n)
    elif name == "entropy-drop":
        cfg = cfg.with_value(("system", "r"), [0.0, 0.1])
    elif name == "g0-diagnostics":
        for path, value in [(("integrator", "area_points"), 50), (("integrator", "conservation_points"), 2),
                            (("integrator", "conservation_time"), 5.0), (("entropy", "grid"), [40, 40]),
                            (("entropy", "n"), [1, 3, 6, 9]), (("product", "grid"), [10, 10, 2, 6]),
                            (("product", "factor_grid"), [10, 10]), (("product", "n"), [1, 2, 3, 4])]:
            cfg = cfg.with_value(("estimator",) + path, value)
    elif name == "tail-entropy":
        for key, value in [("centers", 2), ("n_ball", [5]), ("horizon", 4), ("resolution", 33)]:
            cfg = cfg.with_value(("estimator", "tail", key), value)
    return cfg


@pytest.mark.criterion(9)
@pytest.mark.parametrize("name", EXPERIMENTS)
def test_byte_identical_reruns(tmp_path, record_property, name):
    cfg = _reduced(name)
    first = run_to_dir(cfg, tmp_path / "a")
    second = run_to_dir(cfg, tmp_path / "b")
    assert first.rows, "a run must produce rows"
    same = all((tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
               for f in ("results.csv", "report.json"))
    record_property("detail", f"{len(first.rows)} rows, csv/json identical={same}")
    assert same
    assert second.csv_text() == first.csv_text()


@pytest.mark.criterion(9)
def test_default_run_is_reproducible(run_default, tmp_path, record_property):
    first = run_default("time-scaling")
    again = run_to_dir(ExperimentConfig.default("time-scaling"), tmp_path)
    same = again.csv_text() == first.csv_text() and again.json_text() == first.json_text()
    record_property("detail", f"default time-scaling csv/json identical={same}")
    assert same
