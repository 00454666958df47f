"""The six reproduction experiments.

Each experiment appends long-format rows and per-section diagnostics to a
RunReport and returns SVG plots keyed by file name.  Estimator failures are
caught per section so the rest of the run still completes.
"""
from __future__ import annotations

import time
import traceback
from contextlib import contextmanager

import numpy as np

from ..dynamics import (
    LOG_LAMBDA,
    CatMap,
    CatSuspension,
    FamilyR,
    HamiltonianAnnulus,
    ProductMap,
    ProductSuspensionIdentity,
    Profile,
    TimeOne,
    finite_difference_jacobian,
    find_critical_points,
    homoclinic_loop,
)
from ..entropy import entropy_fit, separated_counts, tail_entropy
from ..growth import chi_estimate, tangent_chi, time_scaling_check, usc_probe
from ..manifold import PRODUCT_NS, TORUS2
from .config import ExperimentConfig
from .report import Row, RunReport, Section, check_above, check_below, check_close
from .svg import line_plot


class _Context:
    def __init__(self, cfg: ExperimentConfig, report: RunReport):
        self.cfg = cfg
        self.report = report
        self.plots: dict[str, str] = {}
        self.rng = np.random.default_rng(cfg.seed)

    def row(self, system, parameter, value, quantity, estimate, tolerance="", residual=None, passed=None):
        self.report.rows.append(Row(self.cfg.name, system, parameter, value, quantity, estimate,
                                    tolerance, residual, passed))

    @contextmanager
    def section(self, name):
        sec = Section(name)
        self.report.sections.append(sec)
        start = time.perf_counter()
        try:
            yield sec
        except Exception as exc:  # estimator errors are recorded, the run continues
            sec.error = f"{type(exc).__name__}: {exc}"
            sec.diagnostics["traceback_tail"] = traceback.format_exc().strip().splitlines()[-1]
        finally:
            self.report.timings[name] = time.perf_counter() - start


def _profile(cfg) -> Profile:
    return Profile(cfg.system["c0"], cfg.system["c1"])


def _growth_kwargs(g) -> dict:
    return {"radius": g["radius"], "spacing": g["spacing"], "cap": int(g["cap"]), "rescale": int(g["rescale"])}


def _sampling(g, r: float):
    """Horizon and sample spacing; periodic time changes are sampled once per circle period."""
    if r == 0:
        return float(g["horizon"]), float(g["dt"])
    period = 1.0 / abs(r)
    return g["periods"] * period, period


def _series_diag(est) -> dict:
    return {"times": est.times, "envelope": est.envelope, "rate": est.rate, "residual": est.residual,
            "argmax_seed": est.argmax_seed, "seed_count": est.seed_count,
            "per_seed_rates": [s.rate for s in est.series]}


def _count_diag(table, est) -> dict:
    return {"grid_size": table.grid_size,
            "counts": {f"{e:g}": [[n, c] for n, c in table.counts[e]] for e in table.eps},
            "saturated_n": {f"{e:g}": table.saturated[e] for e in table.eps},
            "slopes": {f"{e:g}": est.slopes[e] for e in table.eps},
            "residuals": {f"{e:g}": est.residuals[e] for e in table.eps},
            "headline_eps": est.headline_eps}


def _entropy_time_one(spec, ecfg, sat, thr, name):
    """Separated-set entropy of the time-one map.

    For flows with an invariant circle factor (r = 0) the grid is split into
    its circle fibers and the sup over fibers is returned; the entropy of a
    skew product over an isometry is the sup of its fiber entropies.
    """
    m = TimeOne(spec)
    box = ecfg.get("box")
    grid = spec.space.grid(tuple(ecfg["grid"]), box=None if box is None else [tuple(b) for b in box])
    if isinstance(spec, FamilyR) and spec.r == 0:
        fibers = np.unique(grid[:, 3])
    else:
        fibers = [None]
    best = None
    per_fiber = {}
    for s in fibers:
        pts = grid if s is None else grid[grid[:, 3] == s]
        table = separated_counts(m, pts, ecfg["n"], ecfg["eps"], sat, name)
        est = entropy_fit(table, saturation=sat, residual_threshold=thr)
        key = "all" if s is None else f"s={s:g}"
        per_fiber[key] = _count_diag(table, est)
        if best is None or est.headline > best[1].headline:
            best = (table, est, key)
    return best, per_fiber


def _log_counts_series(table):
    e = table.eps[0]
    n = np.array([r[0] for r in table.counts[e]], float)
    c = np.array([r[1] for r in table.counts[e]], float)
    return n, np.log(c)


def ent_vs_growth(ctx: _Context):
    cfg = ctx.cfg
    g = cfg.estimator["growth"]
    ecfg = cfg.estimator["entropy"]
    tol = cfg.tolerance
    sat, thr = ecfg["saturation"], ecfg["residual_threshold"]
    count_series, growth_series = {}, {}
    for system in cfg.system["systems"]:
        if system == "cat-map":
            with ctx.section("cat-map entropy") as sec:
                table = separated_counts(CatMap(), TORUS2.grid(tuple(ecfg["cat-map"]["grid"])), ecfg["cat-map"]["n"],
                                         ecfg["cat-map"]["eps"], sat, "cat-map")
                est = entropy_fit(table, saturation=sat, residual_threshold=thr)
                sec.diagnostics.update(_count_diag(table, est))
                crit, ok = check_close(est.headline, LOG_LAMBDA, tol["entropy_vs_analytic"])
                ctx.row(system, "eps", est.headline_eps, "h_top", est.headline, crit, est.headline_residual, ok)
                count_series["cat-map"] = _log_counts_series(table)
            continue
        if system == "cat-suspension":
            spec, analytic = CatSuspension(), LOG_LAMBDA
        elif system == "family-r0":
            spec = FamilyR(0.0, _profile(cfg))
            analytic = spec.profile.max * LOG_LAMBDA
        else:
            raise ValueError(f"unknown system {system!r}")
        chis = {}
        with ctx.section(f"{system} growth") as sec:
            seeds = spec.space.uniform(ctx.rng, int(g["seeds"]))
            for fol in ("unstable", "stable"):
                est = chi_estimate(spec, fol, seeds, float(g["horizon"]), dt=float(g["dt"]),
                                   threads=cfg.threads, **_growth_kwargs(g))
                chis[fol] = est
                sec.diagnostics[fol] = _series_diag(est)
                crit, ok = check_close(est.rate, analytic, tol["chi_vs_analytic"])
                label = "chi_u" if fol == "unstable" else "chi_s"
                ctx.row(system, "T", g["horizon"], label, est.rate, crit, est.residual, ok)
                growth_series[f"{system} {label}"] = (est.times, est.envelope - est.envelope[0])
            tan = tangent_chi(spec, "unstable", seeds, float(g["horizon"]))
            crit, ok = check_close(tan.rate, chis["unstable"].rate, tol["tangent_vs_curve"])
            ctx.row(system, "T", g["horizon"], "tangent_chi_u", tan.rate, crit, None, ok)
        with ctx.section(f"{system} entropy") as sec:
            (table, est, fiber), per_fiber = _entropy_time_one(spec, ecfg[system], sat, thr, system)
            sec.diagnostics.update({"fibers": per_fiber, "sup_fiber": fiber})
            crit, ok = check_close(est.headline, analytic, tol["entropy_vs_analytic"] + tol["chi_vs_analytic"])
            ctx.row(system, "eps", est.headline_eps, "h_top_time_one", est.headline, crit, est.headline_residual, ok)
            count_series[system] = _log_counts_series(table)
            if chis:
                chi_max = max(chis["unstable"].rate, chis["stable"].rate)
                gap = abs(est.headline - chi_max)
                crit, ok = check_below(gap, tol["entropy_vs_growth"])
                ctx.row(system, "eps", est.headline_eps, "abs(h_top - max(chi_u, chi_s))", gap, crit, None, ok)
    if count_series:
        ctx.plots["log_counts.svg"] = line_plot(count_series, "Separated-set counts", "n", "log N(n, eps)")
    if growth_series:
        ctx.plots["log_volume.svg"] = line_plot(growth_series, "Leaf volume growth (sup over seeds)", "t",
                                                "log volume - initial")


def entropy_drop(ctx: _Context):
    cfg = ctx.cfg
    g = cfg.estimator["growth"]
    tol = cfg.tolerance
    profile = _profile(cfg)
    rates, series = {}, {}
    for r in cfg.system["r"]:
        spec = FamilyR(float(r), profile)
        analytic = (profile.max if r == 0 else profile.mean) * LOG_LAMBDA
        with ctx.section(f"r={r:g}") as sec:
            seeds = spec.space.uniform(ctx.rng, int(g["seeds"]))
            horizon, dt = _sampling(g, r)
            est = chi_estimate(spec, "unstable", seeds, horizon, dt=dt, threads=cfg.threads, **_growth_kwargs(g))
            sec.diagnostics.update(_series_diag(est))
            sec.diagnostics["sample_dt"] = dt
            crit, ok = check_close(est.rate, analytic, tol["chi_vs_analytic"])
            ctx.row("family-r", "r", r, "chi_u", est.rate, crit, est.residual, ok)
            rates[float(r)] = est.rate
            series[f"r={r:g}"] = (est.times, est.envelope - est.envelope[0])
    with ctx.section("drop"):
        if 0.0 in rates and any(r != 0 for r in rates):
            gap = rates[0.0] - max(v for r, v in rates.items() if r != 0)
            crit, ok = check_above(gap, tol["min_gap"])
            ctx.row("family-r", "r", "0+", "chi_u(0) - max chi_u(r>0)", gap, crit, None, ok)
    if rates:
        rs = sorted(rates)
        ctx.plots["chi_vs_r.svg"] = line_plot({"chi_u": (rs, [rates[r] for r in rs])},
                                              "Unstable growth across the family", "r", "chi_u")
        ctx.plots["log_volume.svg"] = line_plot(series, "Leaf volume growth", "t", "log volume - initial")


def g0_diagnostics(ctx: _Context):
    cfg = ctx.cfg
    sysc = cfg.system
    ic = cfg.estimator["integrator"]
    tol = cfg.tolerance
    params = dict(eps1=sysc["eps1"], eps2=sysc["eps2"], delta=sysc["delta"], bump_radius=sysc["bump_radius"],
                  cutoff=sysc["cutoff"])
    ham = HamiltonianAnnulus(**params, step=ic["step"])
    space = ham.space
    with ctx.section("critical points") as sec:
        crit_pts = find_critical_points(ham)
        sec.diagnostics["points"] = [{"y": c.y, "z": c.z, "kind": c.kind, "residual": c.residual,
                                      "hessian_det": c.hessian_det} for c in crit_pts]
        for kind in ("saddle", "center"):
            n = sum(c.kind == kind for c in crit_pts)
            crit, ok = check_above(n, 0)
            ctx.row("g0", "", "", f"{kind} count", n, crit, None, ok)
        worst = max(c.residual for c in crit_pts)
        crit, ok = check_below(worst, tol["newton_residual"])
        ctx.row("g0", "", "", "max Newton residual", worst, crit, None, ok)
        saddles = [c for c in crit_pts if c.kind == "saddle"]
    with ctx.section("homoclinic loop") as sec:
        loop = homoclinic_loop(ham, saddles[0])
        sec.diagnostics.update({"saddle": loop.saddle, "unstable_rate": loop.unstable_rate,
                                "closest_return": loop.closest_return, "return_time": loop.return_time})
        ret = min(loop.closest_return)
        crit, ok = check_below(ret, tol["homoclinic_return"])
        ctx.row("g0", "", "", "homoclinic closest return", ret, crit, None, ok)
    with ctx.section("area preservation") as sec:
        pts = space.uniform(ctx.rng, int(ic["area_points"]))
        # keep the difference stencil inside the annulus
        pts[:, 0] = np.clip(pts[:, 0], -space.delta + 1e-5, space.delta - 1e-5)
        fd = finite_difference_jacobian(lambda x: ham.flow(x, 1.0), pts, h=1e-6, delta=space.chart_delta)
        worst = float(np.max(np.abs(np.linalg.det(fd) - 1)))
        variational = float(np.max(np.abs(np.linalg.det(ham.jacobian(pts, 1.0)) - 1)))
        sec.diagnostics.update({"points": int(ic["area_points"]), "variational_max_error": variational})
        crit, ok = check_below(worst, tol["area"])
        ctx.row("g0", "points", int(ic["area_points"]), "max abs(det Dg0 - 1)", worst, crit, None, ok)
    with ctx.section("energy conservation") as sec:
        pts = space.uniform(ctx.rng, int(ic["conservation_points"]))
        t = float(ic["conservation_time"])
        drift = float(np.max(np.abs(ham.energy(ham.flow(pts, t)) - ham.energy(pts))))
        crit, ok = check_below(drift, tol["energy_drift"])
        ctx.row("g0", "t", t, "max energy drift", drift, crit, None, ok)
    count_series = {}
    g0_map = TimeOne(HamiltonianAnnulus(**params, step=ic["entropy_step"]))
    g0_est = None
    with ctx.section("g0 entropy") as sec:
        ecfg = cfg.estimator["entropy"]
        table = separated_counts(g0_map, space.grid(tuple(ecfg["grid"])), ecfg["n"], ecfg["eps"],
                                 ecfg["saturation"], "g0")
        g0_est = entropy_fit(table, saturation=ecfg["saturation"], residual_threshold=ecfg["residual_threshold"])
        sec.diagnostics.update(_count_diag(table, g0_est))
        crit, ok = check_below(g0_est.headline, tol["g0_entropy"])
        ctx.row("g0", "eps", g0_est.headline_eps, "h_top", g0_est.headline, crit, g0_est.headline_residual, ok)
        count_series["g0"] = _log_counts_series(table)
    with ctx.section("product entropy") as sec:
        pc = cfg.estimator["product"]
        ecfg = cfg.estimator["entropy"]
        sat, thr = ecfg["saturation"], ecfg["residual_threshold"]
        prod = ProductMap(CatMap(), g0_map)
        box = [tuple(b) for b in pc["box"]]
        ptab = separated_counts(prod, prod.space.grid(tuple(pc["grid"]), box=box), pc["n"], pc["eps"], sat,
                                "cat x g0")
        pest = entropy_fit(ptab, saturation=sat, residual_threshold=thr)
        atab = separated_counts(CatMap(), TORUS2.grid(tuple(pc["factor_grid"]), box=box[:2]), pc["n"], pc["eps"],
                                sat, "cat")
        aest = entropy_fit(atab, saturation=sat, residual_threshold=thr)
        sec.diagnostics.update({"product": _count_diag(ptab, pest), "cat": _count_diag(atab, aest)})
        gap = abs(pest.headline - aest.headline)
        crit, ok = check_below(gap, tol["product_gap"])
        ctx.row("cat x g0", "eps", pest.headline_eps, "h_top", pest.headline, "", pest.headline_residual, None)
        ctx.row("cat", "eps", aest.headline_eps, "h_top", aest.headline, "", aest.headline_residual, None)
        ctx.row("cat x g0", "eps", pest.headline_eps, "abs(h_top(product) - h_top(cat))", gap, crit, None, ok)
        if g0_est is not None:
            ctx.row("cat x g0", "eps", pest.headline_eps, "h_top(product) - h_top(cat) - h_top(g0)",
                    pest.headline - aest.headline - g0_est.headline)
        count_series["cat x g0"] = _log_counts_series(ptab)
        count_series["cat"] = _log_counts_series(atab)
    if count_series:
        ctx.plots["log_counts.svg"] = line_plot(count_series, "Separated-set counts", "n", "log N(n, eps)")


def _tail_system(name, cfg):
    if name == "product-identity":
        return ProductSuspensionIdentity()
    if name == "family-r":
        return FamilyR(float(cfg.system["r"]), _profile(cfg))
    raise ValueError(f"unknown system {name!r}")


def tail_entropy_experiment(ctx: _Context):
    cfg = ctx.cfg
    tc = cfg.estimator["tail"]
    tol = cfg.tolerance
    centers = PRODUCT_NS.uniform(ctx.rng, int(tc["centers"]))
    n_balls = sorted(int(n) for n in tc["n_ball"])
    curves = {}
    for system in cfg.system["systems"]:
        spec = _tail_system(system, cfg)
        sups = []
        with ctx.section(system) as sec:
            for nb in n_balls:
                res = tail_entropy(TimeOne(spec), centers, tc["radius"], nb, int(tc["horizon"]),
                                   plaque_scale=tc["plaque_scale"], resolution=int(tc["resolution"]))
                sups.append(res.sup_slope)
                sec.diagnostics[f"n_ball={nb}"] = {
                    "sup_slope": res.sup_slope, "argmax": res.argmax,
                    "raw_slopes": [p.raw_slope for p in res.per_point],
                    "retained": [p.retained for p in res.per_point],
                    "counts_at_argmax": max(res.per_point, key=lambda p: p.slope).counts,
                }
                final = nb == n_balls[-1]
                crit, ok = check_below(res.sup_slope, tol["tail_slope"]) if final else ("", None)
                ctx.row(system, "n_ball", nb, "sup tail slope", res.sup_slope, crit, None, ok)
            rises = [b - a for a, b in zip(sups, sups[1:])]
            worst = max(rises) if rises else 0.0
            crit, ok = check_below(worst, tol["monotone_slack"] + 1e-12)
            ctx.row(system, "n_ball", f"{n_balls[0]}-{n_balls[-1]}", "max increase of sup slope", worst, crit, None, ok)
            curves[system] = (n_balls, sups)
    if curves:
        ctx.plots["tail_slope_vs_nball.svg"] = line_plot(curves, "Tail-entropy slope", "n_ball", "sup slope")


def time_scaling_experiment(ctx: _Context):
    cfg = ctx.cfg
    g = cfg.estimator["growth"]
    tol = cfg.tolerance
    for system in cfg.system["systems"]:
        spec = CatSuspension() if system == "cat-suspension" else FamilyR(float(cfg.system["r"]), _profile(cfg))
        bound = tol["discrepancy"] if system == "cat-suspension" else tol["discrepancy_family"]
        for t in cfg.system["t"]:
            with ctx.section(f"{system} t={t:g}") as sec:
                seeds = spec.space.uniform(ctx.rng, int(g["seeds"]))
                res = time_scaling_check(spec, float(t), seeds, float(g["horizon"]), **_growth_kwargs(g))
                sec.diagnostics.update({"chi_time_t": res.chi_time_t, "chi_unit": res.chi_unit})
                ctx.row(system, "t", t, "chi per iterate of phi_t", res.chi_time_t)
                ctx.row(system, "t", t, "t * chi per iterate of phi_1", t * res.chi_unit)
                crit, ok = check_below(res.discrepancy, bound)
                ctx.row(system, "t", t, "discrepancy", res.discrepancy, crit, None, ok)


def usc_probe_experiment(ctx: _Context):
    cfg = ctx.cfg
    g = cfg.estimator["growth"]
    tol = cfg.tolerance
    sysc = cfg.system
    spec = FamilyR(float(sysc["r"]), _profile(cfg))
    horizon, dt = _sampling(g, float(sysc["r"]))
    seeds = spec.space.uniform(ctx.rng, int(g["seeds"]))
    xs, ys = [], []
    for zeta in sysc["zeta"]:
        with ctx.section(f"zeta={zeta:g}") as sec:
            probe = usc_probe(spec, float(zeta), seeds, horizon, tolerance=tol["excess"], dt=dt,
                              harmonic=int(sysc["harmonic"]), phase=float(sysc["phase"]), **_growth_kwargs(g))
            sec.diagnostics.update({"baseline": probe.baseline, "perturbed": probe.perturbed})
            ctx.row("family-r", "zeta", zeta, "chi_u baseline", probe.baseline)
            ctx.row("family-r", "zeta", zeta, "chi_u perturbed", probe.perturbed)
            if zeta == 0:
                ctx.row("family-r", "zeta", zeta, "excess", probe.excess, "==0", None, probe.excess == 0)
            else:
                crit, ok = check_below(probe.excess, tol["excess"] + 1e-12)
                ctx.row("family-r", "zeta", zeta, "excess", probe.excess, crit, None, ok)
            xs.append(float(zeta))
            ys.append(probe.perturbed)
    if xs:
        ctx.plots["chi_vs_zeta.svg"] = line_plot({"perturbed chi_u": (xs, ys)}, "Profile perturbation probe",
                                                 "zeta", "chi_u")


RUNNERS = {
    "ent-vs-growth": ent_vs_growth,
    "entropy-drop": entropy_drop,
    "g0-diagnostics": g0_diagnostics,
    "tail-entropy": tail_entropy_experiment,
    "time-scaling": time_scaling_experiment,
    "usc-probe": usc_probe_experiment,
}


def run(cfg: ExperimentConfig) -> tuple[RunReport, dict[str, str]]:
    """Execute one experiment; deterministic given the config (including its seed)."""
    report = RunReport(config=cfg.to_dict())
    report.config["experiment"].pop("output", None)
    report.config["experiment"].pop("threads", None)
    ctx = _Context(cfg, report)
    start = time.perf_counter()
    RUNNERS[cfg.name](ctx)
    report.timings["total"] = time.perf_counter() - start
    return report, ctx.plots
