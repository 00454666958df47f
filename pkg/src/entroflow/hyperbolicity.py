"""Lyapunov spectra, invariant directions and the domination inequality."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import Flow, reverse
from .manifold import Point, TangentVector


class FrameDegenerationError(RuntimeError):
    pass


@dataclass
class LyapunovReport:
    point: Point
    horizon: float
    renorm_interval: float
    exponents: np.ndarray
    history_times: np.ndarray
    history: np.ndarray  # running estimates, one row per checkpoint


def _windows(T, dt):
    n = int(np.floor(T / dt + 1e-9))
    steps = [dt] * n
    if T - n * dt > 1e-12:
        steps.append(T - n * dt)
    return steps


def lyapunov_spectrum(spec: Flow, p: Point, T: float = 200.0, renorm_interval: float = 1.0,
                      frame: np.ndarray | None = None, max_condition: float = 1e12) -> LyapunovReport:
    """Standard QR re-orthonormalization of a tangent frame along the orbit of ``p``."""
    if T < 10 * renorm_interval:
        raise ValueError("horizon must be at least ten renormalization intervals")
    d = spec.space.dim
    q = np.eye(d) if frame is None else np.linalg.qr(np.asarray(frame, float))[0]
    x = spec.space.canonicalize(p.array)
    sums = np.zeros(d)
    elapsed = 0.0
    times, hist = [], []
    for dt in _windows(T, renorm_interval):
        w = spec.jacobian(x, dt) @ q
        sv = np.linalg.svd(w, compute_uv=False)
        if sv[-1] == 0 or sv[0] / sv[-1] > max_condition:
            raise FrameDegenerationError(
                f"frame condition number {sv[0] / max(sv[-1], 1e-300):.3g} at t={elapsed:.3g}; "
                "use a smaller renormalization interval"
            )
        q, r = np.linalg.qr(w)
        diag = np.diag(r)
        q = q * np.sign(diag)
        sums += np.log(np.abs(diag))
        x = spec.flow(x, dt)
        elapsed += dt
        times.append(elapsed)
        hist.append(np.sort(sums / elapsed)[::-1])
    return LyapunovReport(p, T, renorm_interval, np.sort(sums / elapsed)[::-1], np.array(times), np.array(hist))


@dataclass
class DirectionExponent:
    exponent: float
    history_times: np.ndarray
    history: np.ndarray


def flow_direction_exponent(spec: Flow, p: Point, T: float = 100.0, interval: float = 1.0,
                            min_speed: float = 1e-12) -> DirectionExponent:
    """Growth rate of the flow direction X(p) under the derivative cocycle."""
    space = spec.space
    x = space.canonicalize(p.array)
    v = spec.field(x)
    n0 = float(space.metric_norm(x, v))
    if n0 < min_speed:
        raise ValueError("vector field vanishes at the starting point")
    v = v / n0
    total, elapsed = 0.0, 0.0
    times, hist = [], []
    for dt in _windows(T, interval):
        v = spec.jacobian(x, dt) @ v
        x = spec.flow(x, dt)
        nv = float(space.metric_norm(x, v))
        if np.linalg.norm(spec.field(x)) < min_speed:
            raise ValueError(f"vector field vanishes along the orbit at t={elapsed + dt:.3g}")
        total += np.log(nv)
        v = v / nv
        elapsed += dt
        times.append(elapsed)
        hist.append(total / elapsed)
    return DirectionExponent(total / elapsed, np.array(times), np.array(hist))


_GENERIC = np.array([1.0, np.sqrt(2.0), np.sqrt(3.0), np.sqrt(5.0), np.sqrt(7.0)])


def _push_normalized(spec, x, v, T, interval=1.0):
    """Push vectors v (N, d) based at x (N, d) over time T.

    Returns the endpoints, the pushed vectors normalized in the space's
    metric, and the accumulated log growth of that metric norm.
    """
    space = spec.space
    v = v / space.metric_norm(x, v)[:, None]
    logs = np.zeros(x.shape[0])
    for dt in _windows(abs(T), interval):
        dt = dt if T >= 0 else -dt
        v = np.einsum("nij,nj->ni", spec.jacobian(x, dt), v)
        x = spec.flow(x, dt)
        nv = space.metric_norm(x, v)
        logs += np.log(nv)
        v = v / nv[:, None]
    return x, v, logs


def unstable_directions(spec: Flow, x, T_back: float = 30.0) -> np.ndarray:
    """Unit vectors approximating E^u at each row of ``x`` by forward power iteration."""
    x = np.atleast_2d(spec.space.canonicalize(x))
    start = spec.flow(x, -T_back)
    v0 = np.broadcast_to(_GENERIC[: spec.space.dim] / np.linalg.norm(_GENERIC[: spec.space.dim]), x.shape).copy()
    _, v, _ = _push_normalized(spec, start, v0, T_back)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def stable_directions(spec: Flow, x, T_back: float = 30.0) -> np.ndarray:
    return unstable_directions(reverse(spec), x, T_back)


def unstable_vector(spec: Flow, p: Point, T_back: float = 30.0) -> TangentVector:
    x = spec.space.canonicalize(p.array)
    v = unstable_directions(spec, x[None], T_back)[0]
    return TangentVector(Point(p.space, x), v)


def _bundle(spec, name):
    if callable(name):
        return name
    if name == "unstable":
        return lambda x: unstable_directions(spec, x)[..., None]
    if name == "stable":
        return lambda x: stable_directions(spec, x)[..., None]
    if name == "center":
        return spec.center_basis
    raise ValueError(f"unknown bundle {name!r}")


@dataclass
class DominationReport:
    times: np.ndarray
    sup_ratio: np.ndarray
    rate: float
    margin: float
    passed: bool
    table: list = field(default_factory=list)


def domination_check(spec: Flow, points, t_max: float = 10.0, E="center", F="unstable",
                     margin: float = 0.1) -> DominationReport:
    """Worst case over ``points`` of ||Dphi_t|E|| * ||Dphi_{-t}|F|| for t = 1..t_max.

    Passes iff the least-squares slope of log(sup ratio) against t is below
    ``-margin``.
    """
    x = np.atleast_2d(spec.space.canonicalize(np.asarray(points, float)))
    basis_e, basis_f = _bundle(spec, E), _bundle(spec, F)
    be = basis_e(x)
    times = np.arange(1, int(np.floor(t_max)) + 1, dtype=float)
    sup = []
    for t in times:
        ne = np.linalg.norm(spec.jacobian(x, t) @ be, ord=2, axis=(-2, -1))
        y = spec.flow(x, t)
        bf = basis_f(y)
        nf = np.linalg.norm(spec.jacobian(y, -t) @ bf, ord=2, axis=(-2, -1))
        sup.append(float(np.max(ne * nf)))
    sup = np.array(sup)
    rate = float(np.polyfit(times, np.log(sup), 1)[0]) if len(times) > 1 else float(np.log(sup[0]))
    table = [(float(t), float(s)) for t, s in zip(times, sup)]
    return DominationReport(times, sup, rate, margin, rate < -margin, table)
