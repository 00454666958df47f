"""Topological entropy from Bowen separated sets, and a finite-time tail-entropy probe."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.spatial import cKDTree

from .dynamics import Map, ProductMap, TimeOne, orbit
from .growth import tail_fit
from .manifold import Point, Space


class EntropyError(RuntimeError):
    pass


def _as_array(space: Space, p):
    if isinstance(p, Point):
        if p.space != space:
            raise TypeError(f"point lives on {p.space.name}, map acts on {space.name}")
        return p.array
    return space.canonicalize(np.asarray(p, float))


def dn_metric(m: Map, p, q, n: int):
    """Bowen distance max_{0 <= i < n} d(f^i p, f^i q).

    ``q`` may be a single point or an (N, d) array; the orbit of ``p`` is
    computed once for the whole batch.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    space = m.space
    p = _as_array(space, p)
    q = _as_array(space, q)
    op = orbit(m, p, n)
    oq = orbit(m, q, n)
    if oq.ndim == 3:
        op = op[:, None, :]
    d = space.dist(op, oq).max(axis=0)
    return float(d) if np.ndim(d) == 0 else d


def _feature_table(space: Space, table: np.ndarray):
    """Per-time features (n, N, k) and their periods.

    Every space's features are an isometric wrapped-Euclidean picture of its
    metric: dist(a, b) equals the Euclidean norm of the period-wrapped
    feature difference.
    """
    periods = np.asarray(space.feature_periods(), float)
    feats = np.stack([np.mod(space.features(table[i]), periods) for i in range(table.shape[0])])
    return np.ascontiguousarray(feats), periods


def _candidate_tree(feats: np.ndarray, periods: np.ndarray):
    """KD-tree over features at the first and last orbit times; a superset filter for d_n balls."""
    n = feats.shape[0]
    times = sorted({0, n - 1})
    cols = np.concatenate([feats[i] for i in times], axis=-1)
    box = np.tile(periods, len(times))
    # constant columns cannot separate anything; dropping them keeps the superset property
    live = np.ptp(cols, axis=0) > 0
    if not live.any():
        live[0] = True
    cols = np.ascontiguousarray(cols[:, live])
    return cKDTree(cols, boxsize=box[live]), cols


@njit(cache=True)
def _within(feats, periods, i, j, eps2):
    for t in range(feats.shape[0]):
        acc = 0.0
        for k in range(feats.shape[2]):
            d = feats[t, i, k] - feats[t, j, k]
            d -= periods[k] * np.floor(d / periods[k] + 0.5)
            acc += d * d
        if acc > eps2:
            return False
    return True


@njit(cache=True)
def _cover(feats, periods, i, cand, eps2, covered):
    for c in cand:
        if not covered[c] and _within(feats, periods, i, c, eps2):
            covered[c] = True


def greedy_separated(space: Space, table: np.ndarray, eps: float, limit: int | None = None, features=None):
    """Greedy maximal separated subset of the orbit table (n, N, d) in row order.

    A point is accepted iff its d_n distance to every accepted point exceeds
    ``eps``.  Returns (count, accepted indices, complete flag); counting stops
    early once ``limit`` is exceeded.
    """
    n, N, _ = table.shape
    feats, periods = _feature_table(space, table) if features is None else features
    tree, cols = _candidate_tree(feats, periods)
    radius = eps * (1 + 1e-9) + 1e-15
    lim = N if limit is None else int(limit)
    eps2 = eps * eps
    covered = np.zeros(N, dtype=np.bool_)
    accepted = []
    for i in range(N):
        if covered[i]:
            continue
        accepted.append(i)
        if len(accepted) > lim:
            return len(accepted), np.array(accepted, dtype=np.int64), False
        covered[i] = True
        cand = np.asarray(tree.query_ball_point(cols[i], radius, p=np.inf), dtype=np.int64)
        _cover(feats, periods, i, cand, eps2, covered)
    return len(accepted), np.array(accepted, dtype=np.int64), True


def separated_count(m: Map, points, n: int, eps: float) -> int:
    """Size of the greedy (n, eps)-separated subset of ``points`` taken in the given order."""
    pts = _as_array(m.space, points)
    return greedy_separated(m.space, orbit(m, pts, n), eps)[0]


@dataclass
class CountTable:
    """Separated-set counts N(n, eps); ``saturated[eps]`` lists n values past the grid limit."""

    map_name: str
    grid_size: int
    eps: list[float]
    ns: list[int]
    counts: dict[float, list[tuple[int, int]]]
    saturated: dict[float, list[int]] = field(default_factory=dict)


def separated_counts(m: Map, points, ns, eps_list, saturation: float = 0.5, name: str | None = None,
                     orbit_table: np.ndarray | None = None) -> CountTable:
    """Counts for every (n, eps) cell from one shared orbit table.

    Once a cell exceeds ``saturation`` times the grid size the remaining
    larger n for that eps are marked saturated and skipped.
    """
    ns = sorted(int(n) for n in ns)
    if ns[0] < 1:
        raise ValueError("n must be >= 1")
    space = m.space
    pts = _as_array(space, points)
    N = pts.shape[0]
    full = orbit(m, pts, ns[-1]) if orbit_table is None else orbit_table
    feats, periods = _feature_table(space, full)
    limit = int(saturation * N)
    counts, sat = {}, {}
    for eps in sorted(float(e) for e in eps_list):
        rows, over = [], []
        for n in ns:
            if over:
                over.append(n)
                continue
            c, _, _ = greedy_separated(space, full[:n], eps, limit, features=(feats[:n], periods))
            rows.append((n, c))
            if c > limit:
                over.append(n)
        counts[eps], sat[eps] = rows, over
    return CountTable(name or type(m).__name__, N, sorted(counts), ns, counts, sat)


@dataclass
class EntropyEstimate:
    map_name: str
    eps: list[float]
    table: dict[float, list[tuple[int, int]]]
    slopes: dict[float, float]
    residuals: dict[float, float]
    saturated: dict[float, bool]
    headline: float
    headline_eps: float
    headline_residual: float


def entropy_fit(table: CountTable | dict, grid_size: int | None = None, saturation: float = 0.5,
                residual_threshold: float = 0.15, map_name: str = "map") -> EntropyEstimate:
    """Tail-window slope of log N(n, eps) against n for every eps.

    The window is the upper half of the unsaturated n range.  The headline
    is the slope at the smallest eps whose fit residual is below
    ``residual_threshold`` (falling back to the smallest usable eps).
    """
    if isinstance(table, CountTable):
        rows_by_eps, grid_size, map_name = table.counts, table.grid_size, table.map_name
        sat_marks = table.saturated
    else:
        rows_by_eps, sat_marks = {float(k): list(v) for k, v in table.items()}, {}
    slopes, resid, sat = {}, {}, {}
    limit = np.inf if grid_size is None else saturation * grid_size
    for eps in sorted(rows_by_eps):
        rows = sorted(rows_by_eps[eps])
        if len(rows) + len(sat_marks.get(eps, [])) < 4:
            raise ValueError(f"need at least four n values per eps (eps={eps})")
        ok = [(n, c) for n, c in rows if c <= limit]
        sat[eps] = len(ok) < len(rows) or bool(sat_marks.get(eps))
        if len(ok) < 2:
            slopes[eps], resid[eps] = np.nan, np.nan
            continue
        n_arr = np.array([n for n, _ in ok], float)
        c_arr = np.array([c for _, c in ok], float)
        if np.any(c_arr < 1):
            raise ValueError("counts must be >= 1")
        slopes[eps], resid[eps] = tail_fit(n_arr, np.log(c_arr))
    usable = [e for e in sorted(slopes) if np.isfinite(slopes[e])]
    if not usable:
        raise EntropyError("every eps is saturated; use a finer grid or a larger eps")
    good = [e for e in usable if resid[e] < residual_threshold]
    head = good[0] if good else usable[0]
    return EntropyEstimate(map_name, sorted(rows_by_eps), rows_by_eps, slopes, resid, sat,
                           slopes[head], head, resid[head])


def estimate_entropy(m: Map, points, ns, eps_list, saturation: float = 0.5,
                     residual_threshold: float = 0.15, name: str | None = None) -> EntropyEstimate:
    """Counts followed by the tail fit."""
    table = separated_counts(m, points, ns, eps_list, saturation, name)
    return entropy_fit(table, saturation=saturation, residual_threshold=residual_threshold)


@dataclass
class TailPoint:
    center: np.ndarray
    retained: int
    counts: list[int]
    slope: float
    raw_slope: float
    residual: float


@dataclass
class TailEntropyResult:
    radius: float
    n_ball: int
    m: int
    gauge: float
    per_point: list[TailPoint]
    sup_slope: float
    argmax: np.ndarray


def center_plaque(spec, x, half_width: float, resolution: int) -> np.ndarray:
    """Grid on the center plaque through ``x``: flow direction times the circle factor.

    Rows are ordered lexicographically in (flow offset, circle offset).
    """
    x = np.asarray(x, float)
    if spec.space.dim != 4:
        raise ValueError("center plaques are defined for suspension-times-circle flows")
    u = np.linspace(-half_width, half_width, resolution)
    uu, vv = np.meshgrid(u, u, indexing="ij")
    pts = np.repeat(x[None, :], uu.size, axis=0)
    pts[:, 2] += uu.ravel()
    pts[:, 3] += vv.ravel()
    return spec.space.canonicalize(pts)


def tail_entropy(m: TimeOne, centers, radius: float = 0.02, n_ball: int = 20, horizon: int = 12,
                 gauge: float | None = None, plaque_scale: float = 17.0, resolution: int = 257) -> TailEntropyResult:
    """Finite-time proxy for the entropy of the time-one map inside two-sided dynamical balls.

    For each center x a plaque patch of half-width ``plaque_scale * radius``
    is sampled; points whose forward and backward ``n_ball``-step Bowen
    distance to x is at most ``radius`` are retained, and the greedy
    separated count at gauge ``gauge`` (default radius / 4) is recorded for
    horizons 1..``horizon``.  The slope of log count is clamped at zero; the
    raw value is kept alongside.
    """
    if not isinstance(m, TimeOne):
        raise TypeError("tail_entropy needs the time-one map of a flow")
    gauge = radius / 4 if gauge is None else gauge
    space = m.space
    inverse = m.inverse()
    centers = np.atleast_2d(space.canonicalize(np.asarray(centers, float)))
    per = []
    for x in centers:
        patch = center_plaque(m.flow, x, plaque_scale * radius, resolution)
        keep = np.ones(patch.shape[0], dtype=bool)
        if n_ball > 0:
            keep &= dn_metric(m, x, patch, n_ball) <= radius
            keep &= dn_metric(inverse, x, patch, n_ball) <= radius
        retained = patch[keep]
        if retained.shape[0] == 0:
            raise EntropyError("no plaque samples inside the dynamical ball; increase the resolution or radius")
        table = orbit(m, retained, horizon)
        counts = [greedy_separated(space, table[:k], gauge)[0] for k in range(1, horizon + 1)]
        raw, res = tail_fit(np.arange(1, horizon + 1, dtype=float), np.log(counts))
        per.append(TailPoint(x, int(retained.shape[0]), counts, max(raw, 0.0), raw, res))
    best = int(np.argmax([p.slope for p in per]))
    return TailEntropyResult(radius, n_ball, horizon, gauge, per, per[best].slope, per[best].center)


@dataclass
class ProductEntropyCheck:
    product: EntropyEstimate
    left: EntropyEstimate
    right: EntropyEstimate
    factor_sum: float
    gap: float


def product_entropy_check(left: Map, right: Map, left_grid, right_grid, product_grid, ns, eps_list,
                          right_ns=None, **kwargs) -> ProductEntropyCheck:
    """Separated-set estimates on a product map and on each factor.

    ``right_ns`` lets the second factor use a longer horizon, which the
    slowly mixing factors need to show their (small) growth rate.
    """
    prod = ProductMap(left, right)
    est_p = estimate_entropy(prod, product_grid, ns, eps_list, name="product", **kwargs)
    est_l = estimate_entropy(left, left_grid, ns, eps_list, name="left", **kwargs)
    est_r = estimate_entropy(right, right_grid, ns if right_ns is None else right_ns, eps_list, name="right", **kwargs)
    total = est_l.headline + est_r.headline
    return ProductEntropyCheck(est_p, est_l, est_r, total, abs(est_p.headline - total))
