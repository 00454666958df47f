"""Volume growth of one-dimensional unstable and stable foliations."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .dynamics import FamilyR, Flow, Profile, reverse
from .hyperbolicity import _push_normalized, unstable_directions
from .manifold import Point, Space


class RefinementError(RuntimeError):
    pass


@dataclass(frozen=True)
class PolylineCurve:
    """Vertices of an evolving leaf ball; ``log_offset`` carries the discarded scale."""

    space: Space
    points: np.ndarray
    log_offset: float = 0.0
    spacing: float = 1e-3
    cap: int = 200_000
    rescale: int = 4

    def segment_lengths(self) -> np.ndarray:
        return self.space.local_dist(self.points[:-1], self.points[1:])

    @property
    def length(self) -> float:
        return float(np.sum(self.segment_lengths()))

    @property
    def log_length(self) -> float:
        return float(np.log(self.length) + self.log_offset)


def leaf_segment(space: Space, center, direction, radius: float = 0.01, spacing: float = 1e-3,
                 **kwargs) -> PolylineCurve:
    """Straight chart segment of half-length ``radius`` through ``center``."""
    center = np.asarray(center, float)
    direction = np.asarray(direction, float)
    direction = direction / np.linalg.norm(direction)
    n = int(np.ceil(2 * radius / spacing)) + 1
    s = np.linspace(-radius, radius, n)
    pts = space.canonicalize(center[None, :] + s[:, None] * direction[None, :])
    return PolylineCurve(space, pts, 0.0, spacing, **kwargs)


def _refine(spec, pre, img, dt, spacing, max_depth):
    """Subdivide preimage segments until every image segment is at most ``spacing`` long."""
    space = spec.space
    for _ in range(max_depth):
        seg = space.local_dist(img[:-1], img[1:])
        bad = np.flatnonzero(seg > spacing)
        if bad.size == 0:
            return pre, img
        pieces = np.ceil(seg[bad] / spacing).astype(np.int64)
        pieces = np.maximum(pieces, 2)
        counts = pieces - 1
        owner = np.repeat(bad, counts)
        starts = np.repeat(np.cumsum(counts) - counts, counts)
        frac = (np.arange(owner.size) - starts + 1) / np.repeat(pieces, counts)
        delta = space.chart_delta(pre[owner], pre[owner + 1])
        new_pre = space.canonicalize(pre[owner] + frac[:, None] * delta)
        new_img = spec.flow(new_pre, dt)
        # new points sit after their owning vertex
        insert_at = owner + 1
        pre = np.insert(pre, insert_at, new_pre, axis=0)
        img = np.insert(img, insert_at, new_img, axis=0)
    seg = space.local_dist(img[:-1], img[1:])
    if np.any(seg > spacing):
        raise RefinementError(f"spacing {spacing} not reached after {max_depth} refinement rounds")
    return pre, img


def evolve_polyline(spec: Flow, curve: PolylineCurve, dt: float, max_depth: int = 30) -> PolylineCurve:
    """Flow every vertex by ``dt``, refine through the preimage, then renormalize if over the cap."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    pre = curve.points
    img = spec.flow(pre, dt)
    pre, img = _refine(spec, pre, img, dt, curve.spacing, max_depth)
    offset = curve.log_offset
    if img.shape[0] > curve.cap:
        seg = curve.space.local_dist(img[:-1], img[1:])
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        total = cum[-1]
        half = total / (2 * curve.rescale)
        lo = np.searchsorted(cum, total / 2 - half, side="left")
        hi = np.searchsorted(cum, total / 2 + half, side="right")
        img = img[lo:hi]
        sub = float(np.sum(curve.space.local_dist(img[:-1], img[1:])))
        offset += float(np.log(total) - np.log(sub))
    return replace(curve, points=img, log_offset=offset)


@dataclass
class GrowthSeries:
    seed: np.ndarray
    times: np.ndarray
    log_volume: np.ndarray
    rate: float
    residual: float


@dataclass
class ChiEstimate:
    foliation: str
    series: list[GrowthSeries]
    times: np.ndarray
    envelope: np.ndarray
    rate: float
    residual: float
    argmax_seed: np.ndarray
    seed_count: int
    per_iterate: float = field(default=np.nan)  # slope per sample step rather than per unit time


def tail_fit(times, values, fraction: float = 0.5):
    """Least-squares slope and RMS residual over the last ``fraction`` of the samples."""
    times = np.asarray(times, float)
    values = np.asarray(values, float)
    start = times[0] + (1 - fraction) * (times[-1] - times[0])
    keep = times >= start - 1e-12
    if keep.sum() < 2:
        keep[-2:] = True
    t, v = times[keep], values[keep]
    tc, vc = t - t.mean(), v - v.mean()
    slope = float(np.sum(tc * vc) / np.sum(tc * tc))
    resid = vc - slope * tc
    return slope, float(np.sqrt(np.mean(resid**2)))


def _evolve_seed(spec, seed, direction, T, dt, radius, spacing, cap, rescale, max_step):
    curve = leaf_segment(spec.space, seed, direction, radius, spacing, cap=cap, rescale=rescale)
    n = int(np.round(T / dt))
    times = np.arange(n + 1) * dt
    sub = int(np.ceil(dt / max_step - 1e-9))
    logs = [curve.log_length]
    for _ in range(n):
        for _ in range(sub):
            curve = evolve_polyline(spec, curve, dt / sub)
        logs.append(curve.log_length)
    logs = np.array(logs)
    rate, resid = tail_fit(times, logs)
    return GrowthSeries(np.asarray(seed, float), times, logs, rate, resid)


def chi_estimate(spec: Flow, foliation: str = "unstable", seeds=None, T: float = 15.0, dt: float = 1.0,
                 radius: float = 0.01, spacing: float = 1e-3, cap: int = 200_000, rescale: int = 4,
                 max_step: float = 1.0, threads: int = 1) -> ChiEstimate:
    """Sup-over-seeds exponential growth rate of leaf balls of the chosen foliation.

    Log-volumes are recorded every ``dt`` time units; curves are advanced
    in sub-steps of at most ``max_step`` so refinement stays local.  The
    stable foliation is handled as the unstable foliation of the
    time-reversed flow.
    """
    if foliation not in ("unstable", "stable"):
        raise ValueError("foliation must be 'unstable' or 'stable'")
    run = spec if foliation == "unstable" else reverse(spec)
    seeds = np.atleast_2d(run.space.canonicalize(np.asarray(seeds, float)))
    if seeds.shape[0] == 0:
        raise ValueError("need at least one seed")
    dirs = unstable_directions(run, seeds)
    args = [(run, s, d, T, dt, radius, spacing, cap, rescale, max_step) for s, d in zip(seeds, dirs)]
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            series = list(pool.map(lambda a: _evolve_seed(*a), args))
    else:
        series = [_evolve_seed(*a) for a in args]
    logs = np.stack([s.log_volume for s in series])
    envelope = logs.max(axis=0)
    times = series[0].times
    rate, resid = tail_fit(times, envelope)
    best = int(np.argmax(logs[:, -1]))
    return ChiEstimate(foliation, series, times, envelope, rate, resid, seeds[best], len(series), rate * dt)


@dataclass
class TangentChi:
    rate: float
    per_seed: np.ndarray
    argmax_seed: np.ndarray


def tangent_chi(spec: Flow, foliation: str = "unstable", seeds=None, T: float = 15.0) -> TangentChi:
    """sup over seeds of (1/T) log ||Dphi_T v_u||, the tangent-norm cross-check of chi_estimate."""
    run = spec if foliation == "unstable" else reverse(spec)
    seeds = np.atleast_2d(run.space.canonicalize(np.asarray(seeds, float)))
    v = unstable_directions(run, seeds)
    _, _, logs = _push_normalized(run, seeds, v, T)
    rates = logs / T
    i = int(np.argmax(rates))
    return TangentChi(float(rates[i]), rates, seeds[i])


@dataclass
class TimeScalingResult:
    t: float
    chi_time_t: float  # growth per iterate of phi_t
    chi_unit: float  # growth per iterate of phi_1
    discrepancy: float


def time_scaling_check(spec: Flow, t: float = 2.0, seeds=None, T: float = 12.0, **kwargs) -> TimeScalingResult:
    """Compare growth per iterate of phi_t with t times the growth per iterate of phi_1."""
    horizon = t * np.round(T / t)
    coarse = chi_estimate(spec, "unstable", seeds, horizon, dt=t, **kwargs)
    unit = chi_estimate(spec, "unstable", seeds, horizon, dt=1.0, **kwargs)
    return TimeScalingResult(t, coarse.per_iterate, unit.per_iterate, abs(coarse.per_iterate - t * unit.per_iterate))


def perturbed_profile(profile: Profile, zeta: float, harmonic: int = 3, phase: float = 0.7) -> Profile:
    """Add a cosine harmonic of amplitude ``zeta``; ``zeta = 0`` returns the profile unchanged."""
    if zeta == 0:
        return profile
    return Profile(profile.c0, profile.c1, profile.harmonics + ((harmonic, zeta, phase),))


@dataclass
class UscProbe:
    zeta: float
    baseline: float
    perturbed: float
    excess: float
    violated: bool


def usc_probe(spec: FamilyR, zeta: float, seeds, T: float = 12.0, tolerance: float = 0.1, harmonic: int = 3,
              phase: float = 0.7, **kwargs) -> UscProbe:
    """Growth of a C^1-small perturbation of the time-change profile against the baseline.

    Reports rather than raises: upper semicontinuity predicts
    perturbed <= baseline + tolerance for small ``zeta``.
    """
    base = chi_estimate(spec, "unstable", seeds, T, **kwargs).rate
    pert_spec = replace(spec, profile=perturbed_profile(spec.profile, zeta, harmonic, phase))
    pert = base if pert_spec == spec else chi_estimate(pert_spec, "unstable", seeds, T, **kwargs).rate
    excess = pert - base
    return UscProbe(zeta, base, pert, excess, excess > tolerance)
