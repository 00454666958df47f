"""Quotient manifolds used by the example flows.

Every space works on coordinate arrays of shape ``(..., dim)`` so the
estimators can push whole grids through at once.  :class:`Point` and
:class:`TangentVector` are thin immutable wrappers for single positions.

Spaces
------
Torus2      unit 2-torus, coordinates (x1, x2)
Circle      unit circle, coordinate (s,)
Suspension  mapping torus of the cat map with roof 1, coordinates (x1, x2, tau)
Annulus     [-delta, delta] x T^1, coordinates (y, z)
ProductSpace  Cartesian product, coordinates concatenated
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

CAT = np.array([[2.0, 1.0], [1.0, 1.0]])
CAT_INV = np.array([[1.0, -1.0], [-1.0, 2.0]])
LAMBDA = (3 + np.sqrt(5)) / 2
# orthonormal eigenvectors of the symmetric matrix CAT
E_UNSTABLE = np.array([1.0, LAMBDA - 2.0]) / np.hypot(1.0, LAMBDA - 2.0)
E_STABLE = np.array([-E_UNSTABLE[1], E_UNSTABLE[0]])


class DomainError(ValueError):
    """A coordinate lies outside the domain of its space."""


def wrap_unit(x):
    """Reduce to [0, 1) without ever returning 1.0 for tiny negatives."""
    y = np.mod(x, 1.0)
    return np.where(y >= 1.0, 0.0, y)


def wrap_delta(dx):
    """Signed representative of a periodic difference in [-1/2, 1/2)."""
    return np.mod(dx + 0.5, 1.0) - 0.5


def _cat_power(base, k):
    """Apply CAT**k (k an integer array) to base points mod 1, one iterate at a time."""
    base = np.array(base, dtype=float, copy=True)
    k = np.array(k, dtype=np.int64, copy=True)
    while True:
        up = k > 0
        down = k < 0
        if not (up.any() or down.any()):
            return base
        if up.any():
            base[up] = wrap_unit(base[up] @ CAT.T)
            k[up] -= 1
        if down.any():
            base[down] = wrap_unit(base[down] @ CAT_INV.T)
            k[down] += 1


class Space:
    """Base class; subclasses are frozen dataclasses so they hash and compare."""

    dim: int
    name: str

    def canonicalize(self, x):
        raise NotImplementedError

    def dist(self, a, b):
        raise NotImplementedError

    def chart_delta(self, a, b):
        """Small displacement taking ``a`` to ``b``, in the flat chart at ``a``."""
        raise NotImplementedError

    def metric_norm(self, x, v):
        """Length of chart vectors ``v`` based at ``x``."""
        return np.linalg.norm(v, axis=-1)

    def local_dist(self, a, b):
        return self.metric_norm(a, self.chart_delta(a, b))

    def axes(self, resolution: Sequence[int]) -> list[np.ndarray]:
        raise NotImplementedError

    def uniform(self, rng: np.random.Generator, n: int) -> np.ndarray:
        raise NotImplementedError

    def features(self, x) -> np.ndarray:
        """Coordinates whose wrapped Euclidean distance equals ``dist``.

        Periods are given by ``feature_periods``; the entropy code builds
        periodic KD-trees and exact distance checks on these.
        """
        raise NotImplementedError

    def feature_periods(self) -> np.ndarray:
        raise NotImplementedError

    def grid(self, resolution, box=None) -> np.ndarray:
        """Lexicographically ordered grid over the chart.

        ``box`` optionally restricts the grid to a coordinate box, one
        ``(lo, hi)`` pair per axis; each axis then gets ``n`` cells
        ``lo + (hi - lo) * k / n`` so a full period reproduces the default.
        """
        if np.isscalar(resolution):
            resolution = (int(resolution),) * self.dim
        resolution = tuple(int(r) for r in resolution)
        if len(resolution) != self.dim:
            raise ValueError(f"{self.name} needs {self.dim} resolutions, got {len(resolution)}")
        if min(resolution) < 1:
            raise ValueError("resolution must be >= 1 per axis")
        if box is None:
            axes = self.axes(resolution)
        else:
            if len(box) != self.dim:
                raise ValueError(f"{self.name} needs {self.dim} box ranges, got {len(box)}")
            axes = []
            for n, (lo, hi) in zip(resolution, box):
                if not hi >= lo:
                    raise ValueError("box ranges need lo <= hi")
                axes.append(lo + (hi - lo) * np.arange(n) / n)
        mesh = np.meshgrid(*axes, indexing="ij")
        return self.canonicalize(np.stack([m.ravel() for m in mesh], axis=-1))


def _periodic_axis(n):
    return np.arange(n) / n


@dataclass(frozen=True)
class Torus2(Space):
    dim: int = 2
    name: str = "torus2"

    def canonicalize(self, x):
        x = np.asarray(x, dtype=float)
        _check_finite(x)
        return wrap_unit(x)

    def chart_delta(self, a, b):
        return wrap_delta(np.asarray(b, float) - np.asarray(a, float))

    def dist(self, a, b):
        return self.local_dist(a, b)

    def axes(self, resolution):
        return [_periodic_axis(n) for n in resolution]

    def uniform(self, rng, n):
        return rng.random((n, 2))

    def features(self, x):
        return np.asarray(x, float)

    def feature_periods(self):
        return np.ones(2)


@dataclass(frozen=True)
class Circle(Space):
    dim: int = 1
    name: str = "circle"

    def canonicalize(self, x):
        x = np.asarray(x, dtype=float)
        _check_finite(x)
        return wrap_unit(x)

    def chart_delta(self, a, b):
        return wrap_delta(np.asarray(b, float) - np.asarray(a, float))

    def dist(self, a, b):
        return self.local_dist(a, b)

    def axes(self, resolution):
        return [_periodic_axis(resolution[0])]

    def uniform(self, rng, n):
        return rng.random((n, 1))

    def features(self, x):
        return np.asarray(x, float)

    def feature_periods(self):
        return np.ones(1)


@dataclass(frozen=True)
class Annulus(Space):
    delta: float = 0.1
    dim: int = 2
    name: str = "annulus"

    def canonicalize(self, x):
        x = np.array(x, dtype=float, copy=True)
        _check_finite(x)
        y = x[..., 0]
        if np.any(np.abs(y) > self.delta * (1 + 1e-12)):
            raise DomainError(f"annulus coordinate y outside [-{self.delta}, {self.delta}]")
        x[..., 0] = np.clip(y, -self.delta, self.delta)
        x[..., 1] = wrap_unit(x[..., 1])
        return x

    def chart_delta(self, a, b):
        d = np.asarray(b, float) - np.asarray(a, float)
        return np.stack([d[..., 0], wrap_delta(d[..., 1])], axis=-1)

    def dist(self, a, b):
        return self.local_dist(a, b)

    def axes(self, resolution):
        ny, nz = resolution
        ys = np.zeros(1) if ny == 1 else np.linspace(-self.delta, self.delta, ny)
        return [ys, _periodic_axis(nz)]

    def uniform(self, rng, n):
        return np.stack([rng.uniform(-self.delta, self.delta, n), rng.random(n)], axis=-1)

    def features(self, x):
        x = np.asarray(x, float)
        return np.stack([x[..., 0] + self.delta, x[..., 1]], axis=-1)

    def feature_periods(self):
        return np.array([4.0 * self.delta, 1.0])


@dataclass(frozen=True)
class Suspension(Space):
    """Mapping torus T^2 x [0,1] / (x, 1) ~ (A x, 0) of the cat map A.

    ``dist`` is the chordal distance of a smooth embedding of the quotient
    in R^10, so it is a genuine metric.  Lengths of curves and tangent
    vectors use ``metric_norm``, a roof-dependent rescaling of the flat chart
    that is continuous across the gluing.
    """

    dim: int = 3
    name: str = "suspension"

    def canonicalize(self, x):
        x = np.array(x, dtype=float, copy=True)
        _check_finite(x)
        k = np.floor(x[..., 2]).astype(np.int64)
        flat = x.reshape(-1, 3)
        kf = k.reshape(-1)
        flat[:, :2] = _cat_power(wrap_unit(flat[:, :2]), kf)
        flat[:, 2] = flat[:, 2] - kf
        flat[:, 2] = np.where(flat[:, 2] >= 1.0, 0.0, flat[:, 2])
        flat[:, 2] = np.where(flat[:, 2] < 0.0, 0.0, flat[:, 2])
        return flat.reshape(x.shape)

    def chart_delta(self, a, b):
        a = np.asarray(a, float)
        b = np.asarray(b, float)
        dtau = b[..., 2] - a[..., 2]
        out = np.concatenate([wrap_delta(b[..., :2] - a[..., :2]), dtau[..., None]], axis=-1)
        # b is also represented by (A^{-k} x_b, tau_b + k); only near-roof pairs need k != 0
        far = np.abs(dtau) > 0.5
        if np.any(far):
            bf, af = b[far], a[far]
            best = out[far]
            best_n = np.linalg.norm(best, axis=-1)
            for shift, mat in ((1, CAT_INV), (-1, CAT)):
                d = np.concatenate(
                    [wrap_delta(bf[:, :2] @ mat.T - af[:, :2]), (bf[:, 2] + shift - af[:, 2])[:, None]], axis=-1
                )
                n = np.linalg.norm(d, axis=-1)
                pick = n < best_n
                best[pick], best_n[pick] = d[pick], n[pick]
            out[far] = best
        return out

    def metric_norm(self, x, v):
        """Norm lambda^{2 tau} v_u^2 + lambda^{-2 tau} v_s^2 + v_tau^2, continuous across the gluing.

        At tau = 1 it agrees with the norm of A v at tau = 0, so curve
        lengths do not jump when the roof is crossed.
        """
        x = np.asarray(x, float)
        v = np.asarray(v, float)
        scale = LAMBDA ** x[..., 2]
        vu = v[..., :2] @ E_UNSTABLE
        vs = v[..., :2] @ E_STABLE
        return np.sqrt((scale * vu) ** 2 + (vs / scale) ** 2 + v[..., 2] ** 2)

    def local_dist(self, a, b):
        a = np.asarray(a, float)
        d = self.chart_delta(a, b)
        mid = a.copy()
        mid[..., 2] = a[..., 2] + 0.5 * d[..., 2]
        return self.metric_norm(mid, d)

    def embed(self, x):
        x = np.asarray(x, float)
        tau = x[..., 2]
        upper = (tau >= 0.5)[..., None]
        base_hi = wrap_unit(x[..., :2] @ CAT.T)
        e_lo = _torus_embed(x[..., :2])
        e_hi = _torus_embed(base_hi)
        ang = 2 * np.pi * tau
        roof = np.stack([np.cos(ang), np.sin(ang)], axis=-1) / (2 * np.pi)
        g1 = np.sin(np.pi * tau)[..., None] * e_lo
        g2 = np.abs(np.cos(np.pi * tau))[..., None] * np.where(upper, e_hi, e_lo)
        return np.concatenate([roof, g1, g2], axis=-1)

    def dist(self, a, b):
        return np.linalg.norm(self.embed(a) - self.embed(b), axis=-1)

    def axes(self, resolution):
        return [_periodic_axis(n) for n in resolution]

    def uniform(self, rng, n):
        return rng.random((n, 3))

    def features(self, x):
        return self.embed(x) + 1.0

    def feature_periods(self):
        return np.full(10, 4.0)


def _torus_embed(base):
    ang = 2 * np.pi * base
    return np.concatenate([np.cos(ang), np.sin(ang)], axis=-1) / (2 * np.pi)


@dataclass(frozen=True)
class ProductSpace(Space):
    left: Space = Torus2()
    right: Space = Circle()

    @property
    def dim(self):
        return self.left.dim + self.right.dim

    @property
    def name(self):
        return f"{self.left.name}x{self.right.name}"

    def split(self, x):
        x = np.asarray(x, float)
        return x[..., : self.left.dim], x[..., self.left.dim :]

    def canonicalize(self, x):
        a, b = self.split(x)
        return np.concatenate([self.left.canonicalize(a), self.right.canonicalize(b)], axis=-1)

    def chart_delta(self, a, b):
        a1, a2 = self.split(a)
        b1, b2 = self.split(b)
        return np.concatenate([self.left.chart_delta(a1, b1), self.right.chart_delta(a2, b2)], axis=-1)

    def dist(self, a, b):
        a1, a2 = self.split(a)
        b1, b2 = self.split(b)
        return np.hypot(self.left.dist(a1, b1), self.right.dist(a2, b2))

    def metric_norm(self, x, v):
        x1, x2 = self.split(x)
        v1, v2 = self.split(v)
        return np.hypot(self.left.metric_norm(x1, v1), self.right.metric_norm(x2, v2))

    def local_dist(self, a, b):
        a1, a2 = self.split(a)
        b1, b2 = self.split(b)
        return np.hypot(self.left.local_dist(a1, b1), self.right.local_dist(a2, b2))

    def axes(self, resolution):
        k = self.left.dim
        return self.left.axes(resolution[:k]) + self.right.axes(resolution[k:])

    def uniform(self, rng, n):
        return np.concatenate([self.left.uniform(rng, n), self.right.uniform(rng, n)], axis=-1)

    def features(self, x):
        a, b = self.split(x)
        return np.concatenate([self.left.features(a), self.right.features(b)], axis=-1)

    def feature_periods(self):
        return np.concatenate([self.left.feature_periods(), self.right.feature_periods()])


TORUS2 = Torus2()
CIRCLE = Circle()
SUSPENSION = Suspension()
PRODUCT_NS = ProductSpace(SUSPENSION, CIRCLE)


def product_ta(delta: float = 0.1) -> ProductSpace:
    """T^2 x [-delta, delta] x T^1, the chart K around the embedded annulus."""
    return ProductSpace(TORUS2, Annulus(delta))


def _check_finite(x):
    if not np.all(np.isfinite(x)):
        raise DomainError("non-finite coordinates")


@dataclass(frozen=True)
class Point:
    """A position on one of the spaces above (coordinates are not auto-canonicalized)."""

    space: Space
    coords: tuple[float, ...]

    def __post_init__(self):
        coords = tuple(float(c) for c in np.ravel(self.coords))
        if len(coords) != self.space.dim:
            raise ValueError(f"{self.space.name} point needs {self.space.dim} coordinates")
        object.__setattr__(self, "coords", coords)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.coords)

    @classmethod
    def torus2(cls, x1, x2):
        return cls(TORUS2, (x1, x2))

    @classmethod
    def circle(cls, s):
        return cls(CIRCLE, (s,))

    @classmethod
    def suspension(cls, base, tau):
        return cls(SUSPENSION, (*base, tau))

    @classmethod
    def annulus(cls, y, z, delta=0.1):
        return cls(Annulus(delta), (y, z))

    @classmethod
    def product_ns(cls, base, tau, s):
        return cls(PRODUCT_NS, (*base, tau, s))

    @classmethod
    def product_ta(cls, base, y, z, delta=0.1):
        return cls(product_ta(delta), (*base, y, z))


@dataclass(frozen=True)
class TangentVector:
    base: Point
    components: tuple[float, ...]

    def __post_init__(self):
        comps = tuple(float(c) for c in np.ravel(self.components))
        if len(comps) != self.base.space.dim:
            raise ValueError("component count must match the space dimension")
        object.__setattr__(self, "components", comps)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.components)

    def norm(self) -> float:
        return float(np.linalg.norm(self.components))

    def normalized(self) -> "TangentVector":
        return TangentVector(self.base, self.array / self.norm())


def canonicalize(p: Point) -> Point:
    return Point(p.space, p.space.canonicalize(p.array))


def dist(p: Point, q: Point) -> float:
    if p.space != q.space:
        raise TypeError(f"cannot measure distance between {p.space.name} and {q.space.name}")
    sp = p.space
    return float(sp.dist(sp.canonicalize(p.array), sp.canonicalize(q.array)))


def sample_grid(space: Space, resolution) -> list[Point]:
    """Regular lattice of canonical points, lexicographically ordered."""
    return [Point(space, row) for row in space.grid(resolution)]
