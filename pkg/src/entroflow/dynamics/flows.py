"""Closed-form flows: the cat-map suspension, the time-changed family and helpers."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..manifold import CAT, CAT_INV, PRODUCT_NS, SUSPENSION, Space, TangentVector, Point
from .integrate import finite_difference_jacobian, integrate_rk4, integrate_variational_rk4

LOG_LAMBDA = float(np.log((3 + np.sqrt(5)) / 2))

# unit eigenvectors of CAT, which is symmetric so they are orthogonal
UNSTABLE_DIR = np.array([1.0, (np.sqrt(5) - 1) / 2]) / np.hypot(1.0, (np.sqrt(5) - 1) / 2)
STABLE_DIR = np.array([-UNSTABLE_DIR[1], UNSTABLE_DIR[0]])


def cat_matrix_power(k) -> np.ndarray:
    """CAT**k for an integer array ``k``; returns shape k.shape + (2, 2)."""
    k = np.asarray(k, dtype=np.int64)
    out = np.empty(k.shape + (2, 2))
    for value in np.unique(k):
        mat = np.linalg.matrix_power(CAT if value >= 0 else CAT_INV, int(abs(value)))
        out[k == value] = mat
    return out


class Flow:
    """Base class for flow specifications acting on coordinate arrays."""

    space: Space
    fixed_point_free: bool = True

    def flow(self, x, t: float) -> np.ndarray:
        raise NotImplementedError

    def jacobian(self, x, t: float) -> np.ndarray:
        raise NotImplementedError

    def field(self, x) -> np.ndarray:
        raise NotImplementedError

    def center_basis(self, x) -> np.ndarray:
        """Orthonormal basis (..., dim, k) of the center bundle, when known in closed form."""
        raise NotImplementedError(f"{type(self).__name__} has no closed-form center bundle")


@dataclass(frozen=True)
class Profile:
    """Positive time-change profile a(s) = c0 + c1 cos(2 pi s) + sum amp cos(2 pi k s + phase)."""

    c0: float = 1.0
    c1: float = 0.5
    harmonics: tuple[tuple[int, float, float], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "harmonics", tuple((int(k), float(a), float(p)) for k, a, p in self.harmonics))
        if self.c0 <= abs(self.c1) + sum(abs(a) for _, a, _ in self.harmonics):
            raise ValueError("profile must stay strictly positive: need c0 > |c1| + sum |amp|")

    def _terms(self):
        yield 1, self.c1, 0.0
        yield from self.harmonics

    def __call__(self, s):
        s = np.asarray(s, float)
        out = np.full(s.shape, self.c0)
        for k, amp, ph in self._terms():
            out = out + amp * np.cos(2 * np.pi * k * s + ph)
        return out

    def derivative(self, s):
        s = np.asarray(s, float)
        out = np.zeros(s.shape)
        for k, amp, ph in self._terms():
            out = out - 2 * np.pi * k * amp * np.sin(2 * np.pi * k * s + ph)
        return out

    def time_change(self, s, t: float, r: float):
        """Integral of a(s + u r) for u in [0, t]."""
        s = np.asarray(s, float)
        if r == 0:
            return t * self(s)
        out = np.full(s.shape, self.c0 * t)
        for k, amp, ph in self._terms():
            w = 2 * np.pi * k
            out = out + amp / (w * r) * (np.sin(w * (s + t * r) + ph) - np.sin(w * s + ph))
        return out

    def time_change_ds(self, s, t: float, r: float):
        s = np.asarray(s, float)
        if r == 0:
            return t * self.derivative(s)
        return (self(s + t * r) - self(s)) / r

    @property
    def mean(self) -> float:
        return self.c0

    @property
    def argmax(self) -> float:
        if not self.harmonics:
            return 0.0 if self.c1 >= 0 else 0.5
        s = np.arange(20000) / 20000
        return float(s[np.argmax(self(s))])

    @property
    def max(self) -> float:
        return float(self(self.argmax))


@dataclass(frozen=True)
class CatSuspension(Flow):
    """Suspension flow of the cat map with roof 1 on the mapping torus."""

    @property
    def space(self):
        return SUSPENSION

    def flow(self, x, t):
        x = np.array(x, dtype=float, copy=True)
        x[..., 2] += t
        return SUSPENSION.canonicalize(x)

    def jacobian(self, x, t):
        x = np.asarray(x, float)
        k = np.floor(x[..., 2] + t).astype(np.int64)
        jac = np.zeros(x.shape[:-1] + (3, 3))
        jac[..., :2, :2] = cat_matrix_power(k)
        jac[..., 2, 2] = 1.0
        return jac

    def field(self, x):
        x = np.asarray(x, float)
        out = np.zeros_like(x)
        out[..., 2] = 1.0
        return out

    def center_basis(self, x):
        x = np.asarray(x, float)
        out = np.zeros(x.shape[:-1] + (3, 1))
        out[..., 2, 0] = 1.0
        return out


@dataclass(frozen=True)
class FamilyR(Flow):
    """phi^r on N x T^1: the suspension time-changed by a(s) while s drifts at speed r."""

    r: float = 0.0
    profile: Profile = field(default_factory=Profile)

    def __post_init__(self):
        if not -1 < self.r < 1:
            raise ValueError("r must lie in (-1, 1)")

    @property
    def space(self):
        return PRODUCT_NS

    def flow(self, x, t):
        x = np.array(x, dtype=float, copy=True)
        s = x[..., 3]
        x[..., 2] += self.profile.time_change(s, t, self.r)
        x[..., 3] = s + t * self.r
        return PRODUCT_NS.canonicalize(x)

    def jacobian(self, x, t):
        x = np.asarray(x, float)
        s = x[..., 3]
        k = np.floor(x[..., 2] + self.profile.time_change(s, t, self.r)).astype(np.int64)
        jac = np.zeros(x.shape[:-1] + (4, 4))
        jac[..., :2, :2] = cat_matrix_power(k)
        jac[..., 2, 2] = 1.0
        jac[..., 2, 3] = self.profile.time_change_ds(s, t, self.r)
        jac[..., 3, 3] = 1.0
        return jac

    def field(self, x):
        x = np.asarray(x, float)
        out = np.zeros_like(x)
        out[..., 2] = self.profile(x[..., 3])
        out[..., 3] = self.r
        return out

    def center_basis(self, x):
        x = np.asarray(x, float)
        out = np.zeros(x.shape[:-1] + (4, 2))
        out[..., 2, 0] = 1.0
        out[..., 3, 1] = 1.0
        return out


@dataclass(frozen=True)
class ProductSuspensionIdentity(FamilyR):
    """alpha x id on N x T^1, time-changed by ``profile`` (constant 1 by default)."""

    r: float = 0.0
    profile: Profile = field(default_factory=lambda: Profile(1.0, 0.0))

    def __post_init__(self):
        if self.r != 0:
            raise ValueError("ProductSuspensionIdentity has r = 0")


@dataclass(frozen=True)
class IdentityFlow(Flow):
    space: Space = SUSPENSION
    fixed_point_free = False

    def flow(self, x, t):
        return self.space.canonicalize(x)

    def jacobian(self, x, t):
        x = np.asarray(x, float)
        return np.broadcast_to(np.eye(self.space.dim), x.shape[:-1] + (self.space.dim,) * 2).copy()

    def field(self, x):
        return np.zeros_like(np.asarray(x, float))


@dataclass(frozen=True)
class NumericField(Flow):
    """User vector field integrated by RK4; derivative by variational RK4.

    ``jac`` is the field derivative; if omitted a central finite difference
    of ``vector_field`` is used.
    """

    space: Space = SUSPENSION
    vector_field: Callable[[np.ndarray], np.ndarray] = None
    jac: Optional[Callable[[np.ndarray], np.ndarray]] = None
    step: float = 1e-3
    fixed_point_free: bool = False

    def _jac(self, x):
        if self.jac is not None:
            return self.jac(x)
        return finite_difference_jacobian(self.vector_field, x, h=1e-7)

    def flow(self, x, t):
        return integrate_rk4(self.vector_field, x, t, self.step, self.space.canonicalize)

    def jacobian(self, x, t):
        x = np.asarray(x, float)
        _, m = integrate_variational_rk4(
            self.vector_field, self._jac, x.reshape(-1, self.space.dim), t, self.step, self.space.canonicalize
        )
        return m.reshape(x.shape + (self.space.dim,))

    def field(self, x):
        return self.vector_field(np.asarray(x, float))


@dataclass(frozen=True)
class TimeReversed(Flow):
    inner: Flow = field(default_factory=CatSuspension)

    @property
    def space(self):
        return self.inner.space

    @property
    def fixed_point_free(self):
        return self.inner.fixed_point_free

    def flow(self, x, t):
        return self.inner.flow(x, -t)

    def jacobian(self, x, t):
        return self.inner.jacobian(x, -t)

    def field(self, x):
        return -self.inner.field(x)

    def center_basis(self, x):
        return self.inner.center_basis(x)


@dataclass(frozen=True)
class TimeScaled(Flow):
    """The same orbits run ``factor`` times faster."""

    inner: Flow = field(default_factory=CatSuspension)
    factor: float = 2.0

    @property
    def space(self):
        return self.inner.space

    @property
    def fixed_point_free(self):
        return self.inner.fixed_point_free

    def flow(self, x, t):
        return self.inner.flow(x, self.factor * t)

    def jacobian(self, x, t):
        return self.inner.jacobian(x, self.factor * t)

    def field(self, x):
        return self.factor * self.inner.field(x)

    def center_basis(self, x):
        return self.inner.center_basis(x)


def reverse(spec: Flow) -> Flow:
    """Time reversal that cancels a previous reversal."""
    if isinstance(spec, TimeReversed):
        return spec.inner
    return TimeReversed(spec)


def flow(spec: Flow, p: Point, t: float) -> Point:
    if p.space != spec.space:
        raise TypeError(f"{type(spec).__name__} acts on {spec.space.name}, got {p.space.name}")
    if t == 0:
        return Point(p.space, p.space.canonicalize(p.array))
    return Point(p.space, spec.flow(p.array, t))


def tangent_pushforward(spec: Flow, p: Point, v: TangentVector, t: float) -> TangentVector:
    if v.base != p:
        raise ValueError("tangent vector is not based at p")
    if t == 0:
        return v
    q = flow(spec, p, t)
    return TangentVector(q, spec.jacobian(p.array, t) @ v.array)
