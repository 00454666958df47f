"""Discrete maps consumed by the entropy estimators."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..manifold import CAT, CAT_INV, CIRCLE, TORUS2, Point, ProductSpace, Space, wrap_unit
from .flows import Flow, reverse


class Map:
    space: Space

    def apply(self, x) -> np.ndarray:
        raise NotImplementedError

    def inverse(self) -> "Map":
        raise NotImplementedError(f"{type(self).__name__} is not invertible")


@dataclass(frozen=True)
class CatMap(Map):
    inverted: bool = False

    @property
    def space(self):
        return TORUS2

    def apply(self, x):
        mat = CAT_INV if self.inverted else CAT
        return wrap_unit(np.asarray(x, float) @ mat.T)

    def inverse(self):
        return CatMap(not self.inverted)


@dataclass(frozen=True)
class TimeOne(Map):
    flow: Flow = None
    time: float = 1.0

    @property
    def space(self):
        return self.flow.space

    def apply(self, x):
        return self.flow.flow(x, self.time)

    def inverse(self):
        return TimeOne(reverse(self.flow), self.time)


def _apply_unique(m: Map, x) -> np.ndarray:
    """Apply ``m`` once per distinct row; product grids repeat each factor point many times."""
    x = np.asarray(x, float)
    if x.ndim != 2 or len(x) < 2:
        return m.apply(x)
    rows, inverse = np.unique(x, axis=0, return_inverse=True)
    if len(rows) == len(x):
        return m.apply(x)
    return m.apply(rows)[inverse.ravel()]


@dataclass(frozen=True)
class ProductMap(Map):
    left: Map = field(default_factory=CatMap)
    right: Map = None

    @property
    def space(self):
        return ProductSpace(self.left.space, self.right.space)

    def apply(self, x):
        a, b = self.space.split(x)
        return np.concatenate([_apply_unique(self.left, a), _apply_unique(self.right, b)], axis=-1)

    def inverse(self):
        return ProductMap(self.left.inverse(), self.right.inverse())


@dataclass(frozen=True)
class DoublingCircle(Map):
    """s -> 2s mod 1; entropy log 2.  Used as an estimator oracle."""

    @property
    def space(self):
        return CIRCLE

    def apply(self, x):
        return wrap_unit(2.0 * np.asarray(x, float))


@dataclass(frozen=True)
class IdentityMap(Map):
    space: Space = TORUS2

    def apply(self, x):
        return self.space.canonicalize(x)

    def inverse(self):
        return self


def orbit(m: Map, x, n: int) -> np.ndarray:
    """Stack of the first ``n`` iterates f^0 x, ..., f^{n-1} x; shape (n, ...)."""
    x = m.space.canonicalize(x)
    out = np.empty((n,) + x.shape)
    for i in range(n):
        out[i] = x
        if i < n - 1:
            x = m.apply(x)
    return out


def cat_apply(p: Point) -> Point:
    return Point(TORUS2, CatMap().apply(p.array))


def cat_derivative() -> np.ndarray:
    return CAT.copy()


def apply_map(m: Map, p: Point) -> Point:
    return Point(p.space, m.apply(p.array))
