"""Fixed-step classical Runge-Kutta integration, with and without the first variation."""
from __future__ import annotations

from typing import Callable, Optional

import numpy as np


class IntegrationError(RuntimeError):
    pass


def _steps(t: float, h: float) -> list[float]:
    if h <= 0:
        raise ValueError("step h must be positive")
    n = int(np.floor(abs(t) / h + 1e-9))
    steps = [h] * n
    rest = abs(t) - n * h
    if rest > 1e-14 * max(1.0, abs(t)):
        steps.append(rest)
    sign = 1.0 if t >= 0 else -1.0
    return [sign * s for s in steps]


def integrate_rk4(
    field: Callable[[np.ndarray], np.ndarray],
    x0,
    t: float,
    h: float = 1e-3,
    canonicalize: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> np.ndarray:
    """Integrate ``dx/dt = field(x)`` from ``x0`` over time ``t``.

    Fixed step ``h`` with one final partial step so the endpoint is exactly
    ``t``.  ``canonicalize`` (if given) is applied after every step.
    """
    x = np.array(x0, dtype=float, copy=True)
    for dt in _steps(t, h):
        k1 = field(x)
        k2 = field(x + 0.5 * dt * k1)
        k3 = field(x + 0.5 * dt * k2)
        k4 = field(x + dt * k3)
        x = x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise IntegrationError(f"non-finite state after step of size {dt}")
        if canonicalize is not None:
            x = canonicalize(x)
    return x


def integrate_variational_rk4(
    field: Callable[[np.ndarray], np.ndarray],
    jacobian: Callable[[np.ndarray], np.ndarray],
    x0,
    t: float,
    h: float = 1e-3,
    canonicalize: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Jointly integrate the state and its derivative matrix ``d x(t) / d x0``.

    ``x0`` has shape (N, d); ``jacobian(x)`` returns the field derivative with
    shape (N, d, d).  Returns the final states and (N, d, d) derivatives.
    """
    x = np.array(x0, dtype=float, copy=True)
    squeeze = x.ndim == 1
    x = np.atleast_2d(x)
    n, d = x.shape
    m = np.broadcast_to(np.eye(d), (n, d, d)).copy()

    def rhs(xs, ms):
        return field(xs), jacobian(xs) @ ms

    for dt in _steps(t, h):
        a1, b1 = rhs(x, m)
        a2, b2 = rhs(x + 0.5 * dt * a1, m + 0.5 * dt * b1)
        a3, b3 = rhs(x + 0.5 * dt * a2, m + 0.5 * dt * b2)
        a4, b4 = rhs(x + dt * a3, m + dt * b3)
        x = x + dt / 6.0 * (a1 + 2 * a2 + 2 * a3 + a4)
        m = m + dt / 6.0 * (b1 + 2 * b2 + 2 * b3 + b4)
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(m))):
            raise IntegrationError(f"non-finite state after step of size {dt}")
        if canonicalize is not None:
            x = canonicalize(x)
    if squeeze:
        return x[0], m[0]
    return x, m


def finite_difference_jacobian(func, x, h: float = 1e-6, delta=None) -> np.ndarray:
    """Central-difference Jacobian of ``func`` at points ``x`` of shape (N, d).

    ``delta(a, b)`` measures output differences (defaults to ``b - a``) so
    periodic coordinates can be unwrapped.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n, d = x.shape
    cols = []
    for j in range(d):
        e = np.zeros(d)
        e[j] = h
        lo, hi = func(x - e), func(x + e)
        diff = hi - lo if delta is None else delta(lo, hi)
        cols.append(diff / (2 * h))
    return np.stack(cols, axis=-1)
