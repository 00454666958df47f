"""Hamiltonian flow on the annulus [-delta, delta] x T^1 and its time-one map g0.

H(y, z) = chi(y) * (eps1 * rho(d / R) + eps2 * y)

with d the product-metric distance from (0, 0), rho a C-infinity step
that is 1 on [0, 1/2] and 0 on [1, inf), R the bump radius and
chi(y) = rho(|y| / w) a cutoff that makes H vanish for |y| >= w.  The tilt
eps2 * y balanced against the bump slope produces one center and one saddle
on the positive y axis; the cutoff zone contributes two circles of
degenerate fixed points at the extrema of y * chi(y).
"""
from __future__ import annotations

from dataclasses import dataclass
from math import exp, sqrt

import numba
import numpy as np

from ..manifold import Annulus, DomainError
from .flows import Flow
from .integrate import IntegrationError


@numba.njit(cache=True)
def _psi(x):
    return exp(-1.0 / x) if x > 0.0 else 0.0


@numba.njit(cache=True)
def _psi1(x):
    return exp(-1.0 / x) / (x * x) if x > 0.0 else 0.0


@numba.njit(cache=True)
def _psi2(x):
    if x <= 0.0:
        return 0.0
    return exp(-1.0 / x) * (1.0 / x**4 - 2.0 / x**3)


@numba.njit(cache=True)
def bump3(u):
    """rho(u), rho'(u), rho''(u)."""
    if u <= 0.5:
        return 1.0, 0.0, 0.0
    if u >= 1.0:
        return 0.0, 0.0, 0.0
    t = 2.0 * u - 1.0
    a, b = _psi(1.0 - t), _psi(t)
    a1, b1 = -_psi1(1.0 - t), _psi1(t)
    a2, b2 = _psi2(1.0 - t), _psi2(t)
    s = a + b
    num = a1 * b - a * b1
    r1 = num / (s * s)
    r2 = (a2 * b - a * b2) / (s * s) - 2.0 * num * (a1 + b1) / (s * s * s)
    return a / s, 2.0 * r1, 4.0 * r2


@numba.njit(cache=True)
def _derivs(y, z, e1, e2, radius, width):
    """H and its first and second partial derivatives at (y, z)."""
    zw = (z + 0.5) % 1.0 - 0.5
    d = sqrt(y * y + zw * zw)
    r0, r1, r2 = bump3(d / radius)
    k = e1 * r0 + e2 * y
    ky, kz, kyy, kyz, kzz = e2, 0.0, 0.0, 0.0, 0.0
    if r1 != 0.0 or r2 != 0.0:
        dy, dz = y / d, zw / d
        d3 = d * d * d
        g1, g2 = e1 * r1 / radius, e1 * r2 / (radius * radius)
        ky += g1 * dy
        kz = g1 * dz
        kyy = g2 * dy * dy + g1 * zw * zw / d3
        kzz = g2 * dz * dz + g1 * y * y / d3
        kyz = g2 * dy * dz - g1 * y * zw / d3
    c0, c1, c2 = bump3(abs(y) / width)
    sg = 1.0 if y > 0 else -1.0
    c1 = c1 * sg / width
    c2 = c2 / (width * width)
    h = c0 * k
    hy = c1 * k + c0 * ky
    hz = c0 * kz
    hyy = c2 * k + 2.0 * c1 * ky + c0 * kyy
    hyz = c1 * kz + c0 * kyz
    hzz = c0 * kzz
    return h, hy, hz, hyy, hyz, hzz


@numba.njit(cache=True)
def _derivs_array(ys, zs, e1, e2, radius, width):
    n = ys.shape[0]
    out = np.empty((n, 6))
    for i in range(n):
        out[i, 0], out[i, 1], out[i, 2], out[i, 3], out[i, 4], out[i, 5] = _derivs(
            ys[i], zs[i], e1, e2, radius, width
        )
    return out


@numba.njit(cache=True)
def _rhs(y, z, m, e1, e2, radius, width):
    _, hy, hz, hyy, hyz, hzz = _derivs(y, z, e1, e2, radius, width)
    # field (H_z, -H_y); its derivative [[H_zy, H_zz], [-H_yy, -H_yz]] times m
    dm00 = hyz * m[0] + hzz * m[2]
    dm01 = hyz * m[1] + hzz * m[3]
    dm10 = -hyy * m[0] - hyz * m[2]
    dm11 = -hyy * m[1] - hyz * m[3]
    return hz, -hy, dm00, dm01, dm10, dm11


@numba.njit(cache=True)
def _rk4_kernel(pts, t, h, e1, e2, radius, width, delta, with_jac):
    n = pts.shape[0]
    out = pts.copy()
    jac = np.zeros((n, 4))
    status = np.zeros(n, dtype=np.int64)
    nfull = int(np.floor(abs(t) / h + 1e-9))
    rest = abs(t) - nfull * h
    if rest <= 1e-14 * max(1.0, abs(t)):
        rest = 0.0
    sign = 1.0 if t >= 0 else -1.0
    m = np.empty(4)
    tmp = np.zeros(4)
    for i in range(n):
        y, z = pts[i, 0], pts[i, 1]
        m[0], m[1], m[2], m[3] = 1.0, 0.0, 0.0, 1.0
        nsteps = nfull + (1 if rest > 0.0 else 0)
        for j in range(nsteps):
            dt = sign * (h if j < nfull else rest)
            a = _rhs(y, z, m, e1, e2, radius, width)
            if with_jac:
                for q in range(4):
                    tmp[q] = m[q] + 0.5 * dt * a[2 + q]
            b = _rhs(y + 0.5 * dt * a[0], z + 0.5 * dt * a[1], tmp, e1, e2, radius, width)
            if with_jac:
                for q in range(4):
                    tmp[q] = m[q] + 0.5 * dt * b[2 + q]
            c = _rhs(y + 0.5 * dt * b[0], z + 0.5 * dt * b[1], tmp, e1, e2, radius, width)
            if with_jac:
                for q in range(4):
                    tmp[q] = m[q] + dt * c[2 + q]
            d = _rhs(y + dt * c[0], z + dt * c[1], tmp, e1, e2, radius, width)
            y += dt / 6.0 * (a[0] + 2.0 * b[0] + 2.0 * c[0] + d[0])
            z += dt / 6.0 * (a[1] + 2.0 * b[1] + 2.0 * c[1] + d[1])
            if with_jac:
                for q in range(4):
                    m[q] += dt / 6.0 * (a[2 + q] + 2.0 * b[2 + q] + 2.0 * c[2 + q] + d[2 + q])
            z = z % 1.0
            if z >= 1.0:
                z = 0.0
            if not (np.isfinite(y) and np.isfinite(z)):
                status[i] = 2
                break
            if abs(y) > delta:
                status[i] = 1
                break
        out[i, 0], out[i, 1] = y, z
        jac[i, 0], jac[i, 1], jac[i, 2], jac[i, 3] = m[0], m[1], m[2], m[3]
    return out, jac, status


@dataclass(frozen=True)
class HamiltonianAnnulus(Flow):
    """Hamiltonian flow of H on the annulus, integrated by RK4 with step ``step``."""

    eps1: float = 2e-4
    eps2: float = 0.01
    delta: float = 0.1
    bump_radius: float = 0.04
    cutoff: float = 0.09
    step: float = 1e-3
    fixed_point_free = False

    def __post_init__(self):
        if self.eps1 <= 0 or self.eps2 <= 0:
            raise ValueError("eps1 and eps2 must be positive")
        if not 0 < self.cutoff < 0.95 * self.delta:
            raise ValueError("cutoff must lie in (0, 0.95 delta) so the field vanishes near the boundary")
        if not 0 < self.bump_radius <= 0.5 * self.cutoff:
            raise ValueError("bump_radius must be at most cutoff / 2")

    @property
    def space(self):
        return Annulus(self.delta)

    @property
    def params(self):
        return (self.eps1, self.eps2, self.bump_radius, self.cutoff)

    def derivatives(self, x) -> np.ndarray:
        """Columns H, H_y, H_z, H_yy, H_yz, H_zz at points of shape (..., 2)."""
        x = np.asarray(x, float)
        flat = x.reshape(-1, 2)
        out = _derivs_array(np.ascontiguousarray(flat[:, 0]), np.ascontiguousarray(flat[:, 1]), *self.params)
        return out.reshape(x.shape[:-1] + (6,))

    def energy(self, x):
        return self.derivatives(x)[..., 0]

    def field(self, x):
        d = self.derivatives(x)
        return np.stack([d[..., 2], -d[..., 1]], axis=-1)

    def field_jacobian(self, x):
        d = self.derivatives(x)
        row0 = np.stack([d[..., 4], d[..., 5]], axis=-1)
        row1 = np.stack([-d[..., 3], -d[..., 4]], axis=-1)
        return np.stack([row0, row1], axis=-2)

    def _integrate(self, x, t, with_jac):
        x = np.asarray(x, float)
        flat = np.ascontiguousarray(self.space.canonicalize(x).reshape(-1, 2))
        if t == 0:
            out, jac = flat, np.tile(np.array([1.0, 0.0, 0.0, 1.0]), (flat.shape[0], 1))
        else:
            out, jac, status = _rk4_kernel(flat, float(t), self.step, *self.params, self.delta, with_jac)
            if np.any(status == 2):
                raise IntegrationError(f"non-finite state (step {self.step}, t {t})")
            if np.any(status == 1):
                raise DomainError(f"orbit left the annulus (step {self.step}, t {t}); integrator failure")
        return out.reshape(x.shape), jac.reshape(x.shape[:-1] + (2, 2))

    def flow(self, x, t):
        return self._integrate(x, t, False)[0]

    def jacobian(self, x, t):
        return self._integrate(x, t, True)[1]

    def flow_with_jacobian(self, x, t):
        return self._integrate(x, t, True)


@dataclass(frozen=True)
class CriticalPoint:
    y: float
    z: float
    kind: str  # "saddle", "center" or "degenerate"
    residual: float
    hessian_det: float
    eigenvalues: tuple[float, float]


def find_critical_points(ham: HamiltonianAnnulus, grid=(41, 81), tol: float = 1e-13, max_iter: int = 60):
    """Newton on grad H from a grid of seeds; deduplicated and classified by the Hessian.

    Newton steps that hit a singular Hessian (the degenerate circles) are
    reported with kind "degenerate" only when they converge.
    """
    ys = np.linspace(-0.98 * ham.cutoff, 0.98 * ham.cutoff, grid[0])
    zs = np.arange(grid[1]) / grid[1]
    seeds = np.array([(y, z) for y in ys for z in zs])
    found: list[CriticalPoint] = []
    scale = ham.eps1 / ham.bump_radius**2 + ham.eps2 / ham.cutoff
    for y, z in seeds:
        p = np.array([y, z])
        for _ in range(max_iter):
            _, hy, hz, hyy, hyz, hzz = ham.derivatives(p)
            g = np.array([hy, hz])
            hess = np.array([[hyy, hyz], [hyz, hzz]])
            if np.linalg.norm(g) < tol:
                break
            if abs(np.linalg.det(hess)) < 1e-10 * scale**2:
                p = None
                break
            p = p - np.linalg.solve(hess, g)
            if abs(p[0]) > ham.cutoff:
                p = None
                break
            p[1] %= 1.0
        if p is None:
            continue
        _, hy, hz, hyy, hyz, hzz = ham.derivatives(p)
        res = float(np.hypot(hy, hz))
        if res > 1e-8:
            continue
        if any(np.hypot(c.y - p[0], (c.z - p[1] + 0.5) % 1 - 0.5) < 1e-6 for c in found):
            continue
        det = hyy * hzz - hyz**2
        ev = np.linalg.eigvalsh(np.array([[hyy, hyz], [hyz, hzz]]))
        if abs(det) < 1e-8 * scale**2:
            kind = "degenerate"
        else:
            kind = "center" if det > 0 else "saddle"
        found.append(CriticalPoint(float(p[0]), float(p[1]), kind, res, float(det), (float(ev[0]), float(ev[1]))))
    return found


@dataclass(frozen=True)
class HomoclinicReport:
    saddle: tuple[float, float]
    unstable_rate: float
    closest_return: tuple[float, float]  # per unstable branch
    return_time: tuple[float, float]
    energy_gap: tuple[float, float]


def homoclinic_loop(ham: HamiltonianAnnulus, saddle: CriticalPoint, offset: float = 1e-7, t_max: float = 400.0,
                    step: float = 1e-2) -> HomoclinicReport:
    """Follow both unstable separatrices of ``saddle`` and record how close they come back."""
    s = np.array([saddle.y, saddle.z])
    jac = ham.field_jacobian(s)
    w, v = np.linalg.eig(jac)
    iu = int(np.argmax(w.real))
    eu = np.real(v[:, iu])
    eu /= np.linalg.norm(eu)
    h0 = float(ham.energy(s))
    closest, times, gaps = [], [], []
    sub = HamiltonianAnnulus(ham.eps1, ham.eps2, ham.delta, ham.bump_radius, ham.cutoff, step)
    for sign in (1.0, -1.0):
        p = s + sign * offset * eu
        left, best, best_t, t = False, np.inf, np.nan, 0.0
        far = 1e3 * offset
        while t < t_max:
            p = sub.flow(p, 1.0)
            t += 1.0
            d = float(np.hypot(p[0] - s[0], (p[1] - s[1] + 0.5) % 1 - 0.5))
            if d > far:
                left = True
            elif left and d < best:
                best, best_t = d, t
        closest.append(best)
        times.append(best_t)
        gaps.append(abs(float(ham.energy(p)) - h0))
    return HomoclinicReport(
        (saddle.y, saddle.z), float(np.max(w.real)), tuple(closest), tuple(times), tuple(gaps)
    )


def g0(p, ham: HamiltonianAnnulus = HamiltonianAnnulus()):
    """Time-one map of the Hamiltonian flow (Point in, Point out)."""
    from ..manifold import Point

    return Point(p.space, ham.flow(p.array, 1.0))
