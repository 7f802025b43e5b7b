"""Independent 1D solver for rotationally symmetric instances.

For h = h(r) the frame Hessian of the cap chart is diagonal, so the
determinant factorizes and the prescribed-measure equation reduces to the
two-point boundary value problem

    (h'' + h) (cot(r) h' + h)^(n-1) = f(r) h^(p-1) (h^2 + h'^2)^((n+1-q)/2)

on (0, theta), with the regularity condition h'(0) = 0 at the pole and the
Robin condition h'(theta) = cot(theta) h(theta) at the rim.  The collocation
here (uniform nodes including r = 0 and r = theta, centered differences,
one-sided second-order boundary rows, Newton on the same density homotopy)
shares no discretization code with the 2D solver, which is the point: it
serves as a brute-force oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.interpolate import CubicSpline

from .cap_chart import CapSpec
from .capillary_body import ExponentPair, SupportField
from .errors import (
    LineSearchStallError,
    MaxIterationsError,
    NotAxisymmetricError,
    SingularSystemError,
)
from .ma_system import ProblemSpec


@dataclass
class RadialProblem:
    """Rotationally symmetric instance sampled on a fine uniform 1D grid."""

    cap: CapSpec
    pq: ExponentPair
    r: np.ndarray  # nodes 0 = r_0 < ... < r_M = theta, uniform
    f: np.ndarray  # positive samples f(r_j)

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=float)
        self.f = np.asarray(self.f, dtype=float)
        if self.r.ndim != 1 or self.r.size < 8:
            raise ValueError("need a 1D grid with at least 8 nodes")
        if self.r[0] != 0.0 or abs(self.r[-1] - self.cap.theta) > 1e-14:
            raise ValueError("radial grid must span [0, theta]")
        steps = np.diff(self.r)
        if not np.allclose(steps, steps.mean(), rtol=1e-9):
            raise ValueError("radial grid must be uniform")
        if self.f.shape != self.r.shape:
            raise ValueError("f must be sampled at the radial nodes")
        if not (np.all(np.isfinite(self.f)) and np.all(self.f > 0.0)):
            raise ValueError("f must be finite and strictly positive")

    @property
    def dr(self) -> float:
        return float((self.r[-1] - self.r[0]) / (self.r.size - 1))

    @classmethod
    def from_callable(cls, cap: CapSpec, pq: ExponentPair, f_of_r, num_nodes: int) -> "RadialProblem":
        r = np.linspace(0.0, cap.theta, num_nodes)
        return cls(cap=cap, pq=pq, r=r, f=np.asarray(f_of_r(r), dtype=float))


def radial_start_density(prob: RadialProblem) -> np.ndarray:
    """The 1D profile of the homotopy start density (solved exactly by h = l)."""
    spec = prob.cap
    l = 1.0 - spec.cos_theta * np.cos(prob.r)
    grad_sq = (spec.cos_theta * np.sin(prob.r)) ** 2
    n = spec.n
    return l ** (1.0 - prob.pq.p) * (l * l + grad_sq) ** (0.5 * (prob.pq.q - n - 1))


def _derivative_ops(M: int, dr: float):
    """Centered D1/D2 on interior rows; boundary rows are written separately."""
    D1 = sp.diags([-1.0, 1.0], [-1, 1], shape=(M + 1, M + 1)).tolil() / (2 * dr)
    D2 = sp.diags([1.0, -2.0, 1.0], [-1, 0, 1], shape=(M + 1, M + 1)).tolil() / dr**2
    return D1.tocsr(), D2.tocsr()


def _factors(h: np.ndarray, prob: RadialProblem, f: np.ndarray):
    """(a, b, c, h1) with a = h''+h, b = cot(r) h'+h, c = RHS, on interior nodes."""
    M = prob.r.size - 1
    dr = prob.dr
    n = prob.cap.n
    p, q = prob.pq.p, prob.pq.q
    h1 = np.empty_like(h)
    h1[1:-1] = (h[2:] - h[:-2]) / (2 * dr)
    h1[0] = (-3 * h[0] + 4 * h[1] - h[2]) / (2 * dr)
    h1[-1] = (3 * h[-1] - 4 * h[-2] + h[-3]) / (2 * dr)
    h2 = np.zeros_like(h)
    h2[1:-1] = (h[2:] - 2 * h[1:-1] + h[:-2]) / dr**2

    idx = slice(1, M)
    cot = np.cos(prob.r[idx]) / np.sin(prob.r[idx])
    a = h2[idx] + h[idx]
    b = cot * h1[idx] + h[idx]
    c = f[idx] * h[idx] ** (p - 1) * (h[idx] ** 2 + h1[idx] ** 2) ** (0.5 * (n + 1 - q))
    return a, b, c, h1


def radial_residual(h: np.ndarray, prob: RadialProblem, f: np.ndarray | None = None) -> np.ndarray:
    """Residual rows: h'(0) at node 0, factored equation inside, Robin at node M."""
    h = np.asarray(h, dtype=float)
    f = prob.f if f is None else f
    n = prob.cap.n
    M = prob.r.size - 1
    dr = prob.dr
    out = np.empty(M + 1)
    a, b, c, h1 = _factors(h, prob, f)
    out[1:M] = a * b ** (n - 1) - c
    out[0] = (-3 * h[0] + 4 * h[1] - h[2]) / (2 * dr)
    out[M] = (3 * h[M] - 4 * h[M - 1] + h[M - 2]) / (2 * dr) - prob.cap.cot_theta * h[M]
    return out


def _radial_jacobian(h: np.ndarray, prob: RadialProblem, f: np.ndarray) -> sp.csr_matrix:
    M = prob.r.size - 1
    dr = prob.dr
    n = prob.cap.n
    p, q = prob.pq.p, prob.pq.q
    D1, D2 = _derivative_ops(M, dr)
    a, b, c, h1 = _factors(h, prob, f)
    idx = slice(1, M)
    cot = np.cos(prob.r[idx]) / np.sin(prob.r[idx])

    def rowdiag(vals):
        d = np.zeros(M + 1)
        d[idx] = vals
        return sp.diags(d)

    I = sp.identity(M + 1, format="csr")
    da = D2 + I
    db = sp.diags(np.concatenate([[0.0], cot, [0.0]])) @ D1 + I
    hs = h[idx] ** 2 + h1[idx] ** 2
    dc_dh = f[idx] * ((p - 1) * h[idx] ** (p - 2) * hs ** (0.5 * (n + 1 - q))
                      + h[idx] ** (p - 1) * (n + 1 - q) * hs ** (0.5 * (n + 1 - q) - 1) * h[idx])
    dc_dh1 = f[idx] * h[idx] ** (p - 1) * (n + 1 - q) * hs ** (0.5 * (n + 1 - q) - 1) * h1[idx]

    J = rowdiag(b ** (n - 1)) @ da - rowdiag(dc_dh) - rowdiag(dc_dh1) @ D1
    if n >= 2:
        J = J + rowdiag((n - 1) * a * b ** (n - 2)) @ db

    J = J.tolil()
    J[0, :] = 0.0
    J[0, [0, 1, 2]] = np.array([-3.0, 4.0, -1.0]) / (2 * dr)
    J[M, :] = 0.0
    J[M, [M - 2, M - 1, M]] = np.array([1.0, -4.0, 3.0]) / (2 * dr)
    J[M, M] -= prob.cap.cot_theta
    return J.tocsr()


def _noise_floor(h: np.ndarray, dr: float) -> float:
    """Roundoff floor of the residual evaluation: second differences divide
    float noise of size eps*|h| by dr^2, so tolerances below this are
    unreachable in double precision on fine grids."""
    return 16.0 * np.finfo(float).eps * max(1.0, float(np.max(np.abs(h)))) / dr**2


def _radial_newton(h0, prob, f, tol, max_iter=40, min_step=1e-8):
    h = h0.copy()
    res = radial_residual(h, prob, f)
    rnorm = float(np.max(np.abs(res)))
    for _ in range(max_iter):
        if rnorm <= tol:
            return h
        J = _radial_jacobian(h, prob, f)
        try:
            delta = spla.spsolve(J.tocsc(), -res)
        except RuntimeError as exc:
            raise SingularSystemError(str(exc), best_v=h) from exc
        alpha = 1.0
        while True:
            h_new = h + alpha * delta
            ok = np.all(h_new > 0.0)
            if ok:
                res_new = radial_residual(h_new, prob, f)
                rn = float(np.max(np.abs(res_new)))
                if np.isfinite(rn) and rn < rnorm:
                    break
            alpha *= 0.5
            if alpha < min_step:
                if rnorm <= _noise_floor(h, prob.dr):
                    return h  # stalled at the roundoff floor, accept
                raise LineSearchStallError(
                    f"1D line search stalled (residual {rnorm:.3e})", best_v=h
                )
        h, res, rnorm = h_new, res_new, rn
    if rnorm <= max(tol, _noise_floor(h, prob.dr)):
        return h
    raise MaxIterationsError(f"1D Newton did not converge (residual {rnorm:.3e})", best_v=h)


def radial_solve(prob: RadialProblem, tol: float = 1e-10) -> np.ndarray:
    """Solve the radial problem by Newton along the density homotopy from h = l."""
    spec = prob.cap
    h = 1.0 - spec.cos_theta * np.cos(prob.r)
    f0 = radial_start_density(prob)
    t, dt = 0.0, 0.25
    while t < 1.0:
        if float(np.max(np.abs(radial_residual(h, prob)))) <= tol:
            return h
        t_try = min(1.0, t + dt)
        f_t = (1.0 - t_try) * f0 + t_try * prob.f
        try:
            h = _radial_newton(h, prob, f_t, tol)
        except (LineSearchStallError, MaxIterationsError, SingularSystemError):
            dt *= 0.5
            if dt < 2.0**-10:
                raise
            continue
        t = t_try
    return h


@dataclass
class OracleCompareReport:
    """Discrepancy between the 2D solution and the independent radial solve."""

    max_abs: float
    l2: float
    angular_variation: float
    fine_nodes: int


def oracle_compare(
    prob: ProblemSpec,
    h2d: SupportField,
    f_radial=None,
    resolution_factor: int = 4,
    tol: float = 1e-10,
) -> OracleCompareReport:
    """Interpolate the 1D solution onto the 2D radii and report the mismatch.

    ``f_radial``, when given, supplies the exact radial density profile;
    otherwise the profile is spline-fit through the ring means of prob.f.
    Raises NotAxisymmetricError when f varies around a ring.
    """
    grid = prob.grid
    f = prob.f
    ring_var = float(np.max(f.max(axis=1) - f.min(axis=1))) if grid.Nphi > 1 else 0.0
    if ring_var > 1e-10 * float(np.max(np.abs(f))):
        raise NotAxisymmetricError(f"f varies over rings by {ring_var:.3e}")

    num = max(int(np.ceil(resolution_factor * grid.spec.theta / grid.dr)) + 1, 64)
    if f_radial is None:
        prof = CubicSpline(grid.r, f.mean(axis=1))
        f_radial = prof
    rp = RadialProblem.from_callable(grid.spec, prob.pq, f_radial, num)
    h1d = radial_solve(rp, tol=tol)
    h_on_rings = CubicSpline(rp.r, h1d)(grid.r)

    diff = h2d.h - h_on_rings[:, None]
    max_abs = float(np.max(np.abs(diff)))
    l2 = float(np.sqrt(np.sum(grid.weights * diff**2)))
    ang = float(np.max(h2d.h.max(axis=1) - h2d.h.min(axis=1))) if grid.Nphi > 1 else 0.0
    return OracleCompareReport(max_abs=max_abs, l2=l2, angular_variation=ang, fine_nodes=num)
