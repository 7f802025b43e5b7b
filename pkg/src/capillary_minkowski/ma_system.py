"""Nonlinear residual of the prescribed-measure equation in the log variable,
plus its exact sparse linearization.

Working variable is v = log h, which keeps h > 0 structural.  With
B = hess(v) + grad(v) x grad(v) + id the interior equation reads

    log det B = log f + (p - q) v + ((n + 1 - q)/2) log(1 + |grad v|^2)

and the boundary rows impose the Robin condition d_r v = cot(theta) on the
rim.  Boundary conditions are explicit residual rows (no ghost elimination),
so the Jacobian assembly is uniform over nodes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .cap_chart import CapSpec, FrameSymMatrix, PolarGrid, grad, hessian
from .capillary_body import ExponentPair, SupportField, second_fundamental_form
from .errors import NonConvexError


@dataclass
class ProblemSpec:
    """One instance of the prescribed-measure problem: grid, exponents, density."""

    grid: PolarGrid
    pq: ExponentPair
    f: np.ndarray

    def __post_init__(self):
        self.f = np.asarray(self.f, dtype=float)
        if self.f.shape != self.grid.shape:
            raise ValueError(f"f has shape {self.f.shape}, grid expects {self.grid.shape}")
        if not np.all(np.isfinite(self.f)):
            raise ValueError("f must be finite at every node")
        if not np.all(self.f > 0.0):
            raise ValueError("f must be strictly positive at every node")

    @property
    def cap(self) -> CapSpec:
        return self.grid.spec


@dataclass
class ResidualVector:
    """Residual samples: interior PDE rows on rings < Nr-1, Robin rows on the rim.

    ``full`` has one entry per grid node; nodes where det B <= 0 carry a +inf
    sentinel (listed in ``bad_nodes``) so a line search can reject them while
    keeping a total order on step quality.
    """

    full: np.ndarray
    bad_nodes: np.ndarray

    @property
    def interior(self) -> np.ndarray:
        return self.full[:-1]

    @property
    def boundary(self) -> np.ndarray:
        return self.full[-1]

    def max_norm(self) -> float:
        return float(np.max(np.abs(self.full)))


def log_gauss_map_matrix(v: np.ndarray, grid: PolarGrid) -> FrameSymMatrix:
    """B(v) = hess(v) + grad(v) x grad(v) + id in the orthonormal frame."""
    g = grad(v, grid)
    H = hessian(v, grid)
    comps = H.comps.copy()
    n = comps.shape[0]
    for i in range(n):
        for j in range(n):
            comps[i, j] += g.comps[i] * g.comps[j]
        comps[i, i] += 1.0
    return FrameSymMatrix(comps)


def residual(v: np.ndarray, prob: ProblemSpec) -> ResidualVector:
    """Assemble the nonlinear residual at v = log h.

    Interior rows:  log det B - [log f + (p-q) v + ((n+1-q)/2) log(1+|grad v|^2)].
    Boundary rows:  d_r v - cot(theta)  (one-sided second order).
    det B <= 0 yields a +inf sentinel instead of an exception.
    """
    grid = prob.grid
    n = grid.spec.n
    p, q = prob.pq.p, prob.pq.q
    v = np.asarray(v, dtype=float)

    B = log_gauss_map_matrix(v, grid)
    detB = B.det()
    gsq = grad(v, grid).norm_sq()

    good = detB > 0.0
    logdet = np.full(grid.shape, np.inf)
    np.log(detB, out=logdet, where=good)

    rhs = np.log(prob.f) + (p - q) * v + 0.5 * (n + 1 - q) * np.log1p(gsq)
    full = logdet - rhs
    full[~good] = np.inf

    b = grid.boundary_ring
    full[b] = grid.apply(grid.ops.Dr, v)[b] - grid.spec.cot_theta
    good[b] = True  # rim rows are Robin rows; det B is irrelevant there
    bad = np.flatnonzero(~good.ravel())
    return ResidualVector(full=full, bad_nodes=bad)


def residual_h_form(h: np.ndarray, prob: ProblemSpec) -> ResidualVector:
    """Independently coded residual in the original variable h.

    Interior rows: log det(hess h + h id) - log(f h^(p-1) (h^2+|grad h|^2)^((n+1-q)/2)).
    Boundary rows: d_r h - cot(theta) h.  Used as a cross-check of the log path;
    the two agree to O(spacing^2) on smooth positive fields.
    """
    grid = prob.grid
    n = grid.spec.n
    p, q = prob.pq.p, prob.pq.q
    sf = SupportField(h=np.asarray(h, dtype=float), grid=grid)
    detA = second_fundamental_form(sf).det()
    gsq = grad(sf.h, grid).norm_sq()

    good = detA > 0.0
    logdet = np.full(grid.shape, np.inf)
    np.log(detA, out=logdet, where=good)
    rhs = np.log(prob.f) + (p - 1) * np.log(sf.h) + 0.5 * (n + 1 - q) * np.log(sf.h**2 + gsq)
    full = logdet - rhs
    full[~good] = np.inf

    b = grid.boundary_ring
    full[b] = grid.apply(grid.ops.Dr, sf.h)[b] - grid.spec.cot_theta * sf.h[b]
    return ResidualVector(full=full, bad_nodes=np.flatnonzero(~good.ravel()))


def _diag(x: np.ndarray) -> sp.dia_matrix:
    return sp.diags(np.ascontiguousarray(x).ravel())


def jacobian(v: np.ndarray, prob: ProblemSpec) -> sp.csr_matrix:
    """Exact analytic linearization of ``residual`` w.r.t. the nodal values of v.

    Interior rows:
        tr(B^-1 dB) - (p-q) I - (n+1-q) * (grad v . d grad v) / (1+|grad v|^2)
    with dB = d hess + dgrad x grad + grad x dgrad.  Boundary rows are the
    (linear) one-sided d_r stencil.  Requires B(v) positive definite.
    """
    grid = prob.grid
    n = grid.spec.n
    p, q = prob.pq.p, prob.pq.q
    v = np.asarray(v, dtype=float)
    ops = grid.ops

    B = log_gauss_map_matrix(v, grid)
    eig_min = float(B.smallest_eigenvalue().min())
    if eig_min <= 0.0:
        raise NonConvexError(
            f"B(v) is not positive definite (min eigenvalue {eig_min:.3e})", margin=eig_min
        )

    g = grad(v, grid)
    gsq = g.norm_sq()
    N = grid.size

    D1 = ops.Dr
    if n == 2:
        inv_sin = 1.0 / grid.sin_r[:, None]
        cot = grid.cot_r[:, None]
        D2 = _diag(np.repeat(inv_sin, grid.Nphi, axis=1)) @ ops.Dphi
        Hop11 = ops.Drr
        Hop12 = _diag(np.repeat(inv_sin, grid.Nphi, axis=1)) @ (
            ops.Drphi - _diag(np.repeat(cot, grid.Nphi, axis=1)) @ ops.Dphi
        )
        Hop22 = _diag(np.repeat(inv_sin**2, grid.Nphi, axis=1)) @ ops.Dphiphi \
            + _diag(np.repeat(cot, grid.Nphi, axis=1)) @ ops.Dr

        detB = B.det()
        B11, B12, B22 = B.comps[0, 0], B.comps[0, 1], B.comps[1, 1]
        g1, g2 = g.comps[0], g.comps[1]

        J = (_diag(B22 / detB) @ Hop11
             - 2.0 * (_diag(B12 / detB) @ Hop12)
             + _diag(B11 / detB) @ Hop22
             + 2.0 * (_diag((B22 * g1 - B12 * g2) / detB) @ D1)
             + 2.0 * (_diag((B11 * g2 - B12 * g1) / detB) @ D2))
        w = (n + 1 - q) / (1.0 + gsq)
        J = J - _diag(w * g1) @ D1 - _diag(w * g2) @ D2
    else:
        B11 = B.comps[0, 0]
        g1 = g.comps[0]
        J = _diag(1.0 / B11) @ (ops.Drr + 2.0 * (_diag(g1) @ D1))
        w = (n + 1 - q) / (1.0 + gsq)
        J = J - _diag(w * g1) @ D1

    J = J - (p - q) * sp.identity(N, format="csr")

    # Swap in the Robin rows on the rim: mask out the PDE rows there and add
    # the d_r stencil rows (Dr already carries the one-sided rim stencil).
    interior_mask = np.ones(grid.shape)
    interior_mask[grid.boundary_ring] = 0.0
    boundary_mask = 1.0 - interior_mask
    J = _diag(interior_mask) @ J + _diag(boundary_mask) @ ops.Dr
    J = J.tocsr()
    J.eliminate_zeros()
    return J
