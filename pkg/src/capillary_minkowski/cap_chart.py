"""Geodesic-polar chart of the spherical cap plus discrete differential operators.

The cap of contact angle theta is parametrized by geodesic polar coordinates
(r, phi) about its pole, r in (0, theta], with the round metric
sigma = dr^2 + sin(r)^2 dphi^2.  Scalar fields are sampled on a tensor grid
with staggered radial nodes r_i = (i + 1/2) dr (no node at the coordinate
singularity r = 0, rim node exactly at r = theta) and uniform periodic
angular nodes.  Crossing the pole identifies (r, phi) with (-r, phi + pi),
which supplies ghost values for radial stencils on the innermost rings.

Frame components refer to the orthonormal frame {d_r, (1/sin r) d_phi}.
Angular stencils are fourth order everywhere and the radial first derivative
is fourth order on the inner half of the cap: the Christoffel factors cot(r)
and 1/sin(r)^2 amplify truncation errors by 1/r near the pole, and the extra
order is what keeps gradient/Hessian errors O(max spacing^2) in the max norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class CapSpec:
    """Contact angle and intrinsic dimension of the cap.

    Trigonometric constants are computed once here and reused everywhere so
    that all modules agree bit-for-bit on cos(theta), sin(theta), cot(theta).
    """

    theta: float
    n: int = 2
    cos_theta: float = field(init=False, repr=False)
    sin_theta: float = field(init=False, repr=False)
    cot_theta: float = field(init=False, repr=False)

    def __post_init__(self):
        if not 0.0 < self.theta < 0.5 * math.pi:
            raise ValueError(f"theta must lie in (0, pi/2), got {self.theta}")
        if self.n < 1 or self.n != int(self.n):
            raise ValueError(f"cap dimension n must be a positive integer, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "cos_theta", math.cos(self.theta))
        object.__setattr__(self, "sin_theta", math.sin(self.theta))
        object.__setattr__(self, "cot_theta", math.cos(self.theta) / math.sin(self.theta))

    def cap_area(self) -> float:
        """Area of the cap: 2*pi*(1-cos theta) for n = 2, arc length 2*theta for n = 1."""
        if self.n == 2:
            return 2.0 * math.pi * (1.0 - self.cos_theta)
        if self.n == 1:
            return 2.0 * self.theta
        raise ValueError("area formula implemented for n in (1, 2) only")


@dataclass(frozen=True)
class DiffOps:
    """Sparse partial-derivative matrices on the flattened (Nr*Nphi) grid."""

    Dr: sp.csr_matrix
    Drr: sp.csr_matrix
    Dphi: sp.csr_matrix
    Dphiphi: sp.csr_matrix
    Drphi: sp.csr_matrix


class PolarGrid:
    """Structured (r, phi) grid with quadrature weights and pole bookkeeping.

    For n = 2 the angular direction has Nphi uniform nodes on [0, 2*pi); for
    n = 1 the grid degenerates to Nphi = 1 (even fields on the arc, no
    angular terms).  Fields live in arrays of shape (Nr, Nphi), flattened in
    C order wherever a vector is needed.
    """

    def __init__(self, spec: CapSpec, Nr: int, Nphi: int | None = None):
        if spec.n not in (1, 2):
            raise ValueError(f"grids support n in (1, 2), got n = {spec.n}")
        if spec.n == 1:
            if Nphi not in (None, 1):
                raise ValueError("n = 1 grids are radial only (Nphi must be 1)")
            Nphi = 1
        else:
            if Nphi is None:
                Nphi = Nr
            if Nphi < 6 or Nphi % 2 != 0:
                raise ValueError(f"Nphi must be even and >= 6, got {Nphi}")
        if Nr < 6:
            raise ValueError(f"Nr must be >= 6, got {Nr}")

        self.spec = spec
        self.Nr = int(Nr)
        self.Nphi = int(Nphi)
        self.dr = spec.theta / (Nr - 0.5)
        self.dphi = 2.0 * math.pi / Nphi if spec.n == 2 else 0.0

        r = (np.arange(Nr) + 0.5) * self.dr
        r[-1] = spec.theta  # rim node sits exactly on the boundary circle
        self.r = r
        self.phi = np.arange(Nphi) * self.dphi
        self.sin_r = np.sin(r)
        self.cos_r = np.cos(r)
        self.cot_r = self.cos_r / self.sin_r

        # Pairing of angular indices across the pole: (-r, phi) ~ (r, phi+pi).
        self.pole_map = (np.arange(Nphi) + Nphi // 2) % Nphi

        self.weights = self._quadrature_weights()
        self.ops = self._build_ops()

    # -- construction helpers -------------------------------------------------

    def _quadrature_weights(self) -> np.ndarray:
        """Per-node weights: exact cell integrals of the area element.

        Cell i spans [i*dr, (i+1)*dr] for i < Nr-1 and [(Nr-1)*dr, theta] for
        the rim node, so constants integrate to the exact cap area and smooth
        fields to second order.
        """
        edges = np.arange(self.Nr + 1) * self.dr
        edges[-1] = self.spec.theta
        if self.spec.n == 2:
            w_r = np.cos(edges[:-1]) - np.cos(edges[1:])
            return np.repeat((w_r * self.dphi)[:, None], self.Nphi, axis=1)
        # n = 1: even fields on the arc [-theta, theta]; each node represents
        # both halves, hence the factor 2 on the cell width.
        w_r = 2.0 * (edges[1:] - edges[:-1])
        return w_r[:, None].copy()

    def _radial_rows(self, one_sided_last: bool):
        """Stencil table for d/dr: list of (ring, perm, coeff) per row ring."""
        Nr, dr = self.Nr, self.dr
        rows = []
        r_cut = 0.5 * self.spec.theta
        for i in range(Nr):
            if i == Nr - 1 and one_sided_last:
                rows.append([(i - 2, False, 1.0 / (2 * dr)),
                             (i - 1, False, -4.0 / (2 * dr)),
                             (i, False, 3.0 / (2 * dr))])
            elif self.r[i] <= r_cut and i <= Nr - 3:
                st = [(i - 2, 1.0), (i - 1, -8.0), (i + 1, 8.0), (i + 2, -1.0)]
                rows.append([self._ghost(j) + (c / (12 * dr),) for j, c in st])
            else:
                st = [(i - 1, -1.0), (i + 1, 1.0)]
                rows.append([self._ghost(j) + (c / (2 * dr),) for j, c in st])
        return rows

    def _ghost(self, ring: int):
        """Map a (possibly negative) ring index through the pole closure."""
        if ring >= 0:
            return (ring, False)
        return (-1 - ring, True)

    def _rows_to_csr(self, rows) -> sp.csr_matrix:
        N = self.Nr * self.Nphi
        k = np.arange(self.Nphi)
        ri, ci, data = [], [], []
        for i, row in enumerate(rows):
            base = i * self.Nphi
            for ring, perm, coeff in row:
                cols = ring * self.Nphi + (self.pole_map[k] if perm else k)
                ri.append(base + k)
                ci.append(cols)
                data.append(np.full(self.Nphi, coeff))
        mat = sp.coo_matrix(
            (np.concatenate(data), (np.concatenate(ri), np.concatenate(ci))),
            shape=(N, N),
        )
        return mat.tocsr()

    def _angular_csr(self, offsets, coeffs) -> sp.csr_matrix:
        N = self.Nr * self.Nphi
        if self.spec.n == 1 or self.Nphi == 1:
            return sp.csr_matrix((N, N))
        k = np.arange(self.Nphi)
        ri, ci, data = [], [], []
        for i in range(self.Nr):
            base = i * self.Nphi
            for off, coeff in zip(offsets, coeffs):
                ri.append(base + k)
                ci.append(base + (k + off) % self.Nphi)
                data.append(np.full(self.Nphi, coeff))
        mat = sp.coo_matrix(
            (np.concatenate(data), (np.concatenate(ri), np.concatenate(ci))),
            shape=(N, N),
        )
        return mat.tocsr()

    def _build_ops(self) -> DiffOps:
        Dr = self._rows_to_csr(self._radial_rows(one_sided_last=True))

        rows = []
        Nr, dr = self.Nr, self.dr
        for i in range(Nr):
            if i == Nr - 1:
                rows.append([(i - 3, False, -1.0 / dr**2),
                             (i - 2, False, 4.0 / dr**2),
                             (i - 1, False, -5.0 / dr**2),
                             (i, False, 2.0 / dr**2)])
            else:
                st = [(i - 1, 1.0), (i, -2.0), (i + 1, 1.0)]
                rows.append([self._ghost(j) + (c / dr**2,) for j, c in st])
        Drr = self._rows_to_csr(rows)

        if self.spec.n == 2:
            dphi = self.dphi
            Dphi = self._angular_csr(
                [-2, -1, 1, 2],
                np.array([1.0, -8.0, 8.0, -1.0]) / (12 * dphi),
            )
            Dphiphi = self._angular_csr(
                [-2, -1, 0, 1, 2],
                np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / (12 * dphi**2),
            )
        else:
            Dphi = self._angular_csr([], [])
            Dphiphi = self._angular_csr([], [])
        Drphi = (Dr @ Dphi).tocsr()
        ops = DiffOps(Dr=Dr, Drr=Drr, Dphi=Dphi, Dphiphi=Dphiphi, Drphi=Drphi)
        self.stencil_amplification = self._stencil_amplification(ops)
        return ops

    def _stencil_amplification(self, ops: DiffOps) -> float:
        """Worst row 1-norm of the frame-Hessian operators.

        Bounds how much the Hessian stencils amplify float noise in a field:
        the residual of a nonlinear system built on them cannot be evaluated
        below roughly eps * amplification * |field|, which matters near the
        pole where 1/sin(r)^2 is large.
        """

        def row_sums(mat):
            return np.asarray(np.abs(mat).sum(axis=1)).ravel().reshape(self.shape)

        amp = row_sums(ops.Drr).max()
        if self.spec.n == 2:
            sin_r = self.sin_r[:, None]
            cot_r = np.abs(self.cot_r)[:, None]
            h22 = row_sums(ops.Dphiphi) / sin_r**2 + cot_r * row_sums(ops.Dr)
            h12 = (row_sums(ops.Drphi) + cot_r * row_sums(ops.Dphi)) / sin_r
            amp = max(amp, h22.max(), h12.max())
        return float(amp)

    # -- conveniences ----------------------------------------------------------

    @property
    def shape(self):
        return (self.Nr, self.Nphi)

    @property
    def size(self):
        return self.Nr * self.Nphi

    @property
    def boundary_ring(self) -> int:
        return self.Nr - 1

    @property
    def max_spacing(self) -> float:
        """Largest physical node spacing; the scale used in O(spacing^2) tolerances."""
        if self.spec.n == 2:
            return max(self.dr, self.spec.sin_theta * self.dphi)
        return self.dr

    def mesh(self):
        """Broadcast (r, phi) node coordinates as (Nr, Nphi) arrays."""
        return np.broadcast_to(self.r[:, None], self.shape).copy(), \
            np.broadcast_to(self.phi[None, :], self.shape).copy()

    def apply(self, op: sp.csr_matrix, f: np.ndarray) -> np.ndarray:
        return (op @ np.ascontiguousarray(f).ravel()).reshape(self.shape)


@dataclass
class FrameVector:
    """Per-node vector in the orthonormal frame; comps has shape (n, Nr, Nphi)."""

    comps: np.ndarray

    def norm_sq(self) -> np.ndarray:
        return np.sum(self.comps**2, axis=0)

    def norm(self) -> np.ndarray:
        return np.sqrt(self.norm_sq())


@dataclass
class FrameSymMatrix:
    """Per-node symmetric matrix in the orthonormal frame; comps (n, n, Nr, Nphi)."""

    comps: np.ndarray

    @property
    def n(self) -> int:
        return self.comps.shape[0]

    def det(self) -> np.ndarray:
        if self.n == 1:
            return self.comps[0, 0].copy()
        a, b, c = self.comps[0, 0], self.comps[0, 1], self.comps[1, 1]
        return a * c - b * b

    def trace(self) -> np.ndarray:
        if self.n == 1:
            return self.comps[0, 0].copy()
        return self.comps[0, 0] + self.comps[1, 1]

    def eig_bounds(self):
        """(min, max) eigenvalue per node via the closed 2x2 form (branch-free)."""
        if self.n == 1:
            a = self.comps[0, 0]
            return a.copy(), a.copy()
        a, b, c = self.comps[0, 0], self.comps[0, 1], self.comps[1, 1]
        half_tr = 0.5 * (a + c)
        disc = np.sqrt(0.25 * (a - c) ** 2 + b * b)
        return half_tr - disc, half_tr + disc

    def smallest_eigenvalue(self) -> np.ndarray:
        return self.eig_bounds()[0]

    def shifted(self, s: np.ndarray) -> "FrameSymMatrix":
        """Return self + s * identity (s a per-node scalar field)."""
        out = self.comps.copy()
        for i in range(self.n):
            out[i, i] = out[i, i] + s
        return FrameSymMatrix(out)


def l_field(grid: PolarGrid, spec: CapSpec | None = None) -> np.ndarray:
    """Weight l = 1 - cos(theta) cos(r), the chart form of sin^2(theta) + cos(theta)<xi, e>."""
    spec = spec or grid.spec
    col = 1.0 - spec.cos_theta * grid.cos_r
    return np.repeat(col[:, None], grid.Nphi, axis=1)


def l_gradient_norm_sq(grid: PolarGrid, spec: CapSpec | None = None) -> np.ndarray:
    """Closed-form |grad l|^2 = cos(theta)^2 sin(r)^2 on the grid."""
    spec = spec or grid.spec
    col = (spec.cos_theta * grid.sin_r) ** 2
    return np.repeat(col[:, None], grid.Nphi, axis=1)


def grad(f: np.ndarray, grid: PolarGrid) -> FrameVector:
    """Orthonormal-frame gradient (f_r, f_phi / sin r); pole handled by closure."""
    g1 = grid.apply(grid.ops.Dr, f)
    if grid.spec.n == 1:
        return FrameVector(np.stack([g1]))
    g2 = grid.apply(grid.ops.Dphi, f) / grid.sin_r[:, None]
    return FrameVector(np.stack([g1, g2]))


def hessian(f: np.ndarray, grid: PolarGrid) -> FrameSymMatrix:
    """Covariant Hessian w.r.t. the round metric, in the orthonormal frame.

    Chart formulas (Christoffel symbols of dr^2 + sin^2 r dphi^2):
      H11 = f_rr
      H12 = (f_rphi - cot r * f_phi) / sin r
      H22 = f_phiphi / sin^2 r + cot r * f_r
    """
    ops = grid.ops
    H11 = grid.apply(ops.Drr, f)
    if grid.spec.n == 1:
        return FrameSymMatrix(H11[None, None])
    sin_r = grid.sin_r[:, None]
    cot_r = grid.cot_r[:, None]
    f_r = grid.apply(ops.Dr, f)
    f_phi = grid.apply(ops.Dphi, f)
    H12 = (grid.apply(ops.Drphi, f) - cot_r * f_phi) / sin_r
    H22 = grid.apply(ops.Dphiphi, f) / sin_r**2 + cot_r * f_r
    comps = np.empty((2, 2) + grid.shape)
    comps[0, 0] = H11
    comps[0, 1] = H12
    comps[1, 0] = H12
    comps[1, 1] = H22
    return FrameSymMatrix(comps)


def normal_derivative(f: np.ndarray, grid: PolarGrid) -> np.ndarray:
    """One-sided second-order d/dr at the rim r = theta (outward normal of the cap)."""
    return grid.apply(grid.ops.Dr, f)[grid.boundary_ring].copy()


def integrate(f: np.ndarray, grid: PolarGrid) -> float:
    """Quadrature-weighted sum approximating the integral against the area element."""
    return float(np.sum(grid.weights * f))
