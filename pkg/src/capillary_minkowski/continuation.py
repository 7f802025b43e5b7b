"""Damped Newton iteration with a convexity safeguard, driven along the
density homotopy f_t from the exact start h = l.

The homotopy f_t = (1-t) f0 + t f interpolates from the start density f0
(for which h = l solves the problem exactly) to the target f.  Each t-stage
is solved by Newton with a backtracking line search on the max-norm of the
residual; stage failures halve the t-step, easy stages double it.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse.linalg as spla

from .cap_chart import PolarGrid, l_field, l_gradient_norm_sq
from .capillary_body import ExponentPair, SupportField
from .errors import (
    ContinuationStallError,
    LineSearchStallError,
    MaxIterationsError,
    NonConvexError,
    SingularSystemError,
    SolverError,
)
from .ma_system import ProblemSpec, jacobian, log_gauss_map_matrix, residual


@dataclass(frozen=True)
class SolverConfig:
    """Newton controls: tolerance on the residual max-norm, damping, safeguards."""

    tol: float = 1e-9
    max_iter: int = 30
    backtrack_factor: float = 0.5
    min_step: float = 1e-6
    convexity_floor_rel: float = 1e-8  # floor = rel * max eigenvalue of B

    def __post_init__(self):
        if not self.tol > 0.0:
            raise ValueError("tol must be positive")
        if not 0.0 < self.backtrack_factor < 1.0:
            raise ValueError("backtrack_factor must lie in (0, 1)")
        if not 0.0 < self.min_step <= 1.0:
            raise ValueError("min_step must lie in (0, 1]")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass(frozen=True)
class HomotopySchedule:
    """Plan for the march in t: adaptive by default, or an explicit t list."""

    adaptive: bool = True
    initial_step: float = 0.25
    min_step: float = 2.0**-10
    max_step: float = 0.5
    t_values: tuple | None = None

    def __post_init__(self):
        if self.t_values is not None:
            ts = tuple(float(t) for t in self.t_values)
            if ts[0] != 0.0 or ts[-1] != 1.0 or any(b <= a for a, b in zip(ts, ts[1:])):
                raise ValueError("explicit t_values must increase strictly from 0 to 1")
            object.__setattr__(self, "t_values", ts)
            if self.adaptive:
                raise ValueError("explicit t_values require adaptive=False")
        else:
            if not 0.0 < self.min_step <= self.initial_step <= self.max_step <= 1.0:
                raise ValueError("need 0 < min_step <= initial_step <= max_step <= 1")


@dataclass
class NewtonStage:
    """History of one Newton solve (one homotopy stage)."""

    t: float
    iterations: int = 0
    residuals: list = field(default_factory=list)  # per-iterate max-norms, start included
    margins: list = field(default_factory=list)  # per-iterate min eigenvalue of B
    step_lengths: list = field(default_factory=list)
    converged: bool = False
    seconds: float = 0.0


@dataclass
class SolveReport:
    """Aggregated continuation history plus verification hooks."""

    stages: list = field(default_factory=list)
    start_residual: float = float("nan")
    final_residual: float = float("nan")
    total_seconds: float = 0.0
    bound_verification: object = None  # filled by the a priori estimate suite

    @property
    def t_steps(self):
        return [s.t for s in self.stages]

    @property
    def newton_iters(self):
        return [s.iterations for s in self.stages]

    def to_json_dict(self) -> dict:
        out = {
            "t_steps": self.t_steps,
            "newton_iters": self.newton_iters,
            "residuals": [list(s.residuals) for s in self.stages],
            "margins": [list(s.margins) for s in self.stages],
            "timings": {
                "total_seconds": self.total_seconds,
                "stage_seconds": [s.seconds for s in self.stages],
            },
            "final_residual": self.final_residual,
            "start_residual": self.start_residual,
        }
        if self.bound_verification is not None:
            out["bound_verification"] = self.bound_verification.to_json_dict()
        return out


def start_density(grid: PolarGrid, pq: ExponentPair) -> np.ndarray:
    """The density f0 = l^(1-p) (l^2 + |grad l|^2)^((q-n-1)/2) solved exactly by h = l.

    Uses the closed forms l = 1 - cos(theta) cos(r) and |grad l| = cos(theta) sin(r).
    """
    n = grid.spec.n
    l = l_field(grid)
    return l ** (1.0 - pq.p) * (l * l + l_gradient_norm_sq(grid)) ** (0.5 * (pq.q - n - 1))


def homotopy_density(t: float, prob: ProblemSpec) -> np.ndarray:
    """f_t = (1 - t) f0 + t f."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    f0 = start_density(prob.grid, prob.pq)
    return (1.0 - t) * f0 + t * prob.f


def _b_eig_range(v: np.ndarray, grid: PolarGrid):
    lo, hi = log_gauss_map_matrix(v, grid).eig_bounds()
    return float(lo.min()), float(hi.max())


def effective_tolerance(cfg: SolverConfig, grid: PolarGrid, v: np.ndarray) -> float:
    """Requested tolerance, floored by the residual's float-evaluation noise.

    Hessian stencils amplify rounding of v by up to grid.stencil_amplification
    (1/sin(r)^2 near the pole), so on fine grids the residual cannot be
    evaluated more accurately than eps * amplification * |v|; asking Newton to
    go below that only stalls the line search.
    """
    floor = 0.25 * np.finfo(float).eps * grid.stencil_amplification \
        * (1.0 + float(np.max(np.abs(v))))
    return max(cfg.tol, floor)


def newton_solve(v0: np.ndarray, prob: ProblemSpec, cfg: SolverConfig) -> tuple[np.ndarray, NewtonStage]:
    """Damped Newton on the log-variable residual with a convexity safeguard.

    Every accepted iterate keeps B positive definite with min eigenvalue at
    least convexity_floor_rel times the max eigenvalue; candidates violating
    the floor or failing strict max-norm decrease are rejected by the
    backtracking line search (the +inf sentinel makes indefinite candidates
    compare as worst).
    """
    grid = prob.grid
    v = np.asarray(v0, dtype=float).copy()
    if not np.all(np.isfinite(v)):
        raise ValueError("initial guess must be finite")
    eig_lo, eig_hi = _b_eig_range(v, grid)
    if eig_lo <= 0.0:
        raise NonConvexError(
            f"initial guess violates convexity (min eigenvalue of B = {eig_lo:.3e})",
            margin=eig_lo,
        )

    stage = NewtonStage(t=float("nan"))
    tol = effective_tolerance(cfg, grid, v)
    t0 = time.perf_counter()
    R = residual(v, prob)
    rnorm = R.max_norm()
    stage.residuals.append(rnorm)
    stage.margins.append(eig_lo)

    for _ in range(cfg.max_iter):
        if rnorm <= tol:
            stage.converged = True
            stage.seconds = time.perf_counter() - t0
            return v, stage
        J = jacobian(v, prob)
        try:
            lu = spla.splu(J.tocsc(), permc_spec="COLAMD")
        except RuntimeError as exc:  # SuperLU signals exact singularity this way
            stage.seconds = time.perf_counter() - t0
            raise SingularSystemError(str(exc), best_v=v, report=stage) from exc
        delta = lu.solve(-R.full.ravel()).reshape(grid.shape)
        if not np.all(np.isfinite(delta)):
            stage.seconds = time.perf_counter() - t0
            raise SingularSystemError("linear solve produced non-finite step", best_v=v, report=stage)

        alpha = 1.0
        while True:
            v_new = v + alpha * delta
            R_new = residual(v_new, prob)
            rnorm_new = R_new.max_norm()
            if rnorm_new < rnorm:
                lo, hi = _b_eig_range(v_new, grid)
                if lo >= cfg.convexity_floor_rel * hi:
                    break
            alpha *= cfg.backtrack_factor
            if alpha < cfg.min_step:
                stage.seconds = time.perf_counter() - t0
                raise LineSearchStallError(
                    f"line search stalled at step {alpha:.3e} (residual {rnorm:.3e})",
                    best_v=v,
                    report=stage,
                )
        v, R, rnorm = v_new, R_new, rnorm_new
        stage.iterations += 1
        stage.residuals.append(rnorm)
        stage.margins.append(lo)
        stage.step_lengths.append(alpha)

    stage.seconds = time.perf_counter() - t0
    if rnorm <= tol:
        stage.converged = True
        return v, stage
    raise MaxIterationsError(
        f"no convergence in {cfg.max_iter} iterations (residual {rnorm:.3e})",
        best_v=v,
        report=stage,
    )


def continuation_solve(
    prob: ProblemSpec,
    cfg: SolverConfig | None = None,
    sched: HomotopySchedule | None = None,
) -> tuple[SupportField, SolveReport]:
    """March the homotopy from h = l at t = 0 to the target density at t = 1.

    Before every stage the residual against the t = 1 density is probed; if it
    is already within tolerance the march jumps to the end (a constant
    homotopy therefore costs a single Newton stage).  Stage failures halve the
    t-step down to the schedule minimum, two consecutive easy stages double it.
    """
    cfg = cfg or SolverConfig()
    sched = sched or HomotopySchedule()
    grid = prob.grid

    report = SolveReport()
    t_start = time.perf_counter()
    v = np.log(l_field(grid))
    report.start_residual = residual(v, replace(prob, f=homotopy_density(0.0, prob))).max_norm()
    tol = effective_tolerance(cfg, grid, v)

    def target_residual(v_cur):
        return residual(v_cur, prob).max_norm()

    t = 0.0
    if sched.adaptive:
        dt = sched.initial_step
        easy_streak = 0
        while t < 1.0:
            if target_residual(v) <= tol:
                t = 1.0
                break
            t_try = min(1.0, t + dt)
            stage_prob = replace(prob, f=homotopy_density(t_try, prob))
            try:
                v_new, stage = newton_solve(v, stage_prob, cfg)
            except SolverError:
                dt *= 0.5
                if dt < sched.min_step:
                    report.total_seconds = time.perf_counter() - t_start
                    report.final_residual = target_residual(v)
                    raise ContinuationStallError(
                        f"homotopy step underflow at t = {t:.6f}",
                        t=t,
                        best_v=v,
                        report=report,
                    ) from None
                continue
            stage.t = t_try
            report.stages.append(stage)
            v = v_new
            t = t_try
            easy = stage.iterations <= 4 and all(a == 1.0 for a in stage.step_lengths)
            easy_streak = easy_streak + 1 if easy else 0
            if easy_streak >= 2:
                dt = min(2.0 * dt, sched.max_step)
                easy_streak = 0
    else:
        for t_try in sched.t_values[1:]:
            stage_prob = replace(prob, f=homotopy_density(t_try, prob))
            try:
                v_new, stage = newton_solve(v, stage_prob, cfg)
            except SolverError as exc:
                report.total_seconds = time.perf_counter() - t_start
                report.final_residual = target_residual(v)
                raise ContinuationStallError(
                    f"fixed schedule failed at t = {t_try:.6f}: {exc}",
                    t=t,
                    best_v=v,
                    report=report,
                ) from exc
            stage.t = t_try
            report.stages.append(stage)
            v = v_new
            t = t_try

    report.final_residual = target_residual(v)
    report.total_seconds = time.perf_counter() - t_start
    return SupportField(h=np.exp(v), grid=grid), report


@dataclass
class UniquenessReport:
    """Pairwise distances between solutions reached from different starts."""

    solutions: list
    distances: np.ndarray  # (k, k) max-norm distances between the h fields

    @property
    def max_distance(self) -> float:
        return float(self.distances.max()) if self.distances.size else 0.0


def uniqueness_probe(
    prob: ProblemSpec,
    cfg: SolverConfig | None = None,
    sched: HomotopySchedule | None = None,
    starts: list | None = None,
) -> UniquenessReport:
    """Solve at t = 1 directly from each start (no continuation) and compare.

    A well-posed instance has a unique solution, so all converged limits
    should agree to roughly 10x the Newton tolerance.  ``sched`` is accepted
    for signature symmetry with continuation_solve but is not consulted.
    """
    cfg = cfg or SolverConfig()
    if not starts:
        raise ValueError("need at least one start")
    sols = []
    for v0 in starts:
        v, _ = newton_solve(np.asarray(v0, dtype=float), prob, cfg)
        sols.append(np.exp(v))
    k = len(sols)
    dist = np.zeros((k, k))
    for i in range(k):
        for j in range(i + 1, k):
            d = float(np.max(np.abs(sols[i] - sols[j])))
            dist[i, j] = dist[j, i] = d
    return UniquenessReport(solutions=sols, distances=dist)
