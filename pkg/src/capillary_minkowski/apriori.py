"""Closed-form a priori bounds for solutions and their verification on
computed fields.

The sup/inf bounds on h follow from evaluating the equation at extrema of the
rescaled support u = h/l; the gradient bound is pure convexity.  Both come as
explicit expressions in theta, (p, q), n and the range of f, so a computed
solution can be checked against them directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .capillary_body import (
    SupportField,
    boundary_identity_check,
    capillary_support,
    measure_density,
)
from .cap_chart import grad, l_field
from .errors import InvalidExponentsError
from .ma_system import ProblemSpec


@dataclass(frozen=True)
class BoundSet:
    """Root-resolved sup/inf bounds on h plus the convexity gradient factor."""

    h_lower: float
    h_upper: float
    grad_bound_factor: float  # (1 + cot^2 theta)^(1/2) = 1/sin(theta)
    case: str  # "q <= n+1" or "q > n+1"

    def __post_init__(self):
        if not 0.0 < self.h_lower <= self.h_upper:
            raise ValueError(f"invalid bound ordering: [{self.h_lower}, {self.h_upper}]")


def c0_bounds(prob: ProblemSpec) -> BoundSet:
    """Sup/inf bounds on h from the equation, resolved to h by a (p-q)-th root.

    Two closed forms apply depending on the sign of n+1-q; both carry the
    range of f through min(1/f) and max(1/f).  The grid min/max of f stand in
    for the continuous extrema.
    """
    spec = prob.cap
    p, q, n = prob.pq.p, prob.pq.q, spec.n
    if not p > q:
        raise InvalidExponentsError(f"bounds require p > q, got p={p}, q={q}")
    f_min = float(prob.f.min())
    f_max = float(prob.f.max())
    one_minus_cos = 1.0 - spec.cos_theta
    sin_t = spec.sin_theta

    if n + 1 - q >= 0:
        case = "q <= n+1"
        lower_pq = 2.0 ** (-0.5 * (n + 1 - q)) * one_minus_cos ** (p - q) \
            / sin_t ** (2 * (p - 1)) / f_max
        upper_pq = sin_t ** (2 * (p - q)) / one_minus_cos ** (n + p - q) / f_min
    else:
        case = "q > n+1"
        lower_pq = one_minus_cos ** (p - q) / sin_t ** (2 * (n + p - q)) / f_max
        upper_pq = 2.0 ** (-0.5 * (n + 1 - q)) * sin_t ** (2 * (p - q)) \
            / one_minus_cos ** (p - 1) / f_min

    root = 1.0 / (p - q)
    return BoundSet(
        h_lower=lower_pq**root,
        h_upper=upper_pq**root,
        grad_bound_factor=1.0 / sin_t,
        case=case,
    )


def gradient_bound(sf: SupportField) -> tuple[float, float]:
    """(computed, bound): max frame |grad h| against (1/sin theta) * max h."""
    computed = float(grad(sf.h, sf.grid).norm().max())
    bound = float(sf.h.max()) / sf.spec.sin_theta
    return computed, bound


@dataclass
class CheckResult:
    name: str
    value: float
    bound: float | None
    passed: bool
    slack: float | None

    def to_json_dict(self) -> dict:
        return {
            "name": self.name,
            "value": self.value,
            "bound": self.bound,
            "passed": self.passed,
            "slack": self.slack,
        }


@dataclass
class VerificationReport:
    """Itemized bound/identity checks for one computed solution."""

    checks: list = field(default_factory=list)
    rel_tol: float = float("nan")

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_json_dict(self) -> dict:
        return {
            "rel_tol": self.rel_tol,
            "all_passed": self.all_passed,
            "checks": [c.to_json_dict() for c in self.checks],
        }

    def format_table(self) -> str:
        w = max((len(c.name) for c in self.checks), default=4)
        lines = [f"{'check':<{w}}  {'value':>13}  {'bound':>13}  {'slack':>10}  status"]
        for c in self.checks:
            bound = f"{c.bound:13.6e}" if c.bound is not None else " " * 13
            slack = f"{c.slack:10.3e}" if c.slack is not None else " " * 10
            status = "pass" if c.passed else "FAIL"
            lines.append(f"{c.name:<{w}}  {c.value:13.6e}  {bound}  {slack}  {status}")
        lines.append(f"overall: {'pass' if self.all_passed else 'FAIL'}")
        return "\n".join(lines)


def verify(sf: SupportField, prob: ProblemSpec, newton_tol: float = 1e-9) -> VerificationReport:
    """Run every closed-form check on a computed solution.

    The bounds hold exactly for continuous solutions; a discrete solution gets
    a relative slack of 1e-6 + 10 * spacing^2 on the bound checks, and the
    identity/consistency checks use the 10 * spacing^2 threshold directly
    (both tied to the second-order discretization).  The max of |grad log h|
    is reported without a bound: its theoretical constant is non-constructive.
    """
    grid = sf.grid
    d2 = grid.max_spacing**2
    rel_tol = 1e-6 + 10.0 * d2
    report = VerificationReport(rel_tol=rel_tol)

    bounds = c0_bounds(prob)
    h_min, h_max = float(sf.h.min()), float(sf.h.max())
    report.checks.append(CheckResult(
        "c0_lower", h_min, bounds.h_lower,
        h_min >= bounds.h_lower * (1.0 - rel_tol),
        h_min - bounds.h_lower,
    ))
    report.checks.append(CheckResult(
        "c0_upper", h_max, bounds.h_upper,
        h_max <= bounds.h_upper * (1.0 + rel_tol),
        bounds.h_upper - h_max,
    ))

    g_computed, g_bound = gradient_bound(sf)
    report.checks.append(CheckResult(
        "gradient", g_computed, g_bound,
        g_computed <= g_bound * (1.0 + rel_tol),
        g_bound - g_computed,
    ))

    ident = boundary_identity_check(sf)
    id_tol_h = 10.0 * d2 * h_max
    u_max = float(np.abs(capillary_support(sf)).max())
    id_tol_u = 10.0 * d2 * u_max
    report.checks.append(CheckResult(
        "boundary_h_mixed", ident.h_mixed_max, id_tol_h,
        ident.h_mixed_max <= id_tol_h, id_tol_h - ident.h_mixed_max,
    ))
    report.checks.append(CheckResult(
        "boundary_u_identity", ident.u_identity_max, id_tol_u,
        ident.u_identity_max <= id_tol_u, id_tol_u - ident.u_identity_max,
    ))

    robin_v = float(np.max(np.abs(
        grid.apply(grid.ops.Dr, np.log(sf.h))[grid.boundary_ring] - grid.spec.cot_theta
    )))
    robin_tol = max(10.0 * newton_tol, 1e-12)
    report.checks.append(CheckResult(
        "robin", robin_v, robin_tol, robin_v <= robin_tol, robin_tol - robin_v,
    ))

    density = measure_density(sf, prob.pq)
    rel_err = float(np.max(np.abs(density / (l_field(grid) * prob.f) - 1.0)))
    meas_tol = 10.0 * d2
    report.checks.append(CheckResult(
        "measure_consistency", rel_err, meas_tol, rel_err <= meas_tol, meas_tol - rel_err,
    ))

    log_grad_max = float(grad(np.log(sf.h), grid).norm().max())
    report.checks.append(CheckResult("log_gradient_max", log_grad_max, None, True, None))
    return report
