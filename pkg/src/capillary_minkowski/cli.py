"""Command-line front end: solve instances, verify solutions, run convergence
and oracle studies.

Configs are JSON documents; angles carry an explicit unit key ("deg" or
"rad").  Density specs are limited to three closed families (constant, radial
polynomial in cos r, harmonic perturbation) plus the homotopy-start keyword,
so positivity can always be checked on the grid at load time.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass

import numpy as np

from .apriori import verify
from .axisym import oracle_compare
from .cap_chart import CapSpec, PolarGrid, l_field
from .capillary_body import ExponentPair, SupportField, embed, export_obj
from .continuation import (
    HomotopySchedule,
    SolverConfig,
    continuation_solve,
    start_density,
)
from .errors import CapillaryError, ContinuationStallError, SolverError
from .ma_system import ProblemSpec, residual

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_BAD_INPUT = 2
EXIT_STALL = 3


class ConfigError(ValueError):
    """Malformed or invalid run configuration."""


@dataclass
class RunConfig:
    """Validated run parameters plus the raw document for provenance."""

    spec: CapSpec
    pq: ExponentPair
    Nr: int
    Nphi: int
    f_spec: dict
    solver: SolverConfig
    schedule: HomotopySchedule
    raw: dict


def _angle_from(doc: dict) -> float:
    theta = doc.get("theta")
    if theta is None:
        raise ConfigError("missing 'theta'")
    unit = doc.get("theta_unit", "rad")
    if unit == "deg":
        return math.radians(float(theta))
    if unit == "rad":
        return float(theta)
    raise ConfigError(f"theta_unit must be 'deg' or 'rad', got {unit!r}")


def density_from_spec(f_spec: dict, grid: PolarGrid, pq: ExponentPair) -> np.ndarray:
    """Evaluate a density family on the grid; reject non-positive results."""
    kind = f_spec.get("type")
    r = grid.r[:, None]
    phi = grid.phi[None, :]
    if kind == "constant":
        f = np.full(grid.shape, float(f_spec["value"]))
    elif kind == "radial":
        coeffs = [float(c) for c in f_spec["coeffs"]]
        poly = sum(c * np.cos(r) ** k for k, c in enumerate(coeffs))
        f = np.broadcast_to(poly, grid.shape).copy()
        if f_spec.get("times_start_density", False):
            f = f * start_density(grid, pq)
    elif kind == "harmonic":
        base = float(f_spec["base"])
        amp = float(f_spec["amplitude"])
        m = int(f_spec["m"])
        k = int(f_spec.get("radial_mode", 0))
        if m < 0 or k < 0:
            raise ConfigError("harmonic modes must be non-negative")
        shape_fn = (np.sin(r) / grid.spec.sin_theta) ** m * np.cos(m * phi) * np.cos(r) ** k
        f = base * (1.0 + amp * shape_fn)
        f = np.broadcast_to(f, grid.shape).copy()
    elif kind == "homotopy-start":
        scale = float(f_spec.get("scale", 1.0))
        if scale <= 0.0:
            raise ConfigError("homotopy-start scale must be positive")
        f = scale ** (pq.q - pq.p) * start_density(grid, pq)
    else:
        raise ConfigError(f"unknown f-spec type {kind!r}")
    if not np.all(f > 0.0):
        raise ConfigError("f-spec evaluates non-positive somewhere on the grid")
    return f


def load_config(path: str) -> RunConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(doc)


def parse_config(doc: dict) -> RunConfig:
    theta = _angle_from(doc)
    n = int(doc.get("n", 2))
    try:
        spec = CapSpec(theta=theta, n=n)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    p, q = doc.get("p"), doc.get("q")
    if p is None or q is None:
        raise ConfigError("missing exponents 'p'/'q'")
    if not float(p) > float(q):
        raise ConfigError(f"exponents must satisfy p > q, got p={p}, q={q}")
    pq = ExponentPair(p=float(p), q=float(q))
    gdoc = doc.get("grid", {})
    Nr = int(gdoc.get("Nr", 64))
    Nphi = int(gdoc.get("Nphi", Nr))
    f_spec = doc.get("f")
    if not isinstance(f_spec, dict):
        raise ConfigError("missing or malformed 'f' spec")
    try:
        solver = SolverConfig(**doc.get("solver", {}))
        schedule = HomotopySchedule(**doc.get("schedule", {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad solver/schedule options: {exc}") from exc
    return RunConfig(spec=spec, pq=pq, Nr=Nr, Nphi=Nphi, f_spec=f_spec,
                     solver=solver, schedule=schedule, raw=doc)


def build_problem(config: RunConfig) -> ProblemSpec:
    grid = PolarGrid(config.spec, config.Nr, config.Nphi)
    f = density_from_spec(config.f_spec, grid, config.pq)
    return ProblemSpec(grid=grid, pq=config.pq, f=f)


def solution_document(config: RunConfig, sf: SupportField, final_residual: float) -> dict:
    return {
        "format": "capmink-solution-v1",
        "config": config.raw,
        "grid": {"Nr": config.Nr, "Nphi": config.Nphi,
                 "theta": config.spec.theta, "n": config.spec.n},
        "h": sf.h.tolist(),
        "final_residual": final_residual,
    }


def load_solution(path: str):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read solution {path}: {exc}") from exc
    if doc.get("format") != "capmink-solution-v1":
        raise ConfigError("not a solution file (missing format marker)")
    try:
        config = parse_config(doc["config"])
        prob = build_problem(config)
        h = np.asarray(doc["h"], dtype=float)
        sf = SupportField(h=h, grid=prob.grid)
        stored = float(doc["final_residual"])
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"corrupt solution file: {exc}") from exc
    return config, prob, sf, stored


def _write_json(path: str, doc: dict) -> None:
    with open(path, "w", newline="\n") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def cmd_solve(args) -> int:
    try:
        config = load_config(args.config)
        prob = build_problem(config)
    except (ConfigError, CapillaryError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT

    try:
        sf, report = continuation_solve(prob, config.solver, config.schedule)
    except ContinuationStallError as exc:
        print(f"continuation stalled: {exc} (last t = {exc.t})", file=sys.stderr)
        return EXIT_STALL
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_STALL

    report.bound_verification = verify(sf, prob, newton_tol=config.solver.tol)

    out = config.raw.get("output", {})
    stem = args.config[:-5] if args.config.endswith(".json") else args.config
    sol_path = args.solution or out.get("solution", stem + ".solution.json")
    rep_path = args.report or out.get("report", stem + ".report.json")
    _write_json(sol_path, solution_document(config, sf, report.final_residual))
    _write_json(rep_path, report.to_json_dict())
    if args.mesh:
        export_obj(embed(sf), args.mesh)
    print(f"solved: residual {report.final_residual:.3e} "
          f"in {len(report.stages)} stage(s), wrote {sol_path}")
    if not report.bound_verification.all_passed:
        print(report.bound_verification.format_table())
        print("warning: bound verification failed", file=sys.stderr)
    return EXIT_OK


def cmd_verify(args) -> int:
    try:
        config, prob, sf, stored = load_solution(args.solution)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    recomputed = residual(np.log(sf.h), prob).max_norm()
    report = verify(sf, prob, newton_tol=config.solver.tol)
    print(report.format_table())
    print(f"stored residual {stored:.6e}, recomputed {recomputed:.6e}")
    return EXIT_OK if report.all_passed else EXIT_CHECK_FAILED


def cmd_convergence(args) -> int:
    try:
        config = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    if config.f_spec.get("type") != "homotopy-start":
        print("convergence study needs a manufactured f-spec "
              "(type 'homotopy-start', exact solution scale * l)", file=sys.stderr)
        return EXIT_BAD_INPUT
    scale = float(config.f_spec.get("scale", 1.0))
    try:
        sizes = [int(s) for s in args.grids.split(",") if s]
    except ValueError:
        print(f"bad grid list {args.grids!r}", file=sys.stderr)
        return EXIT_BAD_INPUT

    rows = []
    for N in sizes:
        grid = PolarGrid(config.spec, N, N if config.spec.n == 2 else 1)
        f = density_from_spec(config.f_spec, grid, config.pq)
        prob = ProblemSpec(grid=grid, pq=config.pq, f=f)
        try:
            sf, _ = continuation_solve(prob, config.solver, config.schedule)
        except SolverError as exc:
            print(f"solver failure on {N}: {exc}", file=sys.stderr)
            return EXIT_STALL
        err = float(np.max(np.abs(sf.h - scale * l_field(grid))))
        rows.append((N, grid.max_spacing, err))

    print(f"{'N':>5} {'spacing':>12} {'max error':>13} {'order':>7}")
    for i, (N, sp_, err) in enumerate(rows):
        if i == 0:
            print(f"{N:>5} {sp_:>12.5e} {err:>13.6e} {'':>7}")
        else:
            order = math.log2(rows[i - 1][2] / err) / math.log2(rows[i - 1][1] / sp_)
            print(f"{N:>5} {sp_:>12.5e} {err:>13.6e} {order:>7.3f}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    try:
        config = load_config(args.config)
        prob = build_problem(config)
    except (ConfigError, CapillaryError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    if config.f_spec.get("type") == "harmonic" and int(config.f_spec.get("m", 0)) != 0:
        print("oracle comparison needs a radial f-spec (no angular modes)", file=sys.stderr)
        return EXIT_BAD_INPUT
    try:
        sf, _ = continuation_solve(prob, config.solver, config.schedule)
        rep = oracle_compare(prob, sf)
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_STALL
    except CapillaryError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    threshold = 10.0 * prob.grid.max_spacing**2 * float(np.max(np.abs(sf.h)))
    print(f"1D/2D max discrepancy {rep.max_abs:.6e} (threshold {threshold:.3e}), "
          f"L2 {rep.l2:.6e}, angular variation {rep.angular_variation:.3e}")
    return EXIT_OK if rep.max_abs <= threshold else EXIT_CHECK_FAILED


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="capmink",
        description="solver and verification suite for convex capillary bodies "
                    "with prescribed dual curvature data",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="run the continuation solver on a config")
    p_solve.add_argument("--config", required=True)
    p_solve.add_argument("--mesh", help="optional OBJ output path")
    p_solve.add_argument("--solution", help="override solution output path")
    p_solve.add_argument("--report", help="override report output path")
    p_solve.set_defaults(func=cmd_solve)

    p_verify = sub.add_parser("verify", help="check a stored solution against the bounds")
    p_verify.add_argument("--solution", required=True)
    p_verify.set_defaults(func=cmd_verify)

    p_conv = sub.add_parser("convergence", help="manufactured-solution grid study")
    p_conv.add_argument("--config", required=True)
    p_conv.add_argument("--grids", required=True, help="comma-separated sizes, e.g. 16,32,64")
    p_conv.set_defaults(func=cmd_convergence)

    p_oracle = sub.add_parser("oracle", help="compare the 2D solve against the 1D radial solver")
    p_oracle.add_argument("--config", required=True)
    p_oracle.set_defaults(func=cmd_oracle)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
