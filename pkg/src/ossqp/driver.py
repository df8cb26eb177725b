"""Short-step feasible IPM driven by inexact OSS solves.

Every iteration targets sigma * mu with sigma = 1 - beta / sqrt(n), asks the
configured backend for z with ||M z - r_c|| <= delta ||r_c||, and takes the
full Newton step. The step is shortened only when a full step would leave
the positive orthant in floating point.
"""

from __future__ import annotations

import dataclasses
import enum
import json
import logging
import math
import time
from pathlib import Path

import numpy as np

from . import backends
from .errors import (
    CenteringStalled,
    NonInterior,
    NotFeasible,
    NotInNeighborhood,
    ParseError,
    ZeroResidual,
)
from .nullspace import NullBasis, build_null_basis
from .oss import NewtonDirection, assemble_oss, recover_direction
from .problem import (
    CentralPathMetrics,
    LcqoProblem,
    PrimalDualPoint,
    central_path_metrics,
    residuals,
    theta_max,
)

logger = logging.getLogger(__name__)


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    ITER_LIMIT = "IterLimit"
    NUMERICAL_BREAKDOWN = "NumericalBreakdown"


@dataclasses.dataclass(frozen=True)
class SolverConfig:
    """Solver parameters.

    Attributes:
      theta: Neighborhood radius; None means 0.9 * theta_max of the instance.
      beta: Centering decrement; sigma = 1 - beta / sqrt(n).
      delta: Allowed relative residual of each OSS solve.
      eps: Stop once x^T s <= n * eps.
      backend: "exact", "iterative" or "noisy".
      seed: Seed of the noisy backend.
      max_iters: Iteration cap for the main loop and for centering.
      boundary_fraction: Fraction-to-boundary factor for shortened steps.
      trace_kappa: Record cond(M) each iteration (a dense SVD per step).
      iterative_rtol: Dilated-residual tolerance relative to the dilated
        right-hand side, overriding the delta-derived one for the iterative
        backend (machine-level runs use about 1e-10).
      keep_iterates: Keep every iterate in the result, for diagnostics.
    """

    theta: float | None = None
    beta: float = 0.1
    delta: float = 0.3
    eps: float = 1e-6
    backend: str = "exact"
    seed: int = 0
    max_iters: int = 5000
    boundary_fraction: float = 0.995
    trace_kappa: bool = False
    iterative_rtol: float | None = None
    keep_iterates: bool = False

    def __post_init__(self):
        if not 0 < self.beta < 1:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")
        if not 0 < self.delta < 1:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if self.eps <= 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if not 0 < self.boundary_fraction < 1:
            raise ValueError(f"boundary_fraction must lie in (0, 1), got {self.boundary_fraction}")
        if self.backend not in backends.BACKENDS:
            raise ValueError(f"backend must be one of {backends.BACKENDS}, got {self.backend!r}")
        if self.theta is not None and not 0 < self.theta < 1:
            raise ValueError(f"theta must lie in (0, 1), got {self.theta}")
        if self.max_iters < 0:
            raise ValueError("max_iters must be non-negative")

    def sigma(self, n: int) -> float:
        return 1.0 - self.beta / math.sqrt(n)

    def resolve_theta(self, problem: LcqoProblem, basis: NullBasis) -> float:
        cap = theta_max(problem, basis)
        if self.theta is None:
            return 0.9 * cap
        if self.theta >= cap:
            raise ValueError(f"theta = {self.theta} is not below theta_max = {cap:.6g}")
        return self.theta


@dataclasses.dataclass
class IterationTrace:
    """Metrics of iterate k and of the step taken from it."""

    k: int
    mu: float
    gap: float
    omega: float
    frob_M: float
    eps_oss: float
    residual_norm: float
    rc_norm: float
    neighborhood_distance: float
    kappa_M: float | None
    wall_time: float
    alpha: float = 1.0
    inner_iterations: int = 0
    eps_qlsa: float = 0.0
    primal_infeas: float = 0.0
    dual_infeas: float = 0.0

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "IterationTrace":
        names = {f.name for f in dataclasses.fields(cls)}
        kept = {k: v for k, v in d.items() if k in names}
        kept.setdefault("wall_time", 0.0)
        return cls(**kept)


@dataclasses.dataclass
class SolveResult:
    point: PrimalDualPoint
    traces: list[IterationTrace]
    status: Status
    theta: float
    final: CentralPathMetrics
    iterates: list[PrimalDualPoint] = dataclasses.field(default_factory=list)

    @property
    def iterations(self) -> int:
        return len(self.traces)


def safeguard_step(point: PrimalDualPoint, direction: NewtonDirection, boundary_fraction: float) -> float:
    """min(1, boundary_fraction * alpha_max), alpha_max being the step to the orthant boundary."""
    ratios = []
    for v, dv in ((point.x, direction.dx), (point.s, direction.ds)):
        neg = dv < 0
        if np.any(neg):
            ratios.append(np.min(-v[neg] / dv[neg]))
    if not ratios:
        return 1.0
    return float(min(1.0, boundary_fraction * min(ratios)))


def _infeasibility(problem: LcqoProblem, point: PrimalDualPoint) -> tuple[float, float]:
    r_p, r_d = residuals(problem, point)
    scale_p = 1.0 + np.max(np.abs(problem.b), initial=0.0)
    scale_d = 1.0 + np.max(np.abs(problem.c), initial=0.0)
    return (
        float(np.max(np.abs(r_p), initial=0.0) / scale_p),
        float(np.max(np.abs(r_d), initial=0.0) / scale_d),
    )


def _backward_infeasibility(problem: LcqoProblem, point: PrimalDualPoint) -> tuple[float, float]:
    # Residuals relative to the magnitudes that produced them, so a start with
    # huge entries is not rejected for rounding in A x alone.
    r_p, r_d = residuals(problem, point)
    absA, absQ = abs(problem.A), abs(problem.Q)
    scale_p = 1.0 + np.max(np.abs(problem.b), initial=0.0) + np.max(absA @ np.abs(point.x), initial=0.0)
    scale_d = 1.0 + np.max(
        np.abs(problem.c) + absA.T @ np.abs(point.y) + np.abs(point.s) + absQ @ np.abs(point.x), initial=0.0
    )
    return (
        float(np.max(np.abs(r_p), initial=0.0) / scale_p),
        float(np.max(np.abs(r_d), initial=0.0) / scale_d),
    )


def _require_feasible(problem, point, rtol=1e-9):
    if not point.is_interior():
        raise NonInterior("start must satisfy x > 0 and s > 0")
    p, d = _backward_infeasibility(problem, point)
    if p > rtol or d > rtol:
        raise NotFeasible(f"start is infeasible: primal {p:.3e}, dual {d:.3e} (relative)")


def _inner_tol(config: SolverConfig, oss, default):
    if config.iterative_rtol is None:
        return default
    return config.iterative_rtol * float(np.linalg.norm(oss.r_c)) / (math.sqrt(2.0) * oss.frob_M)


def run_ifqipm(
    problem: LcqoProblem,
    start: PrimalDualPoint,
    config: SolverConfig = SolverConfig(),
    basis: NullBasis | None = None,
) -> SolveResult:
    """Run the short-step inexact feasible IPM from an in-neighborhood start.

    Raises:
      NotFeasible: if the start violates Ax = b or the dual equation.
      NotInNeighborhood: if the start is outside N_2(theta).
    """
    basis = build_null_basis(problem) if basis is None else basis
    theta = config.resolve_theta(problem, basis)
    _require_feasible(problem, start)
    n = problem.n
    sigma = config.sigma(n)
    metrics = central_path_metrics(start, theta)
    if not metrics.in_neighborhood:
        raise NotInNeighborhood(
            f"start distance {metrics.neighborhood_distance:.3e} exceeds theta*mu = {theta * metrics.mu:.3e}"
        )
    seeds = np.random.default_rng(config.seed)
    point = start
    traces: list[IterationTrace] = []
    iterates = [start] if config.keep_iterates else []
    status = Status.ITER_LIMIT
    warm = None

    for k in range(config.max_iters + 1):
        metrics = central_path_metrics(point, theta)
        if metrics.gap <= n * config.eps:
            status = Status.OPTIMAL
            break
        if k == config.max_iters:
            break
        t0 = time.perf_counter()
        oss = assemble_oss(problem, basis, point, sigma)
        try:
            eps_oss = backends.oss_tolerance(config.delta, oss)
        except ZeroResidual:
            status = Status.NUMERICAL_BREAKDOWN
            break
        tol = _inner_tol(config, oss, eps_oss)
        outcome = backends.solve(
            oss, config.backend, config.delta, seed=int(seeds.integers(2**63)), tol=tol, z0=warm
        )
        warm = sigma * outcome.z
        direction = recover_direction(problem, basis, outcome.lam, outcome.dy, oss)
        alpha = safeguard_step(point, direction, config.boundary_fraction)
        if alpha < 1.0:
            logger.warning("iteration %d: step shortened to %.3g to stay interior", k, alpha)
        kappa = float(np.linalg.cond(oss.M)) if config.trace_kappa else None
        p_inf, d_inf = _infeasibility(problem, point)
        traces.append(
            IterationTrace(
                k=k,
                mu=metrics.mu,
                gap=metrics.gap,
                omega=metrics.omega,
                frob_M=oss.frob_M,
                eps_oss=eps_oss,
                residual_norm=outcome.residual_norm,
                rc_norm=float(np.linalg.norm(oss.r_c)),
                neighborhood_distance=metrics.neighborhood_distance,
                kappa_M=kappa,
                wall_time=time.perf_counter() - t0,
                alpha=alpha,
                inner_iterations=outcome.inner_iterations,
                eps_qlsa=outcome.eps_qlsa,
                primal_infeas=p_inf,
                dual_infeas=d_inf,
            )
        )
        new = point.step(direction.dx, direction.dy, direction.ds, alpha)
        if not (np.all(np.isfinite(new.x)) and np.all(np.isfinite(new.s)) and new.is_interior()):
            status = Status.NUMERICAL_BREAKDOWN
            break
        point = new
        if config.keep_iterates:
            iterates.append(point)
        dist_ok = central_path_metrics(point, theta).in_neighborhood
        if not dist_ok:
            logger.warning("iteration %d: iterate left N_2(theta)", k + 1)

    return SolveResult(
        point=point,
        traces=traces,
        status=status,
        theta=theta,
        final=central_path_metrics(point, theta),
        iterates=iterates,
    )


def centering_step(
    problem: LcqoProblem,
    point: PrimalDualPoint,
    theta: float,
    config: SolverConfig,
    basis: NullBasis,
    seed=None,
) -> PrimalDualPoint:
    """One damped sigma = 1 step that strictly reduces the neighborhood distance.

    Raises:
      CenteringStalled: if no step length above 1e-10 reduces it.
    """
    dist = central_path_metrics(point, theta).neighborhood_distance
    oss = assemble_oss(problem, basis, point, 1.0)
    tol = _inner_tol(config, oss, None)
    outcome = backends.solve(oss, config.backend, config.delta, seed=seed, tol=tol)
    direction = recover_direction(problem, basis, outcome.lam, outcome.dy, oss)
    alpha = safeguard_step(point, direction, config.boundary_fraction)
    while alpha > 1e-10:
        trial = point.step(direction.dx, direction.dy, direction.ds, alpha)
        if trial.is_interior() and central_path_metrics(trial, theta).neighborhood_distance < dist:
            return trial
        alpha *= 0.5
    raise CenteringStalled("no step length reduces the neighborhood distance")


def center_to_neighborhood(
    problem: LcqoProblem,
    start: PrimalDualPoint,
    config: SolverConfig = SolverConfig(),
    basis: NullBasis | None = None,
) -> PrimalDualPoint:
    """Pure centering steps (sigma = 1) until the point enters N_2(theta).

    Each step is cut back to stay interior and halved until the
    neighborhood distance decreases.

    Raises:
      NotFeasible: if the start is not interior feasible.
      CenteringStalled: if max_iters steps do not suffice.
    """
    basis = build_null_basis(problem) if basis is None else basis
    theta = config.resolve_theta(problem, basis)
    _require_feasible(problem, start)
    point = start
    seeds = np.random.default_rng(config.seed)
    for k in range(config.max_iters + 1):
        if central_path_metrics(point, theta).in_neighborhood:
            return point
        if k == config.max_iters:
            break
        try:
            point = centering_step(problem, point, theta, config, basis, seed=int(seeds.integers(2**63)))
        except CenteringStalled as exc:
            raise CenteringStalled(f"centering iteration {k}: {exc}") from None
    raise CenteringStalled(f"still outside N_2(theta) after {config.max_iters} centering steps")


def write_trace(path, traces: list[IterationTrace], timing: bool = True) -> None:
    """JSON lines, one per iteration. Without `timing` the wall_time field is dropped."""
    with Path(path).open("w") as fh:
        for t in traces:
            d = t.to_dict()
            if not timing:
                del d["wall_time"]
            fh.write(json.dumps(d) + "\n")


def read_trace(path) -> list[IterationTrace]:
    """Inverse of `write_trace`.

    Raises:
      ParseError: on malformed JSON or missing fields, with the line number.
    """
    out = []
    with Path(path).open() as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(IterationTrace.from_dict(json.loads(line)))
            except (json.JSONDecodeError, TypeError, AttributeError) as exc:
                raise ParseError(f"bad trace record: {exc}", lineno) from None
    return out
