"""Backends that solve M z = r_c to a controlled accuracy.

* ``exact``: dense LU, the oracle.
* ``iterative``: MINRES on the normalized Hermitian dilation, stopped on
  the dilated residual.
* ``noisy``: classical stand-in for a quantum linear-system solve followed
  by tomography. The exact solution direction is rotated by a seeded random
  angle so the normalized-direction error is eps_qlsa + eps_qta, then
  rescaled by the exact norm.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np
import scipy.optimize as so

from .errors import MaxInnerIters, SingularM, ZeroResidual
from .krylov import minres
from .oss import OssSystem, hermitian_dilation, split_z

BACKENDS = ("exact", "iterative", "noisy")
TOL_FLOOR = 1e-14
# Residual ceiling used by the noisy backend, as a fraction of delta * ||r_c||.
NOISE_RESIDUAL_MARGIN = 0.99


@dataclasses.dataclass(frozen=True, eq=False)
class SolveOutcome:
    """Result of one inexact solve.

    Attributes:
      lam, dy: The two blocks of z.
      residual_norm: ||M z - r_c||_2.
      dilated_residual: Residual norm of the normalized Hermitian system.
      inner_iterations: Krylov steps (0 for direct backends).
      backend_tag: Name of the backend.
      eps_qlsa, eps_qta: Normalized-direction errors injected by the noisy
        backend; zero elsewhere.
    """

    lam: np.ndarray
    dy: np.ndarray
    residual_norm: float
    dilated_residual: float
    inner_iterations: int
    backend_tag: str
    eps_qlsa: float = 0.0
    eps_qta: float = 0.0

    @property
    def z(self) -> np.ndarray:
        return np.concatenate([self.lam, self.dy])


def oss_tolerance(delta: float, oss: OssSystem) -> float:
    """Dilated-residual tolerance delta ||r_c|| / (sqrt 2 ||M||_F).

    Meeting it guarantees ||M z - r_c|| <= delta ||r_c||.
    """
    rc_norm = float(np.linalg.norm(oss.r_c))
    if rc_norm == 0.0:
        raise ZeroResidual("r_c is exactly zero")
    return delta * rc_norm / (math.sqrt(2.0) * oss.frob_M)


def _outcome(oss: OssSystem, z: np.ndarray, tag: str, iters: int = 0, top=None, **extra) -> SolveOutcome:
    res = oss.M @ z - oss.r_c
    res_norm = float(np.linalg.norm(res))
    scale = 1.0 / (math.sqrt(2.0) * oss.frob_M)
    dilated = scale * res_norm
    if top is not None:
        dilated = scale * math.hypot(res_norm, float(np.linalg.norm(oss.M.T @ top)))
    lam, dy = split_z(z, oss.n_dy)
    return SolveOutcome(
        lam=lam,
        dy=dy,
        residual_norm=res_norm,
        dilated_residual=dilated,
        inner_iterations=iters,
        backend_tag=tag,
        **extra,
    )


def _exact_z(oss: OssSystem) -> np.ndarray:
    try:
        z = np.linalg.solve(oss.M, oss.r_c)
    except np.linalg.LinAlgError as exc:
        raise SingularM(str(exc)) from exc
    if not np.all(np.isfinite(z)):
        raise SingularM("dense solve produced non-finite values")
    return z


def solve_exact(oss: OssSystem) -> SolveOutcome:
    return _outcome(oss, _exact_z(oss), "exact")


def solve_iterative(
    oss: OssSystem, tol: float, max_iter: int | None = None, z0: np.ndarray | None = None
) -> SolveOutcome:
    """MINRES on the dilation until its true residual is at most `tol`.

    The tolerance is floored at TOL_FLOOR * ||rhs||. Meeting it implies
    ||M z - r_c|| <= sqrt(2) ||M||_F * tol. `z0` warm-starts the z block.

    Raises:
      MaxInnerIters: if the budget (default 10 n) runs out.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    system = hermitian_dilation(oss)
    n = oss.M.shape[0]
    budget = 10 * n if max_iter is None else max_iter
    rhs_norm = float(np.linalg.norm(system.rhs))
    target = max(tol, TOL_FLOOR * rhs_norm)
    v0 = None if z0 is None else np.concatenate([np.zeros(n), z0])
    v, iters, res = minres(system.matvec, system.rhs, target, budget, x0=v0)
    if res > target:
        raise MaxInnerIters(
            f"MINRES stopped at dilated residual {res:.3e} > {target:.3e} after {iters} iterations"
        )
    return _outcome(oss, v[n:], "iterative", iters, top=v[:n])


def solve_noisy(oss: OssSystem, delta: float, seed) -> SolveOutcome:
    """Exact direction rotated by a seeded error of size delta/2, norm restored.

    eps_qlsa = eps_qta = delta/4. If that rotation would push ||M z - r_c||
    above delta ||r_c|| (possible when M is ill conditioned), the angle is
    reduced until the residual sits at NOISE_RESIDUAL_MARGIN * delta ||r_c||
    and the reduced errors are reported.
    """
    if not (0 < delta < 1):
        raise ValueError("delta must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    z = _exact_z(oss)
    z_norm = float(np.linalg.norm(z))
    if z_norm == 0.0 or z.size < 2:
        return _outcome(oss, z, "noisy")
    u = z / z_norm
    g = rng.standard_normal(z.size)
    p = g - (g @ u) * u
    p /= np.linalg.norm(p)
    Mu = oss.M @ u
    Mp = oss.M @ p

    def perturbed(err):
        phi = 2.0 * math.asin(min(err, 2.0) / 2.0)
        return z_norm * (math.cos(phi) * u + math.sin(phi) * p)

    def excess(err):
        phi = 2.0 * math.asin(min(err, 2.0) / 2.0)
        r = z_norm * (math.cos(phi) * Mu + math.sin(phi) * Mp) - oss.r_c
        return float(np.linalg.norm(r)) - ceiling

    ceiling = NOISE_RESIDUAL_MARGIN * delta * float(np.linalg.norm(oss.r_c))
    err = delta / 2.0
    if excess(err) > 0:
        err = so.brentq(excess, 0.0, err, xtol=1e-15 * err)
    return _outcome(oss, perturbed(err), "noisy", eps_qlsa=err / 2.0, eps_qta=err / 2.0)


def solve(
    oss: OssSystem, backend: str, delta: float, *, seed=None, tol: float | None = None, z0=None
) -> SolveOutcome:
    """Dispatch on the backend name with the tolerance derived from delta."""
    if backend == "exact":
        return solve_exact(oss)
    if backend == "iterative":
        return solve_iterative(oss, tol if tol is not None else oss_tolerance(delta, oss), z0=z0)
    if backend == "noisy":
        return solve_noisy(oss, delta, seed)
    raise ValueError(f"unknown backend {backend!r}; choose from {BACKENDS}")
