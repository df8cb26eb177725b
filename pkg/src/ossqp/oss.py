"""Orthogonal-subspaces Newton system and feasibility-preserving directions.

For an interior point the system is

    M z = r_c,   M = [(S + XQ) V, -X A^T],   z = (lam, dy),
    r_c = sigma mu e - XSe.

Whatever z a solver returns, dx = V lam and ds = Q dx - A^T dy satisfy the
first two Newton equations exactly; the error r = S dx + X ds - r_c shows
up only in the complementarity equation, and r = M z - r_c.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np
import scipy.sparse.linalg as spla

from .errors import DimensionMismatch, NonInterior
from .nullspace import NullBasis
from .problem import LcqoProblem, PrimalDualPoint


@dataclasses.dataclass(frozen=True, eq=False)
class OssSystem:
    """Assembled system for one iterate; x and s are kept for recovery."""

    M: np.ndarray
    r_c: np.ndarray
    frob_M: float
    mu: float
    sigma: float
    x: np.ndarray
    s: np.ndarray
    n_dy: int

    @property
    def n_lambda(self) -> int:
        return self.M.shape[1] - self.n_dy

    def residual(self, z: np.ndarray) -> np.ndarray:
        return self.M @ z - self.r_c


@dataclasses.dataclass(frozen=True, eq=False)
class NormalizedSystem:
    """Symmetric 2n x 2n dilation [[0, M], [M^T, 0]] / (sqrt 2 ||M||_F).

    The right-hand side is (r_c, 0) under the same scaling; the solution is
    (0, z) with M z = r_c. Only the operator form is kept.
    """

    M: np.ndarray
    scale: float
    rhs: np.ndarray

    @property
    def size(self) -> int:
        return self.rhs.size

    def matvec(self, v: np.ndarray) -> np.ndarray:
        n = self.M.shape[0]
        out = np.empty(2 * n)
        np.dot(self.M, v[n:], out=out[:n])
        np.dot(self.M.T, v[:n], out=out[n:])
        out *= self.scale
        return out

    def operator(self) -> spla.LinearOperator:
        k = self.size
        return spla.LinearOperator((k, k), matvec=self.matvec, rmatvec=self.matvec, dtype=float)

    def dense(self) -> np.ndarray:
        n = self.M.shape[0]
        K = np.zeros((2 * n, 2 * n))
        K[:n, n:] = self.M
        K[n:, :n] = self.M.T
        return self.scale * K

    def residual_norm(self, v: np.ndarray) -> float:
        return float(np.linalg.norm(self.matvec(v) - self.rhs))


@dataclasses.dataclass(frozen=True, eq=False)
class NewtonDirection:
    lam: np.ndarray
    dy: np.ndarray
    dx: np.ndarray
    ds: np.ndarray
    r: np.ndarray


def assemble_oss(problem: LcqoProblem, basis: NullBasis, point: PrimalDualPoint, sigma: float) -> OssSystem:
    x, s = point.x, point.s
    if not point.is_interior():
        raise NonInterior("OSS assembly needs x > 0 and s > 0")
    V = basis.dense()
    QV = problem.dense_Q() @ V
    M = np.hstack([s[:, None] * V + x[:, None] * QV, -x[:, None] * problem.dense_At()])
    mu = float(x @ s) / x.size
    r_c = sigma * mu - x * s
    frob = math.sqrt(float(np.einsum("ij,ij->", M, M)))
    return OssSystem(M=M, r_c=r_c, frob_M=frob, mu=mu, sigma=sigma, x=x, s=s, n_dy=problem.m)


def hermitian_dilation(oss: OssSystem) -> NormalizedSystem:
    scale = 1.0 / (math.sqrt(2.0) * oss.frob_M)
    rhs = np.concatenate([scale * oss.r_c, np.zeros(oss.M.shape[1])])
    return NormalizedSystem(M=oss.M, scale=scale, rhs=rhs)


def recover_direction(
    problem: LcqoProblem,
    basis: NullBasis,
    lam: np.ndarray,
    dy: np.ndarray,
    oss: OssSystem,
) -> NewtonDirection:
    """dx = V lam, ds = Q dx - A^T dy and the complementarity error r."""
    lam = np.asarray(lam, dtype=float)
    dy = np.asarray(dy, dtype=float)
    if dy.shape != (problem.m,):
        raise DimensionMismatch(f"dy has shape {dy.shape}, expected ({problem.m},)")
    dx = basis.forward(lam)
    ds = problem.Q @ dx - problem.A.T @ dy
    r = oss.s * dx + oss.x * ds - oss.r_c
    return NewtonDirection(lam=lam, dy=dy, dx=dx, ds=ds, r=r)


def split_z(z: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    k = z.size - m
    return z[:k], z[k:]


def frobenius_trace_terms(problem: LcqoProblem, basis: NullBasis, point: PrimalDualPoint) -> dict:
    """Dense trace expansion of ||M||_F^2 into its four pieces."""
    V = basis.dense()
    X = np.diag(point.x)
    S = np.diag(point.s)
    Q = problem.Q.toarray()
    A = problem.A.toarray()
    VVt = V @ V.T
    return {
        "svvs": float(np.trace(S @ VVt @ S)),
        "xqvvs": float(np.trace(X @ Q @ VVt @ S)),
        "xqvvqx": float(np.trace(X @ Q @ VVt @ Q @ X)),
        "xaax": float(np.trace(X @ A.T @ A @ X)),
    }
