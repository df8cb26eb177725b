"""Implicit null-space basis V of A, so that dx = V @ lam keeps A dx = 0.

With the columns of A reordered as [A_B, A_N],

    V = [A_B^{-1} A_N; -I]

and in identity mode A_B = I so V = [A_N; -I]. V is never formed except
through `NullBasis.dense`, which is reserved for desk-scale diagnostics.
"""

from __future__ import annotations

import dataclasses
import functools
from typing import Literal

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from .errors import DimensionMismatch, RankDeficient
from .problem import LcqoProblem

IDENTITY = "identity_detected"
GENERAL = "general_basis"


@dataclasses.dataclass(frozen=True, eq=False)
class NullBasis:
    """Null-space basis of an m x n constraint matrix.

    Attributes:
      perm: Column order with the m basis columns first.
      A_N: Non-basis columns of A under `perm`, shape (m, n - m).
      mode: IDENTITY or GENERAL.
      lu: LU factors of A_B (GENERAL mode only).
    """

    perm: np.ndarray
    A_N: np.ndarray
    mode: str
    lu: tuple | None = None

    @property
    def m(self) -> int:
        return self.A_N.shape[0]

    @property
    def n(self) -> int:
        return self.perm.size

    @property
    def dim(self) -> int:
        return self.n - self.m

    def _basis_solve(self, rhs, trans=0):
        if self.mode == IDENTITY:
            return rhs
        return la.lu_solve(self.lu, rhs, trans=trans)

    def forward(self, lam: np.ndarray) -> np.ndarray:
        lam = np.asarray(lam, dtype=float)
        if lam.shape[0] != self.dim:
            raise DimensionMismatch(f"lambda has length {lam.shape[0]}, expected {self.dim}")
        out = np.empty((self.n,) + lam.shape[1:])
        out[self.perm[: self.m]] = self._basis_solve(self.A_N @ lam)
        out[self.perm[self.m :]] = -lam
        return out

    def adjoint(self, w: np.ndarray) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        if w.shape[0] != self.n:
            raise DimensionMismatch(f"w has length {w.shape[0]}, expected {self.n}")
        top = self._basis_solve(w[self.perm[: self.m]], trans=1)
        return self.A_N.T @ top - w[self.perm[self.m :]]

    @functools.cached_property
    def _dense(self) -> np.ndarray:
        V = self.forward(np.eye(self.dim))
        V.flags.writeable = False
        return V

    def dense(self) -> np.ndarray:
        """V (n x (n - m)) in the original column order, computed once."""
        return self._dense


def apply_null_basis(basis: NullBasis, mode: Literal["forward", "adjoint"], operand) -> np.ndarray:
    if mode == "forward":
        return basis.forward(operand)
    if mode == "adjoint":
        return basis.adjoint(operand)
    raise ValueError(f"unknown mode {mode!r}")


def find_identity_columns(A: sp.csr_matrix) -> list[int] | None:
    """Smallest column index equal to e_i for each row i, or None if some row has none."""
    A = sp.csc_matrix(A)
    m, n = A.shape
    chosen = [None] * m
    nnz = np.diff(A.indptr)
    for j in np.flatnonzero(nnz == 1):
        k = A.indptr[j]
        i = A.indices[k]
        if A.data[k] == 1.0 and chosen[i] is None:
            chosen[i] = int(j)
    if any(j is None for j in chosen):
        return None
    return chosen


def build_null_basis(problem: LcqoProblem) -> NullBasis:
    """Detect an identity block in A, or fall back to a pivoted-QR basis.

    Raises:
      RankDeficient: if no m linearly independent columns exist.
    """
    A = problem.A
    m, n = A.shape
    cols = find_identity_columns(A)
    if cols is not None:
        rest = np.setdiff1d(np.arange(n), cols)
        perm = np.concatenate([np.asarray(cols, dtype=int), rest])
        A_N = A[:, rest].toarray()
        return NullBasis(perm=perm, A_N=A_N, mode=IDENTITY)

    dense = A.toarray()
    _, R, piv = la.qr(dense, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    tol = max(m, n) * np.finfo(float).eps * (diag[0] if diag.size else 0.0)
    if diag.size < m or diag[m - 1] <= tol:
        raise RankDeficient(f"A does not have full row rank {m}")
    basis_cols = np.sort(piv[:m])
    rest = np.setdiff1d(np.arange(n), basis_cols)
    lu = la.lu_factor(dense[:, basis_cols])
    return NullBasis(
        perm=np.concatenate([basis_cols, rest]),
        A_N=dense[:, rest],
        mode=GENERAL,
        lu=lu,
    )
