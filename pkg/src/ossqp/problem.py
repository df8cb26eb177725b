"""Standard-form LCQO problem data, interior points and central-path metrics.

The problem is

    min  c^T x + 1/2 x^T Q x   s.t.  A x = b,  x >= 0

with dual  A^T y + s - Q x = c,  s >= 0.
"""

from __future__ import annotations

import dataclasses
import functools
import json
import math
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import (
    BadDims,
    DimensionMismatch,
    NonInterior,
    NotPSD,
    ParseError,
    RankDeficient,
)

PSD_RTOL = 1e-10


@dataclasses.dataclass(frozen=True, eq=False)
class LcqoProblem:
    """Problem data with Q held as a full symmetric sparse matrix.

    Attributes:
      A: Constraint matrix (m x n), CSR.
      b: Right-hand side (m,).
      c: Linear cost (n,).
      Q: Symmetric PSD Hessian (n x n), CSR. Files carry only its lower triangle.
      split_columns: Pairs (zero_column, auxiliary_variable) added by
        `validate_and_preprocess`; empty when no rewrite was applied.
    """

    A: sp.csr_matrix
    b: np.ndarray
    c: np.ndarray
    Q: sp.csr_matrix
    split_columns: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        m, n = self.A.shape
        if self.b.shape != (m,):
            raise DimensionMismatch(f"b must have shape ({m},), got {self.b.shape}")
        if self.c.shape != (n,):
            raise DimensionMismatch(f"c must have shape ({n},), got {self.c.shape}")
        if self.Q.shape != (n, n):
            raise DimensionMismatch(f"Q must have shape ({n}, {n}), got {self.Q.shape}")

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @classmethod
    def from_dense(cls, A, b, c, Q=None) -> "LcqoProblem":
        A = np.atleast_2d(np.asarray(A, dtype=float))
        n = A.shape[1]
        Q = np.zeros((n, n)) if Q is None else np.asarray(Q, dtype=float)
        if Q.shape != (n, n):
            raise DimensionMismatch(f"Q must have shape ({n}, {n}), got {Q.shape}")
        # Symmetrize from the lower triangle so storage is exactly symmetric.
        low = np.tril(Q)
        Q = low + np.tril(low, -1).T
        return cls(
            A=sp.csr_matrix(A),
            b=np.asarray(b, dtype=float).reshape(-1),
            c=np.asarray(c, dtype=float).reshape(-1),
            Q=sp.csr_matrix(Q),
        )

    @classmethod
    def from_triplets(cls, m, n, a_entries, b, c, q_entries=()) -> "LcqoProblem":
        """Build a problem from 0-based (i, j, v) triplets.

        `q_entries` lists the lower triangle of Q (i >= j). Duplicate or
        out-of-range triplets raise ValueError.
        """
        A = _triplets_to_csr(a_entries, (m, n), "A")
        L = _triplets_to_csr(q_entries, (n, n), "Q", lower=True)
        Q = (L + sp.tril(L, k=-1).T).tocsr()
        return cls(
            A=A,
            b=np.asarray(b, dtype=float).reshape(-1),
            c=np.asarray(c, dtype=float).reshape(-1),
            Q=Q,
        )

    def to_json_dict(self) -> dict:
        A = self.A.tocoo()
        L = sp.tril(self.Q).tocoo()
        return {
            "m": self.m,
            "n": self.n,
            "A": [[int(i), int(j), float(v)] for i, j, v in _sorted_triplets(A)],
            "b": self.b.tolist(),
            "c": self.c.tolist(),
            "Q": [[int(i), int(j), float(v)] for i, j, v in _sorted_triplets(L)],
        }

    @functools.cached_property
    def _dense_cache(self) -> dict:
        return {}

    def dense_At(self) -> np.ndarray:
        """Read-only dense A^T, built on first use."""
        return self._cached("At", lambda: self.A.T.toarray())

    def dense_Q(self) -> np.ndarray:
        return self._cached("Q", lambda: self.Q.toarray())

    def _cached(self, key, build):
        cache = self._dense_cache
        if key not in cache:
            arr = build()
            arr.flags.writeable = False
            cache[key] = arr
        return cache[key]

    def objective(self, x: np.ndarray) -> float:
        return float(self.c @ x + 0.5 * x @ (self.Q @ x))


@dataclasses.dataclass(frozen=True, eq=False)
class PrimalDualPoint:
    x: np.ndarray
    y: np.ndarray
    s: np.ndarray

    def is_interior(self) -> bool:
        return bool(np.all(self.x > 0) and np.all(self.s > 0))

    def step(self, dx, dy, ds, alpha: float = 1.0) -> "PrimalDualPoint":
        return PrimalDualPoint(self.x + alpha * dx, self.y + alpha * dy, self.s + alpha * ds)

    def to_json_dict(self) -> dict:
        return {"x": self.x.tolist(), "y": self.y.tolist(), "s": self.s.tolist()}

    @classmethod
    def from_json_dict(cls, d: dict) -> "PrimalDualPoint":
        return cls(
            x=np.asarray(d["x"], dtype=float),
            y=np.asarray(d["y"], dtype=float),
            s=np.asarray(d["s"], dtype=float),
        )


@dataclasses.dataclass(frozen=True, eq=False)
class CentralPathMetrics:
    """Central-path quantities of one interior point.

    Attributes:
      mu: Average complementarity x^T s / n.
      gap: Duality gap x^T s.
      neighborhood_distance: ||XSe - mu e||_2.
      omega: Largest entry among x and s.
      E_diag: (XSe - mu e) / (theta mu).
      in_neighborhood: neighborhood_distance <= theta * mu.
    """

    mu: float
    gap: float
    neighborhood_distance: float
    omega: float
    E_diag: np.ndarray
    in_neighborhood: bool


def _sorted_triplets(coo):
    order = np.lexsort((coo.col, coo.row))
    return zip(coo.row[order], coo.col[order], coo.data[order])


def _triplets_to_csr(entries, shape, name, lower=False):
    rows, cols, vals = [], [], []
    seen = set()
    for entry in entries:
        if len(entry) != 3:
            raise ValueError(f"{name}: triplet {entry!r} does not have three fields")
        i, j, v = int(entry[0]), int(entry[1]), float(entry[2])
        if not (0 <= i < shape[0] and 0 <= j < shape[1]):
            raise ValueError(f"{name}: index ({i}, {j}) out of range for shape {shape}")
        if lower and j > i:
            raise ValueError(f"{name}: entry ({i}, {j}) is above the diagonal")
        if (i, j) in seen:
            raise ValueError(f"{name}: duplicate triplet at ({i}, {j})")
        seen.add((i, j))
        rows.append(i)
        cols.append(j)
        vals.append(v)
    return sp.csr_matrix((vals, (rows, cols)), shape=shape, dtype=float)


def _check_psd(Q: sp.csr_matrix) -> None:
    asym = abs(Q - Q.T)
    if asym.nnz and asym.max() > 0:
        raise NotPSD("Q is not exactly symmetric")
    dense = Q.toarray()
    fro = np.linalg.norm(dense)
    if fro == 0.0:
        return
    tol = PSD_RTOL * fro
    try:
        np.linalg.cholesky(dense + tol * np.eye(dense.shape[0]))
    except np.linalg.LinAlgError as exc:
        lam = float(np.linalg.eigvalsh(dense)[0])
        raise NotPSD(f"Q has eigenvalue {lam:.3e} below -{tol:.3e}") from exc


def _check_rank(A: sp.csr_matrix) -> None:
    m = A.shape[0]
    rank = np.linalg.matrix_rank(A.toarray())
    if rank < m:
        raise RankDeficient(f"A has rank {rank} < m = {m}")


def _split_zero_column(problem: LcqoProblem, j: int) -> LcqoProblem:
    # x_j loses its column; a new row x_j - x_new = 0 ties it to an auxiliary variable.
    m, n = problem.m, problem.n
    A = sp.hstack([problem.A, sp.csr_matrix((m, 1))])
    row = sp.csr_matrix(([1.0, -1.0], ([0, 0], [j, n])), shape=(1, n + 1))
    A = sp.vstack([A, row]).tocsr()
    Q = sp.block_diag([problem.Q, sp.csr_matrix((1, 1))]).tocsr()
    return LcqoProblem(
        A=A,
        b=np.append(problem.b, 0.0),
        c=np.append(problem.c, 0.0),
        Q=Q,
        split_columns=problem.split_columns + ((j, n),),
    )


def zero_columns(A: sp.csr_matrix) -> list[int]:
    counts = np.asarray((A != 0).sum(axis=0)).ravel()
    return [int(j) for j in np.flatnonzero(counts == 0)]


def validate_and_preprocess(problem: LcqoProblem, check: bool = True) -> LcqoProblem:
    """Eliminate all-zero columns of A and verify the structural assumptions.

    Each zero column j gets one auxiliary variable and one constraint row
    ``x_j - x_aux = 0``. The pairs (j, aux) are recorded in
    ``split_columns``. Applying the function twice gives the same problem.

    Args:
      problem: Raw problem.
      check: Run the dense rank and PSD checks. Disable for benchmarking.

    Raises:
      DimensionMismatch: if m > n.
      RankDeficient: if A lacks full row rank.
      NotPSD: if Q fails the shifted Cholesky test.
    """
    if problem.m > problem.n:
        raise DimensionMismatch(f"m = {problem.m} exceeds n = {problem.n}")
    out = problem
    for j in zero_columns(problem.A):
        out = _split_zero_column(out, j)
    if check:
        _check_rank(out.A)
        _check_psd(out.Q)
    return out


def residuals(problem: LcqoProblem, point: PrimalDualPoint) -> tuple[np.ndarray, np.ndarray]:
    """Primal residual b - Ax and dual residual c - A^T y - s + Qx."""
    if point.x.shape != (problem.n,) or point.s.shape != (problem.n,) or point.y.shape != (problem.m,):
        raise DimensionMismatch(
            f"point shapes x{point.x.shape} y{point.y.shape} s{point.s.shape} "
            f"do not match m={problem.m}, n={problem.n}"
        )
    r_p = problem.b - problem.A @ point.x
    r_d = problem.c - problem.A.T @ point.y - point.s + problem.Q @ point.x
    return r_p, r_d


def is_feasible(problem: LcqoProblem, point: PrimalDualPoint, rtol: float = 1e-9) -> bool:
    r_p, r_d = residuals(problem, point)
    ok_p = np.max(np.abs(r_p), initial=0.0) <= rtol * (1 + np.max(np.abs(problem.b), initial=0.0))
    ok_d = np.max(np.abs(r_d), initial=0.0) <= rtol * (1 + np.max(np.abs(problem.c), initial=0.0))
    return bool(ok_p and ok_d)


def central_path_metrics(point: PrimalDualPoint, theta: float) -> CentralPathMetrics:
    x, s = point.x, point.s
    if not (np.all(x > 0) and np.all(s > 0)):
        raise NonInterior("x and s must be strictly positive")
    n = x.size
    xs = x * s
    gap = float(xs.sum())
    mu = gap / n
    dev = xs - mu
    dist = float(np.linalg.norm(dev))
    return CentralPathMetrics(
        mu=mu,
        gap=gap,
        neighborhood_distance=dist,
        omega=float(max(x.max(), s.max())),
        E_diag=dev / (theta * mu),
        in_neighborhood=dist <= theta * mu,
    )


def theta_max(problem: LcqoProblem, null_basis) -> float:
    """Largest admissible neighborhood radius min{1/(3 sqrt n), 1/(4||QVV^T||_F + 1)}."""
    n = problem.n
    frob = qvvt_norm(problem, null_basis)
    return min(1.0 / (3.0 * math.sqrt(n)), 1.0 / (4.0 * frob + 1.0))


def qvvt_norm(problem: LcqoProblem, null_basis) -> float:
    if problem.Q.nnz == 0:
        return 0.0
    V = null_basis.dense()
    QV = problem.Q @ V
    return float(np.linalg.norm(QV @ V.T))


def synthesize_instance(
    m: int,
    n: int,
    density: float = 0.3,
    seed: int = 0,
    *,
    q_scale: float = 1.0,
    x0=None,
    s0=None,
) -> tuple[LcqoProblem, PrimalDualPoint]:
    """Random feasible instance with a bundled interior start.

    A = [I, A_N] where A_N has small nonzero integers and no empty row or
    column, Q = G^T G scaled so that ||QVV^T||_F equals `q_scale`, and by
    default x = s = e so the start sits exactly on the central path. b and
    c are then set so that the start is primal and dual feasible.
    """
    if not (1 <= m <= n):
        raise BadDims(f"need 1 <= m <= n, got m={m}, n={n}")
    if not (0 < density <= 1):
        raise BadDims(f"density must lie in (0, 1], got {density}")
    rng = np.random.default_rng(seed)
    k = n - m
    AN = np.zeros((m, k))
    if k:
        mask = rng.random((m, k)) < density
        # One guaranteed nonzero per row and per column.
        mask[np.arange(m), rng.integers(0, k, size=m)] = True
        mask[rng.integers(0, m, size=k), np.arange(k)] = True
        values = rng.integers(1, 4, size=(m, k)) * rng.choice([-1.0, 1.0], size=(m, k))
        AN = np.where(mask, values, 0.0)
    A = np.hstack([np.eye(m), AN])

    # With m == n the null space is trivial and Q cannot be scaled; keep Q = 0.
    if q_scale > 0 and k > 0:
        G = rng.standard_normal((max(1, n // 3), n))
        Q = G.T @ G
        V = np.vstack([AN, -np.eye(k)])
        Q *= q_scale / np.linalg.norm(Q @ V @ V.T)
    else:
        Q = np.zeros((n, n))
    Q = 0.5 * (Q + Q.T)

    x = np.ones(n) if x0 is None else np.asarray(x0, dtype=float)
    s = np.ones(n) if s0 is None else np.asarray(s0, dtype=float)
    y = rng.standard_normal(m)
    b = A @ x
    c = A.T @ y + s - Q @ x
    problem = LcqoProblem(A=sp.csr_matrix(A), b=b, c=c, Q=sp.csr_matrix(Q))
    return problem, PrimalDualPoint(x=x, y=y, s=s)


def load_problem(path) -> tuple[LcqoProblem, PrimalDualPoint | None]:
    """Read the JSON problem format; a bundled "start" object is optional."""
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(str(exc), line=exc.lineno) from exc
    try:
        problem = LcqoProblem.from_triplets(
            int(data["m"]), int(data["n"]), data["A"], data["b"], data["c"], data.get("Q", [])
        )
        start = PrimalDualPoint.from_json_dict(data["start"]) if "start" in data else None
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"invalid problem file {path}: {exc}") from exc
    return problem, start


def dump_problem(path, problem: LcqoProblem, start: PrimalDualPoint | None = None) -> None:
    data = problem.to_json_dict()
    if start is not None:
        data["start"] = start.to_json_dict()
    Path(path).write_text(json.dumps(data))


def lift_start(processed: LcqoProblem, start: PrimalDualPoint) -> PrimalDualPoint:
    """Carry an interior feasible start of the original problem into `processed`.

    For each split pair (j, aux): x_aux = x_j, and the new row's multiplier
    takes half of s_j, which leaves s_j / 2 on both x_j and x_aux.
    """
    if not processed.split_columns:
        return start
    x, y, s = start.x.copy(), start.y.copy(), start.s.copy()
    for j, aux in processed.split_columns:
        if aux != x.size:
            raise DimensionMismatch("start does not match the problem before preprocessing")
        half = 0.5 * s[j]
        x = np.append(x, x[j])
        y = np.append(y, half)
        s[j] = half
        s = np.append(s, half)
    return PrimalDualPoint(x=x, y=y, s=s)


def restrict_point(original: LcqoProblem, point: PrimalDualPoint) -> PrimalDualPoint:
    """Drop auxiliary variables and rows; s is recomputed on the original problem."""
    x = point.x[: original.n]
    y = point.y[: original.m]
    s = original.c - original.A.T @ y + original.Q @ x
    return PrimalDualPoint(x=x, y=y, s=s)
