"""Classical evaluation of the quantum cost model.

Nothing here runs a quantum algorithm. Every quantity that the complexity
analysis of the inexact IPM depends on (condition numbers, the spectrum of
the scaling block Psi_1, block-encoding subnormalizations, per-iteration
unit costs) is computed from the classical iterates or their traces.

Polylogarithmic factors hidden in the soft-O notation are never multiplied
into unit counts; they are carried as the `POLYLOG_NOTE` annotation.
"""

from __future__ import annotations

import dataclasses
import json
import math
from typing import Sequence

import numpy as np

from .errors import BoundViolated, EmptyTrace, NonInterior
from .nullspace import NullBasis, build_null_basis
from .oss import OssSystem, assemble_oss
from .problem import LcqoProblem, PrimalDualPoint

POLYLOG_NOTE = "polylog(n, omega_bar, 1/eps) factors omitted"
# Relative slack on the asserted inequalities, for rounding only.
BOUND_RTOL = 1e-9
SQRT2 = math.sqrt(2.0)
# Constant c with iter_cost <= c * theorem1_bound whenever eps <= min mu and
# kappa_M obeys the bound chain: 2 * sqrt(3 * (1 + sqrt 2)).
C_THEORY = 2.0 * math.sqrt(3.0 * (1.0 + SQRT2))


@dataclasses.dataclass(frozen=True)
class PsiSpectrum:
    """Closed-form eigenvalues of Psi_1, one pair per coordinate."""

    q_plus: np.ndarray
    q_minus: np.ndarray
    lower_bound: np.ndarray
    upper_bound: np.ndarray

    @property
    def lower_holds(self) -> bool:
        return bool(np.all(self.q_minus >= self.lower_bound * (1 - BOUND_RTOL)))

    @property
    def upper_holds(self) -> bool:
        return bool(np.all(self.q_plus <= self.upper_bound * (1 + BOUND_RTOL)))

    def eigenvalues(self) -> np.ndarray:
        """All 2n eigenvalues in ascending order."""
        return np.sort(np.concatenate([self.q_minus, self.q_plus]))


def _interior_xs(point: PrimalDualPoint):
    x, s = np.asarray(point.x, float), np.asarray(point.s, float)
    if not (np.all(x > 0) and np.all(s > 0)):
        raise NonInterior("x and s must be strictly positive")
    return x, s


def psi1_matrix(point: PrimalDualPoint, mu: float) -> np.ndarray:
    """Dense Psi_1 = [[S^2, -(XS - mu I)], [-(XS - mu I), X^2]]."""
    x, s = _interior_xs(point)
    off = -np.diag(x * s - mu)
    return np.block([[np.diag(s * s), off], [off, np.diag(x * x)]])


def psi_spectrum(point: PrimalDualPoint, mu: float, theta: float, strict: bool = True) -> PsiSpectrum:
    """Eigenvalue pairs q_{i+-} of Psi_1 from the 2 x 2 block per coordinate.

    theta only fixes the scaling E = (XS - mu I) / (theta mu); the
    off-diagonal block mu theta E does not depend on it.

    Raises:
      NonInterior: if x or s has a non-positive entry.
      BoundViolated: with `strict`, if q_- < mu^2 / (3 (x^2 + s^2)) or
        q_+ > x^2 + s^2 + sqrt(2) mu somewhere.
    """
    if not theta > 0:
        raise ValueError("theta must be positive")
    x, s = _interior_xs(point)
    x2, s2 = x * x, s * s
    tr = x2 + s2
    d = x * s - mu
    disc = np.sqrt((x2 - s2) ** 2 + 4.0 * d * d)
    q_plus = 0.5 * (tr + disc)
    # det / q_plus avoids cancellation in the smaller root.
    q_minus = (x2 * s2 - d * d) / q_plus
    spec = PsiSpectrum(
        q_plus=q_plus,
        q_minus=q_minus,
        lower_bound=mu * mu / (3.0 * tr),
        upper_bound=tr + SQRT2 * mu,
    )
    if strict and not (spec.lower_holds and spec.upper_holds):
        raise BoundViolated("Psi_1 eigenvalues fall outside the closed-form bounds")
    return spec


def vaq_matrix(problem: LcqoProblem, basis: NullBasis) -> np.ndarray:
    """[[V^T, 0], [0, A]] @ [[I, -Q], [0, I]], an n x 2n matrix of full row rank."""
    V = basis.dense()
    Q = problem.dense_Q()
    A = problem.A.toarray()
    top = np.hstack([V.T, -V.T @ Q])
    bottom = np.hstack([np.zeros_like(A), A])
    return np.vstack([top, bottom])


def _cond(svals: np.ndarray) -> float:
    lo = svals[-1]
    return math.inf if lo == 0 else float(svals[0] / lo)


def kappa_vaq(problem: LcqoProblem, basis: NullBasis) -> float:
    return _cond(np.linalg.svd(vaq_matrix(problem, basis), compute_uv=False))


def sigma_max_q(problem: LcqoProblem) -> float:
    if problem.Q.nnz == 0:
        return 0.0
    return float(np.linalg.eigvalsh(problem.dense_Q())[-1])


def kappa_psi_chain(omega: float, mu: float, sigma_q: float) -> float:
    """3 omega^2 (omega^2 + sqrt 2 mu + 2 mu sigma_max(Q)) / mu^2."""
    return 3.0 * omega**2 * (omega**2 + SQRT2 * mu + 2.0 * mu * sigma_q) / mu**2


def kappa_psi_rigorous(point: PrimalDualPoint, mu: float, sigma_q: float) -> float:
    """Bound chain without replacing max(x^2 + s^2) by omega^2.

    Uses lambda_min(Psi) >= min q_- >= mu^2 / (3 max(x^2 + s^2)) and
    lambda_max(Psi) <= max(x^2 + s^2) + sqrt 2 mu + 2 mu sigma_max(Q).
    """
    x, s = _interior_xs(point)
    t = float(np.max(x * x + s * s))
    return 3.0 * t * (t + SQRT2 * mu + 2.0 * mu * sigma_q) / mu**2


def psi_matrix(problem: LcqoProblem, point: PrimalDualPoint, mu: float) -> np.ndarray:
    """Psi with M^T M = VAQ Psi VAQ^T: Psi_1 plus 2 mu Q in the leading block."""
    P = psi1_matrix(point, mu)
    n = problem.n
    P[:n, :n] += 2.0 * mu * problem.dense_Q()
    return P


def kappa_psi_eig(problem: LcqoProblem, point: PrimalDualPoint, mu: float) -> float:
    w = np.linalg.eigvalsh(psi_matrix(problem, point, mu))
    return math.inf if w[0] <= 0 else float(w[-1] / w[0])


def kappa_bounds(
    problem: LcqoProblem,
    basis: NullBasis,
    point: PrimalDualPoint,
    mu: float,
    *,
    strict: bool = True,
) -> tuple[float, float, float]:
    """(kappa_M, sqrt(kappa_Psi) * kappa_VAQ, kappa_VAQ) from dense SVDs.

    kappa_Psi comes from the bound chain in omega, mu and sigma_max(Q).

    Raises:
      BoundViolated: with `strict`, if kappa_M exceeds the bound.
    """
    x, s = _interior_xs(point)
    oss = assemble_oss(problem, basis, point, 1.0)
    kappa_M = _cond(np.linalg.svd(oss.M, compute_uv=False))
    k_vaq = kappa_vaq(problem, basis)
    omega = float(max(x.max(), s.max()))
    bound = math.sqrt(kappa_psi_chain(omega, mu, sigma_max_q(problem))) * k_vaq
    if strict and kappa_M > bound * (1 + BOUND_RTOL):
        raise BoundViolated(f"kappa_M = {kappa_M:.6g} exceeds its bound {bound:.6g}")
    return kappa_M, bound, k_vaq


@dataclasses.dataclass(frozen=True)
class BlockEncodingComponent:
    name: str
    alpha: float
    eps: float


@dataclasses.dataclass(frozen=True)
class BlockEncoding:
    """Subnormalization of the OSS coefficient block-encoding and its parts."""

    alpha: float
    components: tuple[BlockEncodingComponent, ...]
    eps_qlsa: float
    kappa_M: float


def alpha_be(frob_V: float, frob_A: float, frob_Q: float, omega: float, frob_M: float) -> float:
    """sqrt(|V|^2 + |A|^2) * sqrt 2 omega / |M| * (sqrt 2 |Q| + sqrt 2 + 1), Frobenius norms."""
    return math.hypot(frob_V, frob_A) * SQRT2 * omega / frob_M * (SQRT2 * frob_Q + SQRT2 + 1.0)


def block_encoding_factor(
    problem: LcqoProblem,
    basis: NullBasis,
    point: PrimalDualPoint,
    oss: OssSystem,
    *,
    eps_qlsa: float = 0.075,
    kappa_M: float | None = None,
) -> BlockEncoding:
    """alpha_BE of the assembled M with the M1..M4 factors and error budget.

    The budget starts from eps1 = eps_qlsa / kappa_M^3 / (2 K) with
    K = sqrt 2 * sqrt(|V|^2 + |A|^2) * (sqrt 2 |Q| + sqrt 2 + 1)^2.
    The default eps_qlsa is delta / 4 at delta = 0.3. kappa_M is computed
    from M when not given.
    """
    x, s = _interior_xs(point)
    omega = float(max(x.max(), s.max()))
    frob_V = float(np.linalg.norm(basis.dense()))
    frob_A = float(np.linalg.norm(problem.A.data))
    frob_Q = float(np.linalg.norm(problem.Q.data))
    if kappa_M is None:
        kappa_M = float(np.linalg.cond(oss.M))
    va = math.hypot(frob_V, frob_A)
    q_term = SQRT2 * frob_Q + SQRT2 + 1.0
    K = SQRT2 * va * q_term**2
    eps1 = eps_qlsa / kappa_M**3 / (2.0 * K)
    eps2 = eps1 / (2.0 * va)
    eps3 = eps2
    eps4 = SQRT2 * eps2
    components = (
        BlockEncodingComponent("M1", va, eps1),
        BlockEncodingComponent("M2/omega", 1.0, eps2),
        BlockEncodingComponent("M3", frob_Q + 1.0, (frob_Q + 1.0) * eps3),
        BlockEncodingComponent("M4/omega", SQRT2, eps4),
    )
    return BlockEncoding(
        alpha=alpha_be(frob_V, frob_A, frob_Q, omega, oss.frob_M),
        components=components,
        eps_qlsa=eps_qlsa,
        kappa_M=kappa_M,
    )


@dataclasses.dataclass(frozen=True)
class CostRow:
    k: int
    mu: float
    omega: float
    frob_M: float
    kappa_M: float
    kappa_bound: float
    kappa_measured: bool
    alpha_BE: float
    t_qlsa_units: float
    t_qta_units: float
    iter_cost_units: float

    @property
    def omega_ratio(self) -> float:
        return self.omega / self.frob_M


@dataclasses.dataclass(frozen=True)
class QuantumCostReport:
    """Per-iteration cost rows, totals and instance constants."""

    rows: tuple[CostRow, ...]
    n: int
    m: int
    frob_V: float
    frob_A: float
    frob_Q: float
    sigma_max_Q: float
    kappa_VAQ: float
    eps: float
    omega_bar: float
    total_units: float
    theorem1_bound_units: float
    c_theory: float
    c_observed: float
    polylog: str = POLYLOG_NOTE

    @property
    def iterations(self) -> int:
        return len(self.rows)

    def violations(self) -> list[str]:
        """Row invariants that fail, empty when the report is consistent."""
        out = []
        for r in self.rows:
            if r.kappa_M > r.kappa_bound * (1 + BOUND_RTOL):
                out.append(f"row {r.k}: kappa_M {r.kappa_M:.6g} > bound {r.kappa_bound:.6g}")
            if r.omega_ratio > 2.0 * (1 + BOUND_RTOL):
                out.append(f"row {r.k}: omega/|M|_F = {r.omega_ratio:.6g} > 2")
            units = (r.alpha_BE, r.t_qlsa_units, r.t_qta_units, r.iter_cost_units)
            if not all(math.isfinite(u) and u >= 0 for u in units):
                out.append(f"row {r.k}: negative or non-finite unit cost")
        return out

    def to_json_dict(self) -> dict:
        return {
            "rows": [dataclasses.asdict(r) for r in self.rows],
            "totals": {
                "iterations": self.iterations,
                "total_units": self.total_units,
                "theorem1_bound_units": self.theorem1_bound_units,
                "c_theory": self.c_theory,
                "c_observed": self.c_observed,
            },
            "instance": {
                "n": self.n,
                "m": self.m,
                "frob_V": self.frob_V,
                "frob_A": self.frob_A,
                "frob_Q": self.frob_Q,
                "sigma_max_Q": self.sigma_max_Q,
                "kappa_VAQ": self.kappa_VAQ,
                "eps": self.eps,
                "omega_bar": self.omega_bar,
            },
            "polylog": self.polylog,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True)

    def render_table(self) -> str:
        head = f"{'k':>5} {'omega':>11} {'omega/|M|':>10} {'kappa_M':>11} {'kappa_bnd':>11} {'alpha_BE':>11} {'iter_cost':>11}"
        lines = [head, "-" * len(head)]
        for r in self.rows:
            mark = "" if r.kappa_measured else "*"
            lines.append(
                f"{r.k:>5d} {r.omega:>11.4e} {r.omega_ratio:>10.4f} {r.kappa_M:>11.4e}{mark:1}"
                f"{r.kappa_bound:>11.4e} {r.alpha_BE:>11.4e} {r.iter_cost_units:>11.4e}"
            )
        lines.append("-" * len(head))
        lines.append(f"iterations        {self.iterations}")
        lines.append(f"total_units       {self.total_units:.6e}")
        lines.append(f"theorem1_bound    {self.theorem1_bound_units:.6e}")
        lines.append(f"c_observed        {self.c_observed:.4e}  (c_theory {self.c_theory:.4f})")
        lines.append(f"kappa_VAQ         {self.kappa_VAQ:.6e}")
        lines.append(f"sigma_max(Q)      {self.sigma_max_Q:.6e}")
        lines.append(f"note              {self.polylog}")
        if any(not r.kappa_measured for r in self.rows):
            lines.append("* kappa_M not traced; the bound is used in its place")
        return "\n".join(lines)


def cost_report(
    problem: LcqoProblem,
    traces: Sequence,
    eps: float | None = None,
    basis: NullBasis | None = None,
    *,
    strict: bool = True,
) -> QuantumCostReport:
    """Replay solver traces through the cost model.

    Rows need k, mu, omega and frob_M from each trace; kappa_M is taken
    from the trace when present and replaced by its bound otherwise.
    `eps` defaults to the smallest traced mu.

    Raises:
      EmptyTrace: if `traces` is empty.
      BoundViolated: with `strict`, if a row invariant fails or an
        iteration costs more than C_THEORY times the per-iteration bound
        while eps <= min mu.
    """
    if len(traces) == 0:
        raise EmptyTrace("no iterations to cost")
    basis = build_null_basis(problem) if basis is None else basis
    n = problem.n
    frob_V = float(np.linalg.norm(basis.dense()))
    frob_A = float(np.linalg.norm(problem.A.data))
    frob_Q = float(np.linalg.norm(problem.Q.data))
    sq = sigma_max_q(problem)
    k_vaq = kappa_vaq(problem, basis)
    min_mu = min(t.mu for t in traces)
    eps = min_mu if eps is None else float(eps)
    if eps <= 0:
        raise ValueError("eps must be positive")

    rows = []
    for t in traces:
        bound = math.sqrt(kappa_psi_chain(t.omega, t.mu, sq)) * k_vaq
        measured = t.kappa_M is not None
        kappa = float(t.kappa_M) if measured else bound
        t_qlsa = kappa * t.omega / t.frob_M
        rows.append(
            CostRow(
                k=int(t.k),
                mu=float(t.mu),
                omega=float(t.omega),
                frob_M=float(t.frob_M),
                kappa_M=kappa,
                kappa_bound=bound,
                kappa_measured=measured,
                alpha_BE=alpha_be(frob_V, frob_A, frob_Q, t.omega, t.frob_M),
                t_qlsa_units=t_qlsa,
                t_qta_units=float(n),
                iter_cost_units=n * t_qlsa + float(n * n),
            )
        )
    total = 0.0
    for r in rows:
        total += r.iter_cost_units
    omega_bar = max(r.omega for r in rows)
    bound1 = n * (omega_bar**2 / eps + sq) * k_vaq + float(n * n)
    c_obs = max(r.iter_cost_units for r in rows) / bound1
    report = QuantumCostReport(
        rows=tuple(rows),
        n=n,
        m=problem.m,
        frob_V=frob_V,
        frob_A=frob_A,
        frob_Q=frob_Q,
        sigma_max_Q=sq,
        kappa_VAQ=k_vaq,
        eps=eps,
        omega_bar=omega_bar,
        total_units=total,
        theorem1_bound_units=bound1,
        c_theory=C_THEORY,
        c_observed=c_obs,
    )
    if strict:
        bad = report.violations()
        if eps <= min_mu and c_obs > C_THEORY * (1 + BOUND_RTOL):
            bad.append(f"iteration cost reaches {c_obs:.4g} x theorem bound > c_theory")
        if bad:
            raise BoundViolated("; ".join(bad))
    return report
