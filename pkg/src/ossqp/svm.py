"""l1 soft-margin linear SVM as a standard-form LCQO.

Training points (phi_i, zeta_i) with zeta_i in {-1, +1} give the problem

    min 1/2 |w|^2 + C sum xi   s.t.  zeta_i (<w, phi_i> + t) + xi_i - rho_i = 1

with w = w+ - w-, t = t+ - t-, and every variable non-negative. The split
w = w+ - w- leaves no strictly feasible dual point (s_{w+} = -s_{w-}), so a
small eps_reg * I is added to Q on the (w+, w-, t+, t-) block.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import BadC, LabelError, LayoutMismatch, ParseError, RegularizationRequired
from .problem import LcqoProblem, PrimalDualPoint

DEFAULT_EPS_REG = 1e-6
# Relative margin applied to the lower bounds on v and tau in the start.
START_MARGIN = 1.1


@dataclasses.dataclass(frozen=True, eq=False)
class SvmDataset:
    """Feature matrix `features` (n x m) and labels in {-1, +1}."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        F = np.asarray(self.features, dtype=float)
        z = np.asarray(self.labels, dtype=float)
        if F.ndim != 2 or z.shape != (F.shape[0],):
            raise ValueError(f"features {F.shape} and labels {z.shape} do not match")
        if not np.all(np.isfinite(F)):
            raise ValueError("features contain NaN or Inf")
        if not np.all(np.abs(z) == 1):
            raise LabelError("labels must be -1 or +1")
        object.__setattr__(self, "features", F)
        object.__setattr__(self, "labels", z)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def m(self) -> int:
        return self.features.shape[1]


def _label(token: str, map01: bool, line: int) -> float:
    try:
        v = float(token)
    except ValueError:
        raise ParseError(f"label {token!r} is not a number", line) from None
    if map01 and v in (0.0, 1.0):
        return 2.0 * v - 1.0
    if v not in (-1.0, 1.0):
        hint = " (enable the 0/1 mapping)" if v == 0.0 else ""
        raise LabelError(f"line {line}: label {token!r} is not -1 or +1{hint}")
    return v


def _parse_libsvm(text: str, map01: bool):
    rows, labels = [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, *pairs = line.split()
        labels.append(_label(head, map01, lineno))
        feats = {}
        for pair in pairs:
            idx, sep, val = pair.partition(":")
            if not sep:
                raise ParseError(f"expected index:value, got {pair!r}", lineno)
            try:
                j, v = int(idx), float(val)
            except ValueError:
                raise ParseError(f"bad feature {pair!r}", lineno) from None
            if j < 1:
                raise ParseError(f"feature index {j} is not 1-based", lineno)
            if j in feats:
                raise ParseError(f"feature index {j} repeated", lineno)
            if not math.isfinite(v):
                raise ParseError(f"non-finite feature value {val!r}", lineno)
            feats[j] = v
        rows.append(feats)
    if not rows:
        raise ParseError("dataset has no points")
    m = max((max(f) for f in rows if f), default=0)
    if m == 0:
        raise ParseError("dataset has no features")
    F = np.zeros((len(rows), m))
    for i, feats in enumerate(rows):
        for j, v in feats.items():
            F[i, j - 1] = v
    return F, np.array(labels)


def _parse_csv(text: str, delimiter: str, map01: bool):
    rows, labels, width = [], [], None
    for lineno, rec in enumerate(csv.reader(text.splitlines(), delimiter=delimiter), 1):
        if not rec or all(not c.strip() for c in rec):
            continue
        if width is None:
            width = len(rec)
            if width < 2:
                raise ParseError("need at least one feature column and a label column", lineno)
        elif len(rec) != width:
            raise ParseError(f"expected {width} columns, got {len(rec)}", lineno)
        try:
            vals = [float(c) for c in rec[:-1]]
        except ValueError:
            raise ParseError("non-numeric feature", lineno) from None
        if not all(math.isfinite(v) for v in vals):
            raise ParseError("non-finite feature value", lineno)
        rows.append(vals)
        labels.append(_label(rec[-1].strip(), map01, lineno))
    if not rows:
        raise ParseError("dataset has no points")
    return np.array(rows, dtype=float), np.array(labels)


def parse_dataset(path, format: str = "libsvm", delimiter: str = ",", map01: bool = False) -> SvmDataset:
    """Read a libsvm or csv dataset.

    libsvm lines are `<label> <index>:<value> ...` with 1-based indices;
    absent features are zero and m is the largest index seen. csv rows
    carry the label in the last column. With `map01`, labels 0 and 1 map
    to -1 and +1.

    Raises:
      ParseError: on malformed input, with the offending line number.
      LabelError: for labels outside {-1, +1} after mapping.
      OSError: if the file cannot be read.
    """
    text = Path(path).read_text()
    if format == "libsvm":
        F, z = _parse_libsvm(text, map01)
    elif format == "csv":
        F, z = _parse_csv(text, delimiter, map01)
    else:
        raise ValueError(f"unknown dataset format {format!r}")
    return SvmDataset(F, z)


@dataclasses.dataclass(frozen=True)
class VariableLayout:
    """Positions of each SVM variable block inside the LCQO vector x."""

    m: int
    n: int

    @property
    def n_vars(self) -> int:
        return 2 * self.m + 2 + 2 * self.n

    @property
    def w_plus(self) -> slice:
        return slice(0, self.m)

    @property
    def w_minus(self) -> slice:
        return slice(self.m, 2 * self.m)

    @property
    def t_plus(self) -> int:
        return 2 * self.m

    @property
    def t_minus(self) -> int:
        return 2 * self.m + 1

    @property
    def xi(self) -> slice:
        return slice(2 * self.m + 2, 2 * self.m + 2 + self.n)

    @property
    def rho(self) -> slice:
        return slice(2 * self.m + 2 + self.n, self.n_vars)


def build_svm_lcqo(dataset: SvmDataset, C: float, eps_reg: float = DEFAULT_EPS_REG):
    """LCQO data for the split SVM and the layout of its variables.

    Returns:
      (problem, layout) with A = [Z Phi^T, -Z Phi^T, zeta, -zeta, I, -I],
      b = e and c = C on the xi block only.

    Raises:
      BadC: if C is not a positive finite number.
      ValueError: if eps_reg is negative.
    """
    if not (math.isfinite(C) and C > 0):
        raise BadC(f"C must be positive and finite, got {C}")
    if not eps_reg >= 0:
        raise ValueError(f"eps_reg must be non-negative, got {eps_reg}")
    layout = VariableLayout(dataset.m, dataset.n)
    m, n = layout.m, layout.n
    z = dataset.labels
    ZPt = z[:, None] * dataset.features
    eye = sp.identity(n, format="csr")
    A = sp.hstack(
        [sp.csr_matrix(ZPt), sp.csr_matrix(-ZPt), sp.csr_matrix(z[:, None]), sp.csr_matrix(-z[:, None]), eye, -eye],
        format="csr",
    )
    A.eliminate_zeros()
    c = np.zeros(layout.n_vars)
    c[layout.xi] = C
    Im = sp.identity(m, format="csr")
    Qw = sp.bmat([[Im, -Im], [-Im, Im]])
    Q = sp.block_diag([Qw, sp.csr_matrix((2 + 2 * n, 2 + 2 * n))], format="csr")
    if eps_reg > 0:
        reg = np.zeros(layout.n_vars)
        reg[: 2 * m + 2] = eps_reg
        Q = Q + sp.diags(reg, format="csr")
    Q.eliminate_zeros()
    problem = LcqoProblem(A=A, b=np.ones(n), c=c, Q=sp.csr_matrix(Q))
    return problem, layout


def svm_initial_point(dataset: SvmDataset, C: float, eps_reg: float = DEFAULT_EPS_REG) -> PrimalDualPoint:
    """Strictly feasible primal-dual point of the regularized SVM problem.

    x: w+ = w- = v e, t+ = t- = tau, xi = 2 e, rho = e. y = (C/2) e, which
    leaves s = C/2 on the xi and rho blocks; v and tau exceed
    |Phi Z y|_inf / eps_reg and |zeta^T y| / eps_reg by 10% (at least 1),
    so s stays positive on the w and t blocks.

    Raises:
      RegularizationRequired: if eps_reg == 0.
    """
    if eps_reg == 0:
        raise RegularizationRequired("a strictly feasible dual point needs eps_reg > 0")
    problem, layout = build_svm_lcqo(dataset, C, eps_reg)
    y = np.full(dataset.n, C / 2.0)
    zy = dataset.labels * y
    v = max(START_MARGIN * float(np.max(np.abs(dataset.features.T @ zy))) / eps_reg, 1.0)
    tau = max(START_MARGIN * abs(float(np.sum(zy))) / eps_reg, 1.0)
    x = np.empty(layout.n_vars)
    x[: 2 * layout.m] = v
    x[layout.t_plus] = x[layout.t_minus] = tau
    x[layout.xi] = 2.0
    x[layout.rho] = 1.0
    s = problem.c - problem.A.T @ y + problem.Q @ x
    return PrimalDualPoint(x=x, y=y, s=s)


@dataclasses.dataclass(frozen=True)
class SvmModel:
    w: np.ndarray
    t: float
    C: float
    objective: float

    def decision(self, features: np.ndarray) -> np.ndarray:
        return np.asarray(features, dtype=float) @ self.w + self.t

    def predict(self, features: np.ndarray) -> np.ndarray:
        """Labels sign(<w, phi> + t) with ties sent to +1."""
        return np.where(self.decision(features) >= 0, 1.0, -1.0)

    def accuracy(self, dataset: SvmDataset) -> float:
        if dataset.m != self.w.size:
            raise LayoutMismatch(f"model has {self.w.size} features, dataset has {dataset.m}")
        return float(np.mean(self.predict(dataset.features) == dataset.labels))

    def hinge_objective(self, dataset: SvmDataset) -> float:
        """1/2 |w|^2 + C sum max(0, 1 - zeta_i (<w, phi_i> + t))."""
        margins = dataset.labels * self.decision(dataset.features)
        return 0.5 * float(self.w @ self.w) + self.C * float(np.sum(np.maximum(0.0, 1.0 - margins)))

    def to_json_dict(self) -> dict:
        return {"w": self.w.tolist(), "t": self.t, "C": self.C, "objective": self.objective}

    @classmethod
    def from_json_dict(cls, d: dict) -> "SvmModel":
        try:
            model = cls(
                w=np.asarray(d["w"], dtype=float).reshape(-1),
                t=float(d["t"]),
                C=float(d["C"]),
                objective=float(d["objective"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad model: {exc}") from None
        if not (np.all(np.isfinite(model.w)) and math.isfinite(model.t)):
            raise ParseError("model has non-finite entries")
        return model


def save_model(path, model: SvmModel) -> None:
    Path(path).write_text(json.dumps(model.to_json_dict(), indent=2) + "\n")


def load_model(path) -> SvmModel:
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno) from None
    return SvmModel.from_json_dict(d)


def extract_and_evaluate(solution: PrimalDualPoint, layout: VariableLayout, dataset: SvmDataset, C: float):
    """Classifier (w+ - w-, t+ - t-) with 1/2 |w|^2 + C sum xi and training accuracy.

    Raises:
      LayoutMismatch: if the solution, layout and dataset sizes disagree.
    """
    x = np.asarray(solution.x, dtype=float)
    if (layout.m, layout.n) != (dataset.m, dataset.n):
        raise LayoutMismatch(f"layout is {layout.n} x {layout.m}, dataset is {dataset.n} x {dataset.m}")
    if x.size != layout.n_vars:
        raise LayoutMismatch(f"solution has {x.size} entries, layout expects {layout.n_vars}")
    w = x[layout.w_plus] - x[layout.w_minus]
    t = float(x[layout.t_plus] - x[layout.t_minus])
    objective = 0.5 * float(w @ w) + C * float(np.sum(x[layout.xi]))
    model = SvmModel(w=w, t=t, C=float(C), objective=objective)
    return model, model.accuracy(dataset)


def train_svm(dataset: SvmDataset, C: float, eps_reg: float = DEFAULT_EPS_REG, config=None):
    """Build, center, solve and extract. Returns (model, accuracy, SolveResult)."""
    from .driver import SolverConfig, center_to_neighborhood, run_ifqipm
    from .nullspace import build_null_basis

    config = SolverConfig() if config is None else config
    problem, layout = build_svm_lcqo(dataset, C, eps_reg)
    start = svm_initial_point(dataset, C, eps_reg)
    basis = build_null_basis(problem)
    start = center_to_neighborhood(problem, start, config, basis=basis)
    result = run_ifqipm(problem, start, config, basis=basis)
    model, acc = extract_and_evaluate(result.point, layout, dataset, C)
    return model, acc, result
