"""MINRES for symmetric (possibly indefinite) operators.

scipy's implementation stops on ||r|| / (||A|| ||x|| + ||b||); the dilated
OSS solve needs a plain absolute residual test, which the Lanczos
recurrence provides for free through ``phibar``.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

_EPS = np.finfo(float).eps


def minres(
    matvec: Callable[[np.ndarray], np.ndarray],
    b: np.ndarray,
    tol: float,
    maxiter: int,
    x0: np.ndarray | None = None,
) -> tuple[np.ndarray, int, float]:
    """Solve A x = b for symmetric A until ||b - A x||_2 <= tol.

    The recurrence estimate is trusted only to decide when to look; the
    true residual is recomputed before returning and iteration resumes if
    rounding made the estimate optimistic.

    Returns:
      (x, iterations, true residual norm). The residual exceeds `tol` only
      when `maxiter` ran out or the Lanczos process broke down.
    """
    n = b.size
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r0 = b.copy() if x0 is None else b - matvec(x)
    beta1 = math.sqrt(float(r0 @ r0))
    if beta1 <= tol:
        return x, 0, beta1

    r1 = r0.copy()
    r2 = r0
    beta = beta1
    oldb = 0.0
    dbar = 0.0
    epsln = 0.0
    phibar = beta1
    cs, sn = -1.0, 0.0
    w = np.zeros(n)
    w2 = np.zeros(n)
    true_res = beta1

    for itn in range(1, maxiter + 1):
        v = r2 / beta
        y = matvec(v)
        if itn >= 2:
            y -= (beta / oldb) * r1
        alfa = float(v @ y)
        y -= (alfa / beta) * r2
        r1, r2 = r2, y
        oldb = beta
        beta = math.sqrt(float(r2 @ r2))

        oldeps = epsln
        delta = cs * dbar + sn * alfa
        gbar = sn * dbar - cs * alfa
        epsln = sn * beta
        dbar = -cs * beta
        gamma = max(math.hypot(gbar, beta), _EPS)
        cs = gbar / gamma
        sn = beta / gamma
        phi = cs * phibar
        phibar = sn * phibar

        w1, w2 = w2, w
        w = (v - oldeps * w1 - delta * w2) / gamma
        x += phi * w

        if phibar <= tol or beta <= _EPS * beta1:
            true_res = float(np.linalg.norm(b - matvec(x)))
            if true_res <= tol or beta <= _EPS * beta1:
                return x, itn, true_res
    true_res = float(np.linalg.norm(b - matvec(x)))
    return x, maxiter, true_res
