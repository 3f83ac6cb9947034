"""Central finite-difference gradient checker."""

from __future__ import annotations

from typing import Callable

import numpy as np

from multires.errors import NumericalError, ShapeError


def finite_diff_check(
    f: Callable[[np.ndarray], float],
    x: np.ndarray,
    analytic_grad: np.ndarray,
    step: float = 1e-6,
) -> float:
    """Max relative error between analytic_grad and central differences of f at x.

    Per coordinate i: h_i = step * max(1, |x_i|); the relative error uses the
    denominator max(|analytic|, |numeric|, 1e-8).
    """
    if x.shape != analytic_grad.shape:
        raise ShapeError(f"gradient shape {analytic_grad.shape} does not match x {x.shape}")
    x = np.asarray(x, dtype=np.float64)
    worst = 0.0
    it = np.nditer(x, flags=["multi_index"])
    for xi in it:
        idx = it.multi_index
        h = step * max(1.0, abs(float(xi)))
        xp = x.copy()
        xp[idx] += h
        xm = x.copy()
        xm[idx] -= h
        fp = float(f(xp))
        fm = float(f(xm))
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NumericalError(f"non-finite function value near coordinate {idx}")
        numeric = (fp - fm) / (2 * h)
        analytic = float(analytic_grad[idx])
        err = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8)
        worst = max(worst, err)
    return worst
