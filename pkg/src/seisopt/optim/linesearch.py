"""Backtracking line search with the Armijo sufficient-decrease rule.

The curvature (second Wolfe) condition is checked opportunistically when the
caller supplies a gradient at the accepted point; trial points themselves are
tested on objective values only, since a gradient there would double the PDE
cost.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class LineSearchError(Exception):
    """Raised for precondition violations (ascent direction)."""


@dataclass
class LineSearchResult:
    step: float
    value: float
    trials: int
    success: bool
    curvature_ok: bool | None = None


def backtracking_line_search(
    value_fn,
    p: np.ndarray,
    direction: np.ndarray,
    grad_p: np.ndarray,
    value_p: float,
    initial_step: float = 1.0,
    c1: float = 1e-4,
    c2: float = 0.9,
    max_backtracks: int = 10,
    shrink: float = 0.5,
    grad_fn=None,
    budget_ok=None,
) -> LineSearchResult:
    """Largest step in {s0, s0/2, ...} with J(p + s d) <= J(p) + c1 s <d, grad>.

    ``value_fn`` is charged per trial (it should increment the objective-only
    counter itself).  ``budget_ok`` may veto further trials; the search then
    reports failure and the caller picks its fallback.
    """
    slope = float(np.dot(direction, grad_p))
    if slope >= 0.0:
        raise LineSearchError(f"not a descent direction: <d, grad> = {slope:.3g}")
    if initial_step <= 0.0:
        raise LineSearchError("initial step must be positive")

    step = float(initial_step)
    for trial in range(1, max_backtracks + 1):
        if budget_ok is not None and not budget_ok():
            return LineSearchResult(step=0.0, value=value_p, trials=trial - 1, success=False)
        candidate = value_fn(p + step * direction)
        if np.isfinite(candidate) and candidate <= value_p + c1 * step * slope:
            curvature_ok = None
            if grad_fn is not None:
                g_t = grad_fn(p + step * direction)
                curvature_ok = bool(np.dot(direction, g_t) >= c2 * slope)
            return LineSearchResult(
                step=step, value=float(candidate), trials=trial, success=True,
                curvature_ok=curvature_ok,
            )
        step *= shrink
    return LineSearchResult(step=0.0, value=value_p, trials=max_backtracks, success=False)
