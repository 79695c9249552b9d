"""Limited-memory BFGS (two-loop recursion) and Polak-Ribiere+ nonlinear CG."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linesearch import backtracking_line_search
from .problems import default_eta
from .report import OptimizeResult, OptimizerReport

CURVATURE_SKIP_TOL = 1e-12


@dataclass
class LBFGSHistory:
    """Last ``memory`` update pairs (dp, dg) with positive curvature."""

    memory: int
    pairs: list[tuple[np.ndarray, np.ndarray, float]] = field(default_factory=list)

    def push(self, dp: np.ndarray, dg: np.ndarray) -> bool:
        """Store a pair unless it violates the curvature condition."""
        curv = float(np.dot(dp, dg))
        if curv <= CURVATURE_SKIP_TOL * np.linalg.norm(dp) * np.linalg.norm(dg):
            return False
        self.pairs.append((dp, dg, 1.0 / curv))
        if len(self.pairs) > self.memory:
            self.pairs.pop(0)
        return True

    def clear(self) -> None:
        self.pairs.clear()

    def apply(self, vec: np.ndarray) -> np.ndarray:
        """Two-loop recursion: approximate inverse Hessian applied to vec.

        Uses the standard initial scaling <dp, dg> / <dg, dg> from the most
        recent pair; with an empty history this is the identity.
        """
        q = vec.copy()
        alphas = []
        for dp, dg, rho in reversed(self.pairs):
            a = rho * float(np.dot(dp, q))
            q -= a * dg
            alphas.append(a)
        if self.pairs:
            dp, dg, _ = self.pairs[-1]
            q *= float(np.dot(dp, dg) / np.dot(dg, dg))
        for (dp, dg, rho), a in zip(self.pairs, reversed(alphas)):
            b = rho * float(np.dot(dg, q))
            q += (a - b) * dp
        return q


def _budget_allows(problem, budget, cost) -> bool:
    if budget is None:
        return True
    return problem.counters.grad_equivalents + cost <= budget + 1e-9


def _try_step(problem, p, value, grad, d, initial, c1, c2, max_backtracks, budget, eta0):
    """Armijo backtracking along d, falling back to a small steepest step."""
    res = backtracking_line_search(
        problem.value, p, d, grad, value,
        initial_step=initial, c1=c1, c2=c2, max_backtracks=max_backtracks,
        budget_ok=lambda: _budget_allows(problem, budget, 0.5),
    )
    if res.success:
        return res.step, d, False
    return eta0, -grad, True


def _qn_loop(problem, p0, method, direction_fn, on_accept, budget, max_iters,
             grad_tol, c1, c2, max_backtracks, line_search):
    """Shared driver: one value_and_grad per iterate, carried across steps."""
    p = np.asarray(p0, dtype=np.float64).copy()
    report = OptimizerReport(method=method)
    extras: dict = {}
    if not _budget_allows(problem, budget, 1.0):
        return OptimizeResult(p=p, report=report, extras=extras)
    value, grad = problem.value_and_grad(p)
    eta0 = default_eta(p, grad)
    extras["eta"] = eta0
    k = 0
    while True:
        grad_norm = float(np.linalg.norm(grad))
        done = (grad_tol and grad_norm <= grad_tol) or (
            max_iters is not None and k >= max_iters
        ) or grad_norm == 0.0
        step = 0.0
        p_next = p
        d = None
        if not done:
            d, initial = direction_fn(grad, eta0)
            if line_search is not None:
                step = float(line_search(problem, p, value, grad, d))
                fell_back = False
            else:
                step, d, fell_back = _try_step(
                    problem, p, value, grad, d, initial, c1, c2,
                    max_backtracks, budget, eta0,
                )
            p_next = p + step * d
        report.append(
            iteration=k, objective=value, grad_norm=grad_norm,
            grad_evals=problem.counters.grad_evals,
            obj_evals=problem.counters.obj_evals, step=step,
        )
        if done:
            break
        if not _budget_allows(problem, budget, 1.0):
            p = p_next
            break
        value_next, grad_next = problem.value_and_grad(p_next)
        on_accept(p, grad, p_next, grad_next, d, fell_back)
        p, value, grad = p_next, value_next, grad_next
        k += 1
    return OptimizeResult(p=p, report=report, extras=extras)


def minimize_lbfgs(
    problem,
    p0: np.ndarray,
    memory: int,
    budget: float | None = None,
    max_iters: int | None = None,
    grad_tol: float = 0.0,
    c1: float = 1e-4,
    c2: float = 0.9,
    max_backtracks: int = 10,
    line_search=None,
) -> OptimizeResult:
    """L-BFGS with Armijo backtracking (or a caller-supplied line search).

    A non-descent two-loop direction resets the history and falls back to
    steepest descent, as does a failed line search.  ``line_search(problem,
    p, value, grad, d) -> step`` overrides the default search (e.g. an exact
    quadratic search in tests).
    """
    history = LBFGSHistory(memory=memory)

    def direction(grad, eta0):
        d = -history.apply(grad)
        if float(np.dot(d, grad)) >= 0.0:
            history.clear()
            d = -grad
        return d, (1.0 if history.pairs else eta0)

    def on_accept(p, grad, p_next, grad_next, d, fell_back):
        if fell_back:
            history.clear()
        history.push(p_next - p, grad_next - grad)

    result = _qn_loop(
        problem, p0, "lbfgs", direction, on_accept, budget, max_iters,
        grad_tol, c1, c2, max_backtracks, line_search,
    )
    result.extras["history"] = history
    return result


def minimize_ncg(
    problem,
    p0: np.ndarray,
    budget: float | None = None,
    max_iters: int | None = None,
    grad_tol: float = 0.0,
    c1: float = 1e-4,
    c2: float = 0.9,
    max_backtracks: int = 10,
    line_search=None,
) -> OptimizeResult:
    """Nonlinear conjugate gradients with the Polak-Ribiere+ coefficient.

    beta = max(0, <g_k, g_k - g_{k-1}> / <g_{k-1}, g_{k-1}>); clamping to
    zero restarts with a steepest-descent step, as does a non-descent
    combined direction.  The first iteration is plain steepest descent.
    """
    state = {"prev_grad": None, "prev_dir": None, "prev_step": None}

    def direction(grad, eta0):
        if state["prev_grad"] is None:
            d = -grad
        else:
            g_prev = state["prev_grad"]
            beta = max(0.0, float(np.dot(grad, grad - g_prev) / np.dot(g_prev, g_prev)))
            d = -grad + beta * state["prev_dir"]
            if float(np.dot(d, grad)) >= 0.0:
                d = -grad
        state["prev_dir"] = d
        if state["prev_step"] is not None:
            initial = 2.0 * state["prev_step"]
        else:
            initial = eta0
        return d, initial

    def on_accept(p, grad, p_next, grad_next, d, fell_back):
        state["prev_grad"] = grad
        state["prev_dir"] = d
        denom = float(np.linalg.norm(d))
        state["prev_step"] = float(np.linalg.norm(p_next - p)) / denom if denom else None

    return _qn_loop(
        problem, p0, "ncg", direction, on_accept, budget, max_iters,
        grad_tol, c1, c2, max_backtracks, line_search,
    )
