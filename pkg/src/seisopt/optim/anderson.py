"""Anderson acceleration of fixed-point iterations and of steepest descent.

The window keeps the last few iterates, their images under the fixed-point
operator G, and a QR factorization of the matrix of consecutive fixed-point
residual differences.  The next iterate combines the stored G-values with
least-squares weights; for the gradient-descent operator G(p) = p - eta * grad
the residuals are just scaled gradients, so the memory cost matches L-BFGS.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .linesearch import backtracking_line_search
from .problems import default_eta
from .qr import EmptyWindowError, SlidingQR
from .report import OptimizeResult, OptimizerReport

RANK_TOL = 1e-12


@dataclass
class WeightSolution:
    """Least-squares weights for one window: gamma solves A gamma ~ f_k.

    ``alpha`` is the affine-combination form recovered by the change of
    variables alpha_0 = gamma_0, alpha_i = gamma_i - gamma_{i-1},
    alpha_m = 1 - gamma_{m-1}; the trailing weight absorbs float rounding so
    the weights sum to exactly one.  ``residual_norm`` is the minimized
    combined residual ||sum_i alpha_i f_i|| = ||f_k - A gamma||.
    """

    gamma: np.ndarray
    alpha: np.ndarray
    residual_norm: float


def _recover_alpha(gamma: np.ndarray) -> np.ndarray:
    m = len(gamma)
    alpha = np.empty(m + 1)
    alpha[0] = gamma[0]
    alpha[1:m] = gamma[1:] - gamma[:-1]
    alpha[m] = 1.0 - gamma[m - 1]
    for _ in range(3):
        gap = 1.0 - math.fsum(alpha)
        if gap == 0.0:
            break
        alpha[int(np.argmax(np.abs(alpha)))] += gap
    return alpha


class AAWindow:
    """Sliding history of iterates, G-values, and QR-factored residual diffs."""

    def __init__(self, dim: int, memory: int):
        if memory < 0:
            raise ValueError("memory must be non-negative")
        self.dim = dim
        self.memory = memory
        self.qr = SlidingQR(dim) if memory > 0 else None
        self.ps: list[np.ndarray] = []
        self.gs: list[np.ndarray] = []
        self.fs: list[np.ndarray] = []
        self.dgs: list[np.ndarray] = []

    @property
    def m_k(self) -> int:
        return len(self.fs) - 1 if self.fs else 0

    @property
    def f_k(self) -> np.ndarray:
        return self.fs[-1]

    def clear(self) -> None:
        self.__init__(self.dim, self.memory)

    def push(self, p: np.ndarray, g_value: np.ndarray) -> None:
        """Record iterate p and its operator image G(p)."""
        p = np.asarray(p, dtype=np.float64)
        g_value = np.asarray(g_value, dtype=np.float64)
        f = g_value - p
        if self.memory == 0:
            self.ps, self.gs, self.fs = [p], [g_value], [f]
            return
        if self.fs:
            self.qr.append_column(f - self.fs[-1])
            self.dgs.append(g_value - self.gs[-1])
        self.ps.append(p)
        self.gs.append(g_value)
        self.fs.append(f)
        if self.qr.ncols > self.memory:
            self._drop_oldest()
        self._safeguard()

    def _drop_oldest(self) -> None:
        self.qr.drop_first_column()
        self.ps.pop(0)
        self.gs.pop(0)
        self.fs.pop(0)
        self.dgs.pop(0)

    def _safeguard(self) -> None:
        # shed near-dependent columns (oldest first) so the triangular solve
        # stays well posed; the window shrinks but never goes below one entry
        while self.qr.ncols > 0:
            tol = RANK_TOL * max(self.qr.frobenius(), 1e-300)
            if self.qr.diag().min() > tol:
                break
            self._drop_oldest()


def aa_weights(window: AAWindow) -> WeightSolution:
    """Solve the window's least-squares problem via its QR factors."""
    if window.m_k == 0:
        raise EmptyWindowError("aa_weights needs at least one stored difference")
    gamma = window.qr.solve(window.f_k)
    alpha = _recover_alpha(gamma)
    return WeightSolution(
        gamma=gamma, alpha=alpha, residual_norm=window.qr.residual_norm(window.f_k)
    )


def aa_step(window: AAWindow, beta: float = 1.0, weights: WeightSolution | None = None) -> np.ndarray:
    """Next iterate from the current window.

    With beta = 1 this is the efficient update
    p_{k+1} = G(p_k) - sum_i gamma_i [G(p_{i+1}) - G(p_i)]; the general form
    blends the weighted iterate and weighted G-value combinations.  An empty
    window reduces to the Picard update G(p_k).
    """
    if not window.fs:
        raise EmptyWindowError("aa_step on an empty window")
    if window.m_k == 0:
        return window.gs[-1].copy()
    if weights is None:
        weights = aa_weights(window)
    if beta == 1.0:
        p_next = window.gs[-1].copy()
        for gamma_i, dg in zip(weights.gamma, window.dgs):
            p_next -= gamma_i * dg
        return p_next
    alpha = weights.alpha
    comb_p = sum(a * p for a, p in zip(alpha, window.ps))
    comb_g = sum(a * g for a, g in zip(alpha, window.gs))
    return (1.0 - beta) * comb_p + beta * comb_g


def picard_step(operator, p: np.ndarray) -> np.ndarray:
    """Plain fixed-point update p -> G(p); identical to AA with memory 0."""
    return operator(p)


@dataclass
class FixedPointTrace:
    """Iterates and residual diagnostics of a fixed-point run."""

    iterates: list = field(default_factory=list)
    residual_norms: list = field(default_factory=list)
    combined_norms: list = field(default_factory=list)

    @property
    def final(self) -> np.ndarray:
        return self.iterates[-1]


def aa_run(
    operator,
    p0: np.ndarray,
    memory: int,
    iterations: int,
    beta: float = 1.0,
    residual_tol: float = 0.0,
) -> FixedPointTrace:
    """Generic Anderson acceleration of a fixed-point operator.

    Records, per iteration, the plain residual ||f_k|| and the minimized
    combined residual ||sum alpha_i f_i|| (equal to ||f_k|| while the window
    is empty); the latter never exceeds the former.
    """
    p = np.asarray(p0, dtype=np.float64)
    window = AAWindow(p.size, memory)
    trace = FixedPointTrace(iterates=[p.copy()])
    for _ in range(iterations):
        g_value = operator(p)
        window.push(p, g_value)
        fk_norm = float(np.linalg.norm(window.f_k))
        if window.m_k == 0:
            p_next = aa_step(window, beta=beta)
            combined = fk_norm
        else:
            weights = aa_weights(window)
            p_next = aa_step(window, beta=beta, weights=weights)
            combined = weights.residual_norm
        trace.iterates.append(p_next)
        trace.residual_norms.append(fk_norm)
        trace.combined_norms.append(combined)
        p = p_next
        if residual_tol and fk_norm <= residual_tol:
            break
    return trace


def multisecant_oracle(p_mat: np.ndarray, d_mat: np.ndarray) -> np.ndarray:
    """Minimizer S of ||S + I||_F subject to S D = P.

    Closed form: S = -I + (P + D) (D^T D)^{-1} D^T.  Used only as a test
    oracle for the AA update p_{k+1} = p_k - S f_k; rank-deficient D makes
    the oracle unavailable.
    """
    p_mat = np.atleast_2d(np.asarray(p_mat, dtype=np.float64))
    d_mat = np.atleast_2d(np.asarray(d_mat, dtype=np.float64))
    if p_mat.shape != d_mat.shape:
        raise ValueError("P and D must have matching shapes")
    n, m = d_mat.shape
    if np.linalg.matrix_rank(d_mat) < m:
        raise np.linalg.LinAlgError("D is rank deficient; multi-secant oracle unavailable")
    coeff = np.linalg.solve(d_mat.T @ d_mat, d_mat.T)
    return -np.eye(n) + (p_mat + d_mat) @ coeff


# ---------------------------------------------------------------------------
# Optimization drivers: steepest descent and its Anderson acceleration
# ---------------------------------------------------------------------------


def _budget_allows(problem, budget: float | None, cost: float) -> bool:
    if budget is None:
        return True
    return problem.counters.grad_equivalents + cost <= budget + 1e-9


def minimize_sd(
    problem,
    p0: np.ndarray,
    eta: float | None = None,
    budget: float | None = None,
    max_iters: int | None = None,
    grad_tol: float = 0.0,
    line_search: bool = False,
    c1: float = 1e-4,
    max_backtracks: int = 10,
) -> OptimizeResult:
    """Steepest descent with a fixed step (default) or Armijo backtracking."""
    p = np.asarray(p0, dtype=np.float64).copy()
    report = OptimizerReport(method="sd")
    k = 0
    while True:
        if not _budget_allows(problem, budget, 1.0):
            break
        value, grad = problem.value_and_grad(p)
        if eta is None:
            eta = default_eta(p, grad)
        grad_norm = float(np.linalg.norm(grad))
        step = 0.0
        done = (grad_tol and grad_norm <= grad_tol) or (
            max_iters is not None and k >= max_iters
        )
        if not done:
            if line_search:
                res = backtracking_line_search(
                    problem.value, p, -grad, grad, value,
                    initial_step=eta, c1=c1, max_backtracks=max_backtracks,
                    budget_ok=lambda: _budget_allows(problem, budget, 0.5),
                )
                step = res.step if res.success else eta * 0.5 ** max_backtracks
            else:
                step = eta
        report.append(
            iteration=k, objective=value, grad_norm=grad_norm,
            grad_evals=problem.counters.grad_evals,
            obj_evals=problem.counters.obj_evals, step=step,
        )
        if done:
            break
        p = p - step * grad
        k += 1
    return OptimizeResult(p=p, report=report, extras={"eta": eta})


def minimize_aa(
    problem,
    p0: np.ndarray,
    memory: int,
    eta: float | None = None,
    budget: float | None = None,
    max_iters: int | None = None,
    grad_tol: float = 0.0,
    c1: float = 1e-4,
    max_backtracks: int = 10,
) -> OptimizeResult:
    """Anderson acceleration of the gradient-descent fixed point.

    Per iteration: form the plain descent step, update the residual window
    from the gradients, solve the small least-squares problem through the
    rank-updated QR, form the accelerated candidate, and pick the blend
    between the two by a backtracking search on lambda in [0, 1].  A failed
    search falls back to the plain step and clears the window, so no
    iteration does worse than steepest descent.  With memory 0 the entire
    path reduces to fixed-step steepest descent.
    """
    p = np.asarray(p0, dtype=np.float64).copy()
    window = AAWindow(p.size, memory)
    report = OptimizerReport(method="aa")
    inequality_log: list[tuple[float, float]] = []
    lambdas: list[float] = []
    k = 0
    while True:
        if not _budget_allows(problem, budget, 1.0):
            break
        value, grad = problem.value_and_grad(p)
        if eta is None:
            eta = default_eta(p, grad)
        grad_norm = float(np.linalg.norm(grad))
        done = (grad_tol and grad_norm <= grad_tol) or (
            max_iters is not None and k >= max_iters
        )
        lam = 0.0
        if not done:
            p_bar = p - eta * grad
            window.push(p, p_bar)
            if window.m_k == 0:
                p_next = p_bar
            else:
                weights = aa_weights(window)
                inequality_log.append(
                    (weights.residual_norm, float(np.linalg.norm(window.f_k)))
                )
                p_tilde = aa_step(window, weights=weights)
                lam, p_next = _blend_search(
                    problem, value, grad, p, p_bar, p_tilde, c1, max_backtracks,
                    lambda: _budget_allows(problem, budget, 0.5),
                )
                if lam == 0.0:
                    window.clear()
                    p_next = p_bar
            lambdas.append(lam)
        report.append(
            iteration=k, objective=value, grad_norm=grad_norm,
            grad_evals=problem.counters.grad_evals,
            obj_evals=problem.counters.obj_evals, step=lam,
        )
        if done:
            break
        p = p_next
        k += 1
    return OptimizeResult(
        p=p,
        report=report,
        extras={"eta": eta, "inequality_log": inequality_log, "lambdas": lambdas},
    )


def _blend_search(problem, value_k, grad_k, p_k, p_bar, p_tilde, c1, max_backtracks, budget_ok):
    """Backtrack lambda from 1, asking for sufficient decrease versus J(p_k).

    The Armijo reference slope is the directional derivative at p_k toward
    the blended point, which is available from known quantities.
    """
    diff = p_tilde - p_bar
    base = float(np.dot(grad_k, p_bar - p_k))
    cross = float(np.dot(grad_k, diff))
    lam = 1.0
    for _ in range(max_backtracks):
        if not budget_ok():
            return 0.0, p_bar
        candidate = p_bar + lam * diff
        slope = base + lam * cross
        bound = value_k + c1 * min(slope, 0.0)
        trial = problem.value(candidate)
        if np.isfinite(trial) and trial <= bound:
            return lam, candidate
        lam *= 0.5
    return 0.0, p_bar
