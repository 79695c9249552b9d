"""Restarted GMRES over an abstract linear operator, and the least-squares
migration normal equations L^T L m_r = m_RTM that make GMRES applicable.

Arnoldi uses modified Gram-Schmidt with one reorthogonalization pass when
orthogonality degrades; the least-squares problem over the Krylov basis is
solved incrementally with Givens rotations, so the tracked residual norm is
non-increasing within every restart window by construction.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from .gradients import BornKernel
from .grid import AcquisitionGeometry, SourceWavelet, VelocityModel
from .wavesim import SimConfig

REORTH_TOL = 1e-8
BREAKDOWN_TOL = 1e-14


class LinearOperator:
    """Square linear action x -> A x on real vectors of dimension n."""

    def __init__(self, n: int, matvec):
        self.n = n
        self._matvec = matvec

    def __call__(self, x: np.ndarray) -> np.ndarray:
        y = np.asarray(self._matvec(np.asarray(x, dtype=np.float64)), dtype=np.float64)
        if y.shape != (self.n,):
            raise ValueError(f"operator returned shape {y.shape}, expected ({self.n},)")
        return y

    @staticmethod
    def from_matrix(a: np.ndarray) -> "LinearOperator":
        a = np.asarray(a, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("matrix must be square")
        return LinearOperator(a.shape[0], lambda x: a @ x)


@dataclass
class ResidualRecord:
    outer_iter: int
    inner_iter: int
    residual_norm: float
    grad_equivalents: float = 0.0


@dataclass
class GmresResult:
    x: np.ndarray
    history: list[ResidualRecord] = field(default_factory=list)
    converged: bool = False

    def residual_norms(self) -> np.ndarray:
        return np.array([r.residual_norm for r in self.history])

    def history_to_csv(self, path: str) -> None:
        lines = ["outer_iter,inner_iter,residual_norm,grad_equivalents"]
        for r in self.history:
            lines.append(
                f"{r.outer_iter},{r.inner_iter},"
                f"{r.residual_norm:.17g},{r.grad_equivalents:.17g}"
            )
        tmp = path + ".tmp"
        with open(tmp, "w") as fh:
            fh.write("\n".join(lines) + "\n")
        os.replace(tmp, path)


def _arnoldi_extend(a: LinearOperator, basis: list[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    """One Arnoldi step: returns (h column of length k+1, new basis vector or None)."""
    w = a(basis[-1])
    k = len(basis)
    h = np.zeros(k + 1)
    for j in range(k):
        h[j] = float(np.dot(basis[j], w))
        w -= h[j] * basis[j]
    w_norm = float(np.linalg.norm(w))
    defect = max((abs(float(np.dot(v, w))) for v in basis), default=0.0)
    if w_norm > 0 and defect > REORTH_TOL * w_norm:
        for j in range(k):
            corr = float(np.dot(basis[j], w))
            h[j] += corr
            w -= corr * basis[j]
        w_norm = float(np.linalg.norm(w))
    h[k] = w_norm
    return h, (w / w_norm if w_norm > 0 else None)


def gmres_restarted(
    a: LinearOperator,
    b: np.ndarray,
    x0: np.ndarray | None = None,
    restart: int = 20,
    tol: float = 1e-10,
    max_outer: int = 10,
    cost_per_matvec: float = 0.0,
    cost_offset: float = 0.0,
    max_total_inner: int | None = None,
) -> GmresResult:
    """GMRES(restart): Arnoldi least squares inside each window, then the
    window's final iterate seeds the next window.

    ``tol`` is relative to ||b|| (absolute when b = 0).  A happy Arnoldi
    breakdown means the solution lies in the current subspace and returns
    early.  ``cost_per_matvec``/``cost_offset`` feed the grad-equivalents
    column of the residual history.
    """
    if restart < 1:
        raise ValueError("restart must be at least 1")
    if tol <= 0:
        raise ValueError("tol must be positive")
    b = np.asarray(b, dtype=np.float64)
    x = np.zeros(a.n) if x0 is None else np.asarray(x0, dtype=np.float64).copy()
    b_norm = float(np.linalg.norm(b))
    target = tol * (b_norm if b_norm > 0 else 1.0)

    result = GmresResult(x=x)
    matvecs = 0
    total_inner = 0

    def cost() -> float:
        return cost_offset + cost_per_matvec * matvecs

    for outer in range(max_outer):
        r = b - a(x)
        matvecs += 1
        beta = float(np.linalg.norm(r))
        if outer == 0:
            result.history.append(ResidualRecord(outer, 0, beta, cost()))
        if beta <= target:
            result.x = x
            result.converged = True
            return result
        basis = [r / beta]
        # Hessenberg triangularized on the fly by Givens rotations
        r_cols: list[np.ndarray] = []
        cs: list[float] = []
        sn: list[float] = []
        g = [beta]
        breakdown = False
        k = 0
        while k < restart:
            if max_total_inner is not None and total_inner >= max_total_inner:
                break
            h, v_next = _arnoldi_extend(a, basis)
            matvecs += 1
            total_inner += 1
            col = h[: k + 1].copy()
            for j in range(k):
                t = cs[j] * col[j] + sn[j] * col[j + 1]
                col[j + 1] = -sn[j] * col[j] + cs[j] * col[j + 1]
                col[j] = t
            rad = math.hypot(col[k], h[k + 1])
            if rad == 0.0:
                c_k, s_k = 1.0, 0.0
            else:
                c_k, s_k = col[k] / rad, h[k + 1] / rad
            cs.append(c_k)
            sn.append(s_k)
            col[k] = c_k * col[k] + s_k * h[k + 1]
            r_cols.append(col)
            g.append(-s_k * g[k])
            g[k] = c_k * g[k]
            res_norm = abs(g[k + 1])
            result.history.append(ResidualRecord(outer, k + 1, res_norm, cost()))
            k += 1
            if h[k] <= BREAKDOWN_TOL * max(beta, 1.0) or v_next is None:
                breakdown = True
                break
            basis.append(v_next)
            if res_norm <= target:
                break
        if k > 0:
            y = np.zeros(k)
            for i in range(k - 1, -1, -1):
                acc = g[i]
                for j in range(i + 1, k):
                    acc -= r_cols[j][i] * y[j]
                y[i] = acc / r_cols[i][i]
            for i in range(k):
                x = x + y[i] * basis[i]
        result.x = x
        if result.history[-1].residual_norm <= target or breakdown:
            result.converged = result.history[-1].residual_norm <= target or breakdown
            return result
        if max_total_inner is not None and total_inner >= max_total_inner:
            return result
    return result


# ---------------------------------------------------------------------------
# LSRTM via the normal equations
# ---------------------------------------------------------------------------


def lsrtm_normal_operator(
    background: VelocityModel,
    geometry: AcquisitionGeometry,
    wavelet: SourceWavelet,
    config: SimConfig = SimConfig(),
    kernel: BornKernel | None = None,
) -> LinearOperator:
    """The symmetric positive semidefinite action m_r -> L^T L m_r (flattened)."""
    kernel = kernel or BornKernel(background, wavelet, geometry, config)
    shape = kernel.ws.grid.shape
    n = shape[0] * shape[1]

    def matvec(x):
        return kernel.adjoint(kernel.forward(x.reshape(shape))).ravel()

    op = LinearOperator(n, matvec)
    op.kernel = kernel
    return op


def lsrtm_gmres(
    background: VelocityModel,
    d_r,
    wavelet: SourceWavelet,
    geometry: AcquisitionGeometry,
    config: SimConfig = SimConfig(),
    restart: int = 3,
    iterations: int = 20,
    zero_start: bool = False,
    kernel: BornKernel | None = None,
) -> tuple[np.ndarray, GmresResult]:
    """Solve L^T L m_r = m_RTM with restarted GMRES.

    The right-hand side is the RTM image L^T d_r (formed once, costing half a
    gradient-equivalent); it also serves as the starting guess unless
    ``zero_start``.  Each inner iteration costs one Born plus one adjoint
    solve, i.e. one gradient-equivalent.
    """
    kernel = kernel or BornKernel(background, wavelet, geometry, config)
    op = lsrtm_normal_operator(background, geometry, wavelet, config, kernel=kernel)
    m_rtm = kernel.adjoint(d_r)
    x0 = None if zero_start else m_rtm.ravel().copy()
    outer_cap = max(1, -(-iterations // restart) + 1)
    result = gmres_restarted(
        op,
        m_rtm.ravel(),
        x0=x0,
        restart=restart,
        tol=1e-12,
        max_outer=outer_cap,
        cost_per_matvec=1.0,
        cost_offset=0.5,
        max_total_inner=iterations,
    )
    return result.x.reshape(background.grid.shape), result
