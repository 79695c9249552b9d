"""Sliding QR factorization with column append/drop rank updates.

Supports the residual-difference window of Anderson acceleration: columns are
appended as new iterates arrive and the oldest column is dropped when the
window is full.  Appends use twice-orthogonalized Gram-Schmidt; drops restore
triangularity with Givens rotations, so Q stays orthonormal and Q @ R tracks
the current window to ~1e-14 regardless of the operation sequence.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.linalg import solve_triangular


class EmptyWindowError(Exception):
    """Operation requires at least one stored column."""


class SlidingQR:
    def __init__(self, rows: int):
        if rows < 1:
            raise ValueError("rows must be positive")
        self.rows = rows
        self.q = np.zeros((rows, 0))
        self.r = np.zeros((0, 0))

    @property
    def ncols(self) -> int:
        return self.r.shape[1]

    def append_column(self, col: np.ndarray) -> None:
        a = np.asarray(col, dtype=np.float64)
        if a.shape != (self.rows,):
            raise ValueError(f"column must have shape ({self.rows},)")
        if self.ncols >= self.rows:
            raise ValueError("cannot have more columns than rows")
        h = self.q.T @ a
        w = a - self.q @ h
        # one reorthogonalization pass keeps orthonormality at machine level
        h2 = self.q.T @ w
        w -= self.q @ h2
        h += h2
        rho = float(np.linalg.norm(w))
        scale = max(float(np.linalg.norm(a)), 1.0)
        if rho <= 1e-300 or rho < 1e-15 * scale:
            # numerically dependent column: record a zero basis direction so
            # reconstruction stays exact; callers drop it via the R diagonal
            q_new = np.zeros(self.rows)
            rho = 0.0
        else:
            q_new = w / rho
        k = self.ncols
        self.q = np.column_stack([self.q, q_new])
        new_r = np.zeros((k + 1, k + 1))
        new_r[:k, :k] = self.r
        new_r[:k, k] = h
        new_r[k, k] = rho
        self.r = new_r

    def drop_first_column(self) -> None:
        k = self.ncols
        if k == 0:
            raise EmptyWindowError("drop on empty window")
        r = np.ascontiguousarray(self.r[:, 1:])  # (k, k-1) upper Hessenberg
        q = self.q.copy()
        for i in range(k - 1):
            a, b = r[i, i], r[i + 1, i]
            rad = math.hypot(a, b)
            if rad == 0.0:
                c, s = 1.0, 0.0
            else:
                c, s = a / rad, b / rad
            gi = np.array([[c, s], [-s, c]])
            r[i : i + 2, i:] = gi @ r[i : i + 2, i:]
            q[:, i : i + 2] = q[:, i : i + 2] @ gi.T
        self.r = r[: k - 1, :]
        self.q = q[:, : k - 1]

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Least-squares coefficients gamma minimizing ||A gamma - rhs||."""
        if self.ncols == 0:
            raise EmptyWindowError("solve on empty window")
        qt_rhs = self.q.T @ rhs
        return solve_triangular(self.r, qt_rhs, lower=False)

    def residual_norm(self, rhs: np.ndarray) -> float:
        """min_gamma ||A gamma - rhs||, never above ||rhs|| (gamma = 0 is feasible)."""
        rhs = np.asarray(rhs, dtype=np.float64)
        if self.ncols == 0:
            return float(np.linalg.norm(rhs))
        resid = rhs - self.q @ (self.q.T @ rhs)
        return min(float(np.linalg.norm(resid)), float(np.linalg.norm(rhs)))

    def diag(self) -> np.ndarray:
        return np.abs(np.diag(self.r))

    def frobenius(self) -> float:
        return float(np.linalg.norm(self.r))

    def reconstruct(self) -> np.ndarray:
        return self.q @ self.r
