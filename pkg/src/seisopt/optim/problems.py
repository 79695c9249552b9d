"""Objective wrappers used by the optimizers.

An objective exposes ``value(p)``, ``value_and_grad(p)`` and a ``counters``
attribute; the PDE-backed versions live in seisopt.gradients.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..counting import EvalCounters


class QuadraticObjective:
    """J(p) = 1/2 p^T A p - b^T p for a symmetric matrix or diagonal A."""

    def __init__(self, a, b=None):
        a = np.asarray(a, dtype=np.float64)
        self.a = np.diag(a) if a.ndim == 1 else a
        self.b = np.zeros(self.a.shape[0]) if b is None else np.asarray(b, dtype=np.float64)
        self.counters = EvalCounters()

    def _grad(self, p):
        return self.a @ p - self.b

    def value(self, p) -> float:
        self.counters.obj_evals += 1
        return 0.5 * float(p @ self.a @ p) - float(self.b @ p)

    def value_and_grad(self, p):
        self.counters.grad_evals += 1
        return 0.5 * float(p @ self.a @ p) - float(self.b @ p), self._grad(p)

    def exact_line_step(self, p, d) -> float:
        """Minimizer of J along p + s d (used as an exact-line-search oracle)."""
        g = self._grad(p)
        denom = float(d @ self.a @ d)
        if denom <= 0:
            return 0.0
        return -float(g @ d) / denom


class CallableObjective:
    """Adapts plain callables f(p) and grad(p) to the objective interface."""

    def __init__(self, f, grad):
        self.f = f
        self.grad = grad
        self.counters = EvalCounters()

    def value(self, p) -> float:
        self.counters.obj_evals += 1
        return float(self.f(p))

    def value_and_grad(self, p):
        self.counters.grad_evals += 1
        return float(self.f(p)), np.asarray(self.grad(p), dtype=np.float64)


@dataclass
class GradientDescentOperator:
    """Fixed-point operator G(p) = p - eta * grad J(p) of steepest descent."""

    problem: object
    eta: float

    def __call__(self, p: np.ndarray) -> np.ndarray:
        _, g = self.problem.value_and_grad(p)
        return p - self.eta * g


@dataclass
class LinearFixedPoint:
    """G(p) = M p + c; fixed point solves (I - M) p = c.  Test workhorse."""

    m: np.ndarray
    c: np.ndarray

    def __call__(self, p: np.ndarray) -> np.ndarray:
        return self.m @ p + self.c


def default_eta(p0: np.ndarray, g0: np.ndarray) -> float:
    """Step so the first update moves the model by at most 1% of its range."""
    g_inf = float(np.max(np.abs(g0)))
    if g_inf == 0.0:
        return 1.0
    scale = float(np.ptp(p0))
    if scale == 0.0:
        scale = max(1.0, float(np.max(np.abs(p0))))
    return 0.01 * scale / g_inf
