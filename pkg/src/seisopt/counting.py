"""Cost accounting for PDE-backed objectives.

A gradient evaluation means one full forward+adjoint sweep over all shots.
Objective-only evaluations (forward modeling, no adjoint) run half the PDE
solves and therefore count 0.5 gradient-equivalents.  Both raw counters are
kept so either convention can be reported.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass
class EvalCounters:
    grad_evals: int = 0
    obj_evals: int = 0

    @property
    def grad_equivalents(self) -> float:
        return self.grad_evals + 0.5 * self.obj_evals

    def snapshot(self) -> "EvalCounters":
        return EvalCounters(self.grad_evals, self.obj_evals)
