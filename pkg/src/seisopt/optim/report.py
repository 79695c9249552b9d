"""Per-iteration optimizer records and their CSV serialization."""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

_COLUMNS = ("iteration", "objective", "grad_norm", "grad_evals", "obj_evals", "step")


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.17g}"


@dataclass
class IterationRecord:
    iteration: int
    objective: float
    grad_norm: float
    grad_evals: int
    obj_evals: int
    step: float


@dataclass
class OptimizerReport:
    method: str
    rows: list[IterationRecord] = field(default_factory=list)

    def append(self, **kwargs) -> None:
        self.rows.append(IterationRecord(**kwargs))

    @property
    def final_objective(self) -> float:
        return self.rows[-1].objective if self.rows else float("nan")

    def objectives(self) -> np.ndarray:
        return np.array([r.objective for r in self.rows])

    def grad_norms(self) -> np.ndarray:
        return np.array([r.grad_norm for r in self.rows])

    def to_csv(self, path: str) -> None:
        lines = [",".join(_COLUMNS)]
        for r in self.rows:
            lines.append(
                ",".join(
                    _fmt(v)
                    for v in (r.iteration, r.objective, r.grad_norm, r.grad_evals, r.obj_evals, r.step)
                )
            )
        tmp = path + ".tmp"
        with open(tmp, "w") as fh:
            fh.write("\n".join(lines) + "\n")
        os.replace(tmp, path)


@dataclass
class OptimizeResult:
    """Final iterate plus the iteration report and method-specific diagnostics."""

    p: np.ndarray
    report: OptimizerReport
    extras: dict = field(default_factory=dict)
