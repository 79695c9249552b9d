"""Objectives, adjoint sources, and adjoint-state gradients for FWI and LSRTM,
plus RTM imaging and Laplacian filtering.

The gradients here are exact derivatives of the discrete solver in wavesim:
the imaging condition cross-correlates the adjoint field against the
recursion's own acceleration history and folds the absorbing-border
contributions back onto the edge cells, so central finite differences agree
to oracle precision.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .counting import EvalCounters
from .grid import AcquisitionGeometry, ReflectivityModel, SourceWavelet, VelocityModel
from .wavesim import (
    ShotGather,
    SimConfig,
    Workspace,
    _adjoint_sweep,
    _forward_sweep,
    extend_to_pad,
    fold_pad,
)


@dataclass
class ObjectiveEval:
    """One objective/gradient evaluation: J, dJ/dm, and its counted cost."""

    value: float
    gradient: np.ndarray
    gradient_eval_count_delta: int = 1


def pairwise_sum(arrays):
    """Order-insensitive deterministic reduction of per-shot contributions."""
    items = [np.asarray(a) for a in arrays]
    if not items:
        raise ValueError("nothing to sum")
    while len(items) > 1:
        items = [
            items[i] + items[i + 1] if i + 1 < len(items) else items[i]
            for i in range(0, len(items), 2)
        ]
    return items[0]


def _check_matching(synthetic, observed):
    if len(synthetic) != len(observed):
        raise ValueError("gather counts differ")
    for s, o in zip(synthetic, observed):
        if s.samples.shape != o.samples.shape:
            raise ValueError(
                f"gather shapes differ: {s.samples.shape} vs {o.samples.shape}"
            )


def trapezoid_weights(nt: int) -> np.ndarray:
    w = np.ones(nt)
    w[0] = 0.5
    w[-1] = 0.5
    return w


def misfit_l2(synthetic, observed) -> float:
    """1/2 sum over shots/receivers of the trapezoidal time integral of
    squared differences."""
    _check_matching(synthetic, observed)
    total = 0.0
    for s, o in zip(synthetic, observed):
        w = trapezoid_weights(s.nt)
        diff = s.samples - o.samples
        total += 0.5 * s.dt * float(np.einsum("t,tr->", w, diff * diff))
    return total


def adjoint_source(synthetic, observed):
    """Elementwise data residual f - g, one gather per shot."""
    _check_matching(synthetic, observed)
    return [
        ShotGather(source_index=s.source_index, samples=s.samples - o.samples, dt=s.dt)
        for s, o in zip(synthetic, observed)
    ]


def _map_shots(fn, n_shots: int, threads: int):
    if threads <= 1:
        return [fn(s) for s in range(n_shots)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(n_shots)))


def fwi_synthetic(
    model: VelocityModel,
    wavelet: SourceWavelet,
    geometry: AcquisitionGeometry,
    config: SimConfig = SimConfig(),
    threads: int = 1,
    workspace: Workspace | None = None,
):
    """Forward-model all shots (no histories): the data f(m)."""
    ws = workspace or Workspace(model, geometry, config)

    def one(s):
        gather, _ = _forward_sweep(
            ws, geometry.nt, point_amp=wavelet.samples, source_index=s, keep_accel=False
        )
        return ShotGather(source_index=s, samples=gather, dt=geometry.dt)

    return _map_shots(one, geometry.n_sources, threads)


def fwi_gradient(
    model: VelocityModel,
    observed,
    wavelet: SourceWavelet,
    geometry: AcquisitionGeometry,
    config: SimConfig = SimConfig(),
    counters: EvalCounters | None = None,
    threads: int = 1,
) -> ObjectiveEval:
    """Misfit and its exact gradient via one forward+adjoint pair per shot.

    The adjoint data carries the same trapezoidal quadrature weights as the
    misfit, and the imaging condition is -sum_t accel_t * v_t accumulated on
    the padded grid and folded back, which is the exact transpose of the
    model dependence of the discrete forward map.
    """
    if len(observed) != geometry.n_sources:
        raise ValueError("observed data does not cover all sources")
    ws = Workspace(model, geometry, config)
    w_dt = trapezoid_weights(geometry.nt)[:, None] * geometry.dt

    def one(s):
        gather, hist = _forward_sweep(
            ws, geometry.nt, point_amp=wavelet.samples, source_index=s, keep_accel=True
        )
        resid = gather - observed[s].samples
        value = 0.5 * geometry.dt * float(
            np.einsum("t,tr->", trapezoid_weights(geometry.nt), resid * resid)
        )
        image_pad, _ = _adjoint_sweep(ws, w_dt * resid, image_against=hist)
        return value, image_pad

    results = _map_shots(one, geometry.n_sources, threads)
    value = float(np.sum([r[0] for r in results]))
    grad = fold_pad(pairwise_sum([r[1] for r in results]), ws.pad, ws.grid)
    if counters is not None:
        counters.grad_evals += 1
    return ObjectiveEval(value=value, gradient=grad, gradient_eval_count_delta=1)


class BornKernel:
    """Born modeling about a fixed background: L, its exact transpose, and
    the shared background acceleration histories (computed once)."""

    def __init__(
        self,
        background: VelocityModel,
        wavelet: SourceWavelet,
        geometry: AcquisitionGeometry,
        config: SimConfig = SimConfig(),
        threads: int = 1,
    ):
        self.background = background
        self.geometry = geometry
        self.threads = threads
        self.ws = Workspace(background, geometry, config)
        self.born_applies = 0
        self.adjoint_applies = 0

        def one(s):
            _, hist = _forward_sweep(
                self.ws, geometry.nt, point_amp=wavelet.samples, source_index=s,
                keep_accel=True,
            )
            return hist

        self.histories = _map_shots(one, geometry.n_sources, threads)

    @property
    def grad_equivalents(self) -> float:
        """Half a gradient per one-way sweep over all shots."""
        return 0.5 * (self.born_applies + self.adjoint_applies)

    def forward(self, m_r: np.ndarray):
        """L m_r: scattered data for a reflectivity array (grid shaped)."""
        m_r_pad = extend_to_pad(np.asarray(m_r, dtype=np.float64), self.ws.pad)
        scale = -m_r_pad

        def one(s):
            gather, _ = _forward_sweep(
                self.ws, self.geometry.nt,
                grid_source_hist=self.histories[s], grid_source_scale=scale,
                keep_accel=False,
            )
            return ShotGather(source_index=s, samples=gather, dt=self.geometry.dt)

        self.born_applies += 1
        return _map_shots(one, self.geometry.n_sources, self.threads)

    def adjoint(self, data) -> np.ndarray:
        """L^T y: migrated image of data-shaped y (grid-shaped output)."""
        if len(data) != self.geometry.n_sources:
            raise ValueError("data does not cover all sources")

        def one(s):
            image_pad, _ = _adjoint_sweep(
                self.ws, data[s].samples, image_against=self.histories[s]
            )
            return image_pad

        images = _map_shots(one, self.geometry.n_sources, self.threads)
        self.adjoint_applies += 1
        return fold_pad(pairwise_sum(images), self.ws.pad, self.ws.grid)


def apply_born(
    background: VelocityModel,
    reflectivity: ReflectivityModel,
    wavelet: SourceWavelet,
    geometry: AcquisitionGeometry,
    config: SimConfig = SimConfig(),
    kernel: BornKernel | None = None,
):
    """Scattered data L m_r over all shots."""
    kernel = kernel or BornKernel(background, wavelet, geometry, config)
    return kernel.forward(reflectivity.m_r)


def apply_born_adjoint(
    background: VelocityModel,
    data,
    wavelet: SourceWavelet,
    geometry: AcquisitionGeometry,
    config: SimConfig = SimConfig(),
    kernel: BornKernel | None = None,
) -> np.ndarray:
    """Migrated image L^T d over all shots (the RTM image for observed data)."""
    kernel = kernel or BornKernel(background, wavelet, geometry, config)
    return kernel.adjoint(data)


def data_norm(gathers) -> float:
    return float(np.sqrt(sum(np.sum(g.samples * g.samples) for g in gathers)))


def lsrtm_objective(
    background: VelocityModel,
    m_r: np.ndarray,
    d_r,
    wavelet: SourceWavelet | None = None,
    geometry: AcquisitionGeometry | None = None,
    config: SimConfig = SimConfig(),
    kernel: BornKernel | None = None,
    counters: EvalCounters | None = None,
) -> ObjectiveEval:
    """J(m_r) = 1/2 ||L m_r - d_r||^2 with gradient L^T (L m_r - d_r)."""
    if kernel is None:
        if wavelet is None or geometry is None:
            raise ValueError("need wavelet and geometry when no kernel is given")
        kernel = BornKernel(background, wavelet, geometry, config)
    synthetic = kernel.forward(np.asarray(m_r, dtype=np.float64))
    resid = [
        ShotGather(source_index=s.source_index, samples=s.samples - o.samples, dt=s.dt)
        for s, o in zip(synthetic, d_r)
    ]
    value = 0.5 * sum(float(np.sum(r.samples * r.samples)) for r in resid)
    grad = kernel.adjoint(resid)
    if counters is not None:
        counters.grad_evals += 1
    return ObjectiveEval(value=value, gradient=grad, gradient_eval_count_delta=1)


def laplacian_filter(image: np.ndarray) -> np.ndarray:
    """Negated 5-point unit-spacing Laplacian with edge replication.

    High-pass filter that suppresses the smooth migration artifacts of RTM
    images; the sign keeps reflector polarity.
    """
    arr = np.asarray(image, dtype=np.float64)
    padded = np.pad(arr, 1, mode="edge")
    lap = (
        padded[:-2, 1:-1] + padded[2:, 1:-1] + padded[1:-1, :-2] + padded[1:-1, 2:]
        - 4.0 * arr
    )
    return -lap


# ---------------------------------------------------------------------------
# Objective wrappers with evaluation accounting
# ---------------------------------------------------------------------------


class FwiObjective:
    """FWI misfit over squared slowness, flattened for the optimizers."""

    def __init__(self, grid, observed, wavelet, geometry, config=SimConfig(), threads=1):
        self.grid = grid
        self.observed = observed
        self.wavelet = wavelet
        self.geometry = geometry
        self.config = config
        self.threads = threads
        self.counters = EvalCounters()

    def _model(self, p: np.ndarray) -> VelocityModel | None:
        values = np.asarray(p, dtype=np.float64).reshape(self.grid.shape)
        if not np.all(np.isfinite(values)) or np.any(values <= 0):
            return None
        return VelocityModel(self.grid, values)

    def value(self, p) -> float:
        model = self._model(p)
        if model is None:
            return float("inf")
        self.counters.obj_evals += 1
        synthetic = fwi_synthetic(
            model, self.wavelet, self.geometry, self.config, threads=self.threads
        )
        return misfit_l2(synthetic, self.observed)

    def value_and_grad(self, p):
        model = self._model(p)
        if model is None:
            raise ValueError("model is not positive and finite")
        ev = fwi_gradient(
            model, self.observed, self.wavelet, self.geometry, self.config,
            counters=self.counters, threads=self.threads,
        )
        return ev.value, ev.gradient.ravel()


class LsrtmObjective:
    """Linearized least-squares migration objective over reflectivity."""

    def __init__(self, kernel: BornKernel, d_r):
        self.kernel = kernel
        self.d_r = d_r
        self.counters = EvalCounters()

    @property
    def grid(self):
        return self.kernel.ws.grid

    def residual_norm(self, p) -> float:
        """||L m_r - d_r||; costs one Born apply (used by benchmark diagnostics)."""
        synthetic = self.kernel.forward(np.asarray(p, dtype=np.float64).reshape(self.grid.shape))
        return float(
            np.sqrt(
                sum(
                    np.sum((s.samples - o.samples) ** 2)
                    for s, o in zip(synthetic, self.d_r)
                )
            )
        )

    def value(self, p) -> float:
        self.counters.obj_evals += 1
        synthetic = self.kernel.forward(np.asarray(p, dtype=np.float64).reshape(self.grid.shape))
        return 0.5 * sum(
            float(np.sum((s.samples - o.samples) ** 2))
            for s, o in zip(synthetic, self.d_r)
        )

    def value_and_grad(self, p):
        ev = lsrtm_objective(
            self.kernel.background,
            np.asarray(p, dtype=np.float64).reshape(self.grid.shape),
            self.d_r,
            kernel=self.kernel, counters=self.counters,
        )
        return ev.value, ev.gradient.ravel()
