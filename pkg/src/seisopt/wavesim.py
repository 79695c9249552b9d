"""Time-domain finite-difference solver for the 2D constant-density acoustic
wave equation: forward modeling, Born scattering, and adjoint propagation.

Scheme: second-order leapfrog in time, 5-point Laplacian in space, on a grid
padded with an exponential sponge layer.  One step maps (u_n, u_{n-1}) to

    a_n     = (lap(u_n) + q_n) / m          # acceleration, kept as history
    u_{n+1} = d * (2 u_n - u_{n-1} + dt^2 a_n)
    u_n     = d * u_n

with d the damping mask (1 in the interior).  Because the mask and 1/m are
diagonal and the Dirichlet Laplacian is symmetric, the adjoint solve below is
the exact transpose of this recursion, so Born forward/adjoint pairs satisfy
the dot test to machine precision.  Receiver sampling and source injection
use matched bilinear stencils.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .grid import (
    AcquisitionGeometry,
    Grid2D,
    GridFileError,
    HeaderMismatchError,
    ReflectivityModel,
    SizeMismatchError,
    SourceWavelet,
    VelocityModel,
)

GATHER_FORMAT_TAG = "seisopt-gather-v1"


class StabilityError(Exception):
    """Time step violates the CFL bound of the explicit scheme."""


@dataclass(frozen=True)
class SimConfig:
    """Absorbing-border geometry and stability margin.

    The sponge damps by exp(-damping_strength * k^2) at k cells into the
    border.  With the defaults the outermost cell damps to ~8.5e-3 per step.
    ``damp_top=False`` removes the top border entirely, leaving a reflective
    (free-surface style) top edge.
    """

    border_width: int = 30
    damping_strength: float = 0.0053
    cfl_safety: float = 0.9
    damp_top: bool = True

    def __post_init__(self):
        if self.border_width < 0:
            raise ValueError("border_width must be non-negative")
        if not (0.0 < self.cfl_safety <= 1.0):
            raise ValueError("cfl_safety must lie in (0, 1]")
        if self.damping_strength < 0:
            raise ValueError("damping_strength must be non-negative")


@dataclass
class ShotGather:
    """Receiver-sampled wavefield time series for one source."""

    source_index: int
    samples: np.ndarray  # (nt, n_receivers)
    dt: float

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError("gather samples must be 2-D (nt, n_receivers)")
        self.samples = arr

    @property
    def nt(self) -> int:
        return self.samples.shape[0]

    @property
    def n_receivers(self) -> int:
        return self.samples.shape[1]


def cfl_check(model: VelocityModel, dt: float | None = None, cfl_safety: float = 1.0) -> float:
    """Largest stable time step: cfl_safety * min(dx, dz) / (c_max * sqrt(2)).

    Informational: never raises.  Callers must ensure dt <= the returned value
    (the solvers enforce this and raise StabilityError otherwise).
    """
    grid = model.grid
    h = min(grid.dx, grid.dz)
    return cfl_safety * h / (model.c_max * math.sqrt(2.0))


# ---------------------------------------------------------------------------
# Padded workspace
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PadSpec:
    """Per-side border widths of the padded computational domain."""

    top: int
    bottom: int
    left: int
    right: int

    def padded_shape(self, grid: Grid2D) -> tuple[int, int]:
        return (grid.nz + self.top + self.bottom, grid.nx + self.left + self.right)


def pad_spec(config: SimConfig) -> PadSpec:
    w = config.border_width
    return PadSpec(top=w if config.damp_top else 0, bottom=w, left=w, right=w)


def extend_to_pad(values: np.ndarray, pad: PadSpec) -> np.ndarray:
    """Edge-replicate a physical-grid array onto the padded grid."""
    return np.pad(values, ((pad.top, pad.bottom), (pad.left, pad.right)), mode="edge")


def restrict_to_interior(padded: np.ndarray, pad: PadSpec, grid: Grid2D) -> np.ndarray:
    return padded[pad.top : pad.top + grid.nz, pad.left : pad.left + grid.nx]


def fold_pad(padded: np.ndarray, pad: PadSpec, grid: Grid2D) -> np.ndarray:
    """Exact transpose of extend_to_pad: fold border sums onto the edge cells."""
    work = padded.copy()
    if pad.top:
        work[pad.top] += work[:pad.top].sum(axis=0)
    if pad.bottom:
        work[-pad.bottom - 1] += work[-pad.bottom:].sum(axis=0)
    work = work[pad.top : pad.top + grid.nz]
    if pad.left:
        work[:, pad.left] += work[:, :pad.left].sum(axis=1)
    if pad.right:
        work[:, -pad.right - 1] += work[:, -pad.right:].sum(axis=1)
    return work[:, pad.left : pad.left + grid.nx].copy()


def damping_mask(grid: Grid2D, config: SimConfig) -> np.ndarray:
    """Separable sponge mask on the padded grid; 1 in the physical interior."""
    pad = pad_spec(config)
    nzp, nxp = pad.padded_shape(grid)

    def profile(n: int, before: int, after: int) -> np.ndarray:
        p = np.ones(n)
        k = np.arange(before, 0, -1, dtype=np.float64)
        p[:before] = np.exp(-config.damping_strength * k * k)
        k = np.arange(1, after + 1, dtype=np.float64)
        p[n - after :] = np.exp(-config.damping_strength * k * k)
        return p

    pz = profile(nzp, pad.top, pad.bottom)
    px = profile(nxp, pad.left, pad.right)
    return np.outer(pz, px)


def _bilinear_stencil(points, grid: Grid2D, pad: PadSpec, shape):
    """Rows, cols, weights (each (4, npts)) of the bilinear stencil at points."""
    nzp, nxp = shape
    xs = np.array([p[0] for p in points]) / grid.dx + pad.left
    zs = np.array([p[1] for p in points]) / grid.dz + pad.top
    i0 = np.minimum(np.floor(zs).astype(int), nzp - 2)
    j0 = np.minimum(np.floor(xs).astype(int), nxp - 2)
    tz = zs - i0
    tx = xs - j0
    rows = np.stack([i0, i0 + 1, i0, i0 + 1])
    cols = np.stack([j0, j0, j0 + 1, j0 + 1])
    weights = np.stack([(1 - tz) * (1 - tx), tz * (1 - tx), (1 - tz) * tx, tz * tx])
    return rows, cols, weights


class Workspace:
    """Precomputed padded-model arrays and sampling stencils for one setup."""

    def __init__(self, model: VelocityModel, geometry: AcquisitionGeometry, config: SimConfig):
        geometry.validate_against(model.grid)
        bound = cfl_check(model, geometry.dt, config.cfl_safety)
        if geometry.dt > bound:
            raise StabilityError(
                f"dt={geometry.dt} exceeds stable bound {bound:.6g} "
                f"(c_max={model.c_max:.6g}, safety={config.cfl_safety})"
            )
        self.model = model
        self.geometry = geometry
        self.config = config
        self.grid = model.grid
        self.pad = pad_spec(config)
        self.shape = self.pad.padded_shape(self.grid)
        self.m_pad = extend_to_pad(model.m, self.pad)
        self.inv_m = 1.0 / self.m_pad
        self.damp = damping_mask(self.grid, config)
        self.dt2 = geometry.dt * geometry.dt
        self.rx = 1.0 / (self.grid.dx * self.grid.dx)
        self.rz = 1.0 / (self.grid.dz * self.grid.dz)
        self.center = -2.0 * (self.rx + self.rz)
        self.rec_rows, self.rec_cols, self.rec_w = _bilinear_stencil(
            geometry.receivers, self.grid, self.pad, self.shape
        )
        self.src_rows, self.src_cols, self.src_w = _bilinear_stencil(
            geometry.sources, self.grid, self.pad, self.shape
        )
        # point sources approximate a Dirac delta: weight / cell area
        self.src_scale = 1.0 / (self.grid.dx * self.grid.dz)

    def laplacian(self, u: np.ndarray, out: np.ndarray) -> np.ndarray:
        """5-point Laplacian with zero-Dirichlet exterior, written into out."""
        np.multiply(u, self.center, out=out)
        out[1:, :] += u[:-1, :] * self.rz
        out[:-1, :] += u[1:, :] * self.rz
        out[:, 1:] += u[:, :-1] * self.rx
        out[:, :-1] += u[:, 1:] * self.rx
        return out

    def sample_receivers(self, u: np.ndarray) -> np.ndarray:
        return np.einsum("kr,kr->r", u[self.rec_rows, self.rec_cols], self.rec_w)

    def inject_receivers(self, u: np.ndarray, amplitudes: np.ndarray) -> None:
        np.add.at(u, (self.rec_rows, self.rec_cols), self.rec_w * amplitudes)


@dataclass
class WavefieldHistory:
    """Per-step acceleration (lap(u) + q)/m on the padded grid.

    This is the scheme's own second time derivative of the wavefield; it is
    exactly what the Born source and the imaging condition need.
    """

    accel: np.ndarray  # (nt, nzp, nxp)
    pad: PadSpec
    grid: Grid2D
    dt: float

    def accel_physical(self, n: int) -> np.ndarray:
        return restrict_to_interior(self.accel[n], self.pad, self.grid)


@dataclass
class AdjointHistory:
    """Per-step adjoint field v_n on the padded grid (source-sensitivity units)."""

    v: np.ndarray  # (nt, nzp, nxp)
    pad: PadSpec
    grid: Grid2D
    dt: float


def _forward_sweep(
    ws: Workspace,
    nt: int,
    point_amp: np.ndarray | None = None,
    source_index: int = 0,
    grid_source_hist: np.ndarray | None = None,
    grid_source_scale: np.ndarray | None = None,
    keep_accel: bool = True,
):
    """Run the damped leapfrog recursion from rest.

    The source is either a point source (``point_amp`` per step, injected with
    the bilinear stencil of ``source_index``) or a full-grid history scaled by
    ``grid_source_scale`` per cell (Born).  Returns (gather, accel history).
    """
    shape = ws.shape
    cur = np.zeros(shape)
    prev = np.zeros(shape)
    acc = np.empty(shape)
    gather = np.zeros((nt, ws.geometry.n_receivers))
    hist = np.empty((nt, *shape)) if keep_accel else None

    if point_amp is not None:
        srow = ws.src_rows[:, source_index]
        scol = ws.src_cols[:, source_index]
        sw = ws.src_w[:, source_index] * ws.src_scale

    for n in range(nt):
        gather[n] = ws.sample_receivers(cur)
        ws.laplacian(cur, out=acc)
        if grid_source_hist is not None:
            acc += grid_source_hist[n] * grid_source_scale
        acc *= ws.inv_m
        if point_amp is not None and point_amp[n] != 0.0:
            np.add.at(acc, (srow, scol), point_amp[n] * sw * ws.inv_m[srow, scol])
        if keep_accel:
            hist[n] = acc
        # nxt = damp * (2 cur - prev + dt^2 acc); prev = damp * cur
        acc *= ws.dt2
        acc += cur
        acc += cur
        acc -= prev
        acc *= ws.damp
        cur *= ws.damp
        prev, cur, acc = cur, acc, prev
    return gather, hist


def _adjoint_sweep(
    ws: Workspace,
    ybar: np.ndarray,
    image_against: np.ndarray | None = None,
    keep_v: bool = False,
):
    """Exact transpose of _forward_sweep's data map.

    ``ybar`` is the (nt, n_receivers) adjoint data.  When ``image_against`` is
    a forward acceleration history, accumulates image = -sum_n hist_n * v_n on
    the padded grid (streaming).  When ``keep_v`` is set, materializes the v
    history instead.
    """
    shape = ws.shape
    nt = ybar.shape[0]
    cbar = np.zeros(shape)
    pbar = np.zeros(shape)
    v = np.empty(shape)
    dc = np.empty(shape)
    new_cbar = np.empty(shape)
    image = np.zeros(shape) if image_against is not None else None
    v_hist = np.empty((nt, *shape)) if keep_v else None

    for n in range(nt - 1, -1, -1):
        np.multiply(ws.damp, cbar, out=dc)
        np.multiply(dc, ws.inv_m, out=v)
        v *= ws.dt2
        ws.laplacian(v, out=new_cbar)
        new_cbar += dc
        new_cbar += dc
        pbar *= ws.damp
        new_cbar += pbar
        ws.inject_receivers(new_cbar, ybar[n])
        np.multiply(dc, -1.0, out=pbar)
        cbar, new_cbar = new_cbar, cbar
        if image_against is not None:
            image -= image_against[n] * v
        if keep_v:
            v_hist[n] = v
    return image, v_hist


# ---------------------------------------------------------------------------
# Public solves
# ---------------------------------------------------------------------------


def forward_solve(
    model: VelocityModel,
    wavelet: SourceWavelet,
    geometry: AcquisitionGeometry,
    source_index: int,
    config: SimConfig = SimConfig(),
    workspace: Workspace | None = None,
    keep_history: bool = True,
) -> tuple[ShotGather, WavefieldHistory | None]:
    """Forward acoustic solve from rest for one source."""
    ws = workspace or Workspace(model, geometry, config)
    if wavelet.nt != geometry.nt:
        raise ValueError("wavelet length does not match geometry nt")
    if not (0 <= source_index < geometry.n_sources):
        raise ValueError(f"source_index {source_index} out of range")
    gather, hist = _forward_sweep(
        ws, geometry.nt, point_amp=wavelet.samples, source_index=source_index,
        keep_accel=keep_history,
    )
    history = (
        WavefieldHistory(accel=hist, pad=ws.pad, grid=ws.grid, dt=geometry.dt)
        if keep_history
        else None
    )
    return ShotGather(source_index=source_index, samples=gather, dt=geometry.dt), history


def born_solve(
    background: VelocityModel,
    reflectivity: ReflectivityModel,
    wavelet: SourceWavelet,
    geometry: AcquisitionGeometry,
    source_index: int,
    config: SimConfig = SimConfig(),
    workspace: Workspace | None = None,
    background_history: WavefieldHistory | None = None,
) -> ShotGather:
    """Single-scattering solve: source is -m_r * (d^2 u0 / dt^2).

    The background history may be passed in to amortize it across calls; it
    must come from forward_solve on the same background/geometry/source.
    """
    if background.grid != reflectivity.grid:
        raise ValueError("background and reflectivity must share a grid")
    ws = workspace or Workspace(background, geometry, config)
    if background_history is None:
        _, background_history = forward_solve(
            background, wavelet, geometry, source_index, config, workspace=ws
        )
    m_r_pad = extend_to_pad(reflectivity.m_r, ws.pad)
    gather, _ = _forward_sweep(
        ws,
        geometry.nt,
        grid_source_hist=background_history.accel,
        grid_source_scale=-m_r_pad,
        keep_accel=False,
    )
    return ShotGather(source_index=source_index, samples=gather, dt=geometry.dt)


def adjoint_solve(
    model: VelocityModel,
    adjoint_source: ShotGather,
    geometry: AcquisitionGeometry,
    config: SimConfig = SimConfig(),
    workspace: Workspace | None = None,
) -> AdjointHistory:
    """Backward-in-time solve driven by data injected at the receivers.

    Returns the per-step adjoint field v_n; pairing it against a forward
    acceleration history via -sum_n a_n * v_n gives exact model derivatives.
    """
    ws = workspace or Workspace(model, geometry, config)
    if adjoint_source.samples.shape != (geometry.nt, geometry.n_receivers):
        raise ValueError("adjoint source shape does not match geometry")
    _, v_hist = _adjoint_sweep(ws, adjoint_source.samples, keep_v=True)
    return AdjointHistory(v=v_hist, pad=ws.pad, grid=ws.grid, dt=geometry.dt)


def field_energy(ws: Workspace, prev: np.ndarray, cur: np.ndarray) -> float:
    """Discrete leapfrog energy, exactly conserved by the undamped scheme."""
    vel = (cur - prev) / math.sqrt(ws.dt2)
    kinetic = 0.5 * float(np.sum(ws.m_pad * vel * vel))
    lap = ws.laplacian(prev, out=np.empty_like(prev))
    return kinetic - 0.5 * float(np.sum(cur * lap))


# ---------------------------------------------------------------------------
# Gather file format: JSON header + sibling float32 binary, time-major.
# ---------------------------------------------------------------------------


def _sibling_bin(path: str) -> str:
    stem, _ = os.path.splitext(path)
    return stem + ".bin"


def save_gather(gather: ShotGather, path: str) -> None:
    header = {
        "format": GATHER_FORMAT_TAG,
        "nt": gather.nt,
        "n_receivers": gather.n_receivers,
        "dt": gather.dt,
        "source_index": gather.source_index,
    }
    payload = np.ascontiguousarray(gather.samples, dtype="<f4").tobytes()
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write((json.dumps(header, sort_keys=True, indent=2) + "\n").encode())
    os.replace(tmp, path)
    tmp = _sibling_bin(path) + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(payload)
    os.replace(tmp, _sibling_bin(path))


def load_gather(path: str) -> ShotGather:
    try:
        with open(path, "rb") as fh:
            header = json.loads(fh.read().decode())
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise HeaderMismatchError(f"{path}: malformed header: {exc}") from exc
    if not isinstance(header, dict) or header.get("format") != GATHER_FORMAT_TAG:
        raise HeaderMismatchError(f"{path}: not a {GATHER_FORMAT_TAG} header")
    try:
        nt = int(header["nt"])
        n_rec = int(header["n_receivers"])
        dt = float(header["dt"])
        source_index = int(header["source_index"])
    except (KeyError, TypeError, ValueError) as exc:
        raise HeaderMismatchError(f"{path}: incomplete header: {exc}") from exc
    with open(_sibling_bin(path), "rb") as fh:
        raw = fh.read()
    if len(raw) != nt * n_rec * 4:
        raise SizeMismatchError(
            f"{_sibling_bin(path)}: expected {nt * n_rec * 4} bytes, got {len(raw)}"
        )
    samples = np.frombuffer(raw, dtype="<f4").reshape(nt, n_rec).astype(np.float64)
    return ShotGather(source_index=source_index, samples=samples, dt=dt)
