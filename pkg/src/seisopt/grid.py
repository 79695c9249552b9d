"""Grids, earth models, acquisition geometry, source wavelets and their file formats.

All model quantities are held internally as squared slowness m = 1/c^2 in
s^2/m^2; velocity files store m/s and are converted on load.  Arrays are
float64 with shape (nz, nx): row index is depth.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

FORMAT_TAG = "seisopt-grid-v1"

_QUANTITIES = ("velocity_mps", "slowness_sq", "reflectivity")


class GridFileError(Exception):
    """Base class for model/gather file errors."""


class HeaderMismatchError(GridFileError):
    """Header is missing, malformed, or carries the wrong format tag."""


class SizeMismatchError(GridFileError):
    """Binary payload size disagrees with the header dimensions."""


@dataclass(frozen=True)
class Grid2D:
    """Rectangular grid: nx columns (width), nz rows (depth), spacings in meters."""

    nx: int
    nz: int
    dx: float
    dz: float

    def __post_init__(self):
        if self.nx < 3 or self.nz < 3:
            raise ValueError(f"grid must be at least 3x3, got {self.nx}x{self.nz}")
        if self.dx <= 0 or self.dz <= 0:
            raise ValueError("grid spacings must be positive")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nz, self.nx)

    @property
    def extent_x(self) -> float:
        """Physical width in meters (node-centered: nodes at 0 .. (nx-1)*dx)."""
        return (self.nx - 1) * self.dx

    @property
    def extent_z(self) -> float:
        return (self.nz - 1) * self.dz


def _check_field(grid: Grid2D, values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.shape != grid.shape:
        raise ValueError(f"{name} shape {arr.shape} does not match grid {grid.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


@dataclass(frozen=True)
class VelocityModel:
    """Squared slowness m = 1/c^2 on a grid.  All cells must be positive."""

    grid: Grid2D
    m: np.ndarray

    def __post_init__(self):
        arr = _check_field(self.grid, self.m, "m")
        if np.any(arr <= 0):
            raise ValueError("squared slowness must be positive everywhere")
        object.__setattr__(self, "m", arr)

    @property
    def velocity(self) -> np.ndarray:
        """Wave speed c = 1/sqrt(m) in m/s."""
        return 1.0 / np.sqrt(self.m)

    @property
    def c_max(self) -> float:
        return float(1.0 / math.sqrt(self.m.min()))

    @property
    def c_min(self) -> float:
        return float(1.0 / math.sqrt(self.m.max()))

    @staticmethod
    def from_velocity(grid: Grid2D, c) -> "VelocityModel":
        c = np.asarray(c, dtype=np.float64)
        return VelocityModel(grid, 1.0 / (c * c))


@dataclass(frozen=True)
class ReflectivityModel:
    """Perturbation of squared slowness; may be negative or zero anywhere."""

    grid: Grid2D
    m_r: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "m_r", _check_field(self.grid, self.m_r, "m_r"))


@dataclass(frozen=True)
class AcquisitionGeometry:
    """Source/receiver positions in meters plus the recording time axis."""

    sources: tuple[tuple[float, float], ...]
    receivers: tuple[tuple[float, float], ...]
    dt: float
    nt: int

    def __post_init__(self):
        object.__setattr__(self, "sources", tuple((float(x), float(z)) for x, z in self.sources))
        object.__setattr__(self, "receivers", tuple((float(x), float(z)) for x, z in self.receivers))
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.nt < 2:
            raise ValueError("nt must be at least 2")
        if not self.sources or not self.receivers:
            raise ValueError("need at least one source and one receiver")

    @property
    def n_sources(self) -> int:
        return len(self.sources)

    @property
    def n_receivers(self) -> int:
        return len(self.receivers)

    @property
    def total_time(self) -> float:
        return self.nt * self.dt

    def validate_against(self, grid: Grid2D) -> None:
        """Raise if any position falls outside the physical grid extent."""
        for label, pts in (("source", self.sources), ("receiver", self.receivers)):
            for x, z in pts:
                if not (0.0 <= x <= grid.extent_x and 0.0 <= z <= grid.extent_z):
                    raise ValueError(
                        f"{label} ({x}, {z}) outside grid extent "
                        f"[0, {grid.extent_x}] x [0, {grid.extent_z}]"
                    )


@dataclass(frozen=True)
class SourceWavelet:
    """Amplitude time series with its nominal peak frequency and delay."""

    samples: np.ndarray
    peak_freq: float
    t0: float

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.float64)
        if arr.ndim != 1:
            raise ValueError("wavelet samples must be 1-D")
        if not np.all(np.isfinite(arr)):
            raise ValueError("wavelet contains non-finite values")
        object.__setattr__(self, "samples", arr)

    @property
    def nt(self) -> int:
        return len(self.samples)


def make_ricker(peak_freq: float, dt: float, nt: int, t0: float = 0.0) -> SourceWavelet:
    """Ricker wavelet: (1 - 2 pi^2 f^2 (t-t0)^2) exp(-pi^2 f^2 (t-t0)^2).

    Peaks at amplitude 1 when t0 hits a sample point.
    """
    if peak_freq <= 0:
        raise ValueError("peak frequency must be positive")
    if dt <= 0:
        raise ValueError("dt must be positive")
    if nt < 2:
        raise ValueError("nt must be at least 2")
    t = np.arange(nt) * dt - t0
    a = (math.pi * peak_freq) ** 2 * t * t
    return SourceWavelet(samples=(1.0 - 2.0 * a) * np.exp(-a), peak_freq=peak_freq, t0=t0)


def make_layered_model(grid: Grid2D, layer_depths, layer_velocities) -> VelocityModel:
    """Piecewise-constant model with horizontal layers.

    ``layer_depths`` are the bottom interfaces of all layers but the last, so
    there must be exactly ``len(layer_velocities) - 1`` of them, strictly
    increasing.  An interface at depth d puts its transition at row
    floor(d / dz); layers thinner than one cell vanish on coarse grids.
    """
    depths = [float(d) for d in layer_depths]
    vels = [float(v) for v in layer_velocities]
    if len(depths) != len(vels) - 1:
        raise ValueError("need exactly one more velocity than interface depth")
    if any(d2 <= d1 for d1, d2 in zip(depths, depths[1:])):
        raise ValueError("layer depths must be strictly increasing")
    if any(d <= 0 for d in depths):
        raise ValueError("layer depths must be positive")
    if any(v <= 0 for v in vels):
        raise ValueError("layer velocities must be positive")

    c = np.full(grid.shape, vels[0], dtype=np.float64)
    for d, v in zip(depths, vels[1:]):
        row = int(math.floor(d / grid.dz + 1e-12))
        if row < grid.nz:
            c[row:, :] = v
    return VelocityModel.from_velocity(grid, c)


def smooth_model(model: VelocityModel, radius: float) -> VelocityModel:
    """Gaussian blur of the squared slowness, std = radius cells, edge replicated."""
    if radius < 0:
        raise ValueError("radius must be non-negative")
    if radius == 0:
        return model
    smoothed = gaussian_filter(model.m, sigma=radius, mode="nearest")
    return VelocityModel(model.grid, smoothed)


def smooth_field(arr: np.ndarray, radius: float) -> np.ndarray:
    """Same blur as smooth_model but for a bare array (used for reflectivity)."""
    if radius < 0:
        raise ValueError("radius must be non-negative")
    if radius == 0:
        return np.asarray(arr, dtype=np.float64)
    return gaussian_filter(np.asarray(arr, dtype=np.float64), sigma=radius, mode="nearest")


# ---------------------------------------------------------------------------
# File format: <path>.json header + sibling <path>.bin payload.
# Payload is nx*nz float32 little-endian, row-major depth-major (z fastest).
# ---------------------------------------------------------------------------


def _sibling_bin(path: str) -> str:
    stem, _ = os.path.splitext(path)
    return stem + ".bin"


def _atomic_write(path: str, data: bytes) -> None:
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def save_grid(model, path: str, quantity: str | None = None) -> None:
    """Write a model as a JSON header plus raw float32 binary.

    ``quantity`` defaults to "velocity_mps" for VelocityModel (values are
    converted to m/s on write) and "reflectivity" for ReflectivityModel.
    Pass "slowness_sq" for a conversion-free velocity-model round trip.
    """
    if isinstance(model, VelocityModel):
        quantity = quantity or "velocity_mps"
        values = model.velocity if quantity == "velocity_mps" else model.m
    elif isinstance(model, ReflectivityModel):
        quantity = quantity or "reflectivity"
        values = model.m_r
    else:
        raise TypeError(f"cannot save object of type {type(model).__name__}")
    if quantity not in _QUANTITIES:
        raise ValueError(f"unknown quantity {quantity!r}")

    grid = model.grid
    header = {
        "format": FORMAT_TAG,
        "nx": grid.nx,
        "nz": grid.nz,
        "dx": grid.dx,
        "dz": grid.dz,
        "quantity": quantity,
    }
    # file order is z fastest: transpose the (nz, nx) array to (nx, nz)
    payload = np.ascontiguousarray(values.T, dtype="<f4").tobytes()
    _atomic_write(path, (json.dumps(header, sort_keys=True, indent=2) + "\n").encode())
    _atomic_write(_sibling_bin(path), payload)


def load_grid(path: str):
    """Load a model written by save_grid.  Returns VelocityModel or ReflectivityModel."""
    try:
        with open(path, "rb") as fh:
            header = json.loads(fh.read().decode())
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise HeaderMismatchError(f"{path}: malformed header: {exc}") from exc
    if not isinstance(header, dict) or header.get("format") != FORMAT_TAG:
        raise HeaderMismatchError(f"{path}: not a {FORMAT_TAG} header")
    try:
        nx, nz = int(header["nx"]), int(header["nz"])
        dx, dz = float(header["dx"]), float(header["dz"])
        quantity = header["quantity"]
    except (KeyError, TypeError, ValueError) as exc:
        raise HeaderMismatchError(f"{path}: incomplete header: {exc}") from exc
    if quantity not in _QUANTITIES:
        raise HeaderMismatchError(f"{path}: unknown quantity {quantity!r}")

    bin_path = _sibling_bin(path)
    with open(bin_path, "rb") as fh:
        raw = fh.read()
    expected = nx * nz * 4
    if len(raw) != expected:
        raise SizeMismatchError(f"{bin_path}: expected {expected} bytes, got {len(raw)}")
    values = np.frombuffer(raw, dtype="<f4").reshape(nx, nz).T.astype(np.float64)

    grid = Grid2D(nx=nx, nz=nz, dx=dx, dz=dz)
    if quantity == "velocity_mps":
        return VelocityModel.from_velocity(grid, values)
    if quantity == "slowness_sq":
        return VelocityModel(grid, values)
    return ReflectivityModel(grid, values)
