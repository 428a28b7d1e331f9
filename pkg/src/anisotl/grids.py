"""Uniform FFT-compatible sampling grids on a centered box (torus surrogate)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GridSpec:
    """Cartesian grid on [-extent, extent)^d with n samples per axis.

    n must be a power of two; the step h = 2*extent/n is uniform per axis.
    Frequencies live on the dual lattice k/(2*extent), |xi_i| < nyquist.
    """

    d: int
    extent: float
    n: int

    def __post_init__(self):
        if self.n < 2 or self.n & (self.n - 1):
            raise ValueError(f"n must be a power of two, got {self.n}")
        if self.extent <= 0:
            raise ValueError("extent must be positive")

    @property
    def h(self) -> float:
        return 2.0 * self.extent / self.n

    @property
    def nyquist(self) -> float:
        return 1.0 / (2.0 * self.h)

    @property
    def size(self) -> int:
        return self.n**self.d

    @property
    def cell_volume(self) -> float:
        return self.h**self.d

    @property
    def box_volume(self) -> float:
        return (2.0 * self.extent) ** self.d

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d

    def refined(self, factor: int = 2) -> "GridSpec":
        """Same box, factor-times more samples per axis."""
        return GridSpec(self.d, self.extent, self.n * factor)

    def widened(self, factor: int = 2) -> "GridSpec":
        """Same step, factor-times wider box."""
        return GridSpec(self.d, self.extent * factor, self.n * factor)


_CACHE: dict = {}


def _cached(key, builder):
    if key not in _CACHE:
        arr = builder()
        arr.flags.writeable = False
        _CACHE[key] = arr
    return _CACHE[key]


def spatial_axis(grid: GridSpec) -> np.ndarray:
    return _cached(
        ("sx", grid), lambda: -grid.extent + grid.h * np.arange(grid.n, dtype=float)
    )


def spatial_points(grid: GridSpec) -> np.ndarray:
    """All grid points as an (N, d) array in C (FFT) order."""

    def build():
        ax = spatial_axis(grid)
        mesh = np.meshgrid(*([ax] * grid.d), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    return _cached(("sp", grid), build)


def freq_axis(grid: GridSpec) -> np.ndarray:
    return _cached(("fx", grid), lambda: np.fft.fftfreq(grid.n, d=grid.h))


def freq_points(grid: GridSpec) -> np.ndarray:
    """All lattice frequencies as an (N, d) array in FFT order."""

    def build():
        ax = freq_axis(grid)
        mesh = np.meshgrid(*([ax] * grid.d), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    return _cached(("fp", grid), build)


def spectral_phase(grid: GridSpec) -> np.ndarray:
    """Phase e^(2 pi i xi . x0) aligning FFT indexing with the centered box."""

    def build():
        pts = freq_points(grid)
        x0 = -grid.extent * np.ones(grid.d)
        return np.exp(2j * np.pi * (pts @ x0)).reshape(grid.shape)

    if ("ph", grid) not in _CACHE:
        arr = build()
        arr.flags.writeable = False
        _CACHE[("ph", grid)] = arr
    return _CACHE[("ph", grid)]


def offset_index_vectors(grid: GridSpec) -> np.ndarray:
    """Integer offset vectors in [-n/2, n/2)^d, C order, for torus shifts."""

    def build():
        half = np.arange(grid.n)
        half = np.where(half >= grid.n // 2, half - grid.n, half)
        mesh = np.meshgrid(*([half] * grid.d), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1).astype(np.int64)

    return _cached(("off", grid), build)
