"""Periodic supercell discretization and spectral primitives.

A field is a real ``numpy`` array of shape ``grid.shape`` (row-major, ``x1``
slowest).  Spectral coefficients follow

    f(x) = sum_k fhat_k exp(i 2 pi k.x / L),   fhat = fftn(f) / n,

so every Fourier multiplier is a function of the angular wave vector
``xi_k = 2 pi k / L``.  Quadrature is the trapezoidal rule on the uniform grid.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .kernels import weighted_sumsq

SNAPSHOT_MAGIC = b"CHQF"
SNAPSHOT_VERSION = 1


class GridMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class TorusGrid:
    """Torus of ``M`` unit cells per direction, ``s`` samples per cell.

    The potential has period 1, so the supercell side is ``L = M``.
    """

    N: int
    M: int
    s: int

    def __post_init__(self):
        if self.N not in (1, 2, 3):
            raise ValueError("N must be 1, 2 or 3")
        if self.M < 1:
            raise ValueError("M must be ≥ 1")
        if self.s < 4:
            raise ValueError("s must be ≥ 4")
        if self.s % 2:
            raise ValueError("s must be even")

    @property
    def L(self) -> float:
        return float(self.M)

    @property
    def side(self) -> int:
        return self.M * self.s

    @property
    def shape(self) -> tuple:
        return (self.side,) * self.N

    @property
    def n(self) -> int:
        return self.side**self.N

    @property
    def h(self) -> float:
        return 1.0 / self.s

    @property
    def cell_volume(self) -> float:
        return self.h**self.N

    @cached_property
    def x1d(self) -> np.ndarray:
        return np.arange(self.side) * self.h

    def coords(self) -> list:
        return np.meshgrid(*([self.x1d] * self.N), indexing="ij", sparse=True)

    @cached_property
    def k1d(self) -> np.ndarray:
        """Signed integer wave numbers in FFT order, Nyquist as ``-side/2``."""
        return np.fft.fftfreq(self.side, d=1.0 / self.side)

    @cached_property
    def xi1d(self) -> np.ndarray:
        return 2.0 * np.pi * self.k1d / self.L

    @cached_property
    def xi2(self) -> np.ndarray:
        """``|xi_k|^2`` on the full complex FFT grid."""
        return _sum_sq_broadcast([self.xi1d] * self.N)

    @cached_property
    def xi2_half(self) -> np.ndarray:
        """``|xi_k|^2`` on the ``rfftn`` half grid."""
        axes = [self.xi1d] * (self.N - 1) + [np.abs(self.xi1d[: self.side // 2 + 1])]
        return _sum_sq_broadcast(axes)

    @cached_property
    def half_weights(self) -> np.ndarray:
        """Multiplicity of each ``rfftn`` coefficient in the full spectrum."""
        w = np.full(self.side // 2 + 1, 2.0)
        w[0] = 1.0
        w[-1] = 1.0  # Nyquist (side is even)
        shape = (1,) * (self.N - 1) + (w.size,)
        return np.broadcast_to(w.reshape(shape), self.half_shape)

    @property
    def axes(self) -> tuple:
        return tuple(range(self.N))

    @property
    def half_shape(self) -> tuple:
        return (self.side,) * (self.N - 1) + (self.side // 2 + 1,)


def _sum_sq_broadcast(axes):
    N = len(axes)
    total = None
    for d, a in enumerate(axes):
        shape = [1] * N
        shape[d] = a.size
        term = (a**2).reshape(shape)
        total = term if total is None else total + term
    return np.ascontiguousarray(np.broadcast_to(total, tuple(a.size for a in axes)))


def make_grid(N: int, M: int, s: int) -> TorusGrid:
    return TorusGrid(int(N), int(M), int(s))


def check_field(grid: TorusGrid, f: np.ndarray) -> np.ndarray:
    f = np.asarray(f)
    if f.shape != grid.shape:
        raise GridMismatchError(f"field shape {f.shape} does not match grid {grid.shape}")
    return f


# -- transforms -------------------------------------------------------------


def transform(grid: TorusGrid, f: np.ndarray) -> np.ndarray:
    """Full complex coefficients ``fhat_k`` (FFT ordering, shape ``grid.shape``)."""
    return np.fft.fftn(check_field(grid, f)) / grid.n


def inverse_transform(grid: TorusGrid, F: np.ndarray, real: bool = True) -> np.ndarray:
    F = check_field(grid, F)
    f = np.fft.ifftn(F) * grid.n
    return f.real.copy() if real else f


def rtransform(grid: TorusGrid, f: np.ndarray) -> np.ndarray:
    return np.fft.rfftn(check_field(grid, f)) / grid.n


def irtransform(grid: TorusGrid, F: np.ndarray) -> np.ndarray:
    return np.fft.irfftn(F * grid.n, s=grid.shape, axes=grid.axes)


def apply_multiplier(grid: TorusGrid, f: np.ndarray, m_half: np.ndarray) -> np.ndarray:
    """Apply a real radial multiplier given on the ``rfftn`` half grid."""
    return np.fft.irfftn(np.fft.rfftn(check_field(grid, f)) * m_half, s=grid.shape, axes=grid.axes)


def spectral_quadratic(grid: TorusGrid, f: np.ndarray, m_half: np.ndarray) -> float:
    """``L^N sum_k m_k |fhat_k|^2`` for real ``f`` (Parseval-weighted)."""
    F = rtransform(grid, f)
    return grid.L**grid.N * weighted_sumsq(m_half * grid.half_weights, F)


# -- quadrature -------------------------------------------------------------


def integrate(grid: TorusGrid, f: np.ndarray) -> float:
    return float(np.sum(check_field(grid, f))) * grid.cell_volume


def l2_inner(grid: TorusGrid, u: np.ndarray, v: np.ndarray) -> float:
    check_field(grid, u)
    return integrate(grid, u * check_field(grid, v))


def l2_norm(grid: TorusGrid, u: np.ndarray) -> float:
    return float(np.sqrt(max(l2_inner(grid, u, u), 0.0)))


def lp_norm(grid: TorusGrid, u: np.ndarray, q: float) -> float:
    return integrate(grid, np.abs(u) ** q) ** (1.0 / q)


def gradient_sq_integral(grid: TorusGrid, u: np.ndarray) -> float:
    """``∫|∇u|^2`` evaluated spectrally."""
    return spectral_quadratic(grid, u, grid.xi2_half)


def h1_norm(grid: TorusGrid, u: np.ndarray) -> float:
    return float(np.sqrt(gradient_sq_integral(grid, u) + l2_inner(grid, u, u)))


def laplacian(grid: TorusGrid, u: np.ndarray) -> np.ndarray:
    return -apply_multiplier(grid, u, grid.xi2_half)


def gradient(grid: TorusGrid, u: np.ndarray) -> list:
    """Spectral gradient components; the Nyquist coefficient is zeroed."""
    F = np.fft.rfftn(check_field(grid, u))
    out = []
    for d in range(grid.N):
        xi = grid.xi1d.copy()
        xi[grid.side // 2] = 0.0
        if d == grid.N - 1:
            xi = xi[: grid.side // 2 + 1]
        shape = [1] * grid.N
        shape[d] = xi.size
        out.append(np.fft.irfftn(1j * xi.reshape(shape) * F, s=grid.shape, axes=grid.axes))
    return out


def shift_cells(grid: TorusGrid, u: np.ndarray, cells) -> np.ndarray:
    """Lattice translation ``(tau_k u)(x) = u(x + k)`` for integer ``k``."""
    cells = np.broadcast_to(np.asarray(cells, dtype=int), (grid.N,))
    return np.roll(check_field(grid, u), tuple(-int(c) * grid.s for c in cells), axis=tuple(range(grid.N)))


def cell_view(grid: TorusGrid, f: np.ndarray) -> np.ndarray:
    """View of ``f`` with axes ``(m1, ..., mN, j1, ..., jN)`` (cell, in-cell)."""
    N, M, s = grid.N, grid.M, grid.s
    g = check_field(grid, f).reshape(sum(((M, s) for _ in range(N)), ()))
    return g.transpose(tuple(range(0, 2 * N, 2)) + tuple(range(1, 2 * N, 2)))


# -- potentials -------------------------------------------------------------


@dataclass(frozen=True)
class PotentialSpec:
    """1-periodic potential: ``zero``, ``cosine`` or ``tabulated``.

    ``cosine`` is ``c0 + V0 * sum_i cos(2 pi x_i)``; ``tabulated`` holds one
    cell of samples (shape ``(s,) * N``) plus ``c0``.
    """

    kind: str = "zero"
    V0: float = 0.0
    c0: float = 0.0
    table: np.ndarray | None = field(default=None, compare=False)

    def shifted(self, c0: float) -> "PotentialSpec":
        return PotentialSpec(self.kind, self.V0, c0, self.table)


def sample_potential(spec: PotentialSpec, grid: TorusGrid) -> np.ndarray:
    if spec.kind == "zero":
        return np.zeros(grid.shape) + spec.c0
    if spec.kind == "cosine":
        c1d = spec.V0 * np.cos(2.0 * np.pi * grid.x1d)
        V = np.full(grid.shape, spec.c0)
        for d in range(grid.N):
            shape = [1] * grid.N
            shape[d] = grid.side
            V = V + c1d.reshape(shape)
        return V
    if spec.kind == "tabulated":
        table = np.asarray(spec.table, dtype=float)
        if table.size != grid.s**grid.N:
            raise ValueError(f"tabulated potential needs s^N = {grid.s ** grid.N} values, got {table.size}")
        return np.tile(table.reshape((grid.s,) * grid.N), (grid.M,) * grid.N) + spec.c0
    raise ValueError(f"unknown potential kind {spec.kind!r}")


# -- snapshots --------------------------------------------------------------


def write_snapshot(path, grid: TorusGrid, u: np.ndarray) -> None:
    """Write the CHQF binary snapshot (little-endian header, float64 values)."""
    u = check_field(grid, u)
    header = SNAPSHOT_MAGIC + struct.pack("<IIII", SNAPSHOT_VERSION, grid.N, grid.M, grid.s)
    data = np.ascontiguousarray(u, dtype="<f8").tobytes(order="C")
    Path(path).write_bytes(header + data)


def read_snapshot(path):
    raw = Path(path).read_bytes()
    if raw[:4] != SNAPSHOT_MAGIC:
        raise ValueError("not a CHQF snapshot")
    version, N, M, s = struct.unpack("<IIII", raw[4:20])
    if version != SNAPSHOT_VERSION:
        raise ValueError(f"unsupported snapshot version {version}")
    grid = make_grid(N, M, s)
    values = np.frombuffer(raw[20:], dtype="<f8")
    if values.size != grid.n:
        raise ValueError(f"snapshot holds {values.size} values, expected {grid.n}")
    return grid, values.reshape(grid.shape).astype(np.float64)
