"""Incompressible Navier-Stokes pieces on a periodic torus in Fourier space.

Convention: uhat = n^{-d} sum_x u(x) exp(-i xi.x), so that

    ||u||^2 = (L/n)^d sum_x |u(x)|^2 = L^d sum_xi |uhat(xi)|^2.

Velocities are kept band-limited by the 2/3 rule (|index| < n/3 on every
axis), which makes every quadratic product below alias-free on the grid.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft


def workers() -> int:
    """Worker cap for transforms, from FENE_THREADS (default: all cores)."""
    value = os.environ.get("FENE_THREADS")
    if value:
        return max(1, int(value))
    return os.cpu_count() or 1


@dataclass(frozen=True, eq=False)
class TorusGrid:
    dim: int
    n: int
    L: float

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError("dim must be 2 or 3")
        if self.n < 16 or self.n & (self.n - 1):
            raise ValueError(f"n must be a power of two >= 16, got {self.n}")
        if not self.L > 0:
            raise ValueError("box length must be positive")

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.dim

    @property
    def axes(self) -> tuple:
        return tuple(range(-self.dim, 0))

    @property
    def n_points(self) -> int:
        return self.n**self.dim

    @property
    def dx(self) -> float:
        return self.L / self.n

    @property
    def cell_volume(self) -> float:
        return self.dx**self.dim

    @property
    def volume(self) -> float:
        return self.L**self.dim

    @cached_property
    def coords(self) -> np.ndarray:
        """Grid coordinates, shape (dim, n, ..., n)."""
        x = np.arange(self.n) * self.dx
        return np.stack(np.meshgrid(*([x] * self.dim), indexing="ij"))

    @cached_property
    def index(self) -> np.ndarray:
        return np.fft.fftfreq(self.n, 1.0 / self.n)

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """xi, shape (dim, n, ..., n)."""
        k = 2.0 * np.pi / self.L * self.index
        return np.stack(np.meshgrid(*([k] * self.dim), indexing="ij"))

    @cached_property
    def k2(self) -> np.ndarray:
        return np.sum(self.wavenumbers**2, axis=0)

    @cached_property
    def k2_safe(self) -> np.ndarray:
        k2 = self.k2.copy()
        k2[(0,) * self.dim] = 1.0
        return k2

    @cached_property
    def dealias(self) -> np.ndarray:
        keep = np.abs(self.index) < self.n / 3.0
        mask = keep
        for _ in range(self.dim - 1):
            mask = np.multiply.outer(mask, keep)
        return mask

    @cached_property
    def rfft_wavenumbers(self) -> np.ndarray:
        return self.wavenumbers[(slice(None),) + (slice(None),) * (self.dim - 1) + (slice(0, self.n // 2 + 1),)]

    @cached_property
    def rfft_dealias(self) -> np.ndarray:
        return self.dealias[(slice(None),) * (self.dim - 1) + (slice(0, self.n // 2 + 1),)]

    @property
    def max_wavenumber(self) -> float:
        return np.pi * self.n / self.L

    def fft(self, f: np.ndarray) -> np.ndarray:
        return scipy.fft.fftn(f, axes=self.axes, workers=workers()) / self.n_points

    def ifft(self, fhat: np.ndarray) -> np.ndarray:
        return scipy.fft.ifftn(fhat, axes=self.axes, workers=workers()).real * self.n_points

    def rfft(self, f: np.ndarray, axes=None) -> np.ndarray:
        return scipy.fft.rfftn(f, axes=axes or self.axes, workers=workers()) / self.n_points

    def irfft(self, fhat: np.ndarray, axes=None) -> np.ndarray:
        axes = axes or self.axes
        return scipy.fft.irfftn(fhat, s=self.shape, axes=axes, workers=workers()) * self.n_points


@dataclass(eq=False)
class VelocityField:
    grid: TorusGrid
    uhat: np.ndarray  # (dim, n, ..., n) complex

    @classmethod
    def zeros(cls, grid: TorusGrid) -> "VelocityField":
        return cls(grid, np.zeros((grid.dim,) + grid.shape, dtype=complex))

    @classmethod
    def from_physical(cls, grid: TorusGrid, u: np.ndarray) -> "VelocityField":
        return cls(grid, grid.fft(np.asarray(u, dtype=float)))

    def physical(self) -> np.ndarray:
        return self.grid.ifft(self.uhat)

    def copy(self) -> "VelocityField":
        return VelocityField(self.grid, self.uhat.copy())

    def l2sq(self) -> float:
        return float(self.grid.volume * np.sum(np.abs(self.uhat) ** 2))

    def gradient_l2sq(self) -> float:
        return float(self.grid.volume * np.sum(self.grid.k2 * np.abs(self.uhat) ** 2))

    def gradient(self) -> np.ndarray:
        """Physical velocity gradient, shape (n, ..., n, dim, dim) with [..., i, j] = d_j u_i."""
        xi = self.grid.wavenumbers
        g = np.stack([np.stack([self.grid.ifft(1j * xi[j] * self.uhat[i])
                                for j in range(self.grid.dim)], axis=-1)
                      for i in range(self.grid.dim)], axis=-2)
        return g

    def divergence_hat(self) -> np.ndarray:
        return 1j * np.sum(self.grid.wavenumbers * self.uhat, axis=0)

    def hermitian_defect(self) -> float:
        """max |uhat(-xi) - conj(uhat(xi))| over the grid."""
        flipped = self.uhat
        for ax in range(1, self.grid.dim + 1):
            flipped = np.roll(np.flip(flipped, axis=ax), 1, axis=ax)
        return float(np.max(np.abs(flipped - np.conj(self.uhat)), initial=0.0))


@dataclass(eq=False)
class StressField:
    grid: TorusGrid
    tau: np.ndarray  # (n, ..., n, dim, dim) physical

    def __post_init__(self):
        self.tau = np.asarray(self.tau, dtype=float).reshape(self.grid.shape + (self.grid.dim,) * 2)

    @classmethod
    def constant(cls, grid: TorusGrid, value) -> "StressField":
        value = np.asarray(value, dtype=float)
        return cls(grid, np.broadcast_to(value, grid.shape + value.shape).copy())

    @cached_property
    def tau_hat(self) -> np.ndarray:
        """Fourier coefficients, shape (dim, dim, n, ..., n)."""
        moved = np.moveaxis(self.tau, (-2, -1), (0, 1))
        return self.grid.fft(moved)

    def l2sq(self) -> float:
        return float(self.grid.cell_volume * np.sum(self.tau**2))


def leray_project(field: VelocityField) -> VelocityField:
    """(I - xi xi^T/|xi|^2) uhat for xi != 0; the mean mode is left untouched."""
    g = field.grid
    xi = g.wavenumbers
    proj = np.sum(xi * field.uhat, axis=0) / g.k2_safe
    out = field.uhat - xi * proj
    out[(slice(None),) + (0,) * g.dim] = field.uhat[(slice(None),) + (0,) * g.dim]
    return VelocityField(g, out)


def _dealiased_products(u: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """Fourier transform of u_i u_j (dim, dim, ...) with the 2/3 mask applied."""
    d = grid.dim
    prod = np.empty((d, d) + grid.shape)
    for i in range(d):
        for j in range(i, d):
            prod[i, j] = u[i] * u[j]
            prod[j, i] = prod[i, j]
    return grid.fft(prod) * grid.dealias


def _div_project(tensor_hat: np.ndarray, grid: TorusGrid) -> VelocityField:
    """P div T in Fourier space, with (div T)_i = d_j T_ij."""
    xi = grid.wavenumbers
    div_hat = 1j * np.einsum("j...,ij...->i...", xi, tensor_hat)
    out = leray_project(VelocityField(grid, div_hat * grid.dealias))
    out.uhat[(slice(None),) + (0,) * grid.dim] = 0.0
    return out


def nonlinear_term(u: VelocityField) -> VelocityField:
    """Fourier representation of P div(u (x) u), 2/3-rule dealiased."""
    g = u.grid
    phys = g.ifft(u.uhat * g.dealias)
    return _div_project(_dealiased_products(phys, g), g)


def stress_forcing(tau: StressField) -> VelocityField:
    """Fourier representation of P div tau."""
    return _div_project(tau.tau_hat, tau.grid)


def pressure_diagnostic(u: VelocityField, tau: StressField) -> np.ndarray:
    """Zero-mean pressure P with Phat = -(xi_i xi_j / |xi|^2) F(u_i u_j - tau_ij)."""
    g = u.grid
    phys = g.ifft(u.uhat * g.dealias)
    t_hat = _dealiased_products(phys, g) - tau.tau_hat * g.dealias
    xi = g.wavenumbers
    p_hat = -np.einsum("i...,j...,ij...->...", xi, xi, t_hat) / g.k2_safe
    p_hat[(0,) * g.dim] = 0.0
    return g.ifft(p_hat)


def low_freq_energy(u: VelocityField, radius: float) -> float:
    """L^d sum_{|xi| <= radius} |uhat|^2."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    g = u.grid
    inside = g.k2 <= radius * radius
    return float(g.volume * np.sum(np.abs(u.uhat[:, inside]) ** 2))
