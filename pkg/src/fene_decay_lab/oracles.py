"""Finite-volume reference solvers on a polar grid of the unit disk (dim=2).

These share nothing with the spectral code beyond the model formulas: the
weighted operator -div(psi_inf grad g) and the drift -div(sigma R psi_inf g)
are discretized by cell-centred fluxes, second order in h and dtheta.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .model import FeneParams, normalization


@dataclass(eq=False)
class PolarGrid:
    params: FeneParams
    n_r: int = 128
    n_theta: int = 64

    def __post_init__(self):
        if self.params.dim != 2:
            raise ValueError("the polar oracle is two-dimensional")
        self.h = 1.0 / self.n_r
        self.dtheta = 2.0 * np.pi / self.n_theta
        self.r = (np.arange(self.n_r) + 0.5) * self.h
        self.r_face = np.arange(1, self.n_r) * self.h  # interior radial faces
        self.theta = (np.arange(self.n_theta) + 0.5) * self.dtheta
        self.theta_face = (np.arange(self.n_theta) + 1.0) * self.dtheta  # between j and j+1

    @property
    def size(self) -> int:
        return self.n_r * self.n_theta

    def index(self, i, j):
        return i * self.n_theta + np.mod(j, self.n_theta)

    def psi_inf(self, r):
        k = self.params.k
        return (1.0 - r * r) ** k / normalization(k, 2)

    @cached_property
    def centers(self) -> np.ndarray:
        rr, tt = np.meshgrid(self.r, self.theta, indexing="ij")
        return np.stack([rr * np.cos(tt), rr * np.sin(tt)], axis=-1).reshape(-1, 2)

    @cached_property
    def mass(self) -> np.ndarray:
        """Exact cell integrals of psi_inf."""
        k = self.params.k
        lo, hi = np.arange(self.n_r) * self.h, np.arange(1, self.n_r + 1) * self.h
        ring = ((1 - lo**2) ** (k + 1) - (1 - hi**2) ** (k + 1)) / (2 * (k + 1)) / normalization(k, 2)
        return np.repeat(ring * self.dtheta, self.n_theta)

    @cached_property
    def stiffness(self) -> sp.csr_matrix:
        """Symmetric K with g^T K g ~ int psi_inf |grad g|^2; natural no-flux boundary."""
        rows, cols, vals = [], [], []
        jj = np.arange(self.n_theta)
        for i in range(self.n_r - 1):
            rf = self.r_face[i]
            c = self.psi_inf(rf) * rf * self.dtheta / self.h
            p, q = self.index(i, jj), self.index(i + 1, jj)
            rows += [p, q, p, q]
            cols += [p, q, q, p]
            vals += [np.full(self.n_theta, c)] * 2 + [np.full(self.n_theta, -c)] * 2
        for i in range(self.n_r):
            c = self.psi_inf(self.r[i]) * self.h / (self.r[i] * self.dtheta)
            p, q = self.index(i, jj), self.index(i, jj + 1)
            rows += [p, q, p, q]
            cols += [p, q, q, p]
            vals += [np.full(self.n_theta, c)] * 2 + [np.full(self.n_theta, -c)] * 2
        K = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(self.size, self.size))
        return K.tocsr()

    def drift(self, sigma) -> sp.csr_matrix:
        """Matrix C with (C g)_P = -(net outflow of sigma R psi_inf g), central face values."""
        s = np.asarray(sigma, dtype=float)
        rows, cols, vals = [], [], []
        jj = np.arange(self.n_theta)
        c, sn = np.cos(self.theta), np.sin(self.theta)
        radial_shape = c * c * s[0, 0] + c * sn * (s[0, 1] + s[1, 0]) + sn * sn * s[1, 1]
        for i in range(self.n_r - 1):
            rf = self.r_face[i]
            flux = rf * radial_shape * self.psi_inf(rf) * rf * self.dtheta  # v_r * psi * area
            p, q = self.index(i, jj), self.index(i + 1, jj)
            # outflow from p through its outer face, inflow to q
            for a, b, sign in ((p, p, -1), (p, q, -1), (q, p, 1), (q, q, 1)):
                rows.append(a)
                cols.append(b)
                vals.append(sign * 0.5 * flux)
        cf, sf = np.cos(self.theta_face), np.sin(self.theta_face)
        ang_shape = -sf * cf * s[0, 0] - sf * sf * s[0, 1] + cf * cf * s[1, 0] + cf * sf * s[1, 1]
        for i in range(self.n_r):
            ri = self.r[i]
            flux = ri * ang_shape * self.psi_inf(ri) * self.h
            p, q = self.index(i, jj), self.index(i, jj + 1)
            for a, b, sign in ((p, p, -1), (p, q, -1), (q, p, 1), (q, q, 1)):
                rows.append(a)
                cols.append(b)
                vals.append(sign * 0.5 * flux)
        C = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(self.size, self.size))
        return C.tocsr()


def fd_eigenvalues(params: FeneParams, n_r: int = 128, n_theta: int = 64, count: int = 4) -> np.ndarray:
    """Smallest generalized eigenvalues of K g = lam M g (the first is the constant, ~0)."""
    grid = PolarGrid(params, n_r, n_theta)
    Mm = sp.diags(grid.mass)
    lam = spla.eigsh(grid.stiffness, k=count, M=Mm, sigma=-1.0, which="LM",
                     return_eigenvectors=False)
    return np.sort(lam)


def fd_poincare_lambda1(params: FeneParams, n_r: int = 128, n_theta: int = 64,
                        richardson: bool = True) -> float:
    """First nonzero eigenvalue, Richardson-extrapolated from grids h and h/2 by default."""
    coarse = fd_eigenvalues(params, n_r, n_theta)[1]
    if not richardson:
        return float(coarse)
    fine = fd_eigenvalues(params, 2 * n_r, 2 * n_theta)[1]
    return float((4.0 * fine - coarse) / 3.0)


def fd_evolve(params: FeneParams, sigma, g0: np.ndarray, T: float, n_r: int = 128,
              n_theta: int = 64, dt: float = 2e-3) -> tuple[PolarGrid, np.ndarray]:
    """Crank-Nicolson evolution of psi_inf g_t = div(psi_inf grad g) - div(sigma R psi_inf g).

    ``g0`` holds cell-centre values (length n_r * n_theta) or is a callable of points.
    """
    grid = PolarGrid(params, n_r, n_theta)
    g = g0(grid.centers) if callable(g0) else np.asarray(g0, dtype=float).copy()
    L = (-grid.stiffness + grid.drift(sigma)).tocsc()
    Mm = sp.diags(grid.mass).tocsc()
    n_steps = max(1, int(np.ceil(T / dt - 1e-12)))
    dt = T / n_steps
    lhs = spla.splu((Mm - 0.5 * dt * L).tocsc())
    rhs_op = (Mm + 0.5 * dt * L).tocsr()
    for _ in range(n_steps):
        g = lhs.solve(rhs_op @ g)
        if not np.all(np.isfinite(g)):
            raise FloatingPointError("finite-volume oracle became unstable")
    return grid, g
