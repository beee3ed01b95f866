"""Spectral Galerkin discretization of the configuration ball.

The unknown is the relative density ``g = psi / psi_inf`` expanded as

    g(R) = sum_a  c_a  P_n^{(k, l + d/2 - 1)}(2|R|^2 - 1)  H_lm(R)

with ``H_lm`` a real solid harmonic of degree ``l``. These functions are
orthogonal under ``int . . psi_inf dR`` and are normalized here, so the mass
matrix is the identity up to roundoff. Every integrand appearing in the
operator matrices is a polynomial in R times ``(1 - |R|^2)^k``, so the
Gauss-Jacobi x angular product rule below integrates them exactly and the
discrete no-flux and co-rotation identities hold to roundoff.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.special import eval_jacobi, roots_jacobi

from .harmonics import poly_deriv, poly_eval, solid_harmonics
from .model import FeneParams, log_normalization

_CHUNK = 2048


class ConfigurationError(ValueError):
    pass


class AssemblyError(RuntimeError):
    pass


class EigensolveError(RuntimeError):
    pass


class PositivityError(ArithmeticError):
    """The relative density took negative values at quadrature nodes.

    This is a resolution artifact and is reported, never clamped.
    """

    def __init__(self, min_value: float, where: str = ""):
        self.min_value = float(min_value)
        super().__init__(f"loss of positivity{' in ' + where if where else ''}: "
                         f"min g = {self.min_value:.3e} at quadrature nodes")


def _angular_rule(dim: int, degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Unit vectors and weights integrating spherical polynomials up to ``degree``."""
    if dim == 2:
        n = degree + 1
        theta = 2.0 * np.pi * np.arange(n) / n
        pts = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        return pts, np.full(n, 2.0 * np.pi / n)
    n_mu = degree // 2 + 1
    n_phi = degree + 1
    mu, w_mu = np.polynomial.legendre.leggauss(n_mu)
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    st = np.sqrt(1.0 - mu**2)
    pts = np.stack([
        np.outer(st, np.cos(phi)).ravel(),
        np.outer(st, np.sin(phi)).ravel(),
        np.repeat(mu, n_phi),
    ], axis=-1)
    return pts, np.repeat(w_mu, n_phi) * (2.0 * np.pi / n_phi)


def _ball_rule(k_weight: float, dim: int, n_r: int, ang_degree: int, log_prefactor: float):
    """Nodes/weights for int_B f(R) (1-|R|^2)^k_weight dR * exp(log_prefactor)."""
    beta = dim / 2.0 - 1.0
    s, ws = roots_jacobi(n_r, k_weight, beta)
    r = np.sqrt((1.0 + s) / 2.0)
    omega, w_omega = _angular_rule(dim, ang_degree)
    nodes = (r[:, None, None] * omega[None, :, :]).reshape(-1, dim)
    # (1-r^2)^a r^{d-1} dr = 2^{-a-(d-2)/2-2} (1-s)^a (1+s)^{(d-2)/2} ds
    scale = math.exp(log_prefactor - (k_weight + beta + 2.0) * math.log(2.0))
    weights = (ws[:, None] * w_omega[None, :]).ravel() * scale
    return nodes, weights


@dataclass(frozen=True, eq=False)
class ConfigBasis:
    params: FeneParams
    n_radial: int
    l_max: int
    modes: tuple  # (n, l, harmonic index) per basis function
    nodes: np.ndarray
    weights: np.ndarray  # sum_q w_q f(R_q) ~ int f psi_inf dR
    phi: np.ndarray  # (n_nodes, n_modes)
    grad: np.ndarray  # (n_nodes, n_modes, dim)
    stress_nodes: np.ndarray
    stress_weights: np.ndarray  # sum_q w_q f(R_q) ~ (2k/Z) int f (1-|R|^2)^(k-1) dR
    stress_phi: np.ndarray
    _harmonics: tuple = field(repr=False)
    _norms: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.params.dim

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    @property
    def one(self) -> np.ndarray:
        """Coefficient vector of g == 1."""
        e = np.zeros(self.n_modes)
        e[0] = 1.0
        return e

    def mode_index(self, n: int, l: int, h: int = 0) -> int:
        return self.modes.index((n, l, h))

    def evaluate(self, R, with_gradient: bool = False):
        """Basis values (and gradients) at arbitrary points of the ball."""
        R = np.atleast_2d(np.asarray(R, dtype=float))
        vals, grads = _eval_basis(self.params, self.modes, self._harmonics, R, with_gradient)
        vals = vals / self._norms
        if with_gradient:
            return vals, grads / self._norms[None, :, None]
        return vals

    def refined(self, extra: int) -> "ConfigBasis":
        """Same basis with ``extra`` more radial and angular quadrature points."""
        return build_basis(self.params, self.n_radial, self.l_max, quad_extra=extra)


def _eval_basis(params, modes, harmonics, R, with_gradient):
    k, d = params.k, params.dim
    r2 = np.sum(R * R, axis=-1)
    s = 2.0 * r2 - 1.0
    n_pts = R.shape[0]
    vals = np.empty((n_pts, len(modes)))
    grads = np.empty((n_pts, len(modes), d)) if with_gradient else None
    h_cache: dict = {}
    for a, (n, l, h) in enumerate(modes):
        key = (l, h)
        if key not in h_cache:
            poly = harmonics[l][h]
            H = poly_eval(poly, R)
            dH = np.stack([poly_eval(poly_deriv(poly, i), R) for i in range(d)], axis=-1) \
                if with_gradient else None
            h_cache[key] = (H, dH)
        H, dH = h_cache[key]
        beta = l + d / 2.0 - 1.0
        P = eval_jacobi(n, k, beta, s)
        vals[:, a] = P * H
        if with_gradient:
            if n > 0:
                dP = 0.5 * (n + k + beta + 1.0) * eval_jacobi(n - 1, k + 1.0, beta + 1.0, s)
            else:
                dP = np.zeros_like(s)
            # d/dR_i P(2|R|^2-1) = 4 R_i P'(s)
            grads[:, a, :] = (4.0 * dP * H)[:, None] * R + P[:, None] * dH
    return vals, grads


def build_basis(params: FeneParams, n_radial: int, l_max: int, quad_extra: int = 0) -> ConfigBasis:
    """Weighted Jacobi x solid-harmonic basis with its quadrature rules."""
    if int(n_radial) != n_radial or n_radial < 2:
        raise ConfigurationError(f"n_radial must be an integer >= 2, got {n_radial}")
    if int(l_max) != l_max or l_max < 2:
        raise ConfigurationError(f"l_max must be an integer >= 2, got {l_max}")
    if quad_extra < 0:
        raise ConfigurationError("quad_extra must be >= 0")
    n_radial, l_max = int(n_radial), int(l_max)
    d, k = params.dim, params.k
    harmonics = tuple(tuple(solid_harmonics(l, d)) for l in range(l_max + 1))
    modes = tuple((n, l, h) for l in range(l_max + 1)
                  for h in range(len(harmonics[l])) for n in range(n_radial))

    n_r = n_radial + l_max // 2 + 2 + quad_extra
    ang_degree = 2 * l_max + 3 + 2 * quad_extra
    log_z = log_normalization(k, d)
    nodes, weights = _ball_rule(k, d, n_r, ang_degree, -log_z)
    s_nodes, s_weights = _ball_rule(k - 1.0, d, n_r, ang_degree, math.log(2.0 * k) - log_z)

    raw, _ = _eval_basis(params, modes, harmonics, nodes, False)
    norms = np.sqrt(weights @ raw**2)
    basis = ConfigBasis(params=params, n_radial=n_radial, l_max=l_max, modes=modes,
                        nodes=nodes, weights=weights, phi=None, grad=None,
                        stress_nodes=s_nodes, stress_weights=s_weights, stress_phi=None,
                        _harmonics=harmonics, _norms=norms)
    phi, grad = basis.evaluate(nodes, with_gradient=True)
    object.__setattr__(basis, "phi", phi)
    object.__setattr__(basis, "grad", grad)
    object.__setattr__(basis, "stress_phi", basis.evaluate(s_nodes))
    return basis


@dataclass(frozen=True, eq=False)
class FokkerPlanckOperators:
    """Galerkin matrices of the configuration operator.

    M ca/dt = (sum_ij sigma_ij A[i, j] - D) a at one spatial point, with
    A[i, j][a, b] = int d_{R_i} phi_a  R_j phi_b psi_inf dR.
    """

    M: np.ndarray
    D: np.ndarray
    A: np.ndarray  # (dim, dim, n_modes, n_modes)

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    def drag_matrix(self, sigma) -> np.ndarray:
        return np.einsum("ij,ijab->ab", np.asarray(sigma, dtype=float), self.A)

    def apply_drag(self, sigma: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
        """Row-wise ``(sum_ij sigma[x]_ij A[i,j]) @ coeffs[x]`` for a field of drag tensors."""
        d = self.dim
        out = np.zeros_like(coeffs)
        for i in range(d):
            for j in range(d):
                s = sigma[:, i, j]
                if np.any(s):
                    out += s[:, None] * (coeffs @ self.A[i, j].T)
        return out


def assemble_operators(basis: ConfigBasis) -> FokkerPlanckOperators:
    w, phi, grad, R = basis.weights, basis.phi, basis.grad, basis.nodes
    d = basis.dim
    M = phi.T @ (w[:, None] * phi)
    D = sum(grad[:, :, i].T @ (w[:, None] * grad[:, :, i]) for i in range(d))
    A = np.empty((d, d, basis.n_modes, basis.n_modes))
    for i in range(d):
        for j in range(d):
            A[i, j] = grad[:, :, i].T @ ((w * R[:, j])[:, None] * phi)
    M = 0.5 * (M + M.T)
    D = 0.5 * (D + D.T)
    try:
        np.linalg.cholesky(M)
    except np.linalg.LinAlgError as exc:
        raise AssemblyError("mass matrix is not positive definite; quadrature degenerate") from exc
    return FokkerPlanckOperators(M=M, D=D, A=A)


@dataclass(eq=False)
class ConfigDistribution:
    """Relative density coefficients, one row per spatial point.

    ``cell_volume`` is the spatial quadrature weight of each row (the torus
    cell volume); a single configuration-space sample uses 1.
    """

    basis: ConfigBasis
    coeffs: np.ndarray
    cell_volume: float = 1.0

    def __post_init__(self):
        self.coeffs = np.atleast_2d(np.asarray(self.coeffs, dtype=float))
        if self.coeffs.shape[-1] != self.basis.n_modes:
            raise ValueError("coefficient width does not match the basis")

    @classmethod
    def equilibrium(cls, basis: ConfigBasis, n_points: int = 1, cell_volume: float = 1.0):
        return cls(basis, np.tile(basis.one, (n_points, 1)), cell_volume)

    @property
    def n_points(self) -> int:
        return self.coeffs.shape[0]

    def mass(self, ops: FokkerPlanckOperators | None = None) -> np.ndarray:
        """Per-point int g psi_inf dR."""
        m0 = ops.M[:, 0] if ops is not None else self.basis.weights @ self.basis.phi
        return self.coeffs @ m0

    def values(self, R) -> np.ndarray:
        return self.coeffs @ self.basis.evaluate(R).T


def stress_moments(basis: ConfigBasis) -> np.ndarray:
    """T[a, i, j] with tau_ij(g) = sum_a c_a T[a, i, j] (raw stress is linear in g)."""
    Rn = basis.stress_nodes
    wRR = basis.stress_weights[:, None, None] * Rn[:, :, None] * Rn[:, None, :]
    T = np.einsum("qa,qij->aij", basis.stress_phi, wRR)
    return 0.5 * (T + np.swapaxes(T, -1, -2))


def stress_tensor(dist: ConfigDistribution) -> np.ndarray:
    """Raw polymer stress tau_ij = int R_i d_j U psi dR per point, shape (n_points, d, d)."""
    return np.einsum("pa,aij->pij", dist.coeffs, stress_moments(dist.basis))


def relative_stress(dist: ConfigDistribution) -> np.ndarray:
    """Stress of psi - psi_inf: the equilibrium isotropic part removed."""
    T = stress_moments(dist.basis)
    return np.einsum("pa,aij->pij", dist.coeffs - dist.basis.one, T)


def _deflated_pencil(basis: ConfigBasis, ops: FokkerPlanckOperators):
    M, D = ops.M, ops.D
    one = basis.one
    m1 = M @ one
    P = np.eye(basis.n_modes) - np.outer(one, m1) / (one @ m1)
    Q = P[:, 1:]
    return Q, Q.T @ D @ Q, Q.T @ M @ Q


def poincare_eigenpairs(basis: ConfigBasis, ops: FokkerPlanckOperators | None = None):
    """Eigenpairs of D a = lam M a on the M-orthogonal complement of g == 1.

    Returns ascending eigenvalues and coefficient vectors (columns, M-normalized).
    """
    ops = ops or assemble_operators(basis)
    Q, Dq, Mq = _deflated_pencil(basis, ops)
    try:
        lam, y = scipy.linalg.eigh(Dq, Mq)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigensolveError(
            f"generalized eigensolve failed (n_modes={basis.n_modes}, "
            f"cond(Mq)={np.linalg.cond(Mq):.3e})") from exc
    if not np.all(np.isfinite(lam)) or lam[0] <= 0:
        raise EigensolveError(f"nonpositive smallest eigenvalue {lam[0]:.3e} on the mean-zero subspace")
    return lam, Q @ y


def poincare_constant(basis: ConfigBasis, ops: FokkerPlanckOperators | None = None) -> tuple[float, float]:
    """(lambda_1, C = 1/lambda_1) for int |psi|^2/psi_inf <= C int psi_inf |grad(psi/psi_inf)|^2."""
    lam, _ = poincare_eigenpairs(basis, ops)
    return float(lam[0]), float(1.0 / lam[0])


# --- functionals -----------------------------------------------------------

def _quadratic(dist: ConfigDistribution, mat: np.ndarray) -> float:
    h = dist.coeffs - dist.basis.one
    per_point = np.sum((h @ mat) * h, axis=1)
    return float(dist.cell_volume * np.sum(per_point))


def relative_l2(dist: ConfigDistribution, ops: FokkerPlanckOperators) -> float:
    """int int |psi - psi_inf|^2 / psi_inf dR dx."""
    return _quadratic(dist, ops.M)


def fisher_g(dist: ConfigDistribution, ops: FokkerPlanckOperators) -> float:
    """int int psi_inf |grad_R (psi - psi_inf)/psi_inf|^2 dR dx."""
    return _quadratic(dist, ops.D)


def _node_reduce(dist: ConfigDistribution, func, need_grad: bool) -> np.ndarray:
    """Per-point sum_q w_q func(g, grad g) evaluated in chunks of spatial points."""
    b = dist.basis
    out = np.empty(dist.n_points)
    n_q = b.nodes.shape[0]
    grad_flat = np.ascontiguousarray(b.grad.transpose(1, 0, 2)).reshape(b.n_modes, -1) \
        if need_grad else None
    for start in range(0, dist.n_points, _CHUNK):
        c = dist.coeffs[start:start + _CHUNK]
        g = c @ b.phi.T
        dg = (c @ grad_flat).reshape(len(c), n_q, b.dim) if need_grad else None
        out[start:start + _CHUNK] = func(g, dg) @ b.weights
    return out


def min_nodal_value(dist: ConfigDistribution) -> float:
    b = dist.basis
    lo = np.inf
    for start in range(0, dist.n_points, _CHUNK):
        lo = min(lo, float(np.min(dist.coeffs[start:start + _CHUNK] @ b.phi.T)))
    return lo


def fisher_sqrt_density(dist: ConfigDistribution) -> np.ndarray:
    """Per-point int psi_inf |grad_R sqrt(g)|^2 dR, computed as int psi_inf |grad g|^2 / (4 g)."""
    lo = min_nodal_value(dist)
    if lo <= 0:
        raise PositivityError(lo, "fisher_sqrt")
    return _node_reduce(dist, lambda g, dg: np.sum(dg * dg, axis=-1) / (4.0 * g), True)


def fisher_sqrt(dist: ConfigDistribution) -> float:
    return float(dist.cell_volume * np.sum(fisher_sqrt_density(dist)))


def entropy(dist: ConfigDistribution) -> float:
    """int int g (ln g - 1) psi_inf dR dx."""
    lo = min_nodal_value(dist)
    if lo < 0:
        raise PositivityError(lo, "entropy")

    def density(g, _):
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(g > 0, g * (np.log(g) - 1.0), 0.0)

    return float(dist.cell_volume * np.sum(_node_reduce(dist, density, False)))
