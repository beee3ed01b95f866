"""Time stepping of the coupled Navier-Stokes / Fokker-Planck system.

The velocity lives in Fourier space; the configuration coefficients a(x)
live on the physical grid, one Galerkin vector per point. Viscous diffusion
is integrated exactly, the configuration stiffness D implicitly through a
single factorization of (M + theta*dt*D) shared by all points, and the
transport, drag and stress coupling explicitly.

The explicit configuration right-hand side is truncated to the same 2/3
band as the velocity. Since all fields then stay band-limited, grid sums of
the quadratic energy densities are exact integrals and the semi-discrete
balances (entropy identity, stress work cancellation) hold to roundoff.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .config_space import (ConfigBasis, ConfigDistribution, FokkerPlanckOperators, poincare_eigenpairs,
                           assemble_operators, entropy, fisher_g, fisher_sqrt,
                           relative_l2, stress_moments)
from .fluid import (StressField, TorusGrid, VelocityField, leray_project, low_freq_energy,
                    nonlinear_term, stress_forcing)
from .model import Drag, FeneParams
from .trace import DecayTrace

logger = logging.getLogger(__name__)

_CHUNK = 4096


class Scheme(enum.Enum):
    IMEX1 = "imex1"
    IMEX2 = "imex2"

    @classmethod
    def parse(cls, value) -> "Scheme":
        if isinstance(value, Scheme):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValueError(f"unknown scheme {value!r}; expected imex1 or imex2") from None


class CFLViolation(RuntimeError):
    def __init__(self, dt: float, limit: float):
        self.dt, self.limit = dt, limit
        super().__init__(f"dt={dt:.3e} exceeds the advective limit {limit:.3e}")


class SolverError(RuntimeError):
    """Non-finite coefficients, failed factorization or a violated run invariant."""


class RunAborted(RuntimeError):
    def __init__(self, cause: Exception, last_state: "SystemState", trace: DecayTrace):
        self.cause, self.last_state, self.trace = cause, last_state, trace
        super().__init__(f"run aborted at t={last_state.t:.6g}: {cause}")


@dataclass(frozen=True)
class StepperConfig:
    dt: float = 1e-3
    scheme: Scheme = Scheme.IMEX2
    cfl_safety: float = 0.5
    snapshot_stride: int = 10

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme.parse(self.scheme))
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ValueError("dt must be > 0")
        if not 0 < self.cfl_safety <= 1:
            raise ValueError("cfl_safety must lie in (0, 1]")
        if int(self.snapshot_stride) != self.snapshot_stride or self.snapshot_stride < 1:
            raise ValueError("snapshot_stride must be an integer >= 1")


@dataclass(eq=False)
class SystemState:
    t: float
    u: VelocityField
    psi: ConfigDistribution

    def copy(self) -> "SystemState":
        return SystemState(self.t, self.u.copy(),
                           ConfigDistribution(self.psi.basis, self.psi.coeffs.copy(), self.psi.cell_volume))


@dataclass
class RunResult:
    trace: DecayTrace
    final: SystemState
    snapshots: list = field(default_factory=list)
    steps: int = 0
    rejected_steps: int = 0
    max_mass_drift: float = 0.0


Source = Callable[[float], tuple]


def _drag_combinations(drag: Drag, A: np.ndarray):
    """Sparse matrices B_p and index pairs so that sum_ij sigma_ij A^{ij} = sum_p w_p B_p."""
    d = A.shape[0]
    pairs, mats = [], []
    if drag is Drag.COROTATION:
        for i in range(d):
            for j in range(i + 1, d):
                B = A[i, j] - A[j, i]
                B = 0.5 * (B - B.T)  # exact skewness of the co-rotation form
                pairs.append((i, j))
                mats.append(B)
    else:
        for i in range(d):
            for j in range(d):
                pairs.append((i, j))
                mats.append(A[i, j].copy())
    scale = max(np.abs(B).max() for B in mats)
    for B in mats:
        B[np.abs(B) < 1e-15 * scale] = 0.0
    return pairs, sp.vstack([sp.csr_matrix(B) for B in mats]).tocsr()


class CoupledSystem:
    """Right-hand side and IMEX stepper for one set of parameters and grids.

    ``nonlinear`` and ``stress`` switch the convective term and the polymer
    forcing of the momentum equation (both off gives the Stokes baseline).
    ``source(t)`` may return extra (du/dt in Fourier, da/dt on the grid)
    terms, used for manufactured solutions.
    """

    def __init__(self, params: FeneParams, grid: TorusGrid, basis: ConfigBasis,
                 ops: FokkerPlanckOperators | None = None, *, nonlinear: bool = True,
                 stress: bool = True, source: Source | None = None):
        if basis.dim != grid.dim or params.dim != grid.dim:
            raise ValueError("grid, basis and parameters disagree on the dimension")
        self.params, self.grid, self.basis = params, grid, basis
        self.ops = ops or assemble_operators(basis)
        self.nonlinear, self.stress, self.source = nonlinear, stress, source
        self._pairs, self._drag = _drag_combinations(params.drag, self.ops.A)
        self._stress_T = stress_moments(basis).reshape(basis.n_modes, -1)
        self._factors: dict = {}

    # --- pieces ----------------------------------------------------------------
    def relative_stress(self, coeffs: np.ndarray) -> np.ndarray:
        d = self.grid.dim
        return ((coeffs - self.basis.one) @ self._stress_T).reshape(-1, d, d)

    def drag_weights(self, grad_u: np.ndarray) -> np.ndarray:
        """Per-point weights w_p (N, P) of the sparse drag combinations."""
        G = grad_u.reshape(-1, self.grid.dim, self.grid.dim)
        if self.params.drag is Drag.COROTATION:
            return np.stack([G[:, i, j] - G[:, j, i] for i, j in self._pairs], axis=-1)
        return np.stack([G[:, i, j] for i, j in self._pairs], axis=-1)

    def apply_drag(self, weights: np.ndarray, coeffs_T: np.ndarray) -> np.ndarray:
        """Columns (sum_p w_p(x) B_p) a(x) for mode-major coefficients (n_modes, N)."""
        n = self.basis.n_modes
        out = np.empty_like(coeffs_T)
        for s in range(0, coeffs_T.shape[1], _CHUNK):
            c = coeffs_T[:, s:s + _CHUNK]
            Y = (self._drag @ c).reshape(len(self._pairs), n, c.shape[1])
            w = weights[s:s + _CHUNK]
            acc = w[:, 0] * Y[0]
            for p in range(1, len(self._pairs)):
                acc += w[:, p] * Y[p]
            out[:, s:s + _CHUNK] = acc
        return out

    def _spatial_axes(self) -> tuple:
        return tuple(range(1, self.grid.dim + 1))

    def _explicit(self, u: VelocityField, aT: np.ndarray, t: float):
        """Explicit tendencies with mode-major coefficients aT (n_modes, N)."""
        g, d, n = self.grid, self.grid.dim, self.basis.n_modes
        u_phys = u.physical()
        N_hat = np.zeros_like(u.uhat)
        if self.nonlinear:
            N_hat -= nonlinear_term(u).uhat
        if self.stress:
            tau = StressField(g, self.relative_stress(aT.T))
            N_hat += stress_forcing(tau).uhat
        qT = np.zeros_like(aT)
        if np.any(u.uhat):
            axes = self._spatial_axes()
            a_hat = g.rfft(aT.reshape((n,) + g.shape), axes=axes)
            xi = g.rfft_wavenumbers
            adv = np.zeros((n,) + g.shape)
            for i in range(d):
                adv += u_phys[i] * g.irfft((1j * xi[i]) * a_hat, axes=axes)
            qT = self.apply_drag(self.drag_weights(u.gradient()), aT)
            qT -= self.ops.M @ adv.reshape(n, -1)
            q_hat = g.rfft(qT.reshape((n,) + g.shape), axes=axes) * g.rfft_dealias
            qT = g.irfft(q_hat, axes=axes).reshape(n, -1)
        if self.source is not None:
            su, sa = self.source(t)
            if su is not None:
                N_hat = N_hat + su
            if sa is not None:
                qT = qT + self.ops.M @ np.asarray(sa).reshape(-1, n).T
        return N_hat, qT, u_phys

    def explicit_terms(self, u: VelocityField, coeffs: np.ndarray, t: float):
        """(N_hat, q, u_phys): explicit velocity tendency and M-weighted config tendency (N, n_modes)."""
        N_hat, qT, u_phys = self._explicit(u, np.ascontiguousarray(coeffs.T), t)
        return N_hat, qT.T, u_phys

    def rhs(self, state: SystemState):
        """(du_hat/dt, da/dt) of the semi-discrete system."""
        N_hat, q, _ = self.explicit_terms(state.u, state.psi.coeffs, state.t)
        du = N_hat - self.params.nu * self.grid.k2 * state.u.uhat
        rhs_a = q - state.psi.coeffs @ self.ops.D
        da = scipy.linalg.cho_solve(scipy.linalg.cho_factor(self.ops.M), rhs_a.T).T
        return du, da

    # --- stepping --------------------------------------------------------------
    def _inverse(self, theta_dt: float) -> np.ndarray:
        """(M + theta_dt D)^{-1}, factored once per distinct theta_dt."""
        key = float(theta_dt)
        if key not in self._factors:
            n = self.basis.n_modes
            try:
                factor = scipy.linalg.cho_factor(self.ops.M + key * self.ops.D)
            except np.linalg.LinAlgError as exc:
                raise SolverError(f"implicit matrix M + {key:g} D is not positive definite") from exc
            self._factors[key] = scipy.linalg.cho_solve(factor, np.eye(n))
        return self._factors[key]

    def cfl_limit(self, u_phys: np.ndarray, cfl_safety: float) -> float:
        umax = float(np.max(np.sqrt(np.sum(u_phys**2, axis=0))))
        return math.inf if umax == 0 else cfl_safety * self.grid.dx / umax

    def _decay(self, h: float) -> np.ndarray:
        return np.exp(-self.params.nu * self.grid.k2 * h)

    def step(self, state: SystemState, cfg: StepperConfig, dt: float | None = None) -> SystemState:
        dt = cfg.dt if dt is None else dt
        M, D = self.ops.M, self.ops.D
        u0 = state.u.uhat
        a0 = np.ascontiguousarray(state.psi.coeffs.T)
        N0, q0, u_phys = self._explicit(state.u, a0, state.t)
        limit = self.cfl_limit(u_phys, cfg.cfl_safety)
        if dt > limit:
            raise CFLViolation(dt, limit)
        if cfg.scheme is Scheme.IMEX1:
            u1 = self._decay(dt) * (u0 + dt * N0)
            a1 = self._inverse(dt) @ (M @ a0 + dt * q0)
        else:
            half = self._decay(0.5 * dt)
            K = self._inverse(0.5 * dt)
            u_mid = VelocityField(self.grid, half * (u0 + 0.5 * dt * N0))
            a_mid = K @ (M @ a0 + 0.5 * dt * q0)
            N1, q1, _ = self._explicit(u_mid, a_mid, state.t + 0.5 * dt)
            u1 = self._decay(dt) * u0 + dt * half * N1
            a1 = K @ ((M - 0.5 * dt * D) @ a0 + dt * q1)
        u1[(slice(None),) + (0,) * self.grid.dim] = 0.0
        if not (np.all(np.isfinite(u1)) and np.all(np.isfinite(a1))):
            raise SolverError(f"non-finite values after the step from t={state.t:.6g}")
        return SystemState(state.t + dt, VelocityField(self.grid, u1),
                           ConfigDistribution(self.basis, a1.T, state.psi.cell_volume))

    def advance(self, state: SystemState, cfg: StepperConfig) -> tuple[SystemState, bool]:
        """One step with a single retry at dt/2 (as two half steps) on CFL rejection."""
        try:
            return self.step(state, cfg), False
        except CFLViolation:
            logger.warning("CFL rejection at t=%.6g; retrying with dt/2", state.t)
            half = self.step(state, cfg, 0.5 * cfg.dt)
            return self.step(half, cfg, 0.5 * cfg.dt), True

    def mass_drift(self, state: SystemState) -> float:
        return float(np.max(np.abs(state.psi.coeffs @ self.ops.M[:, 0] - 1.0)))

    def run(self, initial: SystemState, cfg: StepperConfig, T_final: float,
            functionals: Callable[[SystemState], dict] | None = None, *,
            keep_states: bool = False, on_snapshot: Callable[[SystemState], None] | None = None,
            mass_tol: float = 1e-10) -> RunResult:
        """Advance to T_final, sampling ``functionals`` every snapshot_stride steps.

        The step count is round(T_final/dt), so T_final is hit up to roundoff.
        Any step error raises RunAborted carrying the last valid state.
        """
        if T_final < 0:
            raise ValueError("T_final must be >= 0")
        functionals = functionals or Functionals(self)
        n_steps = int(round(T_final / cfg.dt))
        state = initial
        result = RunResult(DecayTrace(), initial)

        def sample(s: SystemState):
            result.trace.append(s.t, functionals(s))
            if keep_states:
                result.snapshots.append(s)
            if on_snapshot is not None:
                on_snapshot(s)

        try:
            sample(state)
            result.max_mass_drift = self.mass_drift(state)
            for i in range(1, n_steps + 1):
                new, rejected = self.advance(state, cfg)
                new.t = initial.t + i * cfg.dt
                drift = self.mass_drift(new)
                result.max_mass_drift = max(result.max_mass_drift, drift)
                if drift > mass_tol:
                    raise SolverError(f"mass drift {drift:.3e} exceeds {mass_tol:g}")
                state = new
                result.steps = i
                result.rejected_steps += int(rejected)
                if i % cfg.snapshot_stride == 0 or i == n_steps:
                    sample(state)
        except (CFLViolation, SolverError, ArithmeticError, scipy.linalg.LinAlgError) as exc:
            result.final = state
            raise RunAborted(exc, state, result.trace) from exc
        result.final = state
        return result


class Functionals:
    """Trace sampler: the eight functionals of a state.

    ``radius`` gives the low-frequency ball radius as a function of time;
    ``lam`` weights the configuration part of the coupled energy.
    """

    def __init__(self, system: CoupledSystem, radius: Callable[[float], float] | None = None,
                 lam: float = 1.0):
        self.system, self.radius, self.lam = system, radius, lam

    def __call__(self, state: SystemState) -> dict:
        sysm = self.system
        psi = state.psi
        tau = sysm.relative_stress(psi.coeffs)
        u2 = state.u.l2sq()
        rel = relative_l2(psi, sysm.ops)
        r = self.radius(state.t) if self.radius is not None else sysm.grid.max_wavenumber * math.sqrt(sysm.grid.dim)
        return {
            "u_l2sq": u2,
            "relative_l2": rel,
            "fisher_g": fisher_g(psi, sysm.ops),
            "fisher_sqrt": fisher_sqrt(psi),
            "entropy": entropy(psi),
            "tau_l2": float(psi.cell_volume * np.sum(tau**2)),
            "low_freq_energy": low_freq_energy(state.u, r),
            "coupled_energy": self.lam * rel + u2,
            "grad_u_l2sq": state.u.gradient_l2sq(),
        }


# --- single configuration point ----------------------------------------------

def evolve_point(basis: ConfigBasis, ops: FokkerPlanckOperators, sigma, a0, T: float,
                 dt: float = 1e-3, scheme: Scheme | str = Scheme.IMEX2) -> np.ndarray:
    """Fokker-Planck evolution at one spatial point with a fixed drag matrix sigma.

    Uses the same IMEX update as the coupled stepper (explicit drag, implicit D).
    """
    scheme = Scheme.parse(scheme)
    S = ops.drag_matrix(sigma)
    M, D = ops.M, ops.D
    n_steps = max(1, int(math.ceil(T / dt - 1e-12))) if T > 0 else 0
    a = np.asarray(a0, dtype=float).copy()
    if n_steps == 0:
        return a
    h = T / n_steps
    full = scipy.linalg.cho_factor(M + h * D)
    half = scipy.linalg.cho_factor(M + 0.5 * h * D)
    for _ in range(n_steps):
        if scheme is Scheme.IMEX1:
            a = scipy.linalg.cho_solve(full, M @ a + h * (S @ a))
        else:
            a_mid = scipy.linalg.cho_solve(half, M @ a + 0.5 * h * (S @ a))
            a = scipy.linalg.cho_solve(half, M @ a - 0.5 * h * (D @ a) + h * (S @ a_mid))
        if not np.all(np.isfinite(a)):
            raise SolverError("non-finite coefficients in the single-point evolution")
    return a


# --- initial data ------------------------------------------------------------

def _default_center(grid: TorusGrid, xi_c: float, rng) -> np.ndarray:
    """Box centre shifted by a seeded offset of at most one bump width per axis."""
    return grid.L / 2 + rng.uniform(-1.0, 1.0, grid.dim) / xi_c


def bump_velocity(grid: TorusGrid, m: int = 0, xi_c: float = 1.0, seed: int = 0,
                  center=None) -> VelocityField:
    """Unnormalized solenoidal bump uhat = |xi|^m exp(-|xi|^2/xi_c^2) P(xi) c exp(-i xi.x0).

    c is a seeded random unit vector, P the Leray projector and x0 a seeded
    point near the box centre. The field is restricted to the 2/3 band and
    its mean mode is zero; Hermitian symmetry holds by construction.
    """
    if m < 0:
        raise ValueError("spectrum exponent m must be >= 0")
    if not xi_c > 0:
        raise ValueError("cutoff xi_c must be > 0")
    rng = np.random.default_rng(seed)
    c = rng.normal(size=grid.dim)
    c /= np.linalg.norm(c)
    center = _default_center(grid, xi_c, rng) if center is None else np.asarray(center, float)
    xi = grid.wavenumbers
    k2 = grid.k2
    profile = np.sqrt(k2) ** m * np.exp(-k2 / xi_c**2)
    phase = np.exp(-1j * np.tensordot(center, xi, axes=1))
    uhat = c.reshape((-1,) + (1,) * grid.dim) * (profile * phase * grid.dealias)
    field = leray_project(VelocityField(grid, uhat.astype(complex)))
    field.uhat[(slice(None),) + (0,) * grid.dim] = 0.0
    return field


def localized_velocity(grid: TorusGrid, amplitude: float, m: int = 0, xi_c: float = 1.0,
                       seed: int = 0, center=None) -> VelocityField:
    """``bump_velocity`` rescaled to ||u||_{L^2} = amplitude."""
    if amplitude < 0:
        raise ValueError("amplitude must be >= 0")
    field = bump_velocity(grid, m, xi_c, seed, center)
    norm = math.sqrt(field.l2sq())
    if norm == 0.0 or amplitude == 0.0:
        return VelocityField.zeros(grid)
    field.uhat *= amplitude / norm
    return field


def low_order_modes(basis: ConfigBasis, max_degree: int = 3) -> list[int]:
    """Indices of non-constant modes with polynomial degree 2n + l <= max_degree."""
    return [a for a, (n, l, _) in enumerate(basis.modes) if 0 < 2 * n + l <= max_degree]


def perturbed_configuration(grid: TorusGrid, basis: ConfigBasis, eps: float, xi_c: float = 1.0,
                            seed: int = 0, n_eigen: int = 6, center=None,
                            ops: FokkerPlanckOperators | None = None) -> ConfigDistribution:
    """g(x, R) = 1 + eps h(x) sum_a c_a v_a(R) with a localized bump h (peak 1).

    The v_a are the ``n_eigen`` slowest mean-zero eigenmodes of the
    configuration operator and the c_a seeded normal weights scaled to unit
    L^2(psi_inf) norm, so the mass stays 1. Eigenmodes rather than raw
    polynomials keep the data in the domain of the operator: a polynomial
    with nonzero radial slope at the boundary carries slowly decaying weight
    on the stiffest modes, which the implicit midpoint rule damps poorly.
    """
    if n_eigen < 1:
        raise ValueError("n_eigen must be >= 1")
    rng = np.random.default_rng(seed + 7919)
    _, vecs = poincare_eigenpairs(basis, ops)
    n_eigen = min(n_eigen, vecs.shape[1])
    w = rng.normal(size=n_eigen)
    c = vecs[:, :n_eigen] @ (w / np.linalg.norm(w))
    center = _default_center(grid, xi_c, rng) if center is None else np.asarray(center, float)
    diff = grid.coords - center.reshape((-1,) + (1,) * grid.dim)
    diff = (diff + grid.L / 2) % grid.L - grid.L / 2
    h = np.exp(-np.sum(diff**2, axis=0) * xi_c**2 / 4.0)
    h = grid.ifft(grid.fft(h) * grid.dealias)
    coeffs = np.tile(basis.one, (grid.n_points, 1)) + eps * np.outer(h.ravel(), c)
    return ConfigDistribution(basis, coeffs, grid.cell_volume)


def equilibrium_state(grid: TorusGrid, basis: ConfigBasis) -> SystemState:
    return SystemState(0.0, VelocityField.zeros(grid),
                       ConfigDistribution.equilibrium(basis, grid.n_points, grid.cell_volume))


# --- Duhamel check -------------------------------------------------------------

def duhamel_residual(system: CoupledSystem, states: list, stride: int = 1) -> float:
    """Max-mode relative residual of uhat(t) against its Duhamel representation.

    Uses every ``stride``-th stored state as quadrature node (trapezoid in s)
    for int_0^t exp(-nu (t-s) |xi|^2) G(s) ds, with G the explicit velocity
    tendency recomputed from each stored state.
    """
    nodes = states[::stride]
    if len(nodes) < 2:
        raise ValueError("Duhamel check needs at least two stored states")
    if (len(states) - 1) % stride:
        raise ValueError("stride must divide the number of stored intervals")
    nu_k2 = system.params.nu * system.grid.k2
    t_end = nodes[-1].t
    integral = np.zeros_like(nodes[0].u.uhat)
    G = [system.explicit_terms(s.u, s.psi.coeffs, s.t)[0] * np.exp(-nu_k2 * (t_end - s.t)) for s in nodes]
    for j in range(len(nodes) - 1):
        integral += 0.5 * (nodes[j + 1].t - nodes[j].t) * (G[j] + G[j + 1])
    predicted = np.exp(-nu_k2 * (t_end - nodes[0].t)) * nodes[0].u.uhat + integral
    actual = nodes[-1].u.uhat
    scale = np.max(np.abs(actual))
    if scale == 0.0:
        return float(np.max(np.abs(predicted)))
    return float(np.max(np.abs(predicted - actual)) / scale)
