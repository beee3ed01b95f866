"""FENE model parameters, spring potential and equilibrium Maxwellian.

The bead friction and ball radius are fixed to one, so the only physical
parameters are the spring exponent ``k``, the viscosity ``nu``, the
dimension and the choice of drag term.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import betaln

logger = logging.getLogger(__name__)


class DomainError(ValueError):
    """Raised when a configuration point lies on or outside the unit ball."""


class Drag(enum.Enum):
    GRADIENT = "gradient"
    COROTATION = "corotation"

    @classmethod
    def parse(cls, value: "str | Drag") -> "Drag":
        if isinstance(value, Drag):
            return value
        key = str(value).strip().lower().replace("-", "").replace("_", "")
        for member in cls:
            if member.value == key:
                return member
        raise ValueError(f"unknown drag mode {value!r}; expected 'gradient' or 'corotation'")


@dataclass(frozen=True)
class FeneParams:
    k: float = 1.0
    nu: float = 1.0
    dim: int = 2
    drag: Drag = Drag.COROTATION

    def __post_init__(self):
        object.__setattr__(self, "drag", Drag.parse(self.drag))
        if not (np.isfinite(self.k) and self.k > 0):
            raise ValueError(f"k must be > 0, got {self.k}")
        if not (np.isfinite(self.nu) and self.nu > 0):
            raise ValueError(f"nu must be > 0, got {self.nu}")
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")
        if self.k < 1:
            logger.warning(
                "k=%g < 1: the stress integrand carries (1-|R|^2)^(k-1), which is "
                "singular at the boundary; it is absorbed into the Jacobi weight",
                self.k,
            )

    def drag_tensor(self, grad_u: np.ndarray) -> np.ndarray:
        """Drag matrix from the velocity gradient ``grad_u[..., i, j] = d_j u_i``."""
        if self.drag is Drag.COROTATION:
            return grad_u - np.swapaxes(grad_u, -1, -2)
        return grad_u


def sphere_area(dim: int) -> float:
    """Surface measure of the unit sphere in R^dim."""
    return 2.0 * math.pi ** (dim / 2) / math.gamma(dim / 2)


def log_normalization(k: float, dim: int) -> float:
    """log of Z = int_B (1-|R|^2)^k dR = |S^{d-1}| B(d/2, k+1) / 2."""
    return math.log(sphere_area(dim) / 2.0) + betaln(dim / 2.0, k + 1.0)


def normalization(k: float, dim: int) -> float:
    return math.exp(log_normalization(k, dim))


def _radius_sq(R) -> np.ndarray:
    R = np.asarray(R, dtype=float)
    r2 = np.sum(R * R, axis=-1)
    if np.any(r2 >= 1.0):
        raise DomainError("configuration point outside the open unit ball")
    return r2


def potential(params: FeneParams, R) -> np.ndarray:
    """FENE spring potential U(R) = -k ln(1 - |R|^2). Vectorized over leading axes."""
    return -params.k * np.log1p(-_radius_sq(R))


def potential_gradient(params: FeneParams, R) -> np.ndarray:
    R = np.asarray(R, dtype=float)
    r2 = _radius_sq(R)
    return (2.0 * params.k / (1.0 - r2))[..., None] * R


def equilibrium_density(params: FeneParams, R) -> np.ndarray:
    r2 = _radius_sq(R)
    return np.exp(params.k * np.log1p(-r2) - log_normalization(params.k, params.dim))
