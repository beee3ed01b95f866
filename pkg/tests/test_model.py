import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from fene_decay_lab.model import (DomainError, Drag, FeneParams, equilibrium_density, normalization,
                                  potential, potential_gradient)


def test_potential_examples():
    assert potential(FeneParams(k=3.0), [0.0, 0.0]) == 0.0
    R = [math.sqrt(0.5), 0.0]
    assert potential(FeneParams(k=1.0), R) == pytest.approx(math.log(2.0), rel=1e-14)
    R = [math.sqrt(0.75), 0.0]
    assert potential(FeneParams(k=2.0), R) == pytest.approx(2.772589, abs=1e-6)


def test_potential_gradient_examples():
    p = FeneParams(k=1.0)
    np.testing.assert_array_equal(potential_gradient(p, [0.0, 0.0]), [0.0, 0.0])
    np.testing.assert_allclose(potential_gradient(p, [0.5, 0.0]), [4.0 / 3.0, 0.0], rtol=1e-14)


def test_potential_gradient_central_difference():
    p = FeneParams(k=2.0)
    R = np.array([0.3, -0.2])
    h = 1e-5
    fd = np.array([(potential(p, R + h * e) - potential(p, R - h * e)) / (2 * h) for e in np.eye(2)])
    np.testing.assert_allclose(potential_gradient(p, R), fd, rtol=1e-6)


def test_gradient_is_minus_grad_log_density():
    p = FeneParams(k=1.7, dim=3)
    R = np.array([0.2, -0.4, 0.1])
    h = 1e-6
    fd = np.array([(math.log(equilibrium_density(p, R + h * e)) - math.log(equilibrium_density(p, R - h * e)))
                   / (2 * h) for e in np.eye(3)])
    np.testing.assert_allclose(potential_gradient(p, R), -fd, rtol=1e-7)


def test_density_at_centre_2d():
    assert equilibrium_density(FeneParams(k=1.0), [0.0, 0.0]) == pytest.approx(2.0 / math.pi, rel=1e-14)


@pytest.mark.parametrize("dim,k", [(2, 0.5), (2, 1.0), (2, 3.0), (3, 1.0), (3, 2.5)])
def test_normalization_matches_adaptive_quadrature(dim, k):
    area = 2 * math.pi if dim == 2 else 4 * math.pi
    z = area * integrate.quad(lambda r: (1 - r * r) ** k * r ** (dim - 1), 0, 1, epsabs=0, epsrel=1e-13)[0]
    assert normalization(k, dim) == pytest.approx(z, rel=1e-12)


def test_density_vanishes_at_boundary():
    p = FeneParams(k=0.5)
    assert equilibrium_density(p, [1 - 1e-12, 0.0]) < 1e-5


@pytest.mark.parametrize("fn", [potential, potential_gradient, equilibrium_density])
def test_domain_error_outside_ball(fn):
    with pytest.raises(DomainError):
        fn(FeneParams(), [1.0, 0.0])
    with pytest.raises(DomainError):
        fn(FeneParams(dim=3), [0.0, 0.9, 0.9])


@pytest.mark.parametrize("bad", [dict(k=0.0), dict(k=-1.0), dict(nu=0.0), dict(dim=4), dict(drag="shear")])
def test_param_validation(bad):
    with pytest.raises(ValueError):
        FeneParams(**bad)


def test_drag_parse_and_tensor():
    assert Drag.parse("co-rotation") is Drag.COROTATION
    G = np.array([[1.0, 2.0], [3.0, 4.0]])
    np.testing.assert_array_equal(FeneParams(drag="gradient").drag_tensor(G), G)
    np.testing.assert_array_equal(FeneParams(drag="corotation").drag_tensor(G), [[0.0, -1.0], [1.0, 0.0]])


@settings(max_examples=50, deadline=None)
@given(r=st.floats(0.0, 0.99), a=st.floats(0.0, 2 * math.pi), k=st.floats(0.2, 5.0))
def test_density_rotation_invariant_and_two_forms_agree(r, a, k):
    p = FeneParams(k=k)
    R1 = np.array([r, 0.0])
    R2 = np.array([r * math.cos(a), r * math.sin(a)])
    v1, v2 = equilibrium_density(p, R1), equilibrium_density(p, R2)
    assert abs(v1 - v2) <= 1e-14 * max(1.0, v1)
    other = math.exp(-potential(p, R2)) / normalization(k, 2)
    assert abs(other - v2) <= 1e-14 * max(1.0, v2)
