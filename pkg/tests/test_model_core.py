"""Double-well potential, interpolation function, and parameter validation."""
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from chemodose import ModelParams
from chemodose.model import default_interpolant, default_potential


def test_potential_values_and_minima():
    pot = default_potential()
    for s in (-1.0, 1.0):
        assert pot.psi(np.array([s]))[0] == 0.0
        assert pot.psi1(np.array([s]))[0] == 0.0
    assert pot.psi(np.array([0.0]))[0] == pytest.approx(0.25)
    s = np.linspace(-2, 2, 41)
    assert np.all(pot.psi(s) >= 0.0)


def test_potential_derivatives_by_central_fd():
    pot = default_potential()
    s = np.linspace(-1.5, 1.5, 13)
    e = 1e-6
    fd1 = (pot.psi(s + e) - pot.psi(s - e)) / (2 * e)
    fd2 = (pot.psi1(s + e) - pot.psi1(s - e)) / (2 * e)
    assert np.max(np.abs(fd1 - pot.psi1(s))) <= 1e-8
    assert np.max(np.abs(fd2 - pot.psi2(s))) <= 1e-8


def test_interpolant_endpoint_values():
    interp = default_interpolant()
    h = interp.hval
    assert h(np.array([-1.0]))[0] == 0.0
    assert h(np.array([1.0]))[0] == 1.0
    assert h(np.array([0.0]))[0] == pytest.approx(0.5)
    # clamped outside the physical range
    assert h(np.array([-3.0]))[0] == 0.0
    assert h(np.array([3.0]))[0] == 1.0
    assert interp.hprime(np.array([-1.0]))[0] == 0.0
    assert interp.hprime(np.array([1.0]))[0] == 0.0


def test_interpolant_monotone_with_bounded_slope():
    interp = default_interpolant()
    s = np.linspace(-1.3, 1.3, 401)
    hp = interp.hprime(s)
    assert np.all(hp >= 0.0)
    assert np.max(hp) <= 15.0 / 16.0 + 1e-12
    # hprime consistent with hval
    e = 1e-6
    fd = (interp.hval(s + e) - interp.hval(s - e)) / (2 * e)
    interior = np.abs(np.abs(s) - 1.0) > 1e-3  # clamp kink has one-sided slope
    assert np.max(np.abs(fd[interior] - hp[interior])) <= 1e-8


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_interpolant_range_property(s):
    h = default_interpolant().hval(np.array([s]))[0]
    assert 0.0 <= h <= 1.0


def test_params_validation():
    ModelParams(alpha=0.0)    # boundary value allowed
    ModelParams(P=0.0, Acal=0.0, Ccal=0.0, Bcal=0.0)
    for bad in (dict(P=-1.0), dict(Acal=-0.1), dict(Ccal=-2.0),
                dict(Bcal=-1e-9), dict(alpha=-0.5), dict(A=0.0), dict(B=0.0),
                dict(A=-1.0), dict(B=-1.0)):
        with pytest.raises(ValueError):
            ModelParams(**bad)


def test_interface_width_scale():
    # the tanh profile width used by seeds follows sqrt(B/A)
    p = ModelParams(A=4.0, B=1.0)
    assert math.sqrt(p.B / p.A) == pytest.approx(0.5)
