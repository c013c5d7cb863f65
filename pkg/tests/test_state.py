import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import SQRT_8PI, const_state
from rymflow.errors import ContractViolation, InvalidStateError
from rymflow.grid import build_background
from rymflow.initial import random_state
from rymflow.state import (
    FlowState,
    f_norm_sq,
    flux,
    gauss_bonnet_total,
    integrate_g,
    scalar_curvature,
    stress_identity_residual,
    volume,
)


def test_round_sphere_curvature(sphere32):
    s = const_state(sphere32)
    assert np.allclose(scalar_curvature(s), 8 * math.pi, atol=1e-10)


def test_constant_conformal_factor_rescales_curvature(sphere32):
    s = const_state(sphere32, u=0.3)
    assert np.allclose(scalar_curvature(s), 8 * math.pi * math.exp(-0.3), atol=1e-10)
    assert volume(s) == pytest.approx(math.exp(0.3), rel=1e-14)


def test_torus_curvature_of_sine_factor(torus64):
    # R = -e^{-u} Lap0 u with Lap0 sin(2 pi x) = -(2 pi)^2 sin(2 pi x)
    X, _ = torus64.coords
    a = 0.1
    u = a * np.sin(2 * math.pi * X)
    s = FlowState(torus64, u, np.zeros(torus64.shape))
    expected = np.exp(-u) * (2 * math.pi) ** 2 * a * np.sin(2 * math.pi * X)
    assert np.max(np.abs(scalar_curvature(s) - expected)) < 1e-9


def test_norms_of_curvature_form(torus32):
    s = const_state(torus32, u=0.5, psi=2.0)
    assert np.allclose(f_norm_sq(s, "background"), 8.0)
    assert np.allclose(f_norm_sq(s, "evolving"), 8.0 * math.exp(-1.0))
    with pytest.raises(ValueError):
        f_norm_sq(s, "other")


def test_flux_and_gauss_bonnet(sphere32, torus64):
    s = random_state(sphere32, 1, flux_target=SQRT_8PI)
    assert flux(s) == pytest.approx(SQRT_8PI, abs=1e-12)
    assert gauss_bonnet_total(s) == pytest.approx(8 * math.pi, abs=1e-9)
    t = random_state(torus64, 2, flux_target=0.7)
    assert abs(gauss_bonnet_total(t)) < 1e-9


def test_integrate_g_of_one_is_volume(sphere16):
    s = random_state(sphere16, 5)
    assert integrate_g(np.ones(sphere16.shape), s) == pytest.approx(volume(s), rel=1e-14)


def test_state_is_immutable_and_validated(torus32):
    s = const_state(torus32)
    with pytest.raises(ValueError):
        s.u[0, 0] = 1.0
    with pytest.raises(ContractViolation):
        FlowState(torus32, np.zeros((4, 4)), np.zeros((4, 4)))
    bad = FlowState(torus32, np.full(torus32.shape, np.nan), np.zeros(torus32.shape))
    with pytest.raises(InvalidStateError):
        bad.validate()
    with pytest.raises(InvalidStateError):
        volume(FlowState(torus32, np.full(torus32.shape, 800.0), np.zeros(torus32.shape)))


@settings(max_examples=30, deadline=None)
@given(
    seed=st.integers(0, 2**31 - 1),
    kind=st.sampled_from(["torus", "sphere"]),
    u_amp=st.floats(0.0, 1.0),
    psi_amp=st.floats(0.0, 3.0),
)
def test_stress_identity_property(seed, kind, u_amp, psi_amp):
    bg = build_background(kind, 16)
    s = random_state(bg, seed, u_amp=u_amp, psi_amp=psi_amp, flux_target=1.0)
    assert stress_identity_residual(s) <= 1e-12


def test_simple_values(torus32):
    s = const_state(torus32, u=math.log(2.0), psi=1.0)
    assert np.allclose(f_norm_sq(s, "evolving"), 0.5)
    assert volume(const_state(torus32, u=math.log(3.0))) == pytest.approx(3.0)
    assert flux(const_state(torus32, psi=0.7)) == pytest.approx(0.7)
    assert stress_identity_residual(random_state(torus32, 1, psi_amp=0.0, flux_target=0.0)) == 0.0
