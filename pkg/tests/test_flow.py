import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from conftest import SQRT_8PI, const_state
from rymflow.errors import BlowUpError, InvalidArgumentError, StepRejected, VolumeDriftError
from rymflow.flow import (
    FlowVariant,
    Scheme,
    StepperConfig,
    max_stable_dt,
    rhs,
    rhs_max_norms,
    step,
)
from rymflow.grid import build_background, integrate0
from rymflow.initial import random_state
from rymflow.state import FlowState


def test_flat_fixed_point(torus32):
    du, dpsi = rhs(const_state(torus32), "unnormalized")
    assert not du.any() and not dpsi.any()


def test_round_fixed_point(sphere32):
    du, dpsi = rhs(const_state(sphere32, psi=SQRT_8PI), "unnormalized")
    assert np.max(np.abs(du)) < 1e-12
    assert np.max(np.abs(dpsi)) < 1e-12


def test_uniform_expansion_on_torus(torus32):
    du, dpsi = rhs(const_state(torus32, psi=1.5), "unnormalized")
    assert np.allclose(du, 1.5**2, atol=1e-14)
    assert np.max(np.abs(dpsi)) < 1e-14


@pytest.mark.parametrize("kind", ["torus", "sphere"])
def test_normalized_rhs_preserves_volume_and_flux(kind):
    bg = build_background(kind, 16)
    s = random_state(bg, 11, u_amp=0.4, psi_amp=0.6, flux_target=1.3, normalized=True)
    du, dpsi = rhs(s, "normalized")
    assert abs(integrate0(s.exp_u * du, bg)) < 1e-12 * (1 + np.max(np.abs(du)))
    du, dpsi = rhs(s, "unnormalized")
    assert abs(integrate0(dpsi, bg)) < 1e-12 * (1 + np.max(np.abs(dpsi)))


def test_volume_drift_guard(torus32):
    with pytest.raises(VolumeDriftError) as info:
        rhs(const_state(torus32, u=0.1), "normalized")
    assert info.value.volume == pytest.approx(math.exp(0.1))


@pytest.mark.parametrize("scheme", ["rk4", "semi_implicit"])
def test_trivial_state_only_advances_time(torus32, scheme):
    s = const_state(torus32)
    out = step(s, 1e-4, "unnormalized", scheme)
    assert out.t == pytest.approx(1e-4)
    assert not out.u.any() and not out.psi.any()


def test_semi_implicit_keeps_exact_fixed_points(sphere32):
    s = const_state(sphere32, psi=SQRT_8PI)
    out = s
    for _ in range(50):
        out = step(out, 1e-2, "unnormalized")
    assert np.max(np.abs(out.u)) < 1e-12
    assert np.max(np.abs(out.psi - SQRT_8PI)) < 1e-11


def _linearized_amplitudes(c, eps, T):
    """Mode amplitudes (psi, u) of sin(2 pi x) for the system linearized at
    u = U(t), psi = c, where U' = c^2 e^{-2U}."""
    k2 = (2 * math.pi) ** 2

    def f(t, y):
        U = 0.5 * math.log1p(2 * c * c * t)
        p, v = y
        eU = math.exp(-U)
        dp = -k2 * eU * (p - c * v)
        dv = -k2 * eU * v + eU * eU * (2 * c * p - 2 * c * c * v)
        return [dp, dv]

    sol = solve_ivp(f, (0, T), [eps, 0.0], method="DOP853", rtol=1e-12, atol=1e-16)
    return sol.y[:, -1]


def test_heat_kernel_decay_matches_linearized_oracle():
    bg = build_background("torus", 16)
    X, _ = bg.coords
    c, eps, T, dt = 1.0, 1e-5, 0.02, 1e-4
    mode = np.sin(2 * math.pi * X)
    s = FlowState(bg, np.zeros(bg.shape), c + eps * mode)
    for _ in range(round(T / dt)):
        s = step(s, dt, "unnormalized", "rk4")
    p_sim = 2 * integrate0((s.psi - integrate0(s.psi, bg)) * mode, bg)
    p_ref, _ = _linearized_amplitudes(c, eps, T)
    assert p_sim == pytest.approx(p_ref, rel=1e-4)
    # sanity: the bare heat kernel would be a visibly different number
    assert abs(p_ref - eps * math.exp(-(2 * math.pi) ** 2 * T)) > 1e-3 * eps


def test_rk4_is_fourth_order():
    bg = build_background("torus", 16)
    s0 = random_state(bg, 3, k_max=2, u_amp=0.3, psi_amp=0.3)
    s0 = s0.replace(u=s0.u + 0.5)
    T = 0.004

    def run(dt):
        s = s0
        for _ in range(round(T / dt)):
            s = step(s, dt, "unnormalized", "rk4")
        return s.u

    ref = run(T / 128)
    e1 = np.max(np.abs(run(T / 16) - ref))
    e2 = np.max(np.abs(run(T / 32) - ref))
    assert 12.0 < e1 / e2 < 20.0


def test_rk4_stability_guard(torus64):
    s = const_state(torus64, psi=1.0)
    limit = max_stable_dt(s)
    with pytest.raises(StepRejected) as info:
        step(s, 2 * limit, "unnormalized", "rk4")
    assert info.value.suggested == pytest.approx(limit)
    step(s, 0.9 * limit, "unnormalized", "rk4")


@pytest.mark.parametrize("scheme", ["rk4", "semi_implicit"])
def test_blow_up_guard(torus32, scheme):
    # du/dt = e^{-2u} psi^2 = 1 carries u across the |u| = 50 guard
    s = const_state(torus32, u=49.999, psi=math.exp(50.0))
    with pytest.raises(BlowUpError) as info:
        step(s, 1e-2, "unnormalized", scheme)
    assert info.value.max_abs_u > 50


def test_bad_dt_and_config():
    bg = build_background("torus", 8)
    with pytest.raises(InvalidArgumentError):
        step(const_state(bg), 0.0, "unnormalized")
    with pytest.raises(InvalidArgumentError):
        StepperConfig(cfl_safety=1.5)
    with pytest.raises(InvalidArgumentError):
        StepperConfig(dt_min=1e-2, dt_max=1e-3)


def test_scheme_aliases():
    assert Scheme.parse("RK4Explicit") is Scheme.RK4
    assert Scheme.parse("SemiImplicitSpectral") is Scheme.SEMI_IMPLICIT
    assert Scheme.parse(Scheme.RK4) is Scheme.RK4
    with pytest.raises(ValueError):
        Scheme.parse("euler")


def test_flux_is_conserved_by_steps(torus64):
    s = random_state(torus64, 4, u_amp=0.3, psi_amp=0.5, flux_target=1.0)
    for _ in range(100):
        s = step(s, 1e-3, FlowVariant.UNNORMALIZED)
    assert abs(integrate0(s.psi, torus64) - 1.0) < 1e-12


def test_normalized_and_unnormalized_are_not_a_rescaling(sphere16):
    s0 = random_state(sphere16, 8, u_amp=0.2, psi_amp=0.3, flux_target=SQRT_8PI * 1.3, normalized=True)
    a = b = s0
    for _ in range(500):
        a = step(a, 2e-3, "normalized")
        b = step(b, 2e-3, "unnormalized")
    ua = a.u - integrate0(a.u, sphere16)
    ub = b.u - integrate0(b.u, sphere16)
    assert np.max(np.abs(ua - ub)) > 1e-6


def test_rhs_max_norms(torus32):
    assert rhs_max_norms(const_state(torus32, psi=2.0), "unnormalized") == pytest.approx((4.0, 0.0), abs=1e-13)


def test_contracted_sphere_stays_stable(sphere16):
    # flux 1 shrinks the area to 1/(8 pi), where e^{-u} ~ 25 and the reaction
    # term is stiff; the step must settle there without a two-step oscillation
    from rymflow.state import volume

    s = random_state(sphere16, 0, flux_target=1.0)
    vols = []
    for _ in range(300):
        s = step(s, 2e-3, "unnormalized")
        vols.append(volume(s))
    assert vols[-1] == pytest.approx(1 / (8 * math.pi), rel=1e-6)
    assert np.max(np.abs(np.diff(vols[-50:]))) < 1e-9


def test_reaction_rate():
    from rymflow.flow import reaction_rate

    bg = build_background("sphere", 8)
    # at the round fixed point d/du(-R0 e^{-u} + e^{-2u} psi^2) = -R0
    assert reaction_rate(const_state(bg, psi=SQRT_8PI)) == pytest.approx(8 * math.pi)
    assert reaction_rate(const_state(bg)) == 0.0
