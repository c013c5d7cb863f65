"""Right-hand sides of the conformal RYM system and the time steppers.

The metric equation is

    du/dt = e^{-u} (Lap0 u - R0 + 1/2 e^{-u} |F|_0^2)                (unnormalized)
    du/dt = e^{-u} Lap0 u + R0 (1 - e^{-u})
            + 1/2 (e^{-2u} |F|_0^2 - int e^{-u}|F|_0^2 / int e^u)      (normalized)

and the curvature scalar psi = *_0 F obeys dpsi/dt = Lap0(e^{-u} psi) for both.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import BlowUpError, InvalidArgumentError, StepRejected, VolumeDriftError
from .grid import Surface, integrate0, laplacian0, project
from .state import FlowState, volume

# real-axis extent of the RK4 stability region
RK4_REAL_STABILITY = 2.785
BLOWUP_U = 50.0


class FlowVariant(str, enum.Enum):
    UNNORMALIZED = "unnormalized"
    NORMALIZED = "normalized"


class Scheme(str, enum.Enum):
    RK4 = "rk4"
    SEMI_IMPLICIT = "semi_implicit"

    @classmethod
    def parse(cls, text: str) -> "Scheme":
        aliases = {
            "rk4explicit": cls.RK4,
            "rk4_explicit": cls.RK4,
            "semiimplicitspectral": cls.SEMI_IMPLICIT,
            "semi_implicit_spectral": cls.SEMI_IMPLICIT,
        }
        key = text.strip().lower()
        return aliases.get(key) or cls(key)


@dataclass(frozen=True)
class StepperConfig:
    scheme: Scheme = Scheme.SEMI_IMPLICIT
    cfl_safety: float = 0.5
    dt_max: float = 1e-3
    dt_min: float = 1e-9

    def __post_init__(self):
        if not 0.0 < self.cfl_safety <= 1.0:
            raise InvalidArgumentError(f"cfl_safety={self.cfl_safety} must lie in (0, 1]")
        if not 0.0 < self.dt_min <= self.dt_max:
            raise InvalidArgumentError(f"need 0 < dt_min <= dt_max, got {self.dt_min}, {self.dt_max}")


def rhs(state: FlowState, variant: FlowVariant | str) -> tuple[np.ndarray, np.ndarray]:
    """Return (du/dt, dpsi/dt)."""
    variant = FlowVariant(variant)
    bg = state.bg
    e_mu = state.exp_mu
    normF2 = 2.0 * state.psi**2
    if variant is FlowVariant.UNNORMALIZED:
        du = e_mu * (state.lap_u - bg.r0 + 0.5 * e_mu * normF2)
    else:
        vol = volume(state)
        if not 0.99 <= vol <= 1.01:
            raise VolumeDriftError(vol)
        ratio = integrate0(e_mu * normF2, bg) / vol
        du = e_mu * state.lap_u + bg.r0 * (1.0 - e_mu) + 0.5 * (e_mu**2 * normF2 - ratio)
    dpsi = laplacian0(state.star_f, bg)
    return du, dpsi


def max_stable_dt(state: FlowState, cfl_safety: float = 1.0) -> float:
    """Largest RK4 step for the e^{-u} Lap0 principal part.

    Bound: dt * max(e^{-u}) * rho(Lap0) <= 2.785, the real-axis extent of the
    RK4 stability region, with rho the exact spectral radius of the discrete
    Laplacian.
    """
    mu = float(np.max(state.exp_mu))
    return cfl_safety * RK4_REAL_STABILITY / (mu * state.bg.laplacian_radius)


def _advance(state: FlowState, u: np.ndarray, psi: np.ndarray, dt: float, variant) -> FlowState:
    if variant is FlowVariant.NORMALIZED and np.all(np.isfinite(u)) and np.max(np.abs(u)) < BLOWUP_U:
        # exact volume projection: removes the O(dt^2) per-step drift that
        # R0 > 0 would otherwise amplify like exp(R0 t)
        u = u - math.log(integrate0(np.exp(u), state.bg))
    t = state.t + dt
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(psi))):
        finite = np.abs(u[np.isfinite(u)])
        raise BlowUpError(t, float("inf") if finite.size < u.size else float(finite.max()))
    umax = float(np.max(np.abs(u)))
    if umax > BLOWUP_U:
        raise BlowUpError(t, umax)
    return FlowState(state.bg, u, psi, t)


def _step_rk4(state, dt, variant):
    def f(s):
        return rhs(s, variant)

    k1u, k1p = f(state)
    s2 = FlowState(state.bg, state.u + 0.5 * dt * k1u, state.psi + 0.5 * dt * k1p, state.t)
    k2u, k2p = f(s2)
    s3 = FlowState(state.bg, state.u + 0.5 * dt * k2u, state.psi + 0.5 * dt * k2p, state.t)
    k3u, k3p = f(s3)
    s4 = FlowState(state.bg, state.u + dt * k3u, state.psi + dt * k3p, state.t)
    k4u, k4p = f(s4)
    u = state.u + dt / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u)
    psi = state.psi + dt / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
    return u, psi


def _phi1(z: np.ndarray) -> np.ndarray:
    """(e^z - 1) / z, evaluated stably near z = 0."""
    small = np.abs(z) < 1e-5
    zs = np.where(small, 1.0, z)
    return np.where(small, 1.0 + 0.5 * z + z * z / 6.0, np.expm1(zs) / zs)


def reaction_rate(state) -> float:
    """Largest pointwise decay rate of the zeroth-order part of du/dt.

    d/du of (-R0 e^{-u} + e^{-2u} psi^2) is R0 e^{-u} - 2 e^{-2u} psi^2 (the
    same in both variants); its most negative value, or 0.
    """
    mu = state.exp_mu
    return max(0.0, float(np.max(2.0 * mu * mu * state.psi**2 - state.bg.r0 * mu)))


def _step_semi_implicit(state, dt, variant):
    """First-order exponential step for the stiff linear part.

    The u equation is linearized as mu Lap0 - sigma and the psi equation as
    mu Lap0, with mu = max e^{-u} and sigma = reaction_rate frozen for the
    step.  Each mode advances by x += dt * phi1(-dt (mu k + s)) * f, where f is
    the full right-hand side and k the mode's eigenvalue of -Lap0 (Fourier on
    the torus, spherical harmonics on the sphere).  A state with f = 0 is
    left unchanged.  Leaving sigma out makes contracted sphere states (large
    e^{-u}) unstable at moderate dt.
    """
    bg = state.bg
    mu = float(np.max(state.exp_mu))
    sigma = reaction_rate(state)
    du, dpsi = rhs(state, variant)
    if bg.kind is Surface.TORUS:
        k2 = bg._ops["k2"]
        fu = dt * _phi1(-dt * (mu * k2 + sigma))
        fpsi = dt * _phi1(-mu * dt * k2)
        u = state.u + np.fft.irfft2(fu * np.fft.rfft2(du), s=bg.shape)
        psi = state.psi + np.fft.irfft2(fpsi * np.fft.rfft2(dpsi), s=bg.shape)
    else:
        sht = bg._ops["sht"]
        fu = dt * _phi1(dt * (mu * sht.eig - sigma))[None, :]
        fpsi = dt * _phi1(mu * dt * sht.eig)[None, :]
        u = project(state.u, bg) + sht.synthesis(fu * sht.analysis(du))
        psi = project(state.psi, bg) + sht.synthesis(fpsi * sht.analysis(dpsi))
    return u, psi


def step(
    state: FlowState,
    dt: float,
    variant: FlowVariant | str,
    scheme: Scheme | str = Scheme.SEMI_IMPLICIT,
    cfl_safety: float = 1.0,
) -> FlowState:
    """Advance one step of size ``dt``."""
    variant = FlowVariant(variant)
    scheme = Scheme.parse(scheme) if isinstance(scheme, str) else scheme
    if not dt > 0.0:
        raise InvalidArgumentError(f"dt must be positive, got {dt}")
    if scheme is Scheme.RK4:
        limit = max_stable_dt(state, cfl_safety)
        if dt > limit:
            raise StepRejected(dt, limit)
        u, psi = _step_rk4(state, dt, variant)
        # keep sphere fields inside the resolved harmonic space
        u, psi = project(u, state.bg), project(psi, state.bg)
    else:
        u, psi = _step_semi_implicit(state, dt, variant)
    return _advance(state, u, psi, dt, variant)


def rhs_max_norms(state: FlowState, variant) -> tuple[float, float]:
    du, dpsi = rhs(state, variant)
    return float(np.max(np.abs(du))), float(np.max(np.abs(dpsi)))
