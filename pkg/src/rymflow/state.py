"""The evolving pair (u, psi) and the pointwise geometry of g = e^u g0.

``psi`` is the background Hodge dual of the bundle curvature, F = psi dV0.
Norms of two-forms use the full contraction F_ij F^ij, so |dV|^2 = 2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import InvalidStateError
from .grid import SPHERE_RADIUS, BackgroundGeometry, Surface, integrate0, laplacian0

# exp overflows a little above 709
_MAX_EXPONENT = 700.0


@dataclass(frozen=True)
class GeometryCache:
    R: np.ndarray
    normF2_bg: np.ndarray
    normF2_g: np.ndarray
    dVg_weights: np.ndarray
    vol: float


@dataclass(frozen=True, eq=False)
class FlowState:
    bg: BackgroundGeometry
    u: np.ndarray
    psi: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "u", self.bg.check(self.u, "u").copy())
        object.__setattr__(self, "psi", self.bg.check(self.psi, "psi").copy())
        self.u.setflags(write=False)
        self.psi.setflags(write=False)

    def replace(self, u=None, psi=None, t=None) -> "FlowState":
        return FlowState(
            self.bg,
            self.u if u is None else u,
            self.psi if psi is None else psi,
            self.t if t is None else t,
        )

    def validate(self) -> None:
        if not np.all(np.isfinite(self.u)):
            raise InvalidStateError("u contains non-finite values")
        if not np.all(np.isfinite(self.psi)):
            raise InvalidStateError("psi contains non-finite values")
        umax = float(np.max(np.abs(self.u)))
        if umax > _MAX_EXPONENT:
            raise InvalidStateError(f"e^u overflows: max|u|={umax:.6g}")

    @cached_property
    def exp_u(self) -> np.ndarray:
        self.validate()
        return np.exp(self.u)

    @cached_property
    def exp_mu(self) -> np.ndarray:
        self.validate()
        return np.exp(-self.u)

    @cached_property
    def lap_u(self) -> np.ndarray:
        return laplacian0(self.u, self.bg)

    @cached_property
    def star_f(self) -> np.ndarray:
        """*_g F = e^{-u} psi; constant exactly when F is parallel."""
        return self.exp_mu * self.psi

    @cached_property
    def cache(self) -> GeometryCache:
        normF2_bg = f_norm_sq(self, "background")
        return GeometryCache(
            R=scalar_curvature(self),
            normF2_bg=normF2_bg,
            normF2_g=self.exp_mu**2 * normF2_bg,
            dVg_weights=self.exp_u * self.bg.weights,
            vol=volume(self),
        )


def scalar_curvature(state: FlowState) -> np.ndarray:
    """R = e^{-u} (R0 - Laplacian0 u)."""
    return state.exp_mu * (state.bg.r0 - state.lap_u)


def f_norm_sq(state: FlowState, which: str = "background") -> np.ndarray:
    """|F|^2 against g0 (``"background"``) or against g (``"evolving"``)."""
    state.validate()
    bg_norm = 2.0 * state.psi**2
    if which == "background":
        return bg_norm
    if which == "evolving":
        return state.exp_mu**2 * bg_norm
    raise ValueError(f"unknown norm {which!r}")


def _coordinate_metric(state: FlowState) -> tuple[np.ndarray, np.ndarray]:
    """Per-node background metric matrix and sqrt(det g0) in chart coordinates."""
    bg = state.bg
    n = bg.size
    g0 = np.zeros((n, 2, 2))
    if bg.kind is Surface.TORUS:
        g0[:, 0, 0] = g0[:, 1, 1] = 1.0
    else:
        sin_t = np.sin(bg.coords[0]).ravel()
        g0[:, 0, 0] = SPHERE_RADIUS**2
        g0[:, 1, 1] = (SPHERE_RADIUS * sin_t) ** 2
    return g0, np.sqrt(np.linalg.det(g0))


def stress_identity_residual(state: FlowState) -> float:
    """Max deviation of g^{kl} F_ik F_jl from (1/2)|F|_g^2 g_ij over all nodes."""
    state.validate()
    g0, sqrt_det = _coordinate_metric(state)
    g = state.exp_u.ravel()[:, None, None] * g0
    ginv = np.linalg.inv(g)
    F = np.zeros_like(g)
    F[:, 0, 1] = state.psi.ravel() * sqrt_det
    F[:, 1, 0] = -F[:, 0, 1]
    lhs = np.einsum("nik,nkl,njl->nij", F, ginv, F)
    norm2 = np.einsum("nik,njl,nij,nkl->n", ginv, ginv, F, F)
    rhs = 0.5 * norm2[:, None, None] * g
    return float(np.max(np.abs(lhs - rhs))) if lhs.size else 0.0


def volume(state: FlowState) -> float:
    state.validate()
    if float(np.max(state.u)) > _MAX_EXPONENT:
        raise InvalidStateError(f"e^u overflows: max(u)={float(np.max(state.u)):.6g}")
    return integrate0(state.exp_u, state.bg)


def flux(state: FlowState) -> float:
    return integrate0(state.psi, state.bg)


def gauss_bonnet_total(state: FlowState) -> float:
    """Integral of R dV_g, which equals R0 on the unit-area background."""
    return integrate0(state.bg.r0 - state.lap_u, state.bg)


def integrate_g(f: np.ndarray, state: FlowState) -> float:
    return math.fsum((np.asarray(f) * state.exp_u * state.bg.weights).ravel())
