"""Conformal recentering of sphere states by Moebius dilations.

``tau_b`` is the dilation of S^2 determined by a point b of the open unit ball
(the boundary action of the hyperbolic translation taking 0 to b).  It moves
points toward b, satisfies tau_0 = id and tau_{-b} = tau_b^{-1}.

Fields are resampled at tau_b(x) by evaluating their spherical-harmonic
expansion there, which is exact for resolved fields.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, ParameterDomainError, UnsupportedSurfaceError
from .grid import Surface
from .state import FlowState, volume

MAX_NORM = 1.0 - 1e-6


@dataclass(frozen=True)
class MoebiusParam:
    b: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        b = tuple(float(v) for v in self.b)
        if len(b) != 3:
            raise ParameterDomainError("Moebius parameter must have three components")
        if math.sqrt(sum(v * v for v in b)) >= MAX_NORM:
            raise ParameterDomainError(f"|b| = {np.linalg.norm(b):.9g} must be < 1 - 1e-6")
        object.__setattr__(self, "b", b)

    @property
    def vector(self) -> np.ndarray:
        return np.array(self.b)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.b))


def _as_param(b) -> MoebiusParam:
    return b if isinstance(b, MoebiusParam) else MoebiusParam(tuple(np.asarray(b, dtype=float)))


def dilation(b, x: np.ndarray) -> np.ndarray:
    """tau_b applied to unit vectors ``x`` (last axis of length 3)."""
    b = np.asarray(b, dtype=float)
    bx = x @ b
    bb = float(b @ b)
    num = (1.0 - bb) * x + 2.0 * (1.0 + bx)[..., None] * b
    return num / (1.0 + 2.0 * bx + bb)[..., None]


def _require_sphere(state: FlowState) -> None:
    if state.bg.kind is not Surface.SPHERE:
        raise UnsupportedSurfaceError("Moebius gauge is defined on the sphere background only")


def _tangent_frame(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # frame built from the embedded position, valid at every node
    ref = np.where(np.abs(x[..., 2:3]) < 0.9, [0.0, 0.0, 1.0], [1.0, 0.0, 0.0])
    e1 = np.cross(x, ref)
    e1 /= np.linalg.norm(e1, axis=-1, keepdims=True)
    e2 = np.cross(x, e1)
    return e1, e2


def conformal_factor(b, x: np.ndarray, eps: float = 1e-3) -> np.ndarray:
    """w_b with tau_b^* g0 = e^{w_b} g0, from the numerical Jacobian of tau_b.

    The area stretch |dtau(e1) x dtau(e2)| over an orthonormal tangent frame is
    differentiated along great circles with a fourth-order stencil.
    """
    e1, e2 = _tangent_frame(x)

    def derivative(e):
        def at(s):
            return dilation(b, math.cos(s) * x + math.sin(s) * e)

        return (8.0 * (at(eps) - at(-eps)) - (at(2 * eps) - at(-2 * eps))) / (12.0 * eps)

    stretch = np.linalg.norm(np.cross(derivative(e1), derivative(e2)), axis=-1)
    return np.log(stretch)


def center_of_mass(state: FlowState) -> np.ndarray:
    """int x dV_g with x the embedded unit position."""
    _require_sphere(state)
    dv = (state.exp_u * state.bg.weights)[..., None]
    return np.array([math.fsum(c) for c in (state.bg.positions * dv).reshape(-1, 3).T])


def _pullback_u(state, coeffs_u, b):
    x = state.bg.positions
    y = dilation(b, x)
    w = conformal_factor(b, x)
    return state.bg._ops["sht"].evaluate(coeffs_u, y) + w, w, y


def pullback(state: FlowState, b) -> FlowState:
    """tau_b^* of (g, F): u' = u o tau_b + w_b and psi' = (psi o tau_b) e^{w_b}."""
    _require_sphere(state)
    param = _as_param(b)
    if param.norm == 0.0:
        return state.replace()
    sht = state.bg._ops["sht"]
    u, w, y = _pullback_u(state, sht.analysis(state.u), param.vector)
    psi = sht.evaluate(sht.analysis(state.psi), y) * np.exp(w)
    return FlowState(state.bg, u, psi, state.t)


def recenter(state: FlowState, tol: float = 1e-10, max_stall: int = 20, fd_step: float = 1e-6):
    """Find b with center_of_mass(pullback(state, b)) ~ 0.

    Damped Newton with a central-difference Jacobian.  Returns the recentered
    state and the parameter used; the input is returned untouched when it
    already satisfies |com| <= tol * volume.
    """
    _require_sphere(state)
    vol = volume(state)
    target = tol * vol
    if np.linalg.norm(center_of_mass(state)) <= target:
        return state, MoebiusParam()

    cu = state.bg._ops["sht"].analysis(state.u)
    x = state.bg.positions
    wts = state.bg.weights[..., None]

    def G(b):
        u, _, _ = _pullback_u(state, cu, b)
        return (x * (np.exp(u)[..., None] * wts)).reshape(-1, 3).sum(axis=0)

    b = np.zeros(3)
    g = G(b)
    best = np.linalg.norm(g)
    stall = 0
    while best > target:
        J = np.empty((3, 3))
        for j in range(3):
            e = np.zeros(3)
            e[j] = fd_step
            J[:, j] = (G(b + e) - G(b - e)) / (2.0 * fd_step)
        delta = np.linalg.solve(J, -g)
        lam = 1.0
        improved = False
        while lam > 1e-4:
            trial = b + lam * delta
            tn = np.linalg.norm(trial)
            if tn >= MAX_NORM:
                trial *= 0.999 * MAX_NORM / tn
            gt = G(trial)
            if np.linalg.norm(gt) < best:
                b, g, best = trial, gt, float(np.linalg.norm(gt))
                improved = True
                break
            lam *= 0.5
        if improved:
            stall = 0
        else:
            # refresh the Jacobian with a different difference step
            stall += 1
            fd_step *= 0.5
            if stall >= max_stall:
                raise ConvergenceError("Moebius recentering stagnated", best)
    param = MoebiusParam(tuple(b))
    out = pullback(state, param)
    return out, param
