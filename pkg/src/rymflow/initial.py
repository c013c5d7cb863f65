"""Band-limited initial data on the two backgrounds."""
from __future__ import annotations

import math
from itertools import product

import numpy as np

from .errors import InvalidArgumentError
from .grid import BackgroundGeometry, Surface, integrate0
from .state import FlowState, volume


def _torus_modes(k_max: int):
    for kx, ky in product(range(-k_max, k_max + 1), range(0, k_max + 1)):
        if ky == 0 and kx <= 0:
            continue  # one representative per +/- pair, no constant
        yield kx, ky


def _sphere_monomials(degree: int):
    for a, b, c in product(range(degree + 1), repeat=3):
        if 1 <= a + b + c <= degree:
            yield a, b, c


def random_band_limited(bg: BackgroundGeometry, rng: np.random.Generator, k_max: int, amplitude: float) -> np.ndarray:
    """Mean-zero random field with max|f| = amplitude.

    Torus: trigonometric polynomial with |kx|, |ky| <= k_max.
    Sphere: polynomial in (x, y, z) of degree <= k_max, which restricts to
    spherical harmonics of degree <= k_max.
    """
    if k_max < 1:
        raise InvalidArgumentError("max wavenumber must be >= 1")
    f = np.zeros(bg.shape)
    if bg.kind is Surface.TORUS:
        X, Y = bg.coords
        for kx, ky in _torus_modes(k_max):
            decay = 1.0 / (1.0 + kx * kx + ky * ky)
            a, b = rng.standard_normal(2) * decay
            arg = 2.0 * math.pi * (kx * X + ky * Y)
            f += a * np.cos(arg) + b * np.sin(arg)
    else:
        P = bg.positions
        for a, b, c in _sphere_monomials(k_max):
            coef = rng.standard_normal() / math.factorial(a + b + c)
            f += coef * P[..., 0] ** a * P[..., 1] ** b * P[..., 2] ** c
    f -= integrate0(f, bg)
    peak = float(np.max(np.abs(f)))
    if peak == 0.0 or amplitude == 0.0:
        return np.zeros(bg.shape)
    return f * (amplitude / peak)


def coefficient_field(bg: BackgroundGeometry, spec: str) -> np.ndarray:
    """Evaluate an explicit coefficient list.

    Entries are comma separated.  Torus entries read ``amp cos kx ky`` or
    ``amp sin kx ky`` (argument 2 pi (kx x + ky y)); sphere entries read
    ``amp a b c`` for amp x^a y^b z^c.  ``amp const`` adds a constant on
    either surface.
    """
    f = np.zeros(bg.shape)
    for raw in spec.split(","):
        parts = raw.split()
        if not parts:
            continue
        try:
            amp = float(parts[0])
            if len(parts) == 2 and parts[1] == "const":
                f += amp
            elif bg.kind is Surface.TORUS:
                kind, kx, ky = parts[1], int(parts[2]), int(parts[3])
                if kind not in ("cos", "sin") or len(parts) != 4:
                    raise ValueError
                arg = 2.0 * math.pi * (kx * bg.coords[0] + ky * bg.coords[1])
                f += amp * (np.cos(arg) if kind == "cos" else np.sin(arg))
            else:
                if len(parts) != 4:
                    raise ValueError
                a, b, c = (int(p) for p in parts[1:])
                P = bg.positions
                f += amp * P[..., 0] ** a * P[..., 1] ** b * P[..., 2] ** c
        except (ValueError, IndexError):
            raise InvalidArgumentError(f"bad coefficient entry {raw.strip()!r}") from None
    return f


def with_flux(state: FlowState, target: float) -> FlowState:
    """Shift psi by a constant so that int psi dV0 equals ``target``."""
    psi = state.psi + (target - integrate0(state.psi, state.bg))
    return state.replace(psi=psi)


def unit_volume(state: FlowState) -> FlowState:
    """Shift u by -log(volume) so the metric has unit area."""
    return state.replace(u=state.u - math.log(volume(state)))


def random_state(bg, seed: int, k_max: int = 4, u_amp: float = 0.2, psi_amp: float = 0.2,
                 flux_target: float = 1.0, normalized: bool = False) -> FlowState:
    rng = np.random.default_rng(seed)
    u = random_band_limited(bg, rng, k_max, u_amp)
    psi = random_band_limited(bg, rng, k_max, psi_amp)
    state = with_flux(FlowState(bg, u, psi), flux_target)
    return unit_volume(state) if normalized else state
