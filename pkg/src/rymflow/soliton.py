"""Rotationally symmetric gradient solitons on a closed surface.

A profile is g = dr^2 + phi(r)^2 dtheta^2 on 0 <= r <= A with curvature
F = psi(r) dr ^ dtheta, potential f(r) and soliton constant c.  The soliton
system splits into a metric pair

    M1 = -phi''/phi - (c + psi^2/phi^2 + f'')
    M2 = -phi''/phi - (c + psi^2/phi^2 + phi' f'/phi)

and a Yang-Mills pair

    Y1 = phi' psi / phi,    Y2 = psi' - psi f'.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import simpson

from .errors import InvalidArgumentError, InvalidProfileError

RESIDUAL_NAMES = ("M1", "M2", "Y1", "Y2")
DEGENERATE_INTEGRAL = 1e-14


@dataclass(frozen=True)
class SolitonProfile:
    A: float
    r: np.ndarray
    phi: np.ndarray
    psi: np.ndarray
    f: np.ndarray
    c: float
    a: float = 0.0

    def __post_init__(self):
        arrays = {}
        for name in ("r", "phi", "psi", "f"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            arrays[name] = arr
            object.__setattr__(self, name, arr)
        n = arrays["r"].size
        if n < 8:
            raise InvalidArgumentError("a profile needs at least 8 radial nodes")
        if any(arrays[k].shape != (n,) for k in ("phi", "psi", "f")):
            raise InvalidArgumentError("r, phi, psi and f must be 1-D arrays of equal length")
        h = np.diff(arrays["r"])
        if abs(arrays["r"][0]) > 1e-12 or abs(arrays["r"][-1] - self.A) > 1e-12 * max(1.0, self.A):
            raise InvalidArgumentError("radial grid must run from 0 to A")
        if np.any(h <= 0) or np.ptp(h) > 1e-9 * h.mean():
            raise InvalidArgumentError("radial grid must be uniform and increasing")
        if np.any(arrays["phi"][1:-1] <= 0.0):
            raise InvalidProfileError("phi must be positive on the open interval")

    @property
    def h(self) -> float:
        return self.A / (self.r.size - 1)


def round_sphere_profile(n: int = 2048, radius: float = 1.0) -> SolitonProfile:
    """Round sphere of the given radius: phi = R sin(r/R), c = 1/R^2."""
    A = math.pi * radius
    r = np.linspace(0.0, A, n)
    # distance to the nearer end, so both ends carry relative (not absolute)
    # rounding error; the residuals divide by phi ~ h there
    i = np.arange(n)
    near = np.minimum(i, n - 1 - i) * (A / (n - 1))
    phi = radius * np.sin(near / radius)
    zero = np.zeros(n)
    return SolitonProfile(A, r, phi, zero, zero, 1.0 / radius**2, 0.0)


# ---------------------------------------------------------------------------
# finite differences
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _weights(offsets: tuple[int, ...], order: int) -> np.ndarray:
    """Stencil weights (unit spacing) for the ``order``-th derivative."""
    k = np.arange(len(offsets))
    V = np.array(offsets, dtype=float)[None, :] ** k[:, None]
    rhs = np.zeros(len(offsets))
    rhs[order] = math.factorial(order)
    return np.linalg.solve(V, rhs)


def derivative(y: np.ndarray, h: float, order: int) -> np.ndarray:
    """Fourth-order accurate first or second derivative on a uniform grid.

    Centred five-point stencils inside, one-sided closures (five points for
    the first derivative, six for the second) at the two nodes next to each end.
    """
    if order not in (1, 2):
        raise InvalidArgumentError("only first and second derivatives are provided")
    y = np.asarray(y, dtype=float)
    n = y.size
    width = 5 if order == 1 else 6
    if n < width + 2:
        raise InvalidArgumentError(f"need at least {width + 2} nodes")
    out = np.empty(n)
    centre = _weights((-2, -1, 0, 1, 2), order)
    out[2:-2] = sum(w * y[2 + o : n - 2 + o] for w, o in zip(centre, range(-2, 3)))
    for i in (0, 1):
        left = _weights(tuple(range(-i, width - i)), order)
        out[i] = left @ y[:width]
        right = _weights(tuple(range(i - width + 1, i + 1)), order)
        out[n - 1 - i] = right @ y[n - width :]
    return out / h**order


# ---------------------------------------------------------------------------
# residuals
# ---------------------------------------------------------------------------


@dataclass
class SolitonResiduals:
    fields: dict[str, np.ndarray]
    max_norms: dict[str, float]
    # the reduced metric equation with f' = a phi, in the form consistent with
    # the metric pair (psi^2/phi^2) and in a bare-psi form
    reduced: np.ndarray = field(repr=False, default=None)
    reduced_bare_psi: np.ndarray = field(repr=False, default=None)

    @property
    def reduced_max(self) -> float:
        return float(np.max(np.abs(self.reduced)))

    @property
    def reduced_bare_psi_max(self) -> float:
        return float(np.max(np.abs(self.reduced_bare_psi)))


def _derivatives(profile: SolitonProfile):
    h = profile.h
    return {
        "phi1": derivative(profile.phi, h, 1),
        "phi2": derivative(profile.phi, h, 2),
        "psi1": derivative(profile.psi, h, 1),
        "f1": derivative(profile.f, h, 1),
        "f2": derivative(profile.f, h, 2),
    }


def soliton_residuals(profile: SolitonProfile) -> SolitonResiduals:
    """Pointwise residuals on the interior nodes (phi > 0) with their max norms."""
    d = _derivatives(profile)
    s = slice(1, -1)
    phi, psi = profile.phi[s], profile.psi[s]
    if np.any(phi <= 0.0):
        raise InvalidProfileError("phi must be positive on the open interval")
    curv = -d["phi2"][s] / phi
    ratio = psi**2 / phi**2
    out = {
        "M1": curv - (profile.c + ratio + d["f2"][s]),
        "M2": curv - (profile.c + ratio + d["phi1"][s] * d["f1"][s] / phi),
        "Y1": d["phi1"][s] * psi / phi,
        "Y2": d["psi1"][s] - psi * d["f1"][s],
    }
    norms = {k: float(np.max(np.abs(v))) for k, v in out.items()}
    a_phi1 = profile.a * d["phi1"][s]
    reduced = curv - (profile.c + ratio + a_phi1)
    bare = curv - (profile.c + psi + a_phi1)
    return SolitonResiduals(out, norms, reduced, bare)


def boundary_slopes(profile: SolitonProfile) -> tuple[float, float]:
    """phi'(0) and phi'(A) from the one-sided stencils."""
    d = derivative(profile.phi, profile.h, 1)
    return float(d[0]), float(d[-1])


@dataclass
class SolveAResult:
    a: float
    numerator: float
    denominator: float
    lhs: float
    bracket: float


def solve_a(profile: SolitonProfile) -> SolveAResult:
    """Integration constant a from the energy identity of the reduced equation.

    Multiplying -phi''/phi = c + a phi' by phi phi' (the psi term drops since
    phi' psi = 0) and integrating over [0, A] gives

        -[(phi')^2 / 2]_0^A = c [phi^2 / 2]_0^A + a int_0^A phi (phi')^2 dr.

    Both brackets use the profile's own end values (one-sided fourth-order
    slopes); the integral is composite Simpson.
    """
    p0, pA = boundary_slopes(profile)
    lhs = -0.5 * (pA**2 - p0**2)
    bracket = profile.c * 0.5 * (profile.phi[-1] ** 2 - profile.phi[0] ** 2)
    phi1 = derivative(profile.phi, profile.h, 1)
    den = float(simpson(profile.phi * phi1**2, x=profile.r))
    if abs(den) < DEGENERATE_INTEGRAL:
        raise InvalidProfileError(f"degenerate profile: int phi (phi')^2 dr = {den:.3g}")
    num = lhs - bracket
    return SolveAResult(num / den, num, den, lhs, bracket)


@dataclass
class Verdict:
    soliton: bool
    residual_max: dict[str, float]
    violated: list[str]
    a: float
    a_numerator: float
    checks: dict[str, float]
    # (psi == 0 reading, psi/phi constant reading) of the Yang-Mills conclusion
    psi_zero_defect: float
    parallel_defect: float
    reduced_max: float
    reduced_bare_psi_max: float
    curvature: float

    @property
    def label(self) -> str:
        return "Soliton" if self.soliton else "NotSoliton"

    def lines(self) -> list[str]:
        out = [f"verdict: {self.label}"]
        if not self.soliton:
            out.append("violated: " + ", ".join(self.violated))
        for k in RESIDUAL_NAMES:
            out.append(f"max|{k}| = {self.residual_max[k]:.6e}")
        out.append(f"a = {self.a:.6e} (numerator {self.a_numerator:.6e})")
        for k, v in self.checks.items():
            out.append(f"{k} = {v:.6e}")
        out.append(f"reduced residual, psi^2/phi^2 form: {self.reduced_max:.6e}")
        out.append(f"reduced residual, bare psi form: {self.reduced_bare_psi_max:.6e}")
        out.append(f"reading psi == 0: max|psi| = {self.psi_zero_defect:.6e}")
        out.append(f"reading psi/phi const: max|(psi/phi)'| = {self.parallel_defect:.6e}")
        out.append(f"curvature -phi''/phi mean = {self.curvature:.12g}")
        return out


def classify(profile: SolitonProfile, tol: float = 1e-8) -> Verdict:
    if not tol > 0:
        raise InvalidArgumentError("tol must be positive")
    res = soliton_residuals(profile)
    d = _derivatives(profile)
    s = slice(1, -1)
    sa = solve_a(profile)
    p0, pA = boundary_slopes(profile)
    curv = -d["phi2"][s] / profile.phi[s]
    checks = {
        "closure": max(abs(profile.phi[0]), abs(profile.phi[-1]), abs(p0 - 1.0), abs(pA + 1.0)),
        "f' - a phi": float(np.max(np.abs(d["f1"] - sa.a * profile.phi))),
        "psi'": float(np.max(np.abs(d["psi1"]))),
        "curvature spread": float(np.ptp(curv)),
    }
    violated = [k for k in RESIDUAL_NAMES if res.max_norms[k] > tol]
    if not violated:
        violated = [k for k, v in checks.items() if v > tol]
        if abs(sa.a) > tol:
            violated.append("a")
    ratio = profile.psi[s] / profile.phi[s]
    return Verdict(
        soliton=not violated,
        residual_max=res.max_norms,
        violated=violated,
        a=sa.a,
        a_numerator=sa.numerator,
        checks=checks,
        psi_zero_defect=float(np.max(np.abs(profile.psi))),
        parallel_defect=float(np.max(np.abs(derivative(ratio, profile.h, 1)))),
        reduced_max=res.reduced_max,
        reduced_bare_psi_max=res.reduced_bare_psi_max,
        curvature=float(np.mean(curv)),
    )
