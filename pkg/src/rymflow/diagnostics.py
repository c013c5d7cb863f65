"""Monitored functionals and residual identities along a flow."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .errors import ConvergenceError, InvalidArgumentError
from .flow import FlowVariant, rhs
from .grid import Surface, grad_norm_sq0, integrate0, laplacian0, project
from .state import FlowState, flux, gauss_bonnet_total, integrate_g, volume

CSV_COLUMNS = (
    "t",
    "energy_F",
    "dissipation_pred",
    "dissipation_meas",
    "volume",
    "flux",
    "calabi",
    "gauss_bonnet_residual",
    "volume_ode_residual",
    "lambda",
    "parallel_defect_int",
    "parallel_defect_sup",
    "moser_trudinger",
    "sobolev_proxy",
)


@dataclass
class DiagnosticsRecord:
    t: float
    energy_F: float
    dissipation_pred: float
    dissipation_meas: float
    volume: float
    flux: float
    calabi: float
    gauss_bonnet_residual: float
    volume_ode_residual: float
    lambda_schrodinger: float
    parallel_defect_int: float
    parallel_defect_sup: float
    moser_trudinger_k: float
    sobolev_proxy: float
    min_volume_flag: int = 0
    calabi_liouville: float = 0.0

    def csv_values(self) -> tuple[float, ...]:
        d = asdict(self)
        d["lambda"] = d.pop("lambda_schrodinger")
        d["moser_trudinger"] = d.pop("moser_trudinger_k")
        return tuple(d[c] for c in CSV_COLUMNS)

    def is_finite(self) -> bool:
        return all(math.isfinite(getattr(self, f.name)) for f in fields(self))


def energy_functional(state: FlowState) -> float:
    """Coupled Liouville energy int(|du|^2 + e^{-u}|F|^2) dV0 + 2 R0 int u dV0."""
    bg = state.bg
    density = grad_norm_sq0(state.u, bg) + state.exp_mu * 2.0 * state.psi**2
    return integrate0(density, bg) + 2.0 * bg.r0 * integrate0(state.u, bg)


def parallel_defect(state: FlowState) -> tuple[float, float]:
    """(int |nabla^g F|_g^2 dV_g, max |*_g F - mean|).

    With F = (*_g F) dV_g and dV_g parallel, |nabla^g F|_g^2 dV_g reduces to
    2 |d(e^{-u} psi)|_0^2 dV0.
    """
    phi = state.star_f
    integral = 2.0 * integrate0(grad_norm_sq0(phi, state.bg), state.bg)
    mean = integrate_g(phi, state) / volume(state)
    return integral, float(np.max(np.abs(phi - mean)))


def dissipation(state: FlowState, variant) -> tuple[float, tuple[float, float]]:
    """Predicted dF/dt = -2 int e^u u_t^2 dV0 - 2 int |nabla^g F|_g^2 dV_g."""
    du, _ = rhs(state, variant)
    metric_part = -2.0 * integrate0(state.exp_u * du * du, state.bg)
    bundle_part = -2.0 * parallel_defect(state)[0]
    return metric_part + bundle_part, (metric_part, bundle_part)


def calabi_energy(state: FlowState) -> float:
    """int (K - Kbar)^2 dV_g with Gauss curvature K = R / 2."""
    K = 0.5 * state.cache.R
    kbar = integrate_g(K, state) / state.cache.vol
    return integrate_g((K - kbar) ** 2, state)


def calabi_liouville(state: FlowState) -> float:
    """int e^{-u} (Lap0 u)^2 dV0, reported next to the Calabi energy."""
    return integrate0(state.exp_mu * state.lap_u**2, state.bg)


def volume_rate(state: FlowState) -> float:
    """int (-R + 1/2 |F|_g^2) dV_g, the unnormalized dVol/dt."""
    c = state.cache
    return integrate_g(-c.R + 0.5 * c.normF2_g, state)


@dataclass
class ConservationResiduals:
    gauss_bonnet: float
    volume_ode: float
    flux_drift: float


def conservation_residuals(prev: FlowState, nxt: FlowState, dt: float, variant) -> ConservationResiduals:
    variant = FlowVariant(variant)
    gb = gauss_bonnet_total(nxt) - nxt.bg.r0
    v_next = volume(nxt)
    if variant is FlowVariant.UNNORMALIZED:
        rate = 0.5 * (volume_rate(prev) + volume_rate(nxt))
        vode = (v_next - volume(prev)) / dt - rate
    else:
        vode = v_next - 1.0
    return ConservationResiduals(gb, vode, flux(nxt) - flux(prev))


# ---------------------------------------------------------------------------
# Schroedinger operator  -4 Lap_g + R - |F|_g^2 / 4
# ---------------------------------------------------------------------------

EIGEN_TOL = 1e-9


def schrodinger_potential(state: FlowState) -> np.ndarray:
    return state.cache.R - 0.25 * state.cache.normF2_g


def _spectral_solve(bg, symbol_of_k2, f):
    """Apply a function of -Lap0 (given on its eigenvalues) to ``f``."""
    if bg.kind is Surface.TORUS:
        k2 = bg._ops["k2"]
        return np.fft.irfft2(symbol_of_k2(k2) * np.fft.rfft2(f), s=bg.shape)
    sht = bg._ops["sht"]
    return sht.synthesis(symbol_of_k2(-sht.eig)[None, :] * sht.analysis(f))


def _pcg(apply_A, b, precond, inner, x0, rtol=1e-12, max_iter=500):
    x = x0.copy()
    r = b - apply_A(x)
    z = precond(r)
    p = z.copy()
    rz = inner(r, z)
    b_norm = math.sqrt(max(inner(b, b), 1e-300))
    for _ in range(max_iter):
        if math.sqrt(max(inner(r, r), 0.0)) <= rtol * b_norm:
            break
        Ap = apply_A(p)
        pAp = inner(p, Ap)
        # the residual can be left with only unresolved (preconditioner-null)
        # content, at which point the Krylov space is exhausted
        if rz <= 0.0 or pAp <= 0.0:
            break
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        z = precond(r)
        rz_new = inner(r, z)
        if rz_new <= 0.0:
            break
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x


def lowest_eigenvalue(state: FlowState, tol: float = EIGEN_TOL, max_iter: int = 200, guess=None):
    """Smallest eigenvalue of -4 Lap_g + V, V = R - |F|_g^2 / 4, with eigenfield.

    Lap_g = e^{-u} Lap0, so the weak form on resolved fields is
    4 <dx, dy>_0 + <V e^u x, y>_0 = lambda <e^u x, y>_0, symmetric in the
    dV0 inner product.  Inverse iteration with a shift below min V (a lower
    bound for the spectrum); each solve is a conjugate-gradient iteration
    preconditioned by the constant-coefficient operator.  Convergence is
    declared when the residual, measured in the e^{-u} dV0 norm (the dV_g dual
    norm), is below ``tol``.  ``guess`` (e.g. the eigenfield of a nearby
    state) only changes the starting vector.
    """
    bg = state.bg
    w = bg.weights
    V = schrodinger_potential(state)
    e_u = state.exp_u
    shift = float(V.min()) - 1.0

    def inner(a, b):
        return float(np.sum(w * a * b))

    def apply_A(x):
        return -4.0 * laplacian0(x, bg) + project(V * e_u * x, bg)

    def apply_B(x):
        return project(e_u * x, bg)

    def shifted(x):
        return apply_A(x) - shift * apply_B(x)

    mass = max(integrate0((V - shift) * e_u, bg), 1e-12)

    def precond(r):
        return _spectral_solve(bg, lambda k2: 1.0 / (4.0 * k2 + mass), r)

    def normalize(x):
        return x / math.sqrt(inner(x, apply_B(x)))

    x = normalize(np.ones(bg.shape) if guess is None else project(np.asarray(guess, dtype=float), bg))
    theta = inner(x, apply_A(x))
    res = math.inf
    for _ in range(max_iter):
        guess = x / max(theta - shift, 1e-12)
        x = normalize(_pcg(shifted, apply_B(x), precond, inner, guess))
        Ax = apply_A(x)
        theta = inner(x, Ax)
        r = Ax - theta * apply_B(x)
        res = math.sqrt(inner(r / e_u, r))
        if res <= tol:
            break
    else:
        raise ConvergenceError("Schroedinger eigenvalue iteration did not converge", res)
    x = x / math.sqrt(integrate_g(x * x, state))
    if integrate_g(x, state) < 0.0:
        x = -x
    return theta, x


# ---------------------------------------------------------------------------
# Monitors
# ---------------------------------------------------------------------------


def moser_trudinger(state: FlowState, k: float) -> float:
    if not k > 0:
        raise InvalidArgumentError(f"k must be positive, got {k}")
    umax = float(np.max(np.abs(state.u)))
    if k * umax > 700.0:
        raise InvalidArgumentError(f"overflow guard: k*max|u| = {k * umax:.6g} > 700")
    return integrate0(np.exp(k * np.abs(state.u)), state.bg)


def sobolev_family(bg, trials: int = 32, seed: int = 12345, max_wavenumber: int = 8) -> list[np.ndarray]:
    """Deterministic band-limited test functions for the Sobolev quotient."""
    from .initial import random_band_limited

    rng = np.random.default_rng(seed)
    return [random_band_limited(bg, rng, max_wavenumber, 1.0) for _ in range(trials)]


def sobolev_quotient(state: FlowState, f: np.ndarray) -> float:
    """||f - fbar||_{L2(g)} / int |grad f|_g dV_g."""
    vol = volume(state)
    fbar = integrate_g(f, state) / vol
    num = math.sqrt(integrate_g((f - fbar) ** 2, state))
    # |grad f|_g dV_g = e^{-u/2} |df|_0 e^u dV0
    den = integrate0(np.exp(0.5 * state.u) * np.sqrt(grad_norm_sq0(f, state.bg)), state.bg)
    return num / den if den > 0 else 0.0


def sobolev_proxy(state: FlowState, trials: int = 32, seed: int = 12345, family=None) -> float:
    """Lower bound on C_S(g): the largest quotient over a finite test family."""
    if family is None:
        if trials < 1:
            raise InvalidArgumentError("trials must be >= 1")
        family = sobolev_family(state.bg, trials, seed)
    return max(sobolev_quotient(state, f) for f in family)


@dataclass
class MinVolumeReport:
    min_volume: float
    t_at_min: float
    classical_threshold: float
    consistent_threshold: float
    entered_classical_region: bool
    entered_consistent_region: bool

    def lines(self) -> list[str]:
        def state(entered):
            return "entered" if entered else "not entered"

        out = [
            f"min volume {self.min_volume:.12g} at t={self.t_at_min:.6g}",
            f"threshold [F]^2/(8 pi) = {self.classical_threshold:.12g}: {state(self.entered_classical_region)}",
        ]
        if math.isinf(self.consistent_threshold):
            out.append("threshold [F]^2/R0: R0 = 0, every volume lies in the region")
        else:
            out.append(
                f"threshold [F]^2/R0 = {self.consistent_threshold:.12g}: {state(self.entered_consistent_region)}"
            )
        active = [
            name
            for name, hit in (("[F]^2/(8 pi)", self.entered_classical_region), ("[F]^2/R0", self.entered_consistent_region))
            if hit
        ]
        out.append("active: " + (", ".join(active) if active else "none"))
        return out


def volume_thresholds(flux_value: float, r0: float) -> tuple[float, float]:
    """Volumes below which dVol/dt >= 0 is forced for the unnormalized flow.

    The first is the classical constant [F]^2/(8 pi); the second
    follows from dVol/dt >= -R0 + [F]^2 / Vol under the conventions used here.
    """
    classical = flux_value**2 / (8.0 * math.pi)
    consistent = flux_value**2 / r0 if r0 > 0 else math.inf
    return classical, consistent


def min_volume_flag(vol: float, flux_value: float, r0: float) -> int:
    classical, consistent = volume_thresholds(flux_value, r0)
    return int(vol <= classical) | (int(vol <= consistent) << 1)


def min_volume_tracker(records, flux_value: float, r0: float) -> MinVolumeReport:
    classical, consistent = volume_thresholds(flux_value, r0)
    vols = [r.volume for r in records]
    if not vols:
        return MinVolumeReport(math.nan, math.nan, classical, consistent, False, False)
    i = int(np.argmin(vols))
    return MinVolumeReport(
        vols[i],
        records[i].t,
        classical,
        consistent,
        any(v <= classical for v in vols),
        any(v <= consistent for v in vols),
    )


# ---------------------------------------------------------------------------
# one row of the trajectory table
# ---------------------------------------------------------------------------


def compute_record(
    state: FlowState,
    variant,
    prev: FlowState | None = None,
    moser_k: float = 1.0,
    family=None,
    energy_prev: float | None = None,
) -> DiagnosticsRecord:
    """All monitored quantities at ``state``.

    With ``prev`` (the previous accepted state) the measured dissipation is the
    backward difference of the energy and the volume residual uses the
    trapezoid rate over the step.  Without it (first row, single snapshots) the
    measured dissipation repeats the predicted value and the unnormalized
    volume residual is 0.
    """
    variant = FlowVariant(variant)
    energy = energy_functional(state)
    pred, _ = dissipation(state, variant)
    vol = volume(state)
    fl = flux(state)
    if prev is not None:
        dt = state.t - prev.t
        e0 = energy_functional(prev) if energy_prev is None else energy_prev
        meas = (energy - e0) / dt
        vode = conservation_residuals(prev, state, dt, variant).volume_ode
    else:
        meas = pred
        vode = vol - 1.0 if variant is FlowVariant.NORMALIZED else 0.0
    lam, _ = lowest_eigenvalue(state)
    pd_int, pd_sup = parallel_defect(state)
    if family is None:
        family = sobolev_family(state.bg)
    return DiagnosticsRecord(
        t=state.t,
        energy_F=energy,
        dissipation_pred=pred,
        dissipation_meas=meas,
        volume=vol,
        flux=fl,
        calabi=calabi_energy(state),
        gauss_bonnet_residual=gauss_bonnet_total(state) - state.bg.r0,
        volume_ode_residual=vode,
        lambda_schrodinger=lam,
        parallel_defect_int=pd_int,
        parallel_defect_sup=pd_sup,
        moser_trudinger_k=moser_trudinger(state, moser_k),
        sobolev_proxy=sobolev_proxy(state, family=family),
        min_volume_flag=min_volume_flag(vol, fl, state.bg.r0),
        calabi_liouville=calabi_liouville(state),
    )
