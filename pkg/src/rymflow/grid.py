"""Fixed unit-area backgrounds (flat torus, round sphere) and their operators.

Fields are plain float64 arrays shaped like ``bg.shape``:

* torus: ``f[i, j]`` sampled at ``(x, y) = (i / n, j / n)``; derivatives are
  Fourier spectral.
* sphere: ``f[i, j]`` sampled at Gauss-Legendre colatitudes ``theta_i``
  (increasing, no pole nodes) and longitudes ``phi_j = 2 pi j / n_lon``.
  Derivatives go through a triangular spherical-harmonic transform of degree
  ``L = n_lat - 1`` (requires ``n_lon >= 2 n_lat``); quadrature is
  Gauss-Legendre in cos(theta) times the trapezoid rule in longitude, exact
  for band-limited products.

Every operator is scaled to the unit-area sphere of radius ``1/sqrt(4 pi)``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation, InvalidArgumentError

MIN_RESOLUTION = 8
SPHERE_RADIUS = 1.0 / math.sqrt(4.0 * math.pi)


class Surface(str, enum.Enum):
    TORUS = "torus"
    SPHERE = "sphere"


@dataclass(frozen=True, eq=False)
class BackgroundGeometry:
    kind: Surface
    shape: tuple[int, int]
    r0: float
    coords: tuple[np.ndarray, np.ndarray]
    weights: np.ndarray
    positions: np.ndarray | None = None
    _ops: dict = field(default_factory=dict, repr=False)

    @property
    def size(self) -> int:
        return self.shape[0] * self.shape[1]

    @property
    def tag(self) -> str:
        return f"{self.kind.value}:{self.shape[0]}x{self.shape[1]}"

    @property
    def min_spacing(self) -> float:
        """Smallest distance between neighbouring nodes."""
        if self.kind is Surface.TORUS:
            return 1.0 / self.shape[0]
        theta = self.coords[0][:, 0]
        return SPHERE_RADIUS * min(
            float(np.min(np.diff(theta))), math.sin(theta[0]) * 2.0 * math.pi / self.shape[1]
        )

    @property
    def laplacian_radius(self) -> float:
        """Spectral radius of the discrete Laplacian."""
        if self.kind is Surface.TORUS:
            return float(self._ops["k2"].max())
        return float(-self._ops["sht"].eig[-1])

    def check(self, f: np.ndarray, name: str = "field") -> np.ndarray:
        f = np.asarray(f, dtype=float)
        if f.shape != self.shape:
            raise ContractViolation(
                f"{name} has shape {f.shape} but background {self.tag} expects {self.shape}"
            )
        return f


def check_resolution(kind: Surface | str, resolution) -> tuple[Surface, tuple[int, int]]:
    """Validate and normalize a resolution without building anything."""
    kind = Surface(kind)
    if kind is Surface.TORUS:
        if not np.isscalar(resolution) and len(resolution) == 2 and resolution[0] != resolution[1]:
            raise InvalidArgumentError("torus resolution must be square (n x n)")
        n = int(resolution if np.isscalar(resolution) else resolution[0])
        if n < MIN_RESOLUTION:
            raise InvalidArgumentError(f"torus resolution {n} is below the minimum {MIN_RESOLUTION}")
        if n % 2:
            raise InvalidArgumentError(f"torus resolution {n} must be even")
        return kind, (n, n)
    if np.isscalar(resolution):
        n_lat, n_lon = int(resolution), 2 * int(resolution)
    else:
        n_lat, n_lon = (int(v) for v in resolution)
    if n_lat < MIN_RESOLUTION or n_lon < MIN_RESOLUTION:
        raise InvalidArgumentError(
            f"sphere resolution {n_lat}x{n_lon} is below the minimum {MIN_RESOLUTION} per dimension"
        )
    if n_lon < 2 * n_lat or n_lon % 2:
        raise InvalidArgumentError(
            f"sphere n_lon={n_lon} must be even and at least 2 * n_lat = {2 * n_lat}"
        )
    return kind, (n_lat, n_lon)


def build_background(kind: Surface | str, resolution) -> BackgroundGeometry:
    """Build the unit-volume torus (``resolution = n``) or sphere
    (``resolution = (n_lat, n_lon)``; a single integer means ``(n, 2n)``)."""
    kind, (n1, n2) = check_resolution(kind, resolution)
    if kind is Surface.TORUS:
        return _build_torus(n1)
    return _build_sphere(n1, n2)


def _build_torus(n: int) -> BackgroundGeometry:
    x = np.arange(n) / n
    X, Y = np.meshgrid(x, x, indexing="ij")
    weights = np.full((n, n), 1.0 / (n * n))
    kx = 2.0 * np.pi * np.fft.fftfreq(n, d=1.0 / n)
    ky = 2.0 * np.pi * np.fft.rfftfreq(n, d=1.0 / n)
    KX, KY = np.meshgrid(kx, ky, indexing="ij")
    k2 = KX**2 + KY**2
    # first derivatives drop the Nyquist row/column (no real derivative there)
    dx = 1j * KX.copy()
    dx[n // 2, :] = 0.0
    dy = 1j * KY.copy()
    dy[:, n // 2] = 0.0
    ops = {"k2": k2, "dx": dx, "dy": dy}
    return BackgroundGeometry(Surface.TORUS, (n, n), 0.0, (X, Y), weights, None, ops)


def legendre_table(x: np.ndarray, L: int, M: int, derivative: bool = True):
    """Normalized associated Legendre functions ``P[m, p, l]`` at ``x = cos(theta)``.

    Normalization: int_{-1}^{1} P_l^m(x)^2 dx = 1 (no Condon-Shortley phase).
    The second array holds sin(theta) dP/dtheta (None unless ``derivative``).
    """
    x = np.asarray(x, dtype=float).ravel()
    s = np.sqrt(np.clip(1.0 - x * x, 0.0, None))
    # built as [m, l, p] so every recursion write is contiguous
    P = np.zeros((M + 1, L + 1, x.size))
    D = np.zeros_like(P) if derivative else None
    pmm = np.full(x.size, 1.0 / math.sqrt(2.0))
    for m in range(min(M, L) + 1):
        if m > 0:
            pmm = math.sqrt((2 * m + 1) / (2 * m)) * s * pmm
        Pm = P[m]
        Pm[m] = pmm
        if m + 1 <= L:
            Pm[m + 1] = math.sqrt(2 * m + 3) * x * pmm
        for l in range(m + 2, L + 1):
            a = math.sqrt((4 * l * l - 1) / (l * l - m * m))
            b = math.sqrt(((l - 1) ** 2 - m * m) / (4 * (l - 1) ** 2 - 1))
            Pm[l] = a * (x * Pm[l - 1] - b * Pm[l - 2])
        if derivative:
            D[m, m] = m * x * Pm[m]
            for l in range(m + 1, L + 1):
                c = math.sqrt((2 * l + 1) * (l * l - m * m) / (2 * l - 1))
                D[m, l] = l * x * Pm[l] - c * Pm[l - 1]
    P = np.ascontiguousarray(P.transpose(0, 2, 1))
    if derivative:
        D = np.ascontiguousarray(D.transpose(0, 2, 1))
    return P, D


class SphereTransform:
    """Triangular spherical-harmonic analysis and synthesis on the Gauss grid.

    Coefficients are complex arrays ``c[m, l]`` (0 <= m <= l <= L); the grid
    field is the inverse rfft over longitude of sum_l c[m, l] P[m, :, l].
    """

    def __init__(self, x: np.ndarray, gw: np.ndarray, n_lon: int):
        self.n_lat = x.size
        self.n_lon = n_lon
        self.L = self.M = self.n_lat - 1
        self.gw = gw
        self.P, self.D = legendre_table(x, self.L, self.M)
        l = np.arange(self.L + 1)
        self.eig = -4.0 * math.pi * (l * (l + 1.0))  # unit-area Laplacian eigenvalues

    def analysis(self, f: np.ndarray) -> np.ndarray:
        F = np.fft.rfft(f, axis=1)[:, : self.M + 1]
        return np.einsum("mil,i,im->ml", self.P, self.gw, F)

    def _to_grid(self, G: np.ndarray) -> np.ndarray:
        full = np.zeros((self.n_lat, self.n_lon // 2 + 1), dtype=complex)
        full[:, : self.M + 1] = G
        return np.fft.irfft(full, n=self.n_lon, axis=1)

    def synthesis(self, c: np.ndarray) -> np.ndarray:
        return self._to_grid(np.einsum("mil,ml->im", self.P, c))

    def theta_derivative_times_sin(self, c: np.ndarray) -> np.ndarray:
        return self._to_grid(np.einsum("mil,ml->im", self.D, c))

    def phi_derivative(self, c: np.ndarray) -> np.ndarray:
        m = np.arange(self.M + 1)[:, None]
        return self.synthesis(1j * m * c)

    def evaluate(self, c: np.ndarray, points: np.ndarray) -> np.ndarray:
        """Evaluate the expansion at unit vectors ``points`` (..., 3)."""
        pts = points.reshape(-1, 3)
        x = np.clip(pts[:, 2], -1.0, 1.0)
        s = np.sqrt(1.0 - x * x)
        phi = np.arctan2(pts[:, 1], pts[:, 0])
        vals = np.zeros(x.size)
        pmm = np.full(x.size, 1.0 / math.sqrt(2.0))
        # accumulate sum_l c[m, l] P_l^m along the recursion, one order at a time
        for m in range(self.M + 1):
            if m > 0:
                pmm = math.sqrt((2 * m + 1) / (2 * m)) * s * pmm
            prev, cur = np.zeros_like(x), pmm
            acc = c[m, m] * cur
            for l in range(m + 1, self.L + 1):
                if l == m + 1:
                    nxt = math.sqrt(2 * m + 3) * x * cur
                else:
                    a = math.sqrt((4 * l * l - 1) / (l * l - m * m))
                    b = math.sqrt(((l - 1) ** 2 - m * m) / (4 * (l - 1) ** 2 - 1))
                    nxt = a * (x * cur - b * prev)
                prev, cur = cur, nxt
                acc = acc + c[m, l] * cur
            term = (acc * np.exp(1j * m * phi)).real
            vals += term if m == 0 else 2.0 * term
        return (vals / self.n_lon).reshape(points.shape[:-1])


def _build_sphere(n_lat: int, n_lon: int) -> BackgroundGeometry:
    x, gw = np.polynomial.legendre.leggauss(n_lat)
    x, gw = x[::-1].copy(), gw[::-1].copy()  # colatitude increasing
    theta = np.arccos(x)
    phi = np.arange(n_lon) * (2.0 * math.pi / n_lon)
    TH, PH = np.meshgrid(theta, phi, indexing="ij")
    positions = np.stack(
        [np.sin(TH) * np.cos(PH), np.sin(TH) * np.sin(PH), np.cos(TH)], axis=-1
    )
    weights = np.repeat((gw / (2.0 * n_lon))[:, None], n_lon, axis=1)
    weights = weights / math.fsum(weights.ravel())
    ops = {"sht": SphereTransform(x, gw, n_lon), "sin": np.sin(theta)}
    return BackgroundGeometry(
        Surface.SPHERE, (n_lat, n_lon), 8.0 * math.pi, (TH, PH), weights, positions, ops
    )


def project(f: np.ndarray, bg: BackgroundGeometry) -> np.ndarray:
    """Orthogonal projection onto the resolved modes (identity on the torus)."""
    f = bg.check(f)
    if bg.kind is Surface.TORUS:
        return f
    sht = bg._ops["sht"]
    return sht.synthesis(sht.analysis(f))


def laplacian0(f: np.ndarray, bg: BackgroundGeometry) -> np.ndarray:
    f = bg.check(f)
    if bg.kind is Surface.TORUS:
        return np.fft.irfft2(-bg._ops["k2"] * np.fft.rfft2(f), s=bg.shape)
    sht = bg._ops["sht"]
    # the mean is annihilated anyway; removing it first keeps roundoff relative
    # to the fluctuation rather than to |f|
    return sht.synthesis(sht.eig[None, :] * sht.analysis(f - integrate0(f, bg)))


def gradient0(f: np.ndarray, bg: BackgroundGeometry) -> tuple[np.ndarray, np.ndarray]:
    """Components of df in a g0-orthonormal frame."""
    f = bg.check(f)
    if bg.kind is Surface.TORUS:
        fh = np.fft.rfft2(f)
        return (
            np.fft.irfft2(bg._ops["dx"] * fh, s=bg.shape),
            np.fft.irfft2(bg._ops["dy"] * fh, s=bg.shape),
        )
    sht = bg._ops["sht"]
    c = sht.analysis(f - integrate0(f, bg))
    s = bg._ops["sin"][:, None]
    d_theta = sht.theta_derivative_times_sin(c) / s
    d_phi = sht.phi_derivative(c) / s
    return d_theta / SPHERE_RADIUS, d_phi / SPHERE_RADIUS


def grad_norm_sq0(f: np.ndarray, bg: BackgroundGeometry) -> np.ndarray:
    a, b = gradient0(f, bg)
    return a * a + b * b


def integrate0(f: np.ndarray, bg: BackgroundGeometry) -> float:
    """Integral against dV0 with compensated summation."""
    f = bg.check(f)
    return math.fsum((f * bg.weights).ravel())
