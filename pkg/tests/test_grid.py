import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rymflow.errors import ContractViolation, InvalidArgumentError
from rymflow.grid import (
    SPHERE_RADIUS,
    build_background,
    check_resolution,
    grad_norm_sq0,
    gradient0,
    integrate0,
    laplacian0,
    legendre_table,
    project,
)
from rymflow.initial import random_band_limited


def test_weights_sum_to_unit_area(torus64, sphere32):
    assert math.isclose(integrate0(np.ones(torus64.shape), torus64), 1.0, abs_tol=1e-15)
    assert math.isclose(integrate0(np.ones(sphere32.shape), sphere32), 1.0, abs_tol=1e-15)


def test_background_curvature_constants(torus64, sphere32):
    assert torus64.r0 == 0.0
    assert sphere32.r0 == pytest.approx(8.0 * math.pi)
    # unit area sphere: 4 pi r^2 = 1
    assert 4.0 * math.pi * SPHERE_RADIUS**2 == pytest.approx(1.0)


def test_torus_laplacian_of_trig_mode(torus64):
    X, Y = torus64.coords
    f = np.sin(2 * math.pi * (2 * X + 3 * Y))
    expected = -(2 * math.pi) ** 2 * 13 * f
    assert np.max(np.abs(laplacian0(f, torus64) - expected)) < 1e-9


@pytest.mark.parametrize("degree", [1, 2, 3, 5])
def test_sphere_laplacian_eigenvalues(sphere32, degree):
    # Re (x + i y)^l is a degree-l harmonic; on the unit-area sphere the
    # Laplacian eigenvalue is -l(l+1) / r^2 = -4 pi l(l+1)
    P = sphere32.positions
    f = ((P[..., 0] + 1j * P[..., 1]) ** degree).real
    expected = -4.0 * math.pi * degree * (degree + 1) * f
    assert np.max(np.abs(laplacian0(f, sphere32) - expected)) < 1e-9 * degree**2


def test_sphere_quadrature_of_z_squared(sphere32):
    z = sphere32.positions[..., 2]
    # mean of z^2 over the sphere is 1/3
    assert integrate0(z * z, sphere32) == pytest.approx(1.0 / 3.0, abs=1e-15)


def test_sphere_gradient_of_height(sphere32):
    # |grad z|^2 = (1 - z^2) / r^2 on the sphere of radius r
    z = sphere32.positions[..., 2]
    expected = (1 - z * z) / SPHERE_RADIUS**2
    assert np.max(np.abs(grad_norm_sq0(z, sphere32) - expected)) < 1e-10


def test_torus_gradient(torus64):
    X, _ = torus64.coords
    gx, gy = gradient0(np.sin(2 * math.pi * X), torus64)
    assert np.max(np.abs(gx - 2 * math.pi * np.cos(2 * math.pi * X))) < 1e-10
    assert np.max(np.abs(gy)) < 1e-12


def test_legendre_normalization_by_quadrature():
    x, w = np.polynomial.legendre.leggauss(40)
    P, D = legendre_table(x, 12, 12)
    for m in range(13):
        gram = np.einsum("pl,p,pk->lk", P[m][:, m:], w, P[m][:, m:])
        assert np.allclose(gram, np.eye(13 - m), atol=1e-12)


def test_transform_evaluate_matches_grid(sphere16):
    rng = np.random.default_rng(4)
    f = random_band_limited(sphere16, rng, 6, 1.0)
    sht = sphere16._ops["sht"]
    vals = sht.evaluate(sht.analysis(f), sphere16.positions)
    assert np.max(np.abs(vals - f)) < 1e-12


def test_projection_is_identity_on_resolved_fields(sphere16):
    f = random_band_limited(sphere16, np.random.default_rng(2), 7, 1.0)
    assert np.max(np.abs(project(f, sphere16) - f)) < 1e-12


@pytest.mark.parametrize(
    "kind,res",
    [("torus", 6), ("torus", 33), ("torus", (32, 16)), ("sphere", (4, 8)), ("sphere", (16, 30)), ("sphere", (16, 33))],
)
def test_invalid_resolutions(kind, res):
    with pytest.raises(InvalidArgumentError):
        check_resolution(kind, res)


def test_scalar_sphere_resolution_doubles_longitudes():
    assert check_resolution("sphere", 12)[1] == (12, 24)


def test_wrong_shape_is_contract_violation(torus32, sphere16):
    with pytest.raises(ContractViolation):
        laplacian0(np.zeros(sphere16.shape), torus32)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), kind=st.sampled_from(["torus", "sphere"]))
def test_laplacian_is_symmetric_and_kills_constants(seed, kind):
    bg = build_background(kind, 16)
    rng = np.random.default_rng(seed)
    f = random_band_limited(bg, rng, 5, 1.0)
    g = random_band_limited(bg, rng, 5, 1.0)
    a = integrate0(f * laplacian0(g, bg), bg)
    b = integrate0(g * laplacian0(f, bg), bg)
    assert abs(a - b) <= 1e-10 * (1 + abs(a))
    # integration by parts: -int f Lap f = int |df|^2
    assert integrate0(-f * laplacian0(f, bg), bg) == pytest.approx(integrate0(grad_norm_sq0(f, bg), bg), rel=1e-10)
    assert abs(integrate0(laplacian0(f + 3.0, bg), bg)) < 1e-10
