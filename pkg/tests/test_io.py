import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from rymflow import io
from rymflow.config import FlowConfig, parse_config
from rymflow.diagnostics import CSV_COLUMNS
from rymflow.errors import ConfigError
from rymflow.flow import FlowVariant, Scheme
from rymflow.grid import Surface, build_background, integrate0
from rymflow.run import initial_state
from rymflow.soliton import SolitonProfile, round_sphere_profile
from rymflow.state import FlowState

HEADER = (
    "t,energy_F,dissipation_pred,dissipation_meas,volume,flux,calabi,gauss_bonnet_residual,"
    "volume_ode_residual,lambda,parallel_defect_int,parallel_defect_sup,moser_trudinger,sobolev_proxy"
)

MINIMAL_TORUS = """
[surface]
kind = torus

[flow]
variant = normalized
t_end = 1.0
"""


def test_csv_header_is_fixed():
    assert ",".join(CSV_COLUMNS) == HEADER


def test_empty_trajectory_writes_header_only(tmp_path):
    path = tmp_path / "d.csv"
    io.write_csv(path, [])
    assert path.read_text() == HEADER + "\n"
    assert io.read_csv(path) == []


def test_format_row_keeps_every_bit():
    vals = [math.pi, 1e-300, -0.1, 2.0**-1074, 1.0 / 3.0]
    back = [float(v) for v in io.format_row(vals).split(",")]
    assert back == vals


finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@settings(max_examples=25, deadline=None)
@given(u=arrays(np.float64, (8, 8), elements=finite), psi=arrays(np.float64, (8, 8), elements=finite), t=finite)
def test_snapshot_round_trip_is_exact(tmp_path_factory, u, psi, t):
    bg = build_background("torus", 8)
    path = tmp_path_factory.mktemp("snap") / "s.snap"
    io.write_snapshot(path, FlowState(bg, u, psi, t))
    back = io.read_snapshot(path, bg)
    assert np.array_equal(back.u, u) and np.array_equal(back.psi, psi) and back.t == t


def test_snapshot_layout(tmp_path, sphere16):
    s = FlowState(sphere16, np.zeros(sphere16.shape), np.ones(sphere16.shape), 0.5)
    path = tmp_path / "s.snap"
    io.write_snapshot(path, s)
    lines = path.read_text().splitlines()
    assert lines[:5] == ["RYMFLOW-SNAPSHOT", "version 1", "surface sphere", "dims 16 32", "t 0.5"]
    assert len(lines) == 5 + 2 * 16 * 32
    assert lines[5] == "0.0" and lines[-1] == "1.0"


def test_snapshot_errors(tmp_path):
    path = tmp_path / "bad.snap"
    path.write_text("RYMFLOW-SNAPSHOT\nversion 2\nsurface torus\ndims 8 8\nt 0\n")
    with pytest.raises(io.FormatError, match="version"):
        io.read_snapshot(path)
    path.write_text("RYMFLOW-SNAPSHOT\nversion 1\nsurface torus\ndims 8 8\nt 0\n1.0\n")
    with pytest.raises(io.FormatError, match="expected 128"):
        io.read_snapshot(path)
    with pytest.raises(io.FormatError, match=str(tmp_path)):
        io.read_snapshot(tmp_path / "missing.snap")


def test_profile_round_trip(tmp_path):
    p = round_sphere_profile(64)
    q = SolitonProfile(p.A, p.r, p.phi, 0.01 * p.phi**2, p.f, p.c, 0.25)
    path = tmp_path / "p.prof"
    io.write_profile(path, q)
    back = io.read_profile(path)
    for name in ("r", "phi", "psi", "f"):
        assert np.array_equal(getattr(back, name), getattr(q, name))
    assert (back.c, back.a, back.A) == (q.c, q.a, q.A)


def test_checkpoint_round_trip(tmp_path, sphere16):
    rng = np.random.default_rng(0)
    s = FlowState(sphere16, rng.normal(size=sphere16.shape), rng.normal(size=sphere16.shape), 0.125)
    path = tmp_path / "c.json"
    io.write_checkpoint(path, "cfg text", s, 17, 3)
    text, back, step, rows = io.read_checkpoint(path)
    assert (text, step, rows, back.t) == ("cfg text", 17, 3, 0.125)
    assert np.array_equal(back.u, s.u) and np.array_equal(back.psi, s.psi)
    path.write_text(json.dumps({"format": "other"}))
    with pytest.raises(io.FormatError):
        io.read_checkpoint(path)


def test_truncate_csv(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text(HEADER + "\n" + "\n".join([",".join(["1"] * 14)] * 3) + "\n")
    io.truncate_csv(path, 1)
    assert len(io.read_csv(path)) == 1
    with pytest.raises(io.FormatError):
        io.truncate_csv(path, 5)


# ---------------------------------------------------------------------------
# config
# ---------------------------------------------------------------------------


def test_minimal_config_fills_defaults():
    cfg = parse_config(MINIMAL_TORUS)
    assert cfg.surface is Surface.TORUS and cfg.resolution == (64, 64)
    assert cfg.variant is FlowVariant.NORMALIZED and cfg.t_end == 1.0
    assert cfg.stepper.scheme is Scheme.SEMI_IMPLICIT
    assert cfg.flux_target == 1.0 and not cfg.recenter
    assert parse_config(cfg.to_text()) == cfg


def test_recenter_on_torus_names_the_key():
    with pytest.raises(ConfigError) as info:
        parse_config(MINIMAL_TORUS + "recenter = true\n")
    assert info.value.key == "recenter"


def test_dt_bounds_name_the_key():
    with pytest.raises(ConfigError) as info:
        parse_config(MINIMAL_TORUS + "[stepper]\ndt_max = 1e-4\ndt_min = 1e-3\n")
    assert "dt_min" in info.value.key


def test_syntax_errors_carry_line_numbers():
    with pytest.raises(ConfigError) as info:
        parse_config(MINIMAL_TORUS + "bogus = 1\n")
    assert info.value.line == 8
    with pytest.raises(ConfigError) as info:
        parse_config(MINIMAL_TORUS + "this line has no separator\n")
    assert info.value.line == 8
    with pytest.raises(ConfigError):
        parse_config("[surface]\nkind = torus\n")
    with pytest.raises(ConfigError) as info:
        parse_config(MINIMAL_TORUS.replace("t_end = 1.0", "t_end = soon"))
    assert info.value.key == "flow.t_end" and info.value.line == 7


def test_sphere_flux_target_sets_initial_flux():
    cfg = parse_config(
        "[surface]\nkind = sphere\nn_lat = 16\n[flow]\nvariant = unnormalized\nt_end = 1\nflux_target = 2.5066\n"
    )
    assert cfg.resolution == (16, 32)
    s = initial_state(cfg)
    assert abs(integrate0(s.psi, s.bg) - 2.5066) <= 1e-12


def test_keep_flux_and_coefficients(tmp_path):
    cfg = parse_config(
        MINIMAL_TORUS.replace("normalized", "unnormalized")
        + "flux_target = keep\n[initial]\nkind = coefficients\n"
        "u_coefficients = 0.1 cos 1 0\npsi_coefficients = 2.0 const, 0.3 sin 0 2\n"
    )
    assert cfg.flux_target is None
    s = initial_state(cfg)
    assert integrate0(s.psi, s.bg) == pytest.approx(2.0, abs=1e-14)
    assert parse_config(cfg.to_text()) == cfg


@settings(max_examples=30, deadline=None)
@given(
    n=st.sampled_from([8, 16, 32]),
    t_end=st.floats(1e-3, 1e3),
    seed=st.integers(0, 2**31 - 1),
    scheme=st.sampled_from(list(Scheme)),
    variant=st.sampled_from(list(FlowVariant)),
    sphere=st.booleans(),
    cadence=st.integers(1, 100),
)
def test_config_text_round_trip(n, t_end, seed, scheme, variant, sphere, cadence):
    from rymflow.config import InitialSpec
    from rymflow.flow import StepperConfig

    cfg = FlowConfig(
        surface=Surface.SPHERE if sphere else Surface.TORUS,
        resolution=(n, 2 * n) if sphere else (n, n),
        variant=variant,
        t_end=t_end,
        initial=InitialSpec(seed=seed),
        stepper=StepperConfig(scheme=scheme),
        recenter=sphere,
        diag_cadence=cadence,
    )
    assert parse_config(cfg.to_text()) == cfg


def test_emit_entry_points(tmp_path, torus32):
    from rymflow.diagnostics import compute_record
    from rymflow.initial import random_state

    s = random_state(torus32, 0)
    csv = io.emit_diagnostics([compute_record(s, "unnormalized")], tmp_path / "d.csv")
    assert len(io.read_csv(csv)) == 1
    snap = io.emit_snapshot(s, tmp_path / "s.snap")
    assert np.array_equal(io.read_snapshot(snap).u, s.u)
