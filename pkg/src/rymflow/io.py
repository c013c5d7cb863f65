"""Text formats: diagnostics CSV, field snapshots, soliton profiles, checkpoints."""
from __future__ import annotations

import json
import math
import os
from pathlib import Path

import numpy as np

from .diagnostics import CSV_COLUMNS
from .errors import InvalidArgumentError
from .grid import build_background
from .soliton import SolitonProfile
from .state import FlowState

SNAPSHOT_MAGIC = "RYMFLOW-SNAPSHOT"
PROFILE_MAGIC = "RYMFLOW-PROFILE"
CHECKPOINT_MAGIC = "rymflow-checkpoint"
FORMAT_VERSION = 1

CSV_HEADER = ",".join(CSV_COLUMNS)


class FormatError(InvalidArgumentError):
    """A file does not follow the expected layout."""

    def __init__(self, path, message: str):
        super().__init__(f"{path}: {message}")
        self.path = str(path)


def _write_text(path: Path, text: str) -> None:
    # write-then-rename so an interrupted run never leaves a half file
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------


def format_row(values) -> str:
    return ",".join(format(float(v), ".17g") for v in values)


def write_csv(path, records) -> None:
    lines = [CSV_HEADER] + [format_row(r.csv_values()) for r in records]
    _write_text(path, "\n".join(lines) + "\n")


def emit_diagnostics(records, path) -> Path:
    """Write a record stream as the diagnostics CSV; returns the path."""
    write_csv(path, list(records))
    return Path(path)


def append_csv(path, records) -> None:
    with open(path, "a", encoding="utf-8", newline="\n") as fh:
        for r in records:
            fh.write(format_row(r.csv_values()) + "\n")


def read_csv(path) -> list[dict[str, float]]:
    text = Path(path).read_text(encoding="utf-8").splitlines()
    if not text or text[0] != CSV_HEADER:
        raise FormatError(path, "missing or unexpected CSV header")
    rows = []
    for line in text[1:]:
        vals = [float(v) for v in line.split(",")]
        if len(vals) != len(CSV_COLUMNS):
            raise FormatError(path, f"row has {len(vals)} fields, expected {len(CSV_COLUMNS)}")
        rows.append(dict(zip(CSV_COLUMNS, vals)))
    return rows


def truncate_csv(path, rows: int) -> None:
    """Keep the header and the first ``rows`` data rows."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != CSV_HEADER:
        raise FormatError(path, "missing or unexpected CSV header")
    if len(lines) - 1 < rows:
        raise FormatError(path, f"has {len(lines) - 1} rows but the checkpoint recorded {rows}")
    _write_text(path, "\n".join(lines[: rows + 1]) + "\n")


# ---------------------------------------------------------------------------
# snapshots
# ---------------------------------------------------------------------------


def snapshot_text(state: FlowState) -> str:
    bg = state.bg
    head = [
        SNAPSHOT_MAGIC,
        f"version {FORMAT_VERSION}",
        f"surface {bg.kind.value}",
        f"dims {bg.shape[0]} {bg.shape[1]}",
        f"t {state.t!r}",
    ]
    body = [repr(float(v)) for v in state.u.ravel()]
    body += [repr(float(v)) for v in state.psi.ravel()]
    return "\n".join(head + body) + "\n"


def write_snapshot(path, state: FlowState) -> None:
    _write_text(path, snapshot_text(state))


def emit_snapshot(state: FlowState, path) -> Path:
    write_snapshot(path, state)
    return Path(path)


def _header_value(path, line: str, key: str) -> str:
    parts = line.split(None, 1)
    if len(parts) != 2 or parts[0] != key:
        raise FormatError(path, f"expected '{key} ...', found {line!r}")
    return parts[1].strip()


def read_snapshot(path, bg=None) -> FlowState:
    """Load a snapshot; ``bg`` is reused when it matches the stored grid."""
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise FormatError(path, f"cannot read: {exc.strerror}") from None
    if len(lines) < 5 or lines[0] != SNAPSHOT_MAGIC:
        raise FormatError(path, "not a rymflow snapshot")
    version = int(_header_value(path, lines[1], "version"))
    if version != FORMAT_VERSION:
        raise FormatError(path, f"unsupported snapshot version {version}")
    kind = _header_value(path, lines[2], "surface")
    dims = tuple(int(v) for v in _header_value(path, lines[3], "dims").split())
    t = float(_header_value(path, lines[4], "t"))
    if len(dims) != 2:
        raise FormatError(path, "dims needs two integers")
    n = dims[0] * dims[1]
    values = lines[5:]
    if len(values) != 2 * n:
        raise FormatError(path, f"expected {2 * n} values, found {len(values)}")
    try:
        data = np.array([float(v) for v in values])
    except ValueError as exc:
        raise FormatError(path, str(exc)) from None
    if bg is None or bg.kind.value != kind or bg.shape != dims:
        bg = build_background(kind, dims)
    return FlowState(bg, data[:n].reshape(dims), data[n:].reshape(dims), t)


# ---------------------------------------------------------------------------
# soliton profiles
# ---------------------------------------------------------------------------


def write_profile(path, profile: SolitonProfile) -> None:
    head = [
        PROFILE_MAGIC,
        f"version {FORMAT_VERSION}",
        f"nodes {profile.r.size}",
        f"c {profile.c!r}",
        f"a {profile.a!r}",
        f"A {profile.A!r}",
        "columns r phi psi f",
    ]
    rows = [
        " ".join(repr(float(v)) for v in row)
        for row in zip(profile.r, profile.phi, profile.psi, profile.f)
    ]
    _write_text(path, "\n".join(head + rows) + "\n")


def read_profile(path) -> SolitonProfile:
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise FormatError(path, f"cannot read: {exc.strerror}") from None
    if len(lines) < 7 or lines[0] != PROFILE_MAGIC:
        raise FormatError(path, "not a rymflow soliton profile")
    version = int(_header_value(path, lines[1], "version"))
    if version != FORMAT_VERSION:
        raise FormatError(path, f"unsupported profile version {version}")
    n = int(_header_value(path, lines[2], "nodes"))
    c = float(_header_value(path, lines[3], "c"))
    a = float(_header_value(path, lines[4], "a"))
    A = float(_header_value(path, lines[5], "A"))
    if lines[6].split() != ["columns", "r", "phi", "psi", "f"]:
        raise FormatError(path, "expected 'columns r phi psi f'")
    rows = [line.split() for line in lines[7:] if line.strip()]
    if len(rows) != n or any(len(r) != 4 for r in rows):
        raise FormatError(path, f"expected {n} rows of 4 values")
    data = np.array(rows, dtype=float)
    return SolitonProfile(A, data[:, 0], data[:, 1], data[:, 2], data[:, 3], c, a)


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------


def write_checkpoint(path, config_text: str, state: FlowState, step: int, rows: int) -> None:
    blob = {
        "format": CHECKPOINT_MAGIC,
        "version": FORMAT_VERSION,
        "config": config_text,
        "surface": state.bg.kind.value,
        "dims": list(state.bg.shape),
        "t": state.t,
        "step": step,
        "rows": rows,
        # json writes floats with the shortest round-trip representation
        "u": state.u.ravel().tolist(),
        "psi": state.psi.ravel().tolist(),
    }
    _write_text(path, json.dumps(blob) + "\n")


def read_checkpoint(path, bg=None):
    """Return (config_text, state, step, rows)."""
    try:
        blob = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise FormatError(path, f"cannot read: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise FormatError(path, f"invalid JSON: {exc.msg}") from None
    if not isinstance(blob, dict) or blob.get("format") != CHECKPOINT_MAGIC:
        raise FormatError(path, "not a rymflow checkpoint")
    if blob.get("version") != FORMAT_VERSION:
        raise FormatError(path, f"unsupported checkpoint version {blob.get('version')}")
    dims = tuple(blob["dims"])
    if bg is None or bg.kind.value != blob["surface"] or bg.shape != dims:
        bg = build_background(blob["surface"], dims)
    u = np.array(blob["u"], dtype=float).reshape(dims)
    psi = np.array(blob["psi"], dtype=float).reshape(dims)
    t = float(blob["t"])
    if not math.isfinite(t):
        raise FormatError(path, "non-finite time")
    return blob["config"], FlowState(bg, u, psi, t), int(blob["step"]), int(blob["rows"])
