"""Run driver: initial data, time loop, stop rules, recentering and outputs."""
from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .config import FlowConfig, parse_config
from .diagnostics import (
    DiagnosticsRecord,
    MinVolumeReport,
    compute_record,
    energy_functional,
    min_volume_tracker,
    sobolev_family,
)
from .errors import NumericalFailure, StepRejected
from .flow import FlowVariant, Scheme, max_stable_dt, rhs_max_norms, step
from .grid import build_background
from .initial import coefficient_field, random_band_limited, unit_volume, with_flux
from .mobius import recenter
from .state import FlowState

log = logging.getLogger(__name__)

OUTPUT_ENV = "RYMFLOW_OUTPUT_DIR"
CSV_NAME = "diagnostics.csv"
CHECKPOINT_NAME = "checkpoint.json"
FINAL_SNAPSHOT = "final.snap"
CONFIG_ECHO = "config.cfg"
SUMMARY_NAME = "summary.txt"
ENERGY_TOL = 1e-10


@dataclass
class Trajectory:
    config: FlowConfig
    records: list[DiagnosticsRecord] = field(default_factory=list)
    final_state: FlowState | None = None
    steps: int = 0
    stop_reason: str = ""
    error: NumericalFailure | None = None
    recenter_count: int = 0
    max_recenter_norm: float = 0.0
    energy_violations: int = 0
    max_energy_increase: float = -math.inf
    min_volume: MinVolumeReport | None = None
    output_dir: Path | None = None
    rows_before: int = 0

    @property
    def ok(self) -> bool:
        return self.error is None

    def summary_lines(self) -> list[str]:
        last = self.records[-1] if self.records else None
        out = [
            f"stop reason: {self.stop_reason}",
            f"steps: {self.steps}",
        ]
        if self.final_state is not None:
            out.append(f"final t: {self.final_state.t!r}")
        if last is not None:
            out += [
                f"final energy_F: {last.energy_F!r}",
                f"final calabi: {last.calabi!r}",
                f"final parallel_defect_int: {last.parallel_defect_int!r}",
                f"final volume: {last.volume!r}",
                f"final flux: {last.flux!r}",
                f"final lambda: {last.lambda_schrodinger!r}",
            ]
        out.append(
            f"energy increases beyond tolerance: {self.energy_violations}"
            f" (largest relative step change {self.max_energy_increase:.3e})"
        )
        if self.config.recenter:
            out.append(
                f"recentering: {self.recenter_count} applications, largest |b| {self.max_recenter_norm:.3e}"
                " (applied after each accepted step)"
            )
        if self.min_volume is not None:
            out += self.min_volume.lines()
        if self.error is not None:
            out.append(f"error: {self.error}")
        return out


def resolve_output_dir(config: FlowConfig, override: str | None = None) -> Path:
    """Command-line override, then the environment variable, then the config."""
    return Path(override or os.environ.get(OUTPUT_ENV) or config.output_dir)


def initial_state(config: FlowConfig, base_dir: Path | None = None) -> FlowState:
    ini = config.initial
    if ini.kind == "snapshot":
        path = Path(ini.snapshot)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        state = io.read_snapshot(path)
        if state.bg.kind is not config.surface or state.bg.shape != tuple(config.resolution):
            raise io.FormatError(path, f"snapshot grid {state.bg.tag} does not match the config")
        state = state.replace(t=0.0)
    else:
        bg = build_background(config.surface, config.resolution)
        if ini.kind == "random":
            rng = np.random.default_rng(ini.seed)
            u = random_band_limited(bg, rng, ini.max_wavenumber, ini.u_amplitude)
            psi = random_band_limited(bg, rng, ini.max_wavenumber, ini.psi_amplitude)
        else:
            u = coefficient_field(bg, ini.u_coefficients)
            psi = coefficient_field(bg, ini.psi_coefficients)
        state = FlowState(bg, u, psi)
    if config.flux_target is not None:
        state = with_flux(state, config.flux_target)
    if config.variant is FlowVariant.NORMALIZED:
        state = unit_volume(state)
    return state


class _Runner:
    def __init__(self, config: FlowConfig, out: Path | None, rows_before: int = 0):
        self.cfg = config
        self.out = out
        self.traj = Trajectory(config, output_dir=out, rows_before=rows_before)
        self.family = None
        self.pending: list[DiagnosticsRecord] = []

    def record(self, state, prev, energy_prev):
        if self.family is None:
            self.family = sobolev_family(state.bg, self.cfg.sobolev_trials, self.cfg.sobolev_seed)
        rec = compute_record(state, self.cfg.variant, prev, self.cfg.moser_k, self.family, energy_prev)
        self.traj.records.append(rec)
        self.pending.append(rec)

    def flush(self, state, step_index):
        if self.out is None:
            return
        if self.pending:
            io.append_csv(self.out / CSV_NAME, self.pending)
            self.pending = []
        rows = self.traj.rows_before + len(self.traj.records)
        io.write_checkpoint(self.out / CHECKPOINT_NAME, self.cfg.to_text(), state, step_index, rows)

    def choose_dt(self, state, remaining):
        st = self.cfg.stepper
        dt = st.dt_max
        if st.scheme is Scheme.RK4:
            dt = min(dt, max_stable_dt(state, st.cfl_safety))
            if dt < st.dt_min:
                raise StepRejected(dt, max_stable_dt(state, st.cfl_safety))
        # a remainder within rounding of dt takes the full step, so a run split
        # at a multiple of dt replays the uninterrupted sequence of steps
        return dt if remaining >= dt * (1.0 - 1e-9) else remaining

    def loop(self, state: FlowState, step_index: int, emit_first: bool):
        cfg = self.cfg
        traj = self.traj
        t_end = cfg.t_end
        energy = energy_functional(state)
        if emit_first:
            self.record(state, None, None)
        last_row_step = step_index
        prev = None
        try:
            while True:
                norms = rhs_max_norms(state, cfg.variant)
                if max(norms) < cfg.stationarity_tol:
                    traj.stop_reason = "stationary"
                    break
                remaining = t_end - state.t
                # a step shorter than this is rounding left over from t accumulation
                if remaining <= 1e-9 * cfg.stepper.dt_max:
                    traj.stop_reason = "t_end"
                    break
                dt = self.choose_dt(state, remaining)
                prev = state
                state = step(state, dt, cfg.variant, cfg.stepper.scheme, cfg.stepper.cfl_safety)
                if cfg.recenter:
                    state, param = recenter(state, cfg.recenter_tol)
                    if param.norm > 0.0:
                        traj.recenter_count += 1
                        traj.max_recenter_norm = max(traj.max_recenter_norm, param.norm)
                step_index += 1
                new_energy = energy_functional(state)
                rel = (new_energy - energy) / (1.0 + abs(energy))
                traj.max_energy_increase = max(traj.max_energy_increase, rel)
                if rel > ENERGY_TOL:
                    traj.energy_violations += 1
                if step_index % cfg.diag_cadence == 0:
                    self.record(state, prev, energy)
                    last_row_step = step_index
                energy = new_energy
                if cfg.snapshot_cadence and step_index % cfg.snapshot_cadence == 0 and self.out is not None:
                    io.write_snapshot(self.out / f"snapshot_{step_index:08d}.snap", state)
                if cfg.checkpoint_cadence and step_index % cfg.checkpoint_cadence == 0:
                    self.flush(state, step_index)
        except NumericalFailure as exc:
            traj.error = exc
            traj.stop_reason = f"{type(exc).__name__}: {exc}"
            log.error("run stopped: %s", exc)
        if traj.error is None and last_row_step != step_index:
            self.record(state, prev, None)
        traj.final_state = state
        traj.steps = step_index
        return state, step_index


def _finish(runner: _Runner, state, step_index, write_plots: bool):
    traj = runner.traj
    cfg = runner.cfg
    if traj.records:
        flux0 = traj.records[0].flux
        traj.min_volume = min_volume_tracker(traj.records, flux0, state.bg.r0)
    out = runner.out
    if out is None:
        return traj
    runner.flush(state, step_index)
    io.write_snapshot(out / FINAL_SNAPSHOT, state)
    (out / SUMMARY_NAME).write_text("\n".join(traj.summary_lines()) + "\n", encoding="utf-8")
    if write_plots and cfg.plots:
        from .plots import emit_plots

        emit_plots(io.read_csv(out / CSV_NAME), out)
    return traj


def run(config: FlowConfig, output_dir=None, write_outputs: bool = True, base_dir=None) -> Trajectory:
    """Integrate from t = 0 to ``config.t_end`` or until a stop rule fires.

    Numerical failures do not raise: they end the run and are stored on the
    trajectory (``error`` and ``stop_reason``).
    """
    out = None
    if write_outputs:
        out = resolve_output_dir(config, output_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / CONFIG_ECHO).write_text(config.to_text(), encoding="utf-8")
        io.write_csv(out / CSV_NAME, [])
    state = initial_state(config, base_dir)
    runner = _Runner(config, out)
    state, n = runner.loop(state, 0, emit_first=True)
    return _finish(runner, state, n, write_outputs)


def resume(
    checkpoint_path, t_end: float | None = None, output_dir=None, write_outputs: bool = True, plots: bool = True
) -> Trajectory:
    """Continue a run from its checkpoint, appending to the same CSV."""
    checkpoint_path = Path(checkpoint_path)
    config_text, state, step_index, rows = io.read_checkpoint(checkpoint_path)
    config = parse_config(config_text)
    if t_end is not None:
        config = config.with_t_end(t_end)
    out = None
    if write_outputs:
        out = Path(output_dir) if output_dir else checkpoint_path.parent
        out.mkdir(parents=True, exist_ok=True)
        csv_path = out / CSV_NAME
        if csv_path.exists():
            io.truncate_csv(csv_path, rows)
        else:
            raise io.FormatError(csv_path, "diagnostics CSV of the checkpointed run not found")
        (out / CONFIG_ECHO).write_text(config.to_text(), encoding="utf-8")
    runner = _Runner(config, out, rows_before=rows)
    state, n = runner.loop(state, step_index, emit_first=False)
    return _finish(runner, state, n, write_outputs and plots)

