"""Run configuration: a strict ``[section]`` / ``key = value`` grammar.

Example::

    [surface]
    kind = torus
    n = 64

    [flow]
    variant = normalized
    t_end = 2.0

Every key has a default except ``surface.kind``, ``flow.variant`` and
``flow.t_end``.  Unknown sections or keys are errors.  ``FlowConfig.to_text``
renders every value, defaults included, and parses back to an equal config.
"""
from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field, fields, replace

from .errors import ConfigError, InvalidArgumentError
from .flow import FlowVariant, Scheme, StepperConfig
from .grid import Surface, check_resolution

INITIAL_KINDS = ("random", "coefficients", "snapshot")

_REQUIRED = {("surface", "kind"), ("flow", "variant"), ("flow", "t_end")}


@dataclass(frozen=True)
class InitialSpec:
    kind: str = "random"
    seed: int = 0
    max_wavenumber: int = 4
    u_amplitude: float = 0.2
    psi_amplitude: float = 0.2
    u_coefficients: str = ""
    psi_coefficients: str = ""
    snapshot: str = ""


@dataclass(frozen=True)
class FlowConfig:
    surface: Surface
    resolution: tuple[int, int]
    variant: FlowVariant
    t_end: float
    initial: InitialSpec = field(default_factory=InitialSpec)
    flux_target: float | None = 1.0
    stepper: StepperConfig = field(default_factory=StepperConfig)
    stationarity_tol: float = 1e-9
    recenter: bool = False
    recenter_tol: float = 1e-10
    diag_cadence: int = 10
    snapshot_cadence: int = 0
    checkpoint_cadence: int = 0
    output_dir: str = "rymflow_out"
    moser_k: float = 1.0
    sobolev_trials: int = 32
    sobolev_seed: int = 12345
    plots: bool = True

    def __post_init__(self):
        _validate(self)

    def with_t_end(self, t_end: float) -> "FlowConfig":
        return replace(self, t_end=float(t_end))

    def to_text(self) -> str:
        """Render every value; ``parse_config(cfg.to_text()) == cfg``."""
        st = self.stepper
        ini = self.initial
        if self.surface is Surface.TORUS:
            surface = [f"n = {self.resolution[0]}"]
        else:
            surface = [f"n_lat = {self.resolution[0]}", f"n_lon = {self.resolution[1]}"]
        flux = "keep" if self.flux_target is None else repr(self.flux_target)
        lines = [
            "[surface]",
            f"kind = {self.surface.value}",
            *surface,
            "",
            "[flow]",
            f"variant = {self.variant.value}",
            f"t_end = {self.t_end!r}",
            f"flux_target = {flux}",
            f"stationarity_tol = {self.stationarity_tol!r}",
            f"recenter = {str(self.recenter).lower()}",
            f"recenter_tol = {self.recenter_tol!r}",
            "",
            "[initial]",
            f"kind = {ini.kind}",
            f"seed = {ini.seed}",
            f"max_wavenumber = {ini.max_wavenumber}",
            f"u_amplitude = {ini.u_amplitude!r}",
            f"psi_amplitude = {ini.psi_amplitude!r}",
            f"u_coefficients = {ini.u_coefficients}",
            f"psi_coefficients = {ini.psi_coefficients}",
            f"snapshot = {ini.snapshot}",
            "",
            "[stepper]",
            f"scheme = {st.scheme.value}",
            f"cfl_safety = {st.cfl_safety!r}",
            f"dt_max = {st.dt_max!r}",
            f"dt_min = {st.dt_min!r}",
            "",
            "[output]",
            f"dir = {self.output_dir}",
            f"diag_cadence = {self.diag_cadence}",
            f"snapshot_cadence = {self.snapshot_cadence}",
            f"checkpoint_cadence = {self.checkpoint_cadence}",
            f"moser_k = {self.moser_k!r}",
            f"sobolev_trials = {self.sobolev_trials}",
            f"sobolev_seed = {self.sobolev_seed}",
            f"plots = {str(self.plots).lower()}",
        ]
        return "\n".join(line.rstrip() for line in lines) + "\n"


def _validate(cfg: FlowConfig) -> None:
    def bad(msg, key):
        raise ConfigError(msg, key=key)

    try:
        check_resolution(cfg.surface, cfg.resolution)
    except InvalidArgumentError as exc:
        bad(str(exc), "surface")
    if cfg.recenter and cfg.surface is not Surface.SPHERE:
        bad("recentering is only defined on the sphere", "recenter")
    for key in ("t_end", "stationarity_tol", "recenter_tol", "moser_k"):
        v = getattr(cfg, key)
        if not (math.isfinite(v) and v > 0):
            bad(f"{key} must be a positive finite number, got {v!r}", key)
    if cfg.flux_target is not None and not math.isfinite(cfg.flux_target):
        bad("flux_target must be finite", "flux_target")
    for key in ("diag_cadence", "sobolev_trials"):
        if getattr(cfg, key) < 1:
            bad(f"{key} must be >= 1", key)
    for key in ("snapshot_cadence", "checkpoint_cadence"):
        if getattr(cfg, key) < 0:
            bad(f"{key} must be >= 0 (0 disables)", key)
    ini = cfg.initial
    if ini.kind not in INITIAL_KINDS:
        bad(f"initial kind must be one of {', '.join(INITIAL_KINDS)}", "initial.kind")
    if ini.kind == "random":
        if ini.max_wavenumber < 1:
            bad("max_wavenumber must be >= 1", "max_wavenumber")
        if ini.u_amplitude < 0 or ini.psi_amplitude < 0:
            bad("amplitudes must be nonnegative", "u_amplitude")
    if ini.kind == "snapshot" and not ini.snapshot:
        bad("initial kind 'snapshot' needs a snapshot path", "snapshot")
    if not cfg.output_dir:
        bad("output directory must not be empty", "dir")


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

_SCHEMA = {
    "surface": {"kind", "n", "n_lat", "n_lon"},
    "flow": {"variant", "t_end", "flux_target", "stationarity_tol", "recenter", "recenter_tol"},
    "initial": {f.name for f in fields(InitialSpec)},
    "stepper": {"scheme", "cfl_safety", "dt_max", "dt_min"},
    "output": {
        "dir",
        "diag_cadence",
        "snapshot_cadence",
        "checkpoint_cadence",
        "moser_k",
        "sobolev_trials",
        "sobolev_seed",
        "plots",
    },
}


def _line_of(lines: list[str], section: str, key: str | None = None) -> int | None:
    current = None
    for i, raw in enumerate(lines, start=1):
        text = raw.strip()
        m = re.fullmatch(r"\[([^\]]+)\]", text)
        if m:
            current = m.group(1).strip()
            if key is None and current == section:
                return i
            continue
        if key is not None and current == section:
            name = re.split(r"[=:]", text, maxsplit=1)[0].strip().lower()
            if name == key:
                return i
    return None


def parse_config(text: str) -> FlowConfig:
    lines = text.splitlines()
    cp = configparser.ConfigParser(
        interpolation=None, inline_comment_prefixes=("#", ";"), empty_lines_in_values=False
    )
    try:
        cp.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("key outside any [section]", line=exc.lineno) from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"duplicate section [{exc.section}]", line=exc.lineno) from None
    except configparser.DuplicateOptionError as exc:
        raise ConfigError("duplicate key", key=f"{exc.section}.{exc.option}", line=exc.lineno) from None
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0] if exc.errors else None
        raise ConfigError("cannot parse line", line=lineno) from None

    for section in cp.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]", line=_line_of(lines, section))
        for key in cp[section]:
            if key not in _SCHEMA[section]:
                raise ConfigError(
                    f"unknown key in [{section}]", key=f"{section}.{key}", line=_line_of(lines, section, key)
                )
    for section, key in sorted(_REQUIRED):
        if not cp.has_option(section, key):
            raise ConfigError("required key missing", key=f"{section}.{key}")

    def get(section, key, conv, default):
        if not cp.has_option(section, key):
            return default
        raw = cp.get(section, key).strip()
        try:
            return conv(raw)
        except (ValueError, InvalidArgumentError) as exc:
            raise ConfigError(
                f"invalid value {raw!r}: {exc}", key=f"{section}.{key}", line=_line_of(lines, section, key)
            ) from None

    def boolean(raw):
        low = raw.lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        raise ValueError("expected true or false")

    def flux(raw):
        return None if raw.lower() == "keep" else float(raw)

    surface = get("surface", "kind", Surface, None)
    if surface is Surface.TORUS:
        for key in ("n_lat", "n_lon"):
            if cp.has_option("surface", key):
                raise ConfigError("torus takes 'n' only", key=f"surface.{key}", line=_line_of(lines, "surface", key))
        n = get("surface", "n", int, 64)
        resolution = (n, n)
    else:
        if cp.has_option("surface", "n"):
            raise ConfigError("sphere takes 'n_lat' and 'n_lon'", key="surface.n", line=_line_of(lines, "surface", "n"))
        n_lat = get("surface", "n_lat", int, 32)
        n_lon = get("surface", "n_lon", int, 2 * n_lat)
        resolution = (n_lat, n_lon)

    d_ini = InitialSpec()
    initial = InitialSpec(
        kind=get("initial", "kind", str, d_ini.kind),
        seed=get("initial", "seed", int, d_ini.seed),
        max_wavenumber=get("initial", "max_wavenumber", int, d_ini.max_wavenumber),
        u_amplitude=get("initial", "u_amplitude", float, d_ini.u_amplitude),
        psi_amplitude=get("initial", "psi_amplitude", float, d_ini.psi_amplitude),
        u_coefficients=get("initial", "u_coefficients", str, d_ini.u_coefficients),
        psi_coefficients=get("initial", "psi_coefficients", str, d_ini.psi_coefficients),
        snapshot=get("initial", "snapshot", str, d_ini.snapshot),
    )
    d_st = StepperConfig()
    try:
        stepper = StepperConfig(
            scheme=get("stepper", "scheme", Scheme.parse, d_st.scheme),
            cfl_safety=get("stepper", "cfl_safety", float, d_st.cfl_safety),
            dt_max=get("stepper", "dt_max", float, d_st.dt_max),
            dt_min=get("stepper", "dt_min", float, d_st.dt_min),
        )
    except InvalidArgumentError as exc:
        key = "stepper.cfl_safety" if "cfl" in str(exc) else "stepper.dt_min"
        raise ConfigError(str(exc), key=key) from None

    d = {f.name: f.default for f in fields(FlowConfig) if not callable(f.default_factory)}
    return FlowConfig(
        surface=surface,
        resolution=resolution,
        variant=get("flow", "variant", FlowVariant, None),
        t_end=get("flow", "t_end", float, None),
        initial=initial,
        flux_target=get("flow", "flux_target", flux, d["flux_target"]),
        stepper=stepper,
        stationarity_tol=get("flow", "stationarity_tol", float, d["stationarity_tol"]),
        recenter=get("flow", "recenter", boolean, d["recenter"]),
        recenter_tol=get("flow", "recenter_tol", float, d["recenter_tol"]),
        diag_cadence=get("output", "diag_cadence", int, d["diag_cadence"]),
        snapshot_cadence=get("output", "snapshot_cadence", int, d["snapshot_cadence"]),
        checkpoint_cadence=get("output", "checkpoint_cadence", int, d["checkpoint_cadence"]),
        output_dir=get("output", "dir", str, d["output_dir"]),
        moser_k=get("output", "moser_k", float, d["moser_k"]),
        sobolev_trials=get("output", "sobolev_trials", int, d["sobolev_trials"]),
        sobolev_seed=get("output", "sobolev_seed", int, d["sobolev_seed"]),
        plots=get("output", "plots", boolean, d["plots"]),
    )
