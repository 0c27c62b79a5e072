"""Strict JSON run configuration.

Every key is checked: unknown keys are rejected with their full path so
a typo in a tolerance or an epsilon cannot silently fall back to a
default.  Errors name the offending field as section.key.  The parsed
object carries documented defaults and a content hash that stamps every
output artifact.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

from .diagnostics import MAX_GAMMA_ORDER
from .equation import Formulation
from .errors import ConfigError

PROFILES = ("gaussian", "bump", "zero")
FORMULATIONS = tuple(f.value for f in Formulation)


def _require_object(value, path: str) -> dict:
    if not isinstance(value, dict):
        raise ConfigError(f"{path} must be a JSON object, got {type(value).__name__}")
    return value


def _check_keys(raw: dict, path: str, allowed):
    unknown = sorted(set(raw) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key {path}.{unknown[0]}" if path
                          else f"unknown key {unknown[0]}")


def _number(raw, path, *, required=False, default=None, minimum=None,
            maximum=None, exclusive_min=None, allow_none=False):
    if path.split(".")[-1] not in raw:
        if required:
            raise ConfigError(f"missing required field {path}")
        return default
    value = raw[path.split(".")[-1]]
    if value is None and allow_none:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path} must be a number, got {value!r}")
    value = float(value)
    if value != value or value in (float("inf"), float("-inf")):
        raise ConfigError(f"{path} must be finite, got {value!r}")
    if exclusive_min is not None and not value > exclusive_min:
        raise ConfigError(f"{path} must exceed {exclusive_min}, got {value}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{path} must be >= {minimum}, got {value}")
    if maximum is not None and value > maximum:
        raise ConfigError(f"{path} must be <= {maximum}, got {value}")
    return value


def _integer(raw, path, *, required=False, default=None, minimum=None,
             maximum=None):
    key = path.split(".")[-1]
    if key not in raw:
        if required:
            raise ConfigError(f"missing required field {path}")
        return default
    value = raw[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{path} must be an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{path} must be >= {minimum}, got {value}")
    if maximum is not None and value > maximum:
        raise ConfigError(f"{path} must be <= {maximum}, got {value}")
    return value


def _string(raw, path, *, default=None, choices=None, allow_none=False):
    key = path.split(".")[-1]
    if key not in raw:
        return default
    value = raw[key]
    if value is None and allow_none:
        return None
    if not isinstance(value, str):
        raise ConfigError(f"{path} must be a string, got {value!r}")
    if choices is not None and value not in choices:
        raise ConfigError(f"{path} must be one of {sorted(choices)}, got {value!r}")
    return value


@dataclass(frozen=True)
class GridSection:
    extent: float
    points: int


@dataclass(frozen=True)
class TimeSection:
    t_end: float
    cfl: float = 0.4


@dataclass(frozen=True)
class DataSection:
    epsilon: float
    profile: str = "gaussian"
    width: float = 1.0
    g_profile: str = "zero"
    g_width: float | None = None


@dataclass(frozen=True)
class DiagnosticsSection:
    gamma_order: int = 2
    sample_dt: float = 1.0
    fit_window_start: float = 0.0


@dataclass(frozen=True)
class ConformalSection:
    a: float = 2.0
    t_direct: float = 8.0
    s_min: float = 0.08
    collar: float | None = None
    y_extent: float = 1.1
    base_direct_points: int = 801
    base_compact_points: int = 161
    levels: int = 3
    margin_t: float = 0.5


@dataclass(frozen=True)
class SweepSection:
    epsilons: tuple[float, ...]


@dataclass(frozen=True)
class VerifySection:
    count: int = 40
    fd_step: float | None = None
    commutation_table: str | None = None
    conformal_constants: str | None = None


@dataclass(frozen=True)
class RunConfig:
    dimension: int
    grid: GridSection | None = None
    time: TimeSection | None = None
    initial_data: DataSection | None = None
    formulation: str = "geometric"
    diagnostics: DiagnosticsSection = field(default_factory=DiagnosticsSection)
    conformal: ConformalSection = field(default_factory=ConformalSection)
    sweep: SweepSection | None = None
    verify: VerifySection = field(default_factory=VerifySection)
    output: str | None = None
    seed: int = 0

    def canonical(self) -> dict:
        doc = {"dimension": self.dimension, "formulation": self.formulation,
               "seed": self.seed}
        for name in ("grid", "time", "initial_data", "diagnostics",
                     "conformal", "sweep", "verify"):
            section = getattr(self, name)
            if section is not None:
                doc[name] = asdict(section)
        if self.output is not None:
            doc["output"] = self.output
        return doc

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]

    def require(self, *names: str):
        """Command-level check that optional sections are present."""
        for name in names:
            if getattr(self, name) is None:
                raise ConfigError(
                    f"this command requires the {name!r} config section"
                )


TOP_KEYS = ("dimension", "grid", "time", "initial_data", "formulation",
            "diagnostics", "conformal", "sweep", "verify", "output", "seed")


def parse_config(text: str) -> RunConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(
            f"config is not valid JSON: {err.msg} at line {err.lineno} "
            f"column {err.colno}"
        ) from None
    raw = _require_object(raw, "config")
    _check_keys(raw, "", TOP_KEYS)

    dimension = _integer(raw, "dimension", required=True)
    if dimension not in (1, 2, 3):
        raise ConfigError(f"dimension must be 1, 2 or 3, got {dimension}")

    grid = None
    if "grid" in raw:
        g = _require_object(raw["grid"], "grid")
        _check_keys(g, "grid", ("extent", "points"))
        grid = GridSection(
            extent=_number(g, "grid.extent", required=True, exclusive_min=0.0),
            points=_integer(g, "grid.points", required=True, minimum=9),
        )
        if grid.points % 2 == 0:
            raise ConfigError(f"grid.points must be odd, got {grid.points}")

    time = None
    if "time" in raw:
        t = _require_object(raw["time"], "time")
        _check_keys(t, "time", ("t_end", "cfl"))
        cfl = _number(t, "time.cfl", default=0.4)
        if not 0 < cfl <= 1.0:
            raise ConfigError(f"time.cfl must be in (0, 1], got {cfl}")
        time = TimeSection(
            t_end=_number(t, "time.t_end", required=True, exclusive_min=0.0),
            cfl=cfl,
        )

    data = None
    if "initial_data" in raw:
        d = _require_object(raw["initial_data"], "initial_data")
        _check_keys(d, "initial_data",
                    ("epsilon", "profile", "width", "g_profile", "g_width"))
        data = DataSection(
            epsilon=_number(d, "initial_data.epsilon", required=True, minimum=0.0),
            profile=_string(d, "initial_data.profile", default="gaussian",
                            choices=PROFILES),
            width=_number(d, "initial_data.width", default=1.0, exclusive_min=0.0),
            g_profile=_string(d, "initial_data.g_profile", default="zero",
                              choices=PROFILES),
            g_width=_number(d, "initial_data.g_width", default=None,
                            exclusive_min=0.0, allow_none=True),
        )

    formulation = _string(raw, "formulation", default="geometric",
                          choices=FORMULATIONS)

    diagnostics = DiagnosticsSection()
    if "diagnostics" in raw:
        d = _require_object(raw["diagnostics"], "diagnostics")
        _check_keys(d, "diagnostics", ("gamma_order", "sample_dt", "fit_window_start"))
        diagnostics = DiagnosticsSection(
            gamma_order=_integer(d, "diagnostics.gamma_order", default=2,
                                 minimum=0, maximum=MAX_GAMMA_ORDER),
            sample_dt=_number(d, "diagnostics.sample_dt", default=1.0,
                              exclusive_min=0.0),
            fit_window_start=_number(d, "diagnostics.fit_window_start",
                                     default=0.0, minimum=0.0),
        )

    conformal = ConformalSection()
    if "conformal" in raw:
        c = _require_object(raw["conformal"], "conformal")
        _check_keys(c, "conformal",
                    ("a", "t_direct", "s_min", "collar", "y_extent",
                     "base_direct_points", "base_compact_points", "levels",
                     "margin_t"))
        conformal = ConformalSection(
            a=_number(c, "conformal.a", default=2.0, exclusive_min=1.0),
            t_direct=_number(c, "conformal.t_direct", default=8.0,
                             exclusive_min=0.0),
            s_min=_number(c, "conformal.s_min", default=0.08, exclusive_min=0.0),
            collar=_number(c, "conformal.collar", default=None,
                           exclusive_min=0.0, allow_none=True),
            y_extent=_number(c, "conformal.y_extent", default=1.1,
                             exclusive_min=0.0),
            base_direct_points=_integer(c, "conformal.base_direct_points",
                                        default=801, minimum=9),
            base_compact_points=_integer(c, "conformal.base_compact_points",
                                         default=161, minimum=9),
            levels=_integer(c, "conformal.levels", default=3, minimum=1),
            margin_t=_number(c, "conformal.margin_t", default=0.5, minimum=0.0),
        )
        if conformal.t_direct <= conformal.a:
            raise ConfigError(
                f"conformal.t_direct must exceed conformal.a, got "
                f"{conformal.t_direct} <= {conformal.a}"
            )

    sweep = None
    if "sweep" in raw:
        s = _require_object(raw["sweep"], "sweep")
        _check_keys(s, "sweep", ("epsilons",))
        eps = s.get("epsilons")
        if not isinstance(eps, list) or not eps:
            raise ConfigError("sweep.epsilons must be a non-empty array")
        values = []
        for i, v in enumerate(eps):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(f"sweep.epsilons[{i}] must be a number, got {v!r}")
            values.append(float(v))
            if values[-1] < 0 or values[-1] != values[-1]:
                raise ConfigError(f"sweep.epsilons[{i}] must be >= 0 and finite")
        if any(b <= a for a, b in zip(values, values[1:])):
            raise ConfigError("sweep.epsilons must be strictly increasing")
        sweep = SweepSection(epsilons=tuple(values))

    verify = VerifySection()
    if "verify" in raw:
        v = _require_object(raw["verify"], "verify")
        _check_keys(v, "verify",
                    ("count", "fd_step", "commutation_table", "conformal_constants"))
        verify = VerifySection(
            count=_integer(v, "verify.count", default=40, minimum=1),
            fd_step=_number(v, "verify.fd_step", default=None,
                            exclusive_min=0.0, allow_none=True),
            commutation_table=_string(v, "verify.commutation_table",
                                      default=None, allow_none=True),
            conformal_constants=_string(v, "verify.conformal_constants",
                                        default=None, allow_none=True),
        )

    output = _string(raw, "output", default=None, allow_none=True)
    seed = _integer(raw, "seed", default=0, minimum=0)

    return RunConfig(
        dimension=dimension, grid=grid, time=time, initial_data=data,
        formulation=formulation, diagnostics=diagnostics, conformal=conformal,
        sweep=sweep, verify=verify, output=output, seed=seed,
    )


def load_config(path: str) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from None
    return parse_config(text)
