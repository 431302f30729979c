"""Plain-text experiment configuration.

One ``section.key = value`` assignment per line, ``#`` starts a comment.
Unknown keys are errors.  Numeric values accept arithmetic on literals and
the names ``pi`` and ``inf`` (so ``grid.box_length = 2*pi*8`` works).
"""

from __future__ import annotations

import ast
import math
import operator
from dataclasses import dataclass, fields, replace

from .diagnostics import DiagnosticsConfig
from .grid_spectral import make_grid
from .state_model import PhysicalParams
from .time_integrator import StepControl


class ConfigError(ValueError):
    pass


_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_NAMES = {"pi": math.pi, "inf": math.inf}


def _eval_number(text: str) -> float:
    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return node.value
        if isinstance(node, ast.Name) and node.id in _NAMES:
            return _NAMES[node.id]
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        raise ConfigError(f"unsupported expression {text!r}")

    try:
        return ev(ast.parse(text.strip(), mode="eval"))
    except SyntaxError as err:
        raise ConfigError(f"cannot parse number {text!r}") from err


def _as_int(text: str) -> int:
    v = _eval_number(text)
    if isinstance(v, float):
        if not v.is_integer():
            raise ConfigError(f"expected an integer, got {text!r}")
        v = int(v)
    return v


def _as_float(text: str) -> float:
    return float(_eval_number(text))


def _as_str(text: str) -> str:
    return text.strip().strip('"').strip("'")


def _as_window(text: str) -> tuple:
    try:
        t0, t1 = text.split(":")
        return (_as_float(t0), _as_float(t1))
    except ValueError as err:
        raise ConfigError(f"window must look like t0:t1, got {text!r}") from err


def _as_mode(text: str) -> tuple:
    parts = [p for p in text.replace(" ", "").split(",") if p]
    if len(parts) != 2:
        raise ConfigError(f"mode must be two integers 'm1,m2', got {text!r}")
    return (_as_int(parts[0]), _as_int(parts[1]))


@dataclass(frozen=True)
class ExperimentConfig:
    grid_n: int = 64
    grid_box_length: float = 2 * math.pi
    params_mu: float = 1.0
    params_lambda: float = 0.0
    params_A: float = 1.0
    params_gamma: float = 2.0
    time_t_end: float = 1.0
    time_cfl: float = 0.4
    time_dt_max: float = math.inf
    time_scheme: str = "if_ssprk3"
    init_kind: str = "random_spectrum"
    init_amplitude: float = 1e-3
    init_sigma: float = 1.0
    init_seed: int = 0
    init_k_cut: float = 1.0
    init_mode: tuple = (1, 0)
    init_polarization: str = "compressible"
    init_width: float = 1.0
    init_mean_a: float = 0.0
    init_mean_b: float = 0.0
    lp_j0: int = 0
    lp_sigma: float = 1.0
    lp_gamma1: float = -0.5
    output_path: str = "run"
    output_stride: int = 10
    output_fit_window: tuple = (10.0, 200.0)
    run_mode: str = "nonlinear"

    def physical_params(self):
        return PhysicalParams(self.params_mu, self.params_lambda, self.params_A, self.params_gamma)

    def step_control(self):
        return StepControl(self.time_t_end, self.time_cfl, self.time_dt_max, self.time_scheme)

    def diagnostics_config(self):
        return DiagnosticsConfig(self.lp_j0, self.lp_sigma, self.lp_gamma1)

    def grid(self):
        return make_grid(self.grid_n, self.grid_box_length)

    def with_(self, **kw) -> "ExperimentConfig":
        return replace(self, **kw)


_PARSERS = {
    "grid_n": _as_int, "init_seed": _as_int, "lp_j0": _as_int, "output_stride": _as_int,
    "time_scheme": _as_str, "init_kind": _as_str, "init_polarization": _as_str,
    "output_path": _as_str, "run_mode": _as_str,
    "output_fit_window": _as_window, "init_mode": _as_mode,
}
KNOWN_KEYS = {f.name.replace("_", ".", 1): f.name for f in fields(ExperimentConfig)}

INIT_KINDS = ("random_spectrum", "single_mode", "gaussian_blob")
POLARIZATIONS = ("compressible", "solenoidal")
RUN_MODES = ("nonlinear", "linear_oracle", "heat_reference")


def validate(cfg: ExperimentConfig) -> ExperimentConfig:
    try:
        cfg.grid()
        cfg.physical_params()
        cfg.step_control()
        cfg.diagnostics_config()
    except ValueError as err:
        raise ConfigError(str(err)) from err
    if cfg.init_kind not in INIT_KINDS:
        raise ConfigError(f"init.kind must be one of {INIT_KINDS}, got {cfg.init_kind!r}")
    if cfg.init_polarization not in POLARIZATIONS:
        raise ConfigError(f"init.polarization must be one of {POLARIZATIONS}")
    if cfg.run_mode not in RUN_MODES:
        raise ConfigError(f"run.mode must be one of {RUN_MODES}, got {cfg.run_mode!r}")
    if cfg.init_amplitude < 0:
        raise ConfigError("init.amplitude must be non-negative")
    if cfg.init_k_cut <= 0 or cfg.init_width <= 0:
        raise ConfigError("init.k_cut and init.width must be positive")
    if cfg.output_stride < 1:
        raise ConfigError("output.stride must be >= 1")
    if cfg.time_t_end < 0:
        raise ConfigError("time.t_end must be non-negative")
    return cfg


def parse_config(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'section.key = value', got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        name = KNOWN_KEYS[key]
        if name in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[name] = _PARSERS.get(name, _as_float)(val)
        except (ConfigError, ValueError, TypeError, ZeroDivisionError, OverflowError) as err:
            raise ConfigError(f"line {lineno}: bad value for {key}: {err}") from err
    return validate(replace(base or ExperimentConfig(), **values))


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    return parse_config(text)


def _fmt(v) -> str:
    if isinstance(v, tuple):
        if len(v) == 2 and all(isinstance(x, int) for x in v):
            return f"{v[0]},{v[1]}"
        return f"{_fmt(v[0])}:{_fmt(v[1])}"
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


def echo_config(cfg: ExperimentConfig) -> str:
    """Full config text; parsing it back gives an equal config."""
    lines = [f"{key} = {_fmt(getattr(cfg, name))}" for key, name in KNOWN_KEYS.items()]
    return "\n".join(lines) + "\n"
