"""YAML run configuration for the command-line front end.

A config file has five top-level blocks::

    model:
      class: bergomi            # or affine
      sigma_tilde: sqrt         # affine only: sqrt | linear
      rho: -0.7
      kernel: {type: exponential, phi: 1.5, b: 1.0}
      curve: {type: flat, level: 0.04}
    payoff: {type: call, strike: 1.0}
    grid: {T: 1.0, n_steps: 512}
    mc: {n_paths: 65536, seed: 0, antithetic: true}
    run: {eps: [0.1, 0.2], order: 2, mode: quadrature}

Every block is validated on load; unknown keys and bad values raise
:class:`ConfigError` carrying the dotted path of the offending field.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np
import yaml

from .bs_engine import CallPayoff, ConstantPayoff, DigitalPayoff, Payoff, PutPayoff
from .curves import Curve, FlatCurve, PiecewiseLinearCurve
from .errors import ConfigurationError, DomainError
from .kernels import ExpSumKernel, ExponentialKernel, Kernel, PowerKernel, markovian_lift
from .mc_engine import PathGrid
from .models import ModelSpec
from .rng import DEFAULT_CHUNK


class ConfigError(ConfigurationError):
    """Invalid configuration; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


# -------------------------------------------------------------- field readers
def _block(d, path, allowed, required=()):
    if d is None:
        d = {}
    if not isinstance(d, dict):
        raise ConfigError(path, "expected a mapping")
    for k in d:
        if k not in allowed:
            raise ConfigError(f"{path}.{k}" if path else str(k),
                              f"unknown key (allowed: {', '.join(sorted(allowed))})")
    for k in required:
        if k not in d:
            raise ConfigError(f"{path}.{k}" if path else k, "missing required key")
    return d


def _num(d, key, path, default=None, lo=None, hi=None, integer=False, lo_open=False):
    p = f"{path}.{key}"
    if key not in d:
        if default is None:
            raise ConfigError(p, "missing required key")
        return default
    val = d[key]
    if isinstance(val, bool):
        raise ConfigError(p, "expected a number, got a boolean")
    try:
        # YAML 1.1 reads "1e-3" as a string; accept it as a decimal
        x = float(val)
    except (TypeError, ValueError):
        raise ConfigError(p, f"expected a number, got {val!r}") from None
    if not np.isfinite(x):
        raise ConfigError(p, "must be finite")
    if integer:
        if x != int(x):
            raise ConfigError(p, f"expected an integer, got {val!r}")
        x = int(x)
    if lo is not None and (x < lo or (lo_open and x == lo)):
        raise ConfigError(p, f"must be {'>' if lo_open else '>='} {lo}, got {val!r}")
    if hi is not None and x > hi:
        raise ConfigError(p, f"must be <= {hi}, got {val!r}")
    return x


def _numlist(d, key, path, default=None, lo=None, hi=None):
    p = f"{path}.{key}"
    if key not in d:
        if default is None:
            raise ConfigError(p, "missing required key")
        return list(default)
    val = d[key]
    vals = val if isinstance(val, list) else [val]
    if not vals:
        raise ConfigError(p, "must not be empty")
    return [_num({key: v}, key, f"{path}", lo=lo, hi=hi) for v in vals]


def _choice(d, key, path, options, default=None):
    p = f"{path}.{key}"
    if key not in d:
        if default is None:
            raise ConfigError(p, "missing required key")
        return default
    val = d[key]
    if val not in options:
        raise ConfigError(p, f"expected one of {', '.join(options)}, got {val!r}")
    return val


def _build(path, fn, *args, **kw):
    """Run a constructor and re-raise its validation errors under ``path``."""
    try:
        return fn(*args, **kw)
    except (ConfigurationError, DomainError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(path, str(exc)) from None


# ------------------------------------------------------------------- blocks
def parse_kernel(d, path="model.kernel") -> Kernel:
    d = _block(d, path, {"type", "phi", "b", "gamma", "weights", "rates", "n", "horizon"},
               ("type",))
    kind = _choice(d, "type", path, ("exponential", "power", "expsum", "lift"))
    allowed = {"exponential": {"type", "phi", "b"}, "power": {"type", "phi", "gamma"},
               "expsum": {"type", "weights", "rates"},
               "lift": {"type", "phi", "gamma", "n", "horizon"}}[kind]
    _block(d, path, allowed)
    if kind == "exponential":
        return _build(path, ExponentialKernel, _num(d, "phi", path),
                      _num(d, "b", path, lo=0.0))
    if kind == "expsum":
        w = _numlist(d, "weights", path)
        r = _numlist(d, "rates", path, lo=0.0)
        if len(w) != len(r):
            raise ConfigError(f"{path}.rates", "needs as many entries as weights")
        return _build(path, ExpSumKernel, tuple(zip(w, r)))
    power = _build(path, PowerKernel, _num(d, "phi", path),
                   _num(d, "gamma", path, lo=0.0, hi=0.5, lo_open=True))
    if kind == "power":
        return power
    return _build(path, markovian_lift, power, _num(d, "n", path, lo=1, integer=True),
                  _num(d, "horizon", path, default=1.0, lo=0.0, lo_open=True))


def parse_curve(d, path="model.curve") -> Curve:
    d = _block(d, path, {"type", "level", "knots"}, ("type",))
    kind = _choice(d, "type", path, ("flat", "piecewise_linear"))
    if kind == "flat":
        _block(d, path, {"type", "level"})
        return _build(path, FlatCurve, _num(d, "level", path))
    _block(d, path, {"type", "knots"}, ("knots",))
    knots = d["knots"]
    if not isinstance(knots, list) or not knots:
        raise ConfigError(f"{path}.knots", "expected a list of [time, variance] pairs")
    pairs = []
    for i, k in enumerate(knots):
        p = f"{path}.knots[{i}]"
        if not isinstance(k, (list, tuple)) or len(k) != 2:
            raise ConfigError(p, "expected a [time, variance] pair")
        pairs.append((_num({"t": k[0]}, "t", p), _num({"v": k[1]}, "v", p)))
    return _build(path, PiecewiseLinearCurve, pairs)


def parse_model(d, path="model") -> ModelSpec:
    d = _block(d, path, {"class", "sigma_tilde", "rho", "kernel", "curve"},
               ("class", "rho", "kernel", "curve"))
    cls = _choice(d, "class", path, ("bergomi", "affine"))
    rho = _num(d, "rho", path, lo=-1.0, hi=1.0)
    kernel = parse_kernel(d["kernel"], f"{path}.kernel")
    curve = parse_curve(d["curve"], f"{path}.curve")
    if cls == "bergomi":
        if "sigma_tilde" in d:
            raise ConfigError(f"{path}.sigma_tilde", "the bergomi class takes no sigma_tilde")
        return _build(path, ModelSpec.bergomi, kernel, curve, rho)
    st = _choice(d, "sigma_tilde", path, ("sqrt", "linear"), default="sqrt")
    return _build(path, ModelSpec.affine, kernel, curve, rho, st)


def parse_payoff(d, path="payoff") -> Payoff:
    d = _block(d, path, {"type", "strike", "value"}, ("type",))
    kind = _choice(d, "type", path, ("call", "put", "digital", "constant"))
    if kind == "constant":
        _block(d, path, {"type", "value"})
        return ConstantPayoff(_num(d, "value", path, default=1.0))
    _block(d, path, {"type", "strike"})
    strike = _num(d, "strike", path, lo=0.0, lo_open=True)
    return {"call": CallPayoff, "put": PutPayoff, "digital": DigitalPayoff}[kind](strike)


@dataclass
class MCSettings:
    n_paths: int = 2 ** 16
    seed: int = 0
    antithetic: bool = True
    chunk_size: int = DEFAULT_CHUNK


def parse_mc(d, path="mc") -> MCSettings:
    d = _block(d, path, {"n_paths", "seed", "antithetic", "chunk_size"})
    anti = d.get("antithetic", True)
    if not isinstance(anti, bool):
        raise ConfigError(f"{path}.antithetic", "expected true or false")
    out = MCSettings(_num(d, "n_paths", path, default=2 ** 16, lo=2, integer=True),
                     _num(d, "seed", path, default=0, lo=0, integer=True), anti,
                     _num(d, "chunk_size", path, default=DEFAULT_CHUNK, lo=2, integer=True))
    if out.antithetic and out.chunk_size % 2:
        raise ConfigError(f"{path}.chunk_size", "must be even with antithetic sampling")
    return out


_RUN_KEYS = {"eps", "order", "mode", "maturities", "method", "orders", "check_mc",
             "log_spot", "suites"}


def parse_run(d, path="run") -> dict:
    d = _block(d, path, _RUN_KEYS)
    out: dict[str, Any] = {}
    if "eps" in d:
        out["eps"] = _numlist(d, "eps", path, lo=-1.0, hi=1.0)
    if "order" in d:
        out["order"] = _num(d, "order", path, lo=1, integer=True)
    if "orders" in d:
        out["orders"] = [int(x) for x in _numlist(d, "orders", path, lo=1)]
    if "mode" in d:
        out["mode"] = _choice(d, "mode", path, ("quadrature", "mc"))
    if "maturities" in d:
        out["maturities"] = _numlist(d, "maturities", path, lo=1e-12)
    if "method" in d:
        out["method"] = _choice(d, "method", path, ("quadrature", "closed"))
    if "check_mc" in d:
        if not isinstance(d["check_mc"], bool):
            raise ConfigError(f"{path}.check_mc", "expected true or false")
        out["check_mc"] = d["check_mc"]
    if "log_spot" in d:
        out["log_spot"] = _num(d, "log_spot", path)
    if "suites" in d:
        s = d["suites"]
        if not isinstance(s, list) or not all(isinstance(x, str) for x in s):
            raise ConfigError(f"{path}.suites", "expected a list of suite names")
        out["suites"] = list(s)
    return out


@dataclass
class RunConfig:
    model: ModelSpec
    payoff: Payoff
    grid: PathGrid
    mc: MCSettings = field(default_factory=MCSettings)
    run: dict = field(default_factory=dict)

    @property
    def maturity(self) -> float:
        return self.grid.T


def parse_config(data) -> RunConfig:
    """Validate a decoded config mapping and build the run objects."""
    d = _block(data, "", {"model", "payoff", "grid", "mc", "run"}, ("model", "payoff", "grid"))
    model = parse_model(d["model"])
    payoff = parse_payoff(d["payoff"])
    g = _block(d["grid"], "grid", {"T", "n_steps"}, ("T",))
    T = _num(g, "T", "grid", lo=0.0, lo_open=True)
    n_steps = _num(g, "n_steps", "grid", default=512, lo=2, integer=True)
    if T > model.curve.t_max:
        raise ConfigError("grid.T", "exceeds the forward-curve range")
    grid = _build("grid", PathGrid, T, n_steps)
    return RunConfig(model, payoff, grid, parse_mc(d.get("mc")), parse_run(d.get("run")))


def load_config(path) -> RunConfig:
    """Read and validate a YAML config file."""
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError("", f"cannot read config {path}: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        raise ConfigError("", f"malformed YAML in {path}: {exc}") from None
    return parse_config(data)
