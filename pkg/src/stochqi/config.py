"""Run configuration files.

A config is either JSON (an object) or flat ``key = value`` lines; ``#`` starts
a comment. Keys for single experiments (``convergence``, ``probability``):

=============  ==============================================  =========================
key            meaning                                         default
=============  ==============================================  =========================
target         absx | trig3 | sine11 | one                     required
kernel         ``gaussian(sigma=1.0)`` | ``compact(beta=3.0)``  gaussian(sigma=1.0)
law            ``uniform`` | ``truncnormal(mean=auto,...)``    truncnormal(mean=auto,stddev=auto)
metric         L1 | Linf                                       L1
n_grid         ``64,128,256`` or ``2^6..2^11``                 2^6..2^11
h_constant     C in h = C (1/N)^(1/(2+d))                      from ``preset``
preset         table2 | table3                                 table2
replications   replications per N                              200
test_points    number of fixed test points                     100
seed           64-bit base seed                                $STOCHQI_SEED or 0
epsilons       comma list of thresholds                        (none)
workers        worker threads                                  1
d              optional consistency check against the target
=============  ==============================================  =========================

``orders`` replaces target/kernel/metric/h_constant by the sweep keys
``dims`` (1,3,11), ``kernels`` (gaussian,compact) and ``metrics`` (L1,Linf).
``eval`` uses target/kernel/law/seed plus ``n`` (number of centers) and either
``h`` or ``h_constant``/``preset``.
"""
from __future__ import annotations

import json
import os
import re
from pathlib import Path

from .experiments import ExperimentConfig, Metric, bandwidth, orders_configs, preset_constant
from .kernels import parse_kernel
from .sampling import parse_law
from .targets import make_target

SEED_ENV = "STOCHQI_SEED"

COMMON_KEYS = {"law", "n_grid", "preset", "replications", "test_points", "seed", "workers"}
EXPERIMENT_KEYS = COMMON_KEYS | {"target", "kernel", "metric", "h_constant", "epsilons", "d", "max_empty_rate"}
ORDERS_KEYS = COMMON_KEYS | {"dims", "kernels", "metrics"}
EVAL_KEYS = {"target", "kernel", "law", "seed", "n", "h", "h_constant", "preset", "metric", "d"}

DEFAULTS = {
    "kernel": "gaussian(sigma=1.0)",
    "law": "truncnormal(mean=auto,stddev=auto)",
    "metric": "L1",
    "n_grid": "2^6..2^11",
    "preset": "table2",
    "replications": "200",
    "test_points": "100",
    "epsilons": "",
    "workers": "1",
    "dims": "1,3,11",
    "kernels": "gaussian,compact",
    "metrics": "L1,Linf",
}


class ConfigError(ValueError):
    pass


def read_settings(path: str | os.PathLike | None) -> dict:
    """Raw key -> value mapping from a config (or run manifest) file."""
    if path is None:
        return {}
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON ({e})") from None
        if "manifest_version" in data:
            data = data["config"]
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: expected a JSON object")
        return {str(k): v for k, v in data.items()}
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected key = value, got {line!r}")
        out[key.strip()] = val.strip()
    return out


def _str(v) -> str:
    if isinstance(v, (list, tuple)):
        return ",".join(_str(x) for x in v)
    return str(v)


def _int(key, v) -> int:
    try:
        return int(str(v).strip(), 0)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {v!r}") from None


def _float(key, v) -> float:
    try:
        return float(v)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected a number, got {v!r}") from None


def parse_n_grid(v) -> tuple:
    s = _str(v).replace(" ", "")
    m = re.fullmatch(r"2\^(\d+)\.\.2\^(\d+)", s)
    if m:
        a, b = int(m.group(1)), int(m.group(2))
        if a > b:
            raise ConfigError(f"n_grid: empty range {s!r}")
        return tuple(2**j for j in range(a, b + 1))
    try:
        return tuple(int(x) for x in s.split(",") if x)
    except ValueError:
        raise ConfigError(f"n_grid: cannot parse {v!r}") from None


def _split(v) -> list[str]:
    return [x.strip() for x in _str(v).split(",") if x.strip()]


def _merged(settings: dict, overrides: dict | None, allowed: set) -> dict:
    s = dict(settings)
    s.update({k: v for k, v in (overrides or {}).items() if v is not None})
    unknown = sorted(set(s) - allowed)
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    if "seed" not in s:
        s["seed"] = os.environ.get(SEED_ENV, "0")
    return {**{k: v for k, v in DEFAULTS.items() if k in allowed}, **s}


def _target_kernel(s: dict):
    if "target" not in s or not _str(s["target"]).strip():
        raise ConfigError("missing required key: target")
    try:
        target = make_target(_str(s["target"]).strip())
    except ValueError:
        raise ConfigError(f"target: unknown target {s['target']!r}") from None
    if "d" in s and _int("d", s["d"]) != target.dim:
        raise ConfigError(f"d: target {target.name.value} has d={target.dim}, config says d={s['d']}")
    try:
        kernel = parse_kernel(_str(s["kernel"]), target.dim)
    except ValueError as e:
        raise ConfigError(f"kernel: {e}") from None
    try:
        law = parse_law(_str(s["law"]))
        law.resolve(target.domain)
    except ValueError as e:
        raise ConfigError(f"law: {e}") from None
    return target, kernel, law


def _h_constant(s: dict, kernel, d: int, metric) -> float:
    if "h_constant" in s:
        c = _float("h_constant", s["h_constant"])
    else:
        try:
            c = preset_constant(_str(s["preset"]), kernel.family, d, metric)
        except ValueError as e:
            raise ConfigError(f"preset: {e}") from None
    if not c > 0:
        raise ConfigError("h_constant: must be positive")
    return c


def parse_config(path=None, overrides: dict | None = None) -> ExperimentConfig:
    """Validated single-experiment configuration."""
    s = _merged(read_settings(path), overrides, EXPERIMENT_KEYS)
    target, kernel, law = _target_kernel(s)
    try:
        metric = Metric.parse(_str(s["metric"]))
    except ValueError as e:
        raise ConfigError(f"metric: {e}") from None
    try:
        return ExperimentConfig(
            target=target,
            kernel=kernel,
            law=law,
            metric=metric,
            n_grid=parse_n_grid(s["n_grid"]),
            h_constant=_h_constant(s, kernel, target.dim, metric),
            replications=_int("replications", s["replications"]),
            test_points=_int("test_points", s["test_points"]),
            base_seed=_int("seed", s["seed"]) & ((1 << 64) - 1),
            epsilons=tuple(_float("epsilons", e) for e in _split(s["epsilons"])),
            workers=_int("workers", s["workers"]),
            **({"max_empty_rate": _float("max_empty_rate", s["max_empty_rate"])} if "max_empty_rate" in s else {}),
        )
    except ValueError as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(str(e)) from None


def config_to_dict(cfg: ExperimentConfig) -> dict:
    """Settings that :func:`parse_config` maps back to ``cfg``."""
    return {
        "target": cfg.target.name.value,
        "kernel": cfg.kernel.spec_string(),
        "law": cfg.law.spec_string(),
        "metric": cfg.metric.value,
        "n_grid": ",".join(str(n) for n in cfg.n_grid),
        "h_constant": repr(cfg.h_constant),
        "replications": str(cfg.replications),
        "test_points": str(cfg.test_points),
        "seed": str(cfg.base_seed),
        "epsilons": ",".join(repr(e) for e in cfg.epsilons),
        "workers": str(cfg.workers),
        "max_empty_rate": repr(cfg.max_empty_rate),
    }


def parse_orders_config(path=None, overrides: dict | None = None) -> tuple[list[ExperimentConfig], dict]:
    """Configs for every (kernel, d, metric) cell, plus the resolved settings."""
    s = _merged(read_settings(path), overrides, ORDERS_KEYS)
    try:
        law = parse_law(_str(s["law"]))
        cfgs = orders_configs(
            dims=tuple(_int("dims", d) for d in _split(s["dims"])),
            kernels=tuple(k.lower() for k in _split(s["kernels"])),
            metrics=tuple(Metric.parse(m) for m in _split(s["metrics"])),
            preset=_str(s["preset"]),
            n_grid=parse_n_grid(s["n_grid"]),
            replications=_int("replications", s["replications"]),
            test_points=_int("test_points", s["test_points"]),
            base_seed=_int("seed", s["seed"]) & ((1 << 64) - 1),
            law=law,
            workers=_int("workers", s["workers"]),
        )
    except (KeyError, ValueError) as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(f"orders config: {e}") from None
    return cfgs, {k: _str(v) for k, v in s.items()}


def parse_eval_config(path=None, overrides: dict | None = None) -> dict:
    """Target, kernel, law, n, h and seed for the ``eval`` subcommand."""
    s = _merged(read_settings(path), overrides, EVAL_KEYS)
    target, kernel, law = _target_kernel(s)
    if "n" not in s:
        raise ConfigError("missing required key: n")
    n = _int("n", s["n"])
    if n < 1:
        raise ConfigError("n: must be >= 1")
    if "h" in s:
        h = _float("h", s["h"])
        if not h > 0:
            raise ConfigError("h: must be positive")
    else:
        metric = Metric.parse(_str(s.get("metric", "L1")))
        h = bandwidth(n, _h_constant(s, kernel, target.dim, metric), target.dim)
    return {
        "target": target, "kernel": kernel, "law": law, "n": n, "h": h,
        "seed": _int("seed", s["seed"]) & ((1 << 64) - 1),
        "settings": {k: _str(v) for k, v in s.items()},
    }
