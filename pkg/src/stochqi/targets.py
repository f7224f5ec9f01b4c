"""Test functions with their domains and continuity moduli."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from importlib import resources

import numpy as np

from .sampling import BoxDomain


class DomainError(ValueError):
    """A query point lies outside the target's domain."""


class TargetName(str, Enum):
    ABSX = "absx"
    TRIG3 = "trig3"
    SINE11 = "sine11"
    ONE = "one"


@lru_cache(maxsize=None)
def holder_constants() -> dict:
    text = resources.files("stochqi").joinpath("holder_constants.json").read_text()
    return json.loads(text)


def _absx(x):
    return np.abs(x[..., 0])


def _trig3(x):
    t = 2.0 * np.pi * x
    return np.sin(t[..., 0]) * np.cos(t[..., 1]) * np.sin(t[..., 2])


_SINE11_J = np.arange(1, 12, dtype=float)


def _sine11(x):
    base = np.sin(0.5 * np.pi * (x + _SINE11_J / 11.0))
    # rounding can push sin(pi) slightly below zero
    base = np.maximum(base, 0.0)
    return np.prod(base ** (5.0 / _SINE11_J), axis=-1)


def _one(x):
    return np.ones(x.shape[:-1])


_FORMULAS = {
    TargetName.ABSX: (_absx, BoxDomain((-1.0,), (1.0,)), ((0.0,),)),
    TargetName.TRIG3: (_trig3, BoxDomain.cube(3), ((), (), ())),
    TargetName.SINE11: (_sine11, BoxDomain.cube(11), ((),) * 11),
    TargetName.ONE: (_one, BoxDomain((-1.0,), (1.0,)), ((),)),
}


@dataclass(frozen=True)
class TargetFunction:
    """A named test function on its box domain.

    ``holder_s`` is the smoothness exponent entering the a-priori rate.
    ``modulus_constant`` and ``modulus_exponent`` give a certified bound
    ``omega_f(h) <= modulus_constant * h**modulus_exponent``; for ``sine11`` the
    exponent is 5/11 because its last factor has an infinite slope at x_11 = 1.
    """

    name: TargetName
    domain: BoxDomain
    holder_s: float = 1.0
    modulus_constant: float = 1.0
    modulus_exponent: float = 1.0
    kinks: tuple = field(default=(), compare=False)

    @property
    def dim(self) -> int:
        return self.domain.dim

    def __call__(self, x) -> np.ndarray:
        return eval_target(self, x)


def make_target(name: str | TargetName, domain: BoxDomain | None = None) -> TargetFunction:
    """Build a target by config name (``absx``, ``trig3``, ``sine11``, ``one``).

    Only ``one`` accepts a custom domain.
    """
    key = TargetName(str(name).lower() if not isinstance(name, TargetName) else name)
    _, dom, kinks = _FORMULAS[key]
    if domain is not None:
        if key is not TargetName.ONE and domain != dom:
            raise ValueError(f"target {key.value!r} is defined on a fixed domain")
        dom = domain
        kinks = ((),) * dom.dim
    c = holder_constants()[key.value]
    return TargetFunction(key, dom, 1.0, float(c["constant"]), float(c["exponent"]), kinks)


def eval_target(t: TargetFunction, x, check_domain: bool = True):
    """Evaluate ``t`` at points of shape ``(..., d)``; a float for a single point."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    if x.shape[-1] != t.dim:
        raise ValueError(f"target {t.name.value} expects d={t.dim}, got {x.shape[-1]}")
    if check_domain and not np.all(t.domain.contains(x)):
        raise DomainError(f"point(s) outside the domain of {t.name.value}")
    out = _FORMULAS[t.name][0](x)
    return float(out) if np.ndim(out) == 0 else out


def modulus_bound(t: TargetFunction, h: float) -> float:
    """Upper bound on the modulus of continuity ``omega_f(h)``."""
    if not h > 0:
        raise ValueError("h must be positive")
    return t.modulus_constant * h**t.modulus_exponent


def value_range(t: TargetFunction) -> tuple[float, float]:
    """(min, max) of ``t`` over its domain."""
    return {
        TargetName.ABSX: (0.0, 1.0),
        TargetName.TRIG3: (-1.0, 1.0),
        TargetName.SINE11: (0.0, 1.0),
        TargetName.ONE: (1.0, 1.0),
    }[t.name]


TARGETS_BY_DIM = {1: TargetName.ABSX, 3: TargetName.TRIG3, 11: TargetName.SINE11}

__all__ = [
    "DomainError",
    "TargetFunction",
    "TargetName",
    "TARGETS_BY_DIM",
    "eval_target",
    "make_target",
    "modulus_bound",
    "value_range",
]
