"""Radial kernels and their bandwidth scalings.

Two families are provided:

* ``gaussian``: ``psi(x) = (2 pi sigma^2)^(-d/2) exp(-|x|^2 / (2 sigma^2))``
* ``compact``: ``psi(x) = max(1 - |x|, 0)^beta``

The compact family is deliberately left unnormalized. The rational
quasi-interpolant only ever uses ratios of kernel values, so any positive
constant factor cancels; :func:`kernel_mass` reports the actual mass.

Scaled kernels follow ``psi_h(x) = h^(-d) psi(x / h)``.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np

# exp(x) underflows to zero in double precision below this argument
EXP_UNDERFLOW = -745.0


class KernelFamily(str, Enum):
    GAUSSIAN = "gaussian"
    COMPACT = "compact"


class InvalidBandwidthError(ValueError):
    """Raised for a non-positive (or non-finite) bandwidth."""


@dataclass(frozen=True)
class Kernel:
    """Immutable radial kernel description.

    ``amplitude`` is a positive constant multiplier (1 by default). It exists
    so that scale invariance of the rational interpolant can be exercised;
    nothing in the experiments changes it.
    """

    family: KernelFamily
    dim: int
    sigma: float = 1.0
    beta: float = 3.0
    amplitude: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "family", KernelFamily(self.family))
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"kernel dimension must be a positive integer, got {self.dim!r}")
        object.__setattr__(self, "dim", int(self.dim))
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ValueError(f"sigma must be positive, got {self.sigma!r}")
        if not (self.beta > 0 and math.isfinite(self.beta)):
            raise ValueError(f"beta must be positive, got {self.beta!r}")
        if not (self.amplitude > 0 and math.isfinite(self.amplitude)):
            raise ValueError(f"amplitude must be positive, got {self.amplitude!r}")

    @classmethod
    def gaussian(cls, dim: int, sigma: float = 1.0) -> "Kernel":
        return cls(KernelFamily.GAUSSIAN, dim, sigma=sigma)

    @classmethod
    def compact(cls, dim: int, beta: float = 3.0) -> "Kernel":
        return cls(KernelFamily.COMPACT, dim, beta=beta)

    def with_dim(self, dim: int) -> "Kernel":
        return Kernel(self.family, dim, self.sigma, self.beta, self.amplitude)

    def scaled(self, c: float) -> "Kernel":
        """Return the kernel ``c * psi``."""
        return Kernel(self.family, self.dim, self.sigma, self.beta, self.amplitude * c)

    @property
    def is_gaussian(self) -> bool:
        return self.family is KernelFamily.GAUSSIAN

    @property
    def peak(self) -> float:
        """psi(0)."""
        if self.is_gaussian:
            return self.amplitude * (2.0 * math.pi * self.sigma**2) ** (-self.dim / 2.0)
        return self.amplitude

    def spec_string(self) -> str:
        if self.is_gaussian:
            return f"gaussian(sigma={self.sigma!r})"
        return f"compact(beta={self.beta!r})"

    # --- radial profiles -------------------------------------------------
    def log_profile(self, r2: np.ndarray) -> np.ndarray:
        """log(psi(x) / psi(0)) as a function of ``r2 = |x|^2``.

        Returns ``-inf`` outside the support of compact kernels.
        """
        r2 = np.asarray(r2, dtype=float)
        if self.is_gaussian:
            return -r2 / (2.0 * self.sigma**2)
        with np.errstate(divide="ignore"):
            return self.beta * np.log(np.maximum(1.0 - np.sqrt(r2), 0.0))

    def profile(self, r2: np.ndarray) -> np.ndarray:
        """psi(x) / psi(0) as a function of ``r2 = |x|^2``."""
        r2 = np.asarray(r2, dtype=float)
        with np.errstate(under="ignore"):
            if self.is_gaussian:
                return np.exp(-r2 / (2.0 * self.sigma**2))
            return np.maximum(1.0 - np.sqrt(r2), 0.0) ** self.beta


def _as_points(k: Kernel, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    if x.shape[-1] != k.dim:
        raise ValueError(
            f"dimension mismatch: kernel has d={k.dim}, got points with trailing size {x.shape[-1]}"
        )
    return x


def eval_kernel(k: Kernel, x) -> np.ndarray | float:
    """Evaluate ``psi(x)``; ``x`` has shape ``(..., d)``.

    Returns a float for a single point and an array otherwise.
    """
    pts = _as_points(k, x)
    r2 = np.einsum("...i,...i->...", pts, pts)
    out = k.peak * k.profile(r2)
    return float(out) if np.ndim(out) == 0 else out


def check_bandwidth(h: float) -> float:
    if not (isinstance(h, (int, float, np.floating)) and math.isfinite(h) and h > 0):
        raise InvalidBandwidthError(f"bandwidth h must be a positive finite number, got {h!r}")
    return float(h)


def eval_scaled(k: Kernel, h: float, diff) -> np.ndarray | float:
    """Evaluate ``psi_h(diff) = h^(-d) psi(diff / h)``."""
    h = check_bandwidth(h)
    pts = _as_points(k, diff)
    with np.errstate(under="ignore"):
        out = h ** (-k.dim) * np.asarray(eval_kernel(k, pts / h))
    return float(out) if np.ndim(out) == 0 else out


def support_radius(k: Kernel) -> float:
    """Radius of the support of ``psi`` (``inf`` for the Gaussian)."""
    return math.inf if k.is_gaussian else 1.0


def effective_radius(k: Kernel) -> float:
    """Radius beyond which ``psi(x) / psi(0)`` underflows to zero."""
    if k.is_gaussian:
        return k.sigma * math.sqrt(-2.0 * EXP_UNDERFLOW)
    return 1.0


@dataclass(frozen=True)
class QuadratureSpec:
    """Composite Gauss-Legendre rule: ``nodes`` points on each of ``panels`` panels.

    The error estimate compares against the same rule with ``nodes`` doubled.
    """

    nodes: int = 64
    panels: int = 1

    def refined(self) -> "QuadratureSpec":
        return QuadratureSpec(2 * self.nodes, self.panels)


class MassEstimate(NamedTuple):
    value: float
    error: float


def gauss_legendre(a: float, b: float, nodes: int, panels: int = 1, breaks=()):
    """Composite Gauss-Legendre nodes/weights on ``[a, b]``.

    ``breaks`` are extra panel boundaries (kinks of the integrand); each
    resulting interval is split into ``panels`` equal panels.
    """
    t, w = np.polynomial.legendre.leggauss(nodes)
    edges = sorted({a, b, *(p for p in breaks if a < p < b)})
    xs, ws = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        sub = np.linspace(lo, hi, panels + 1)
        for s0, s1 in zip(sub[:-1], sub[1:]):
            half = 0.5 * (s1 - s0)
            xs.append(s0 + half * (t + 1.0))
            ws.append(half * w)
    return np.concatenate(xs), np.concatenate(ws)


def _radial_mass(k: Kernel, spec: QuadratureSpec) -> float:
    d = k.dim
    rmax = 8.0 * k.sigma if k.is_gaussian else 1.0
    r, w = gauss_legendre(0.0, rmax, spec.nodes, spec.panels)
    sphere = 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)
    return float(sphere * np.sum(w * r ** (d - 1) * k.peak * k.profile(r * r)))


def kernel_mass(k: Kernel, quadrature: QuadratureSpec | None = None) -> MassEstimate:
    """Numerical estimate of the integral of ``psi`` over R^d.

    The kernels are radial, so the integral reduces to a one-dimensional
    integral in ``r`` weighted by the area of the unit sphere. The Gaussian is
    truncated at ``8 sigma``.
    """
    spec = quadrature or QuadratureSpec()
    coarse = _radial_mass(k, spec)
    fine = _radial_mass(k, spec.refined())
    return MassEstimate(fine, abs(fine - coarse))


_SPEC_RE = re.compile(r"^\s*(\w+)\s*(?:\((.*)\))?\s*$")


def parse_kernel(text: str, dim: int) -> Kernel:
    """Parse ``gaussian(sigma=1.0)`` / ``compact(beta=3.0)`` (arguments optional)."""
    m = _SPEC_RE.match(text)
    if not m:
        raise ValueError(f"cannot parse kernel specification {text!r}")
    name, args = m.group(1).lower(), m.group(2)
    params = {}
    if args and args.strip():
        for item in args.split(","):
            key, sep, val = item.partition("=")
            if not sep:
                raise ValueError(f"kernel argument {item!r} must be key=value")
            params[key.strip()] = float(val)
    allowed = {"gaussian": {"sigma"}, "compact": {"beta"}}
    if name not in allowed:
        raise ValueError(f"unknown kernel family {name!r}; expected gaussian or compact")
    unknown = set(params) - allowed[name]
    if unknown:
        raise ValueError(f"unknown argument(s) {sorted(unknown)} for kernel {name!r}")
    if name == "gaussian":
        return Kernel.gaussian(dim, **params)
    return Kernel.compact(dim, **params)
