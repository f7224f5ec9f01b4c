"""Box domains, center laws and a reproducible counter-based random stream.

Random numbers come from SplitMix64 used in counter mode. For a 64-bit seed
``s`` the ``i``-th output (``i = 1, 2, ...``) is ``mix(s + i * GAMMA)`` with
all arithmetic modulo 2**64 and::

    GAMMA  = 0x9E3779B97F4A7C15
    mix(z) : z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
             z = (z ^ (z >> 27)) * 0x94D049BB133111EB
             return z ^ (z >> 31)

A uniform double on [0, 1) is ``(out >> 11) * 2**-53``. Standard normals use
Box-Muller on consecutive uniform pairs ``(u1, u2)``: ``r = sqrt(-2 log(1 - u1))``,
``z = (r cos(2 pi u2), r sin(2 pi u2))``. Any language with 64-bit unsigned
integers reproduces the integer stream exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

GAMMA = 0x9E3779B97F4A7C15
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK = (1 << 64) - 1

# minimum acceptance probability for rejection sampling
MIN_ACCEPTANCE = 1e-6
MAX_REJECTION_ROUNDS = 1000


class PathologicalLawError(RuntimeError):
    """The sampling law puts (almost) no mass on the domain."""


def mix64(z):
    """SplitMix64 finalizer; works on Python ints and uint64 arrays."""
    if isinstance(z, (int, np.integer)):
        z = int(z) & _MASK
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def derive_replication_seed(base_seed: int, replication_index: int) -> int:
    """Seed of an independent stream for one replication.

    ``mix(base + (index + 1) * GAMMA)``: an odd-multiplier affine map followed
    by a bijective finalizer, hence injective in ``index`` (mod 2**64).
    """
    if replication_index < 0:
        raise ValueError("replication_index must be nonnegative")
    return mix64((int(base_seed) + (int(replication_index) + 1) * GAMMA) & _MASK)


class CounterStream:
    """SplitMix64 in counter mode. Not thread-safe; own one per replication."""

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK
        self.counter = 0

    def raw(self, n: int) -> np.ndarray:
        idx = np.arange(self.counter + 1, self.counter + n + 1, dtype=np.uint64)
        self.counter += n
        with np.errstate(over="ignore"):
            z = np.uint64(self.seed) + idx * np.uint64(GAMMA)
        return mix64(z)

    def uniforms(self, n: int) -> np.ndarray:
        return (self.raw(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def normals(self, n: int) -> np.ndarray:
        pairs = (n + 1) // 2
        u = self.uniforms(2 * pairs).reshape(pairs, 2)
        r = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
        theta = 2.0 * math.pi * u[:, 1]
        z = np.empty((pairs, 2))
        z[:, 0] = r * np.cos(theta)
        z[:, 1] = r * np.sin(theta)
        return z.reshape(-1)[:n]


@dataclass(frozen=True)
class BoxDomain:
    lower: tuple
    upper: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lower))
        hi = tuple(float(v) for v in np.atleast_1d(self.upper))
        if len(lo) == 0 or len(lo) != len(hi):
            raise ValueError("domain bounds must be nonempty and of equal length")
        if not all(a < b for a, b in zip(lo, hi)):
            raise ValueError(f"need lower < upper on every axis, got {lo} / {hi}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def cube(cls, d: int, lo: float = 0.0, hi: float = 1.0) -> "BoxDomain":
        return cls((lo,) * d, (hi,) * d)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def lo(self) -> np.ndarray:
        return np.array(self.lower)

    @property
    def hi(self) -> np.ndarray:
        return np.array(self.upper)

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    @property
    def widths(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def volume(self) -> float:
        return float(np.prod(self.widths))

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.all((x >= self.lo) & (x <= self.hi), axis=-1)

    def uniform(self, stream: CounterStream, n: int) -> np.ndarray:
        u = stream.uniforms(n * self.dim).reshape(n, self.dim)
        return self.lo + self.widths * u


class LawKind(str, Enum):
    UNIFORM = "uniform"
    TRUNCNORMAL = "truncnormal"


@dataclass(frozen=True)
class SamplingLaw:
    """Law of the sampling centers on a box.

    For the truncated normal, ``mean=None`` means the domain center and
    ``stddev=None`` means a quarter of the domain width on each axis.
    """

    kind: LawKind = LawKind.TRUNCNORMAL
    mean: tuple | None = None
    stddev: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", LawKind(self.kind))
        if self.mean is not None:
            object.__setattr__(self, "mean", tuple(float(v) for v in np.atleast_1d(self.mean)))
        if self.stddev is not None and not (self.stddev > 0 and math.isfinite(self.stddev)):
            raise ValueError(f"stddev must be positive, got {self.stddev!r}")

    @classmethod
    def uniform(cls) -> "SamplingLaw":
        return cls(LawKind.UNIFORM)

    @classmethod
    def truncnormal(cls, mean=None, stddev: float | None = None) -> "SamplingLaw":
        return cls(LawKind.TRUNCNORMAL, mean, stddev)

    def resolve(self, domain: BoxDomain) -> tuple[np.ndarray, np.ndarray]:
        """Per-axis (mean, stddev) of the untruncated normal on ``domain``."""
        mean = domain.center if self.mean is None else np.array(self.mean, dtype=float)
        if mean.shape == (1,) and domain.dim > 1:
            mean = np.full(domain.dim, mean[0])
        if mean.shape != (domain.dim,):
            raise ValueError(f"mean has {mean.size} entries, domain has d={domain.dim}")
        if not domain.contains(mean):
            raise ValueError("truncated-normal mean must lie inside the domain")
        std = domain.widths / 4.0 if self.stddev is None else np.full(domain.dim, self.stddev)
        return mean, std

    def acceptance_probability(self, domain: BoxDomain) -> float:
        if self.kind is LawKind.UNIFORM:
            return 1.0
        mean, std = self.resolve(domain)
        cdf = lambda z: 0.5 * math.erfc(-z / math.sqrt(2.0))  # noqa: E731
        p = 1.0
        for m, s, a, b in zip(mean, std, domain.lower, domain.upper):
            p *= cdf((b - m) / s) - cdf((a - m) / s)
        return p

    def log_density(self, domain: BoxDomain, y: np.ndarray) -> np.ndarray:
        """Log of the probability density on ``domain`` (points assumed inside)."""
        y = np.asarray(y, dtype=float)
        if self.kind is LawKind.UNIFORM:
            return np.full(y.shape[:-1], -math.log(domain.volume))
        mean, std = self.resolve(domain)
        log_norm = np.sum(np.log(std * math.sqrt(2.0 * math.pi))) + math.log(
            self.acceptance_probability(domain)
        )
        return -0.5 * np.sum(((y - mean) / std) ** 2, axis=-1) - log_norm

    def spec_string(self) -> str:
        if self.kind is LawKind.UNIFORM:
            return "uniform"
        mean = "auto" if self.mean is None else ":".join(repr(v) for v in self.mean)
        std = "auto" if self.stddev is None else repr(self.stddev)
        return f"truncnormal(mean={mean},stddev={std})"


def sample_centers(law: SamplingLaw, domain: BoxDomain, n: int, seed: int) -> np.ndarray:
    """Draw ``n`` i.i.d. points of ``law`` on ``domain``; shape ``(n, d)``.

    The truncated normal is sampled by drawing whole d-vectors from the
    untruncated normal and rejecting those with any coordinate outside the box.
    """
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    n = int(n)
    stream = CounterStream(seed)
    if law.kind is LawKind.UNIFORM:
        return domain.uniform(stream, n)

    p = law.acceptance_probability(domain)
    if p < MIN_ACCEPTANCE:
        raise PathologicalLawError(
            f"truncated normal puts probability {p:.3g} on the domain; "
            f"stddev is grossly mismatched to the box"
        )
    mean, std = law.resolve(domain)
    d = domain.dim
    kept, have = [], 0
    for _ in range(MAX_REJECTION_ROUNDS):
        m = int(math.ceil(1.1 * (n - have) / p)) + 16
        cand = mean + std * stream.normals(m * d).reshape(m, d)
        cand = cand[domain.contains(cand)]
        kept.append(cand)
        have += len(cand)
        if have >= n:
            return np.concatenate(kept)[:n]
    raise PathologicalLawError(
        f"rejection sampler exhausted {MAX_REJECTION_ROUNDS} rounds with {have}/{n} points"
    )


def parse_law(text: str) -> SamplingLaw:
    """Parse ``uniform`` or ``truncnormal(mean=auto,stddev=auto)``.

    A non-auto mean is a ``:``-separated list (one value broadcasts).
    """
    s = text.strip().lower()
    if s == "uniform":
        return SamplingLaw.uniform()
    if not s.startswith("truncnormal"):
        raise ValueError(f"unknown sampling law {text!r}; expected uniform or truncnormal(...)")
    rest = s[len("truncnormal"):].strip()
    params = {}
    if rest:
        if not (rest.startswith("(") and rest.endswith(")")):
            raise ValueError(f"cannot parse sampling law {text!r}")
        for item in filter(None, (t.strip() for t in rest[1:-1].split(","))):
            key, sep, val = item.partition("=")
            if not sep or key.strip() not in {"mean", "stddev"}:
                raise ValueError(f"bad truncnormal argument {item!r}")
            params[key.strip()] = val.strip()
    mean = params.get("mean", "auto")
    std = params.get("stddev", "auto")
    return SamplingLaw.truncnormal(
        None if mean == "auto" else tuple(float(v) for v in mean.split(":")),
        None if std == "auto" else float(std),
    )
