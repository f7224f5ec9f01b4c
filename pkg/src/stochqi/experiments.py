"""Monte Carlo error studies: EMAE curves, log-linear order fits, exceedance probabilities.

Seeding: the test points come from ``mix64(base_seed ^ TEST_POINT_SALT)``; the
centers of replication ``k`` at size ``n`` come from
``derive_replication_seed(derive_replication_seed(base_seed, k), n)``. Every
result is therefore a pure function of the configuration, whatever the
number of worker threads.
"""
from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import NamedTuple

import numpy as np

from .kernels import Kernel, KernelFamily
from .quasi import interpolate
from .sampling import CounterStream, SamplingLaw, derive_replication_seed, mix64, sample_centers
from .targets import TARGETS_BY_DIM, TargetFunction, make_target

log = logging.getLogger(__name__)

TEST_POINT_SALT = 0x7E57_9017_5EED_0001
MAX_EMPTY_RATE = 0.10


class Metric(str, Enum):
    L1 = "L1"
    LINF = "Linf"

    @classmethod
    def parse(cls, text) -> "Metric":
        if isinstance(text, cls):
            return text
        key = str(text).strip().lower().replace("_", "")
        for m in cls:
            if m.value.lower() == key or (m is cls.LINF and key in {"linfty", "inf", "max"}):
                return m
        raise ValueError(f"unknown metric {text!r}; expected L1 or Linf")


class PRegime(str, Enum):
    LE_TWO = "LeTwo"
    GT_TWO = "GtTwo"


class ExperimentAborted(RuntimeError):
    """Too many replications failed with an empty kernel neighborhood."""


class FitError(ValueError):
    pass


# bandwidth constants C_sigma / C_beta keyed by (kernel family, d, metric)
PRESETS = {
    "table2": {
        ("gaussian", 1, "L1"): 0.30, ("compact", 1, "L1"): 1.00,
        ("gaussian", 3, "L1"): 0.30, ("compact", 3, "L1"): 1.50,
        ("gaussian", 11, "L1"): 0.30, ("compact", 11, "L1"): 2.00,
        ("gaussian", 1, "Linf"): 0.10, ("compact", 1, "Linf"): 1.00,
        ("gaussian", 3, "Linf"): 0.10, ("compact", 3, "Linf"): 1.50,
        ("gaussian", 11, "Linf"): 0.10, ("compact", 11, "Linf"): 2.00,
    },
    "table3": {
        ("gaussian", 1, "L1"): 0.20, ("compact", 1, "L1"): 1.50,
        ("gaussian", 3, "L1"): 0.20, ("compact", 3, "L1"): 1.00,
        ("gaussian", 11, "L1"): 0.30, ("compact", 11, "L1"): 2.00,
        ("gaussian", 1, "Linf"): 0.20, ("compact", 1, "Linf"): 1.00,
        ("gaussian", 3, "Linf"): 0.10, ("compact", 3, "Linf"): 2.00,
        ("gaussian", 11, "Linf"): 0.30, ("compact", 11, "Linf"): 2.00,
    },
}

# published a-posteriori orders (sigma = 1, beta = 3, 1000 replications)
PUBLISHED_ORDERS = {
    ("gaussian", 1, "L1"): 0.65, ("gaussian", 3, "L1"): 0.32, ("gaussian", 11, "L1"): 0.16,
    ("gaussian", 1, "Linf"): 0.69, ("gaussian", 3, "Linf"): 0.37, ("gaussian", 11, "Linf"): 0.16,
    ("compact", 1, "L1"): 0.63, ("compact", 3, "L1"): 0.24, ("compact", 11, "L1"): 0.11,
    ("compact", 1, "Linf"): 0.55, ("compact", 3, "Linf"): 0.31, ("compact", 11, "Linf"): 0.22,
}


def preset_constant(preset: str, family: KernelFamily | str, d: int, metric: Metric | str) -> float:
    fam = KernelFamily(family).value
    met = Metric.parse(metric).value
    try:
        table = PRESETS[preset]
    except KeyError:
        raise ValueError(f"unknown preset {preset!r}; expected one of {sorted(PRESETS)}") from None
    try:
        return table[(fam, int(d), met)]
    except KeyError:
        raise ValueError(f"preset {preset!r} has no constant for {fam}, d={d}, {met}") from None


def bandwidth(n: int, c: float, d: int) -> float:
    """``h = c * (1/n)^(1/(2+d))``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return c * (1.0 / n) ** (1.0 / (2.0 + d))


class AprioriOrder(NamedTuple):
    order: float
    log_factor: bool


def a_priori_order(s: float, d: int, p_regime: PRegime | str = PRegime.LE_TWO) -> AprioriOrder:
    """Theoretical mean-error order ``s / (2s + d)``; a ``sqrt(log N)`` factor for p > 2."""
    return AprioriOrder(s / (2.0 * s + d), PRegime(p_regime) is PRegime.GT_TWO)


def metric_regime(metric: Metric) -> PRegime:
    return PRegime.GT_TWO if metric is Metric.LINF else PRegime.LE_TWO


@dataclass(frozen=True)
class ExperimentConfig:
    target: TargetFunction
    kernel: Kernel
    law: SamplingLaw
    metric: Metric
    n_grid: tuple
    h_constant: float
    replications: int = 200
    test_points: int = 100
    base_seed: int = 0
    epsilons: tuple = ()
    workers: int = 1
    max_empty_rate: float = MAX_EMPTY_RATE

    def __post_init__(self):
        object.__setattr__(self, "metric", Metric.parse(self.metric))
        object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))
        object.__setattr__(self, "epsilons", tuple(float(e) for e in self.epsilons))
        if not self.n_grid or any(n < 1 for n in self.n_grid):
            raise ValueError("n_grid must be a nonempty list of positive integers")
        if any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise ValueError("n_grid must be strictly increasing")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.test_points < 1:
            raise ValueError("test_points must be >= 1")
        if not self.h_constant > 0:
            raise ValueError("h_constant must be positive")
        if any(e <= 0 for e in self.epsilons):
            raise ValueError("epsilons must be positive")
        if self.kernel.dim != self.target.dim:
            raise ValueError(f"kernel d={self.kernel.dim} does not match target d={self.target.dim}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    @property
    def dim(self) -> int:
        return self.target.dim

    def bandwidth(self, n: int) -> float:
        return bandwidth(n, self.h_constant, self.dim)


@dataclass(frozen=True)
class ErrorRecord:
    n: int
    h: float
    emae: float
    stderr: float
    empty_neighborhood_rate: float
    replications_used: int
    errors: np.ndarray = field(repr=False, compare=False)


@dataclass(frozen=True)
class FitResult:
    k_hat: float
    delta_hat: float
    residual_rms: float
    n_points_used: int


@dataclass(frozen=True)
class ProbabilityRecord:
    n: int
    epsilon: float
    probability: float
    replications: int


def draw_test_points(cfg: ExperimentConfig) -> np.ndarray:
    """The fixed evaluation points, uniform on the domain and shared by all n."""
    stream = CounterStream(mix64(cfg.base_seed ^ TEST_POINT_SALT))
    return cfg.target.domain.uniform(stream, cfg.test_points)


def replication_seed(base_seed: int, n: int, k: int) -> int:
    return derive_replication_seed(derive_replication_seed(base_seed, k), n)


def replication_error(cfg: ExperimentConfig, n: int, k: int, pts: np.ndarray, exact: np.ndarray) -> float:
    """Mean (L1) or max (Linf) absolute error over the test points; nan on an empty neighborhood."""
    centers = sample_centers(cfg.law, cfg.target.domain, n, replication_seed(cfg.base_seed, n, k))
    q = interpolate(cfg.target, centers, cfg.kernel, cfg.bandwidth(n))
    res = q.evaluate_batch(pts)
    if not res.ok:
        return math.nan
    err = np.abs(res.value - exact)
    return float(err.mean() if cfg.metric is Metric.L1 else err.max())


def _map(cfg: ExperimentConfig, fn, items):
    if cfg.workers == 1:
        return list(map(fn, items))
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        return list(pool.map(fn, items))


def run_emae(cfg: ExperimentConfig) -> list[ErrorRecord]:
    """Empirical mean approximation error for each n of the grid.

    Replications hitting an empty kernel neighborhood are dropped from the mean
    and reported through ``empty_neighborhood_rate``.
    """
    pts = draw_test_points(cfg)
    exact = cfg.target(pts)
    records = []
    for n in cfg.n_grid:
        errs = np.array(_map(cfg, lambda k: replication_error(cfg, n, k, pts, exact), range(cfg.replications)))
        failed = np.isnan(errs)
        rate = float(failed.mean())
        if rate > cfg.max_empty_rate:
            raise ExperimentAborted(
                f"{failed.sum()}/{cfg.replications} replications hit an empty kernel neighborhood "
                f"at n={n} (h={cfg.bandwidth(n):.4g}); increase h_constant"
            )
        good = errs[~failed]
        stderr = float(good.std(ddof=1) / math.sqrt(len(good))) if len(good) > 1 else math.nan
        records.append(ErrorRecord(n, cfg.bandwidth(n), float(good.mean()), stderr, rate, len(good), errs))
        log.info("n=%d h=%.4g emae=%.4g empty=%.3f", n, cfg.bandwidth(n), good.mean(), rate)
    return records


def fit_loglinear(records) -> FitResult:
    """Least squares of ``log emae = log K - delta log n``."""
    pairs = []
    for r in records:
        if not r.emae > 0:
            warnings.warn(f"excluding n={r.n}: nonpositive emae {r.emae!r}", RuntimeWarning, stacklevel=2)
            continue
        pairs.append((math.log(r.n), math.log(r.emae)))
    if len(pairs) < 2 or len({p[0] for p in pairs}) < 2:
        raise FitError("log-linear fit needs at least two distinct n with positive error")
    x, y = np.array(pairs).T
    A = np.column_stack([np.ones_like(x), x])
    (intercept, slope), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (intercept + slope * x)
    return FitResult(math.exp(float(intercept)), -float(slope), float(np.sqrt(np.mean(resid**2))), len(pairs))


def exceedance_probabilities(records, epsilons) -> list[ProbabilityRecord]:
    out = []
    for r in records:
        good = r.errors[~np.isnan(r.errors)]
        for eps in epsilons:
            out.append(ProbabilityRecord(r.n, float(eps), float(np.mean(good > eps)), len(good)))
    return out


def run_probability(cfg: ExperimentConfig) -> list[ProbabilityRecord]:
    """Fraction of replications whose error exceeds each epsilon, per n."""
    if not cfg.epsilons:
        raise ValueError("probability experiment needs at least one epsilon")
    return exceedance_probabilities(run_emae(cfg), cfg.epsilons)


def near_monotone(probabilities, replications: int) -> bool:
    """Non-increasing once below 0.9, up to one rise of at most ``2 / replications``."""
    p = np.asarray(probabilities, dtype=float)
    below = np.nonzero(p < 0.9)[0]
    if len(below) == 0:
        return True
    rises = np.diff(p[below[0]:])
    rises = rises[rises > 0]
    return bool(len(rises) == 0 or (len(rises) == 1 and rises[0] <= 2.0 / replications + 1e-12))


# ----------------------------------------------------------------------
# orders sweep over kernel / d / metric cells

@dataclass(frozen=True)
class OrdersRow:
    kernel: str
    d: int
    metric: str
    h_constant: float
    a_priori: float
    log_factor: bool
    delta_hat: float
    k_hat: float
    residual_rms: float
    n_points_used: int
    max_empty_rate: float
    published_delta: float


def default_kernel(family: str, d: int) -> Kernel:
    return Kernel.gaussian(d, 1.0) if KernelFamily(family) is KernelFamily.GAUSSIAN else Kernel.compact(d, 3.0)


def orders_configs(dims=(1, 3, 11), kernels=("gaussian", "compact"), metrics=("L1", "Linf"),
                   preset: str = "table2", n_grid=tuple(2**j for j in range(6, 12)),
                   replications: int = 200, test_points: int = 100, base_seed: int = 0,
                   law: SamplingLaw | None = None, workers: int = 1) -> list[ExperimentConfig]:
    """One config per (kernel, d, metric) cell, constants taken from ``preset``."""
    law = law or SamplingLaw.truncnormal()
    cfgs = []
    for fam in kernels:
        for d in dims:
            for met in metrics:
                met = Metric.parse(met)
                cfgs.append(ExperimentConfig(
                    target=make_target(TARGETS_BY_DIM[int(d)]),
                    kernel=default_kernel(fam, int(d)),
                    law=law,
                    metric=met,
                    n_grid=tuple(n_grid),
                    h_constant=preset_constant(preset, fam, d, met),
                    replications=replications,
                    test_points=test_points,
                    base_seed=base_seed,
                    workers=workers,
                ))
    return cfgs


def run_orders_cell(cfg: ExperimentConfig) -> OrdersRow:
    records = run_emae(cfg)
    fit = fit_loglinear(records)
    ap = a_priori_order(cfg.target.holder_s, cfg.dim, metric_regime(cfg.metric))
    key = (cfg.kernel.family.value, cfg.dim, cfg.metric.value)
    return OrdersRow(
        kernel=cfg.kernel.family.value, d=cfg.dim, metric=cfg.metric.value, h_constant=cfg.h_constant,
        a_priori=ap.order, log_factor=ap.log_factor, delta_hat=fit.delta_hat, k_hat=fit.k_hat,
        residual_rms=fit.residual_rms, n_points_used=fit.n_points_used,
        max_empty_rate=max(r.empty_neighborhood_rate for r in records),
        published_delta=PUBLISHED_ORDERS.get(key, math.nan),
    )


def run_table1(cfgs) -> list[OrdersRow]:
    """A-priori and fitted orders for every configured cell, in the given order."""
    return [run_orders_cell(cfg) for cfg in cfgs]


def with_workers(cfg: ExperimentConfig, workers: int) -> ExperimentConfig:
    return replace(cfg, workers=workers)
