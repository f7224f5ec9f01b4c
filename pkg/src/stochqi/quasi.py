"""Rational (Shepard-form) quasi-interpolant with random centers.

    Q f(x) = sum_j f(X_j) psi_h(x - X_j) / sum_l psi_h(x - X_l)

plus the deterministic convolution limit it discretizes,

    f_min(x) = int f(y) psi_h(x - y) dmu(y) / int psi_h(x - t) dmu(t),

computed by tensor Gauss-Legendre quadrature for d <= 3.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .kernels import EXP_UNDERFLOW, Kernel, QuadratureSpec, check_bandwidth, gauss_legendre
from .sampling import BoxDomain, SamplingLaw
from .targets import TargetFunction

# upper bound on elements of one (queries x centers x d) block in the dense path
_BLOCK = 1 << 22


class EmptyNeighborhood(ArithmeticError):
    """No center lies inside the kernel support around the query point."""

    def __init__(self, point, nearest_distance: float):
        self.point = np.asarray(point, dtype=float)
        self.nearest_distance = float(nearest_distance)
        super().__init__(
            f"empty kernel neighborhood at {self.point.tolist()}: "
            f"nearest center at distance {self.nearest_distance:.6g}"
        )


class DegenerateMeasureError(ArithmeticError):
    """The kernel puts (numerically) no mass of the sampling law near x."""


@dataclass(frozen=True)
class EvalReport:
    value: float
    denominator: float
    active_centers: int


@dataclass(frozen=True)
class BatchResult:
    """Column-wise evaluation results; ``empty`` marks failed queries.

    Failed entries carry ``nan`` values, zero denominators and the distance to
    the nearest center in ``nearest``.
    """

    points: np.ndarray
    value: np.ndarray
    denominator: np.ndarray
    active_centers: np.ndarray
    empty: np.ndarray
    nearest: np.ndarray

    def __len__(self):
        return len(self.value)

    def __getitem__(self, i) -> EvalReport | EmptyNeighborhood:
        if self.empty[i]:
            return EmptyNeighborhood(self.points[i], self.nearest[i])
        return EvalReport(float(self.value[i]), float(self.denominator[i]), int(self.active_centers[i]))

    def reports(self) -> list:
        return [self[i] for i in range(len(self))]

    @property
    def ok(self) -> bool:
        return not bool(self.empty.any())


class GridIndex:
    """Uniform-grid hash of the centers with cubic cells of edge ``cell``.

    Every center within distance ``cell`` of a query lies in the query's cell
    or one of its ``3^d - 1`` neighbors.
    """

    def __init__(self, centers: np.ndarray, cell: float):
        self.cell = float(cell)
        self.dim = centers.shape[1]
        self.origin = centers.min(axis=0)
        coords = np.floor((centers - self.origin) / self.cell).astype(np.int64)
        self.shape = coords.max(axis=0) + 1
        if math.prod(int(s) for s in self.shape) >= 2**62:
            raise OverflowError("grid too fine to linearize")
        self._strides = np.cumprod(np.concatenate(([1], self.shape[::-1][:-1])))[::-1].astype(np.int64)
        keys = coords @ self._strides
        self.order = np.argsort(keys, kind="stable")
        self.keys, self.starts, self.counts = np.unique(
            keys[self.order], return_index=True, return_counts=True
        )
        self._offsets = np.array(list(itertools.product((-1, 0, 1), repeat=self.dim)), dtype=np.int64)

    def candidates(self, xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Flat (query row, center index) pairs, sorted by row then center index."""
        qc = np.floor((xs - self.origin) / self.cell).astype(np.int64)
        nb = qc[:, None, :] + self._offsets[None, :, :]
        inside = np.all((nb >= 0) & (nb < self.shape), axis=-1)
        lin = np.where(inside, nb @ self._strides, -1).ravel()
        pos = np.clip(np.searchsorted(self.keys, lin), 0, len(self.keys) - 1)
        found = (self.keys[pos] == lin) & (lin >= 0)
        cnt = np.where(found, self.counts[pos], 0)
        start = self.starts[pos]
        total = int(cnt.sum())
        rows = np.repeat(np.repeat(np.arange(len(xs)), len(self._offsets)), cnt)
        within = np.arange(total) - np.repeat(np.cumsum(cnt) - cnt, cnt)
        idx = self.order[np.repeat(start, cnt) + within]
        srt = np.lexsort((idx, rows))
        return rows[srt], idx[srt]


@dataclass(frozen=True, eq=False)
class QuasiInterpolant:
    centers: np.ndarray
    values: np.ndarray
    kernel: Kernel
    h: float
    index: GridIndex | None = None
    domain: BoxDomain | None = None

    @property
    def n(self) -> int:
        return len(self.values)

    @property
    def dim(self) -> int:
        return self.centers.shape[1]

    # ------------------------------------------------------------------
    def _log_prefactor(self) -> float:
        """log(psi(0) h^-d / N): converts weight sums into r_h."""
        return math.log(self.kernel.peak) - self.dim * math.log(self.h) - math.log(self.n)

    def _scaled_r2(self, diff2: np.ndarray) -> np.ndarray:
        return diff2 / (self.h * self.h)

    def _check_points(self, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        if xs.ndim == 1:
            xs = xs.reshape(1, -1) if self.dim > 1 or xs.size == 1 else xs.reshape(-1, 1)
        if xs.ndim != 2 or xs.shape[1] != self.dim:
            raise ValueError(f"expected query points with d={self.dim}, got shape {xs.shape}")
        if self.domain is not None and not np.all(self.domain.contains(xs)):
            raise ValueError("query point outside the interpolation domain")
        return xs

    def _nearest(self, xs: np.ndarray) -> np.ndarray:
        return np.array([np.sqrt(np.min(np.sum((self.centers - x) ** 2, axis=1))) for x in xs])

    def _naive(self, xs: np.ndarray):
        m = len(xs)
        num = np.empty(m)
        den = np.empty(m)
        shift = np.zeros(m)
        active = np.empty(m, dtype=np.int64)
        step = max(1, _BLOCK // max(1, self.n * self.dim))
        for a in range(0, m, step):
            b = min(m, a + step)
            d2 = np.sum((xs[a:b, None, :] - self.centers[None, :, :]) ** 2, axis=-1)
            if self.kernel.is_gaussian:
                logw = self.kernel.log_profile(self._scaled_r2(d2))
                mx = logw.max(axis=1)
                z = logw - mx[:, None]
                with np.errstate(under="ignore"):
                    w = np.where(z >= EXP_UNDERFLOW, np.exp(z), 0.0)
                shift[a:b] = mx
            else:
                w = self.kernel.profile(self._scaled_r2(d2))
            den[a:b] = np.sum(w, axis=1)
            with np.errstate(under="ignore"):
                num[a:b] = np.sum(w * self.values[None, :], axis=1)
            active[a:b] = np.count_nonzero(w, axis=1)
        return num, den, shift, active

    def _pruned(self, xs: np.ndarray):
        m = len(xs)
        rows, idx = self.index.candidates(xs)
        d2 = np.sum((xs[rows] - self.centers[idx]) ** 2, axis=1)
        w = self.kernel.profile(self._scaled_r2(d2))
        den = np.bincount(rows, weights=w, minlength=m)
        with np.errstate(under="ignore"):
            num = np.bincount(rows, weights=w * self.values[idx], minlength=m)
        active = np.bincount(rows, weights=(w > 0), minlength=m).astype(np.int64)
        return num, den, np.zeros(m), active

    def evaluate_batch(self, xs, pruned: bool | None = None) -> BatchResult:
        """Evaluate at every row of ``xs``; empty neighborhoods are marked, not raised.

        ``pruned=None`` uses the grid index when one was built; ``False`` forces
        the full O(N) sum.
        """
        xs = self._check_points(xs)
        use_index = self.index is not None if pruned is None else pruned
        if use_index and self.index is None:
            raise ValueError("no spatial index was built for this interpolant")
        num, den, shift, active = self._pruned(xs) if use_index else self._naive(xs)
        empty = den <= 0.0
        with np.errstate(divide="ignore", invalid="ignore", under="ignore", over="ignore"):
            value = np.where(empty, np.nan, num / np.where(empty, 1.0, den))
            denominator = np.where(empty, 0.0, np.exp(self._log_prefactor() + shift + np.log(den)))
        lo, hi = self.values.min(), self.values.max()
        value = np.where(empty, np.nan, np.clip(value, lo, hi))
        nearest = np.full(len(xs), np.nan)
        if empty.any():
            nearest[empty] = self._nearest(xs[empty])
        return BatchResult(xs, value, denominator, active, empty, nearest)

    def evaluate(self, x) -> EvalReport:
        res = self.evaluate_batch(np.asarray(x, dtype=float).reshape(1, self.dim))
        out = res[0]
        if isinstance(out, EmptyNeighborhood):
            raise out
        return out

    def __call__(self, xs) -> np.ndarray:
        res = self.evaluate_batch(xs)
        if not res.ok:
            raise res[int(np.argmax(res.empty))]
        return res.value

    def weights(self, x) -> np.ndarray:
        """Normalized weights ``psi_h(x - X_j) / sum_l psi_h(x - X_l)`` at one point."""
        x = self._check_points(np.asarray(x, dtype=float).reshape(1, self.dim))[0]
        r2 = self._scaled_r2(np.sum((self.centers - x) ** 2, axis=1))
        if self.kernel.is_gaussian:
            z = self.kernel.log_profile(r2)
            z = z - z.max()
            with np.errstate(under="ignore"):
                w = np.where(z >= EXP_UNDERFLOW, np.exp(z), 0.0)
        else:
            w = self.kernel.profile(r2)
        s = w.sum()
        if s <= 0.0:
            raise EmptyNeighborhood(x, float(np.sqrt(r2.min()) * self.h))
        with np.errstate(under="ignore"):
            return w / s


def build(centers, values, kernel: Kernel, h: float, domain: BoxDomain | None = None,
          use_index: bool | None = None) -> QuasiInterpolant:
    """Freeze centers, sampled values, kernel and bandwidth into an interpolant.

    A grid index (cell edge ``h``) is built for compact kernels unless
    ``3**d > N``, where the neighbor sweep would cost more than the full sum.
    """
    h = check_bandwidth(h)
    centers = np.array(centers, dtype=float)
    if centers.ndim == 1:
        centers = centers.reshape(-1, 1) if kernel.dim == 1 else centers.reshape(1, -1)
    values = np.array(values, dtype=float).reshape(-1)
    if len(centers) == 0:
        raise ValueError("cannot build a quasi-interpolant from an empty center set")
    if len(values) != len(centers):
        raise ValueError(f"{len(centers)} centers but {len(values)} values")
    if centers.shape[1] != kernel.dim:
        raise ValueError(f"centers have d={centers.shape[1]}, kernel has d={kernel.dim}")
    centers.setflags(write=False)
    values.setflags(write=False)
    n, d = centers.shape
    if use_index is None:
        use_index = not kernel.is_gaussian and 3**d <= n
    index = None
    if use_index:
        if kernel.is_gaussian:
            raise ValueError("a grid index needs a compactly supported kernel")
        try:
            index = GridIndex(centers, h)
        except OverflowError:
            index = None
    return QuasiInterpolant(centers, values, kernel, h, index, domain)


def interpolate(target: TargetFunction, centers, kernel: Kernel, h: float, **kw) -> QuasiInterpolant:
    """Build the interpolant of ``target`` from its values at ``centers``."""
    centers = np.asarray(centers, dtype=float)
    return build(centers, target(centers), kernel, h, domain=target.domain, **kw)


# ----------------------------------------------------------------------
# deterministic convolution limit

def _default_oracle_quadrature(d: int) -> QuadratureSpec:
    return {1: QuadratureSpec(32, 8), 2: QuadratureSpec(16, 4)}.get(d, QuadratureSpec(8, 4))


def _convolution_ratio(f, law, kernel, h, x, domain, spec):
    d = domain.dim
    reach = 8.0 * kernel.sigma if kernel.is_gaussian else 1.0
    axes_x, axes_w = [], []
    for i in range(d):
        a = max(domain.lower[i], x[i] - reach * h)
        b = min(domain.upper[i], x[i] + reach * h)
        kinks = f.kinks[i] if i < len(f.kinks) else ()
        nodes, wts = gauss_legendre(a, b, spec.nodes, spec.panels, breaks=(x[i], *kinks))
        axes_x.append(nodes)
        axes_w.append(wts)
    grid = np.stack(np.meshgrid(*axes_x, indexing="ij"), axis=-1).reshape(-1, d)
    wq = np.prod(np.stack(np.meshgrid(*axes_w, indexing="ij"), axis=-1).reshape(-1, d), axis=1)
    r2 = np.sum((grid - x) ** 2, axis=1) / (h * h)
    kern = kernel.peak * h ** (-d) * kernel.profile(r2)
    with np.errstate(under="ignore"):
        dens = np.exp(law.log_density(domain, grid))
        w = wq * kern * dens
    den = float(np.sum(w))
    if den < 1e-12:
        raise DegenerateMeasureError(f"kernel-weighted measure {den:.3g} at x={x.tolist()}")
    return float(np.sum(w * f(grid))) / den


def convolution_oracle_with_error(f: TargetFunction, law: SamplingLaw, kernel: Kernel, h: float, x,
                                  quadrature: QuadratureSpec | None = None) -> tuple[float, float]:
    """``f_min(x)`` and the change under doubling the Gauss-Legendre nodes."""
    h = check_bandwidth(h)
    domain = f.domain
    if domain.dim > 3:
        raise ValueError("tensor quadrature oracle supports d <= 3 only")
    x = np.asarray(x, dtype=float).reshape(domain.dim)
    if not domain.contains(x):
        raise ValueError("x outside the target domain")
    spec = quadrature or _default_oracle_quadrature(domain.dim)
    coarse = _convolution_ratio(f, law, kernel, h, x, domain, spec)
    fine = _convolution_ratio(f, law, kernel, h, x, domain, spec.refined())
    return fine, abs(fine - coarse)


def convolution_oracle(f: TargetFunction, law: SamplingLaw, kernel: Kernel, h: float, x,
                       quadrature: QuadratureSpec | None = None) -> float:
    return convolution_oracle_with_error(f, law, kernel, h, x, quadrature)[0]
