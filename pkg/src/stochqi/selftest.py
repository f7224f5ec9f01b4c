"""Quick invariant checks runnable from an installed package (``stochqi selftest``)."""
from __future__ import annotations

import math

import numpy as np

from .experiments import a_priori_order, fit_loglinear, ErrorRecord
from .kernels import Kernel, kernel_mass
from .quasi import build, convolution_oracle
from .sampling import BoxDomain, SamplingLaw, sample_centers
from .targets import make_target


def _instance(kernel: Kernel, n: int, seed: int):
    dom = BoxDomain.cube(kernel.dim)
    x = sample_centers(SamplingLaw.uniform(), dom, n, seed)
    vals = np.sin(3 * x).sum(axis=1)
    return dom, x, vals


def checks():
    """Yield ``(name, passed, detail)`` triples."""
    for kernel in (Kernel.gaussian(2), Kernel.compact(2)):
        dom, x, vals = _instance(kernel, 400, 11)
        q = build(x, vals, kernel, 0.2)
        pts = sample_centers(SamplingLaw.uniform(), dom, 50, 12)
        res = q.evaluate_batch(pts)
        fam = kernel.family.value
        ok = ~res.empty
        w = q.weights(pts[int(np.argmax(ok))])
        yield f"{fam}: partition of unity", abs(w.sum() - 1) <= 1e-12, f"|sum-1|={abs(w.sum() - 1):.2e}"
        const = build(x, np.full(len(x), 1.0), kernel, 0.2).evaluate_batch(pts).value[ok]
        err = float(np.max(np.abs(const - 1.0)))
        yield f"{fam}: constant reproduction", err <= 1e-12, f"max err {err:.2e}"
        v = res.value[ok]
        yield f"{fam}: range bound", bool(np.all((v >= vals.min()) & (v <= vals.max()))), ""
        if q.index is not None:
            naive = q.evaluate_batch(pts, pruned=False)
            rel = float(np.nanmax(np.abs(res.value - naive.value) / np.maximum(np.abs(naive.value), 1e-300)))
            yield f"{fam}: pruned vs naive", rel <= 1e-10, f"max rel diff {rel:.2e}"
    law = SamplingLaw.truncnormal()
    a = sample_centers(law, BoxDomain.cube(3), 1000, 5)
    b = sample_centers(law, BoxDomain.cube(3), 1000, 5)
    yield "sampling determinism", a.tobytes() == b.tobytes(), ""
    yield "sampling containment", bool(BoxDomain.cube(3).contains(a).all()), ""
    m = kernel_mass(Kernel.gaussian(1)).value
    yield "gaussian mass", abs(m - 1) <= 1e-6, f"{m:.15f}"
    m = kernel_mass(Kernel.compact(1, 3.0)).value
    yield "compact d=1 beta=3 mass", abs(m - 0.5) <= 1e-10, f"{m:.15f}"
    recs = [ErrorRecord(n, 1.0, 2.0 * n**-0.5, 0.0, 0.0, 1, np.array([])) for n in (64, 128, 256, 512)]
    fit = fit_loglinear(recs)
    yield "OLS exact line", abs(fit.k_hat - 2) < 1e-12 and abs(fit.delta_hat - 0.5) < 1e-12, str(fit)
    orders = [a_priori_order(1.0, d).order for d in (1, 3, 11)]
    yield "a-priori orders", np.allclose(orders, [1 / 3, 1 / 5, 1 / 13], rtol=0, atol=1e-15), str(orders)
    one = make_target("one")
    v = convolution_oracle(one, SamplingLaw.uniform(), Kernel.gaussian(1), 0.1, [0.3])
    yield "oracle reproduces constants", math.isclose(v, 1.0, abs_tol=1e-10), f"{v!r}"


def run(echo=print) -> bool:
    passed = True
    for name, ok, detail in checks():
        passed &= bool(ok)
        echo(f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  ({detail})" if detail else ""))
    return passed
