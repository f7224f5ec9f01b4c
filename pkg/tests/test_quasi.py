import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from stochqi.kernels import InvalidBandwidthError, Kernel, QuadratureSpec
from stochqi.quasi import (
    DegenerateMeasureError,
    EmptyNeighborhood,
    EvalReport,
    build,
    convolution_oracle,
    convolution_oracle_with_error,
    interpolate,
)
from stochqi.sampling import BoxDomain, SamplingLaw, sample_centers
from stochqi.targets import make_target

KERNELS = [Kernel.gaussian(1), Kernel.compact(1), Kernel.gaussian(2, 0.5), Kernel.compact(2, 1.5)]


def direct_sum(centers, values, x, h, sigma=1.0):
    """Plain Gaussian Nadaraya-Watson in d=1, no shifting or vectorization."""
    num = den = 0.0
    for c, v in zip(centers, values):
        w = math.exp(-((x - c) / h) ** 2 / (2 * sigma * sigma)) / (math.sqrt(2 * math.pi) * sigma * h)
        num += w * v
        den += w
    return num / den, den / len(centers)


def absx_fmin_at_zero(h):
    """Closed form of f_min(0) for |x|, uniform law on [-1, 1], unit Gaussian."""
    return h * math.sqrt(2 / math.pi) * (1 - math.exp(-1 / (2 * h * h))) / math.erf(1 / (h * math.sqrt(2)))


@st.composite
def instances(draw, kernels=KERNELS):
    kernel = draw(st.sampled_from(kernels))
    n = draw(st.integers(1, 60))
    seed = draw(st.integers(0, 2**32))
    rng = np.random.default_rng(seed)
    x = rng.random((n, kernel.dim))
    vals = rng.normal(size=n)
    h = draw(st.floats(0.05, 1.0))
    query = rng.random(kernel.dim)
    return kernel, x, vals, h, query


class TestBuild:
    def test_single_center(self):
        q = build([[0.2]], [0.7], Kernel.gaussian(1), 0.1)
        assert q.n == 1
        for x in (0.0, 0.2, 0.9):
            assert q.evaluate([x]).value == 0.7

    def test_single_center_compact(self):
        q = build([[0.2]], [0.7], Kernel.compact(1), 0.1)
        assert q.evaluate([0.25]).value == 0.7
        assert q.weights([0.25]).tolist() == [1.0]

    def test_empty(self):
        with pytest.raises(ValueError):
            build(np.empty((0, 1)), [], Kernel.gaussian(1), 0.1)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            build([[0.0], [1.0]], [1.0], Kernel.gaussian(1), 0.1)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            build(np.zeros((3, 2)), np.zeros(3), Kernel.gaussian(3), 0.1)

    @pytest.mark.parametrize("h", [0.0, -1.0, math.nan])
    def test_bad_bandwidth(self, h):
        with pytest.raises(InvalidBandwidthError):
            build([[0.0]], [1.0], Kernel.gaussian(1), h)

    def test_index_for_compact(self):
        x = sample_centers(SamplingLaw.uniform(), BoxDomain.cube(2), 2**11, 1)
        q = build(x, np.zeros(len(x)), Kernel.compact(2), 0.05)
        assert q.index is not None and q.index.cell == 0.05
        assert build(x, np.zeros(len(x)), Kernel.gaussian(2), 0.05).index is None

    def test_no_index_when_neighbour_sweep_too_large(self):
        x = sample_centers(SamplingLaw.uniform(), BoxDomain.cube(11), 2**11, 1)
        assert build(x, np.zeros(len(x)), Kernel.compact(11), 0.5).index is None

    def test_frozen_arrays(self):
        q = build([[0.0], [1.0]], [1.0, 2.0], Kernel.gaussian(1), 0.5)
        with pytest.raises(ValueError):
            q.values[0] = 3.0


class TestWeights:
    @pytest.mark.parametrize("kernel", [Kernel.gaussian(1), Kernel.compact(1)])
    def test_equidistant(self, kernel):
        q = build([[-0.1], [0.1]], [0.0, 1.0], kernel, 0.5)
        assert q.weights([0.0]).tolist() == [0.5, 0.5]

    def test_proportional_to_kernel(self):
        c = np.array([[0.0], [0.3], [0.5]])
        q = build(c, np.zeros(3), Kernel.compact(1, 2.0), 1.0)
        raw = np.maximum(1 - np.abs(c[:, 0] - 0.1), 0) ** 2
        np.testing.assert_allclose(q.weights([0.1]), raw / raw.sum(), rtol=1e-15)

    def test_empty_neighbourhood_carries_distance(self):
        q = build([[0.0], [0.9]], [1.0, 2.0], Kernel.compact(1), 0.1)
        with pytest.raises(EmptyNeighborhood) as e:
            q.weights([0.5])
        assert e.value.nearest_distance == pytest.approx(0.4)
        with pytest.raises(EmptyNeighborhood) as e:
            q.evaluate([0.5])
        assert e.value.nearest_distance == pytest.approx(0.4)

    def test_gaussian_far_query_no_underflow(self):
        # unshifted weights would all underflow to zero here
        q = build([[0.0], [0.01]], [1.0, 3.0], Kernel.gaussian(1), 1e-3)
        w = q.weights([0.9])
        assert w.sum() == pytest.approx(1.0) and w[1] == 1.0

    def test_gaussian_d11_small_h(self):
        x = sample_centers(SamplingLaw.uniform(), BoxDomain.cube(11), 64, 3)
        q = build(x, np.arange(64.0), Kernel.gaussian(11), 0.01)
        r = q.evaluate(np.full(11, 0.5))
        assert math.isfinite(r.value) and r.denominator >= 0.0

    @given(instances())
    def test_partition_of_unity(self, inst):
        kernel, x, vals, h, query = inst
        q = build(x, vals, kernel, h)
        try:
            w = q.weights(query)
        except EmptyNeighborhood:
            assume(False)
        assert np.all(w >= 0) and abs(w.sum() - 1.0) <= 1e-12

    @given(instances(), st.floats(1e-3, 1e3))
    def test_kernel_scale_invariance(self, inst, c):
        kernel, x, vals, h, query = inst
        q1, q2 = build(x, vals, kernel, h), build(x, vals, kernel.scaled(c), h)
        try:
            w1 = q1.weights(query)
        except EmptyNeighborhood:
            assume(False)
        with np.errstate(under="ignore"):  # tiny Gaussian weights
            np.testing.assert_allclose(q2.weights(query), w1, rtol=1e-14, atol=0)
        v1, v2 = q1.evaluate(query).value, q2.evaluate(query).value
        assert v2 == pytest.approx(v1, rel=1e-14, abs=1e-14)


class TestEvaluate:
    def test_against_direct_sum(self):
        rng = np.random.default_rng(5)
        c = rng.uniform(-1, 1, 5)
        v = rng.normal(size=5)
        q = build(c[:, None], v, Kernel.gaussian(1), 0.3)
        for x in (-0.8, 0.0, 0.45):
            ref_val, ref_den = direct_sum(c, v, x, 0.3)
            r = q.evaluate([x])
            assert r.value == pytest.approx(ref_val, rel=1e-12)
            assert r.denominator == pytest.approx(ref_den, rel=1e-12)
            assert r.active_centers == 5

    def test_compact_denominator_is_r_h(self):
        c = np.array([[0.0], [0.05], [0.5]])
        q = build(c, [1.0, 2.0, 3.0], Kernel.compact(1, 3.0), 0.1)
        r = q.evaluate([0.02])
        psi = [(1 - 0.2) ** 3, (1 - 0.3) ** 3, 0.0]
        assert r.denominator == pytest.approx(sum(psi) / 0.1 / 3, rel=1e-13)
        assert r.active_centers == 2
        assert r.value == pytest.approx((psi[0] + 2 * psi[1]) / (psi[0] + psi[1]), rel=1e-14)

    @given(instances(), st.floats(-2, 2))
    def test_constant_reproduction(self, inst, c):
        kernel, x, _, h, query = inst
        q = build(x, np.full(len(x), c), kernel, h)
        res = q.evaluate_batch(query[None, :])
        assume(res.ok)
        assert abs(res.value[0] - c) <= 1e-12 * max(1.0, abs(c))

    @given(instances())
    def test_range_bound_over_active_centers(self, inst):
        kernel, x, vals, h, query = inst
        q = build(x, vals, kernel, h)
        try:
            w = q.weights(query)
        except EmptyNeighborhood:
            assume(False)
        active = vals[w > 0]
        v = q.evaluate(query).value
        assert active.min() - 1e-12 <= v <= active.max() + 1e-12

    @given(instances(), st.lists(st.floats(-3, 3), min_size=2, max_size=2))
    def test_translation_equivariance(self, inst, shift):
        kernel, x, vals, h, query = inst
        t = np.array(shift[: kernel.dim])
        r1 = build(x, vals, kernel, h).evaluate_batch(query[None, :])
        r2 = build(x + t, vals, kernel, h).evaluate_batch((query + t)[None, :])
        assume(r1.ok and r2.ok)
        assert r2.value[0] == pytest.approx(r1.value[0], rel=1e-12, abs=1e-12)

    def test_batch_of_one_matches_evaluate(self):
        x = sample_centers(SamplingLaw.uniform(), BoxDomain.cube(2), 200, 4)
        q = build(x, x.sum(axis=1), Kernel.gaussian(2), 0.2)
        p = np.array([0.3, 0.6])
        assert q.evaluate_batch(p[None, :])[0] == q.evaluate(p)

    @pytest.mark.parametrize("kernel", [Kernel.gaussian(2), Kernel.compact(2)])
    def test_permutation(self, kernel):
        x = sample_centers(SamplingLaw.uniform(), BoxDomain.cube(2), 500, 9)
        q = build(x, np.sin(5 * x[:, 0]), kernel, 0.1)
        pts = sample_centers(SamplingLaw.uniform(), BoxDomain.cube(2), 100, 10)
        perm = np.random.default_rng(0).permutation(100)
        a, b = q.evaluate_batch(pts), q.evaluate_batch(pts[perm])
        assert a.value[perm].tobytes() == b.value.tobytes()
        assert a.denominator[perm].tobytes() == b.denominator.tobytes()

    @pytest.mark.parametrize("d,n,h", [(1, 2000, 0.01), (2, 2048, 0.05), (3, 4096, 0.15)])
    def test_pruned_matches_naive(self, d, n, h):
        dom = BoxDomain.cube(d)
        x = sample_centers(SamplingLaw.truncnormal(), dom, n, 21)
        q = build(x, np.cos(3 * x).prod(axis=1) + 2.0, Kernel.compact(d), h)
        assert q.index is not None
        pts = sample_centers(SamplingLaw.uniform(), dom, 100, 22)
        a, b = q.evaluate_batch(pts), q.evaluate_batch(pts, pruned=False)
        assert np.array_equal(a.empty, b.empty) and np.array_equal(a.active_centers, b.active_centers)
        ok = ~a.empty
        assert np.max(np.abs(a.value[ok] - b.value[ok]) / np.abs(b.value[ok])) <= 1e-10
        assert np.max(np.abs(a.denominator[ok] - b.denominator[ok]) / b.denominator[ok]) <= 1e-10

    @settings(max_examples=30)
    @given(st.integers(1, 3), st.integers(30, 400), st.floats(0.02, 0.5), st.integers(0, 2**32))
    def test_pruned_matches_naive_fuzz(self, d, n, h, seed):
        rng = np.random.default_rng(seed)
        x = rng.random((n, d))
        q = build(x, rng.normal(size=n), Kernel.compact(d, 2.0), h, use_index=True)
        pts = rng.random((50, d))
        a, b = q.evaluate_batch(pts), q.evaluate_batch(pts, pruned=False)
        assert np.array_equal(a.empty, b.empty)
        np.testing.assert_allclose(a.value, b.value, rtol=1e-10, atol=1e-12)

    def test_batch_marks_empty_without_aborting(self):
        q = build([[0.0], [0.9]], [1.0, 2.0], Kernel.compact(1), 0.1)
        res = q.evaluate_batch(np.array([[0.01], [0.5], [0.88]]))
        assert res.empty.tolist() == [False, True, False]
        assert isinstance(res[1], EmptyNeighborhood) and isinstance(res[0], EvalReport)
        assert math.isnan(res.value[1]) and res.nearest[1] == pytest.approx(0.4)
        with pytest.raises(EmptyNeighborhood):
            q(np.array([[0.5]]))

    def test_interpolate_checks_domain(self):
        t = make_target("absx")
        q = interpolate(t, sample_centers(SamplingLaw.uniform(), t.domain, 50, 0), Kernel.gaussian(1), 0.2)
        with pytest.raises(ValueError):
            q.evaluate([1.5])


class TestConvolutionOracle:
    @pytest.mark.parametrize("kernel", [Kernel.gaussian(1), Kernel.compact(1)])
    @pytest.mark.parametrize("law", [SamplingLaw.uniform(), SamplingLaw.truncnormal()])
    @pytest.mark.parametrize("x", [-1.0, -0.3, 0.0, 0.77])
    def test_constant(self, kernel, law, x):
        assert convolution_oracle(make_target("one"), law, kernel, 0.1, [x]) == pytest.approx(1.0, abs=1e-10)

    def test_constant_d3(self):
        one = make_target("one", BoxDomain.cube(3))
        v = convolution_oracle(one, SamplingLaw.truncnormal(), Kernel.compact(3), 0.2, [0.1, 0.5, 0.9])
        assert v == pytest.approx(1.0, abs=1e-10)

    def test_absx_closed_form(self):
        absx = make_target("absx")
        v, err = convolution_oracle_with_error(absx, SamplingLaw.uniform(), Kernel.gaussian(1), 0.1, [0.0])
        assert err <= 1e-8
        assert v == pytest.approx(0.07978845608028563, rel=1e-12)
        assert v == pytest.approx(absx_fmin_at_zero(0.1), rel=1e-12)

    def test_refinements_agree(self):
        absx = make_target("absx")
        a = convolution_oracle(absx, SamplingLaw.uniform(), Kernel.gaussian(1), 0.1, [0.0], QuadratureSpec(32, 8))
        b = convolution_oracle(absx, SamplingLaw.uniform(), Kernel.gaussian(1), 0.1, [0.0], QuadratureSpec(64, 16))
        assert abs(a - b) <= 1e-8

    @pytest.mark.parametrize("kernel", [Kernel.gaussian(1), Kernel.compact(1)])
    def test_small_h_recovers_f(self, kernel):
        absx = make_target("absx")
        v = convolution_oracle(absx, SamplingLaw.truncnormal(), kernel, 1e-3, [0.3])
        # smooth at 0.3, so only the second-order density tilt remains
        assert abs(v - 0.3) <= 1e-3

    def test_degenerate_measure(self):
        law = SamplingLaw.truncnormal(mean=(0.0,), stddev=1e-3)
        with pytest.raises(DegenerateMeasureError):
            convolution_oracle(make_target("absx"), law, Kernel.compact(1), 0.01, [0.9])

    def test_rejects_high_dimension(self):
        with pytest.raises(ValueError):
            convolution_oracle(make_target("sine11"), SamplingLaw.uniform(), Kernel.gaussian(11), 0.1,
                               np.full(11, 0.5))

    def test_jackson_ratio_bounded(self):
        absx = make_target("absx")
        grid = np.linspace(-1, 1, 256)
        ratios = []
        for h in (0.2, 0.1, 0.05, 0.025):
            fmin = np.array([convolution_oracle(absx, SamplingLaw.uniform(), Kernel.gaussian(1), h, [x])
                             for x in grid])
            ratios.append(np.max(np.abs(np.abs(grid) - fmin)) / h)
        assert max(ratios) / min(ratios) < 4
        assert max(ratios) < 2

    def test_monte_carlo_interpolant_approaches_fmin(self):
        absx = make_target("absx")
        law, k, h = SamplingLaw.uniform(), Kernel.gaussian(1), 0.1
        fmin = convolution_oracle(absx, law, k, h, [0.0])
        vals = [interpolate(absx, sample_centers(law, absx.domain, 4000, s), k, h).evaluate([0.0]).value
                for s in range(20)]
        assert abs(np.mean(vals) - fmin) < 4 * np.std(vals) / math.sqrt(20) + 1e-3
