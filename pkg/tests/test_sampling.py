import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from stochqi.sampling import (
    BoxDomain,
    CounterStream,
    LawKind,
    PathologicalLawError,
    SamplingLaw,
    derive_replication_seed,
    mix64,
    parse_law,
    sample_centers,
)

# First five outputs of the reference C implementation
# (x += 0x9e3779b97f4a7c15; finalize), compiled and run once.
SPLITMIX_REFERENCE = {
    0: [16294208416658607535, 7960286522194355700, 487617019471545679,
        17909611376780542444, 1961750202426094747],
    1234567: [6457827717110365317, 3203168211198807973, 9817491932198370423,
              4593380528125082431, 16408922859458223821],
}

seeds = st.integers(0, 2**64 - 1)


@st.composite
def boxes(draw, max_dim=4):
    d = draw(st.integers(1, max_dim))
    lo = draw(st.lists(st.floats(-5, 5), min_size=d, max_size=d))
    w = draw(st.lists(st.floats(0.01, 5), min_size=d, max_size=d))
    return BoxDomain(tuple(lo), tuple(a + b for a, b in zip(lo, w)))


@st.composite
def laws(draw, domain):
    if draw(st.booleans()):
        return SamplingLaw.uniform()
    frac = draw(st.lists(st.floats(0.05, 0.95), min_size=domain.dim, max_size=domain.dim))
    mean = tuple(domain.lo + np.array(frac) * domain.widths)
    std = draw(st.floats(0.1, 2.0)) * float(domain.widths.min())
    return SamplingLaw.truncnormal(mean, std)


class TestCounterStream:
    @pytest.mark.parametrize("seed", sorted(SPLITMIX_REFERENCE))
    def test_matches_reference_outputs(self, seed):
        assert CounterStream(seed).raw(5).tolist() == SPLITMIX_REFERENCE[seed]

    def test_chunking_does_not_change_stream(self):
        s = CounterStream(99)
        a = np.concatenate([s.raw(3), s.raw(7), s.raw(1)])
        assert np.array_equal(a, CounterStream(99).raw(11))

    def test_mix64_scalar_and_vector_agree(self):
        zs = [0, 1, 2**63, 2**64 - 1, 0x123456789ABCDEF]
        assert mix64(np.array(zs, dtype=np.uint64)).tolist() == [mix64(z) for z in zs]

    def test_uniform_range(self):
        u = CounterStream(3).uniforms(10_000)
        assert u.min() >= 0.0 and u.max() < 1.0

    def test_normals_are_finite_and_odd_length_ok(self):
        z = CounterStream(5).normals(10_001)
        assert z.shape == (10_001,) and np.all(np.isfinite(z))
        assert abs(z.mean()) < 0.05 and abs(z.std() - 1) < 0.05


class TestBoxDomain:
    def test_cube(self):
        dom = BoxDomain.cube(3)
        assert dom.dim == 3 and dom.volume == 1.0
        assert np.array_equal(dom.center, [0.5] * 3)

    @pytest.mark.parametrize("lo,hi", [((0.0,), (0.0,)), ((1.0,), (0.0,)), ((), ()), ((0.0, 0.0), (1.0,))])
    def test_invalid(self, lo, hi):
        with pytest.raises(ValueError):
            BoxDomain(lo, hi)

    def test_contains_is_closed(self):
        dom = BoxDomain((-1.0,), (1.0,))
        assert dom.contains(np.array([[-1.0], [1.0], [0.0]])).all()
        assert not dom.contains(np.array([[1.0 + 1e-15]])).any()


class TestSampleCenters:
    def test_uniform_small_example(self):
        law, dom = SamplingLaw.uniform(), BoxDomain.cube(1)
        x = sample_centers(law, dom, 4, 42)
        assert x.shape == (4, 1)
        assert np.all((x >= 0) & (x <= 1))
        assert x.tobytes() == sample_centers(law, dom, 4, 42).tobytes()

    def test_truncnormal_mean_symmetric(self):
        # truncated std is about 0.54, so the standard error at n=1e5 is ~0.0017
        law = SamplingLaw.truncnormal(mean=(0.0,), stddev=1.0)
        x = sample_centers(law, BoxDomain((-1.0,), (1.0,)), 100_000, 7)
        assert abs(x.mean()) < 0.02

    def test_truncnormal_single_point(self):
        dom = BoxDomain.cube(3)
        x = sample_centers(SamplingLaw.truncnormal(), dom, 1, 0)
        assert x.shape == (1, 3) and dom.contains(x).all()

    def test_uniform_marginals_ks(self):
        x = sample_centers(SamplingLaw.uniform(), BoxDomain.cube(3), 10_000, 2024)
        crit = 1.628 / math.sqrt(10_000)  # asymptotic 1% critical value
        for j in range(3):
            assert stats.kstest(x[:, j], "uniform").statistic < crit

    def test_truncnormal_marginal_ks(self):
        dom = BoxDomain((-1.0,), (1.0,))
        x = sample_centers(SamplingLaw.truncnormal((0.2,), 0.7), dom, 10_000, 8)
        ref = stats.truncnorm((-1 - 0.2) / 0.7, (1 - 0.2) / 0.7, loc=0.2, scale=0.7)
        assert stats.kstest(x[:, 0], ref.cdf).statistic < 1.628 / 100

    @given(data=st.data(), seed=seeds, n=st.integers(1, 300))
    def test_containment_and_determinism(self, data, seed, n):
        dom = data.draw(boxes())
        law = data.draw(laws(dom))
        x = sample_centers(law, dom, n, seed)
        assert x.shape == (n, dom.dim)
        assert dom.contains(x).all()
        assert x.tobytes() == sample_centers(law, dom, n, seed).tobytes()

    def test_seeds_give_different_streams(self):
        a = sample_centers(SamplingLaw.uniform(), BoxDomain.cube(2), 10, 1)
        b = sample_centers(SamplingLaw.uniform(), BoxDomain.cube(2), 10, 2)
        assert not np.array_equal(a, b)

    @pytest.mark.parametrize("n", [0, -1, 2.5])
    def test_bad_n(self, n):
        with pytest.raises(ValueError):
            sample_centers(SamplingLaw.uniform(), BoxDomain.cube(1), n, 0)

    def test_tiny_stddev_on_boundary_is_fine(self):
        law = SamplingLaw.truncnormal(mean=(0.0,), stddev=1e-9)
        dom = BoxDomain((0.0,), (1.0,))
        assert law.acceptance_probability(dom) == pytest.approx(0.5)
        assert dom.contains(sample_centers(law, dom, 50, 0)).all()

    def test_pathological_law(self):
        tiny = BoxDomain((0.0, 0.0, 0.0), (1e-3, 1e-3, 1e-3))
        law = SamplingLaw.truncnormal(mean=(0.0,), stddev=100.0)
        assert law.acceptance_probability(tiny) < 1e-6
        with pytest.raises(PathologicalLawError):
            sample_centers(law, tiny, 10, 0)

    def test_mean_outside_domain_rejected(self):
        with pytest.raises(ValueError):
            sample_centers(SamplingLaw.truncnormal(mean=(2.0,), stddev=1.0), BoxDomain.cube(1), 5, 0)

    def test_default_truncnormal_parameters(self):
        mean, std = SamplingLaw.truncnormal().resolve(BoxDomain((-1.0, 0.0), (1.0, 1.0)))
        assert np.array_equal(mean, [0.0, 0.5])
        assert np.array_equal(std, [0.5, 0.25])


class TestLogDensity:
    @pytest.mark.parametrize("law", [SamplingLaw.uniform(), SamplingLaw.truncnormal(),
                                     SamplingLaw.truncnormal((0.3,), 0.4)])
    def test_integrates_to_one(self, law):
        dom = BoxDomain((-1.0,), (1.0,))
        x, w = np.polynomial.legendre.leggauss(200)
        assert np.sum(w * np.exp(law.log_density(dom, x[:, None]))) == pytest.approx(1.0, abs=1e-12)


class TestReplicationSeed:
    @pytest.mark.parametrize("s", [0, 1, 42, 2**63, 2**64 - 1])
    def test_distinct_neighbours(self, s):
        assert derive_replication_seed(s, 0) != derive_replication_seed(s, 1)

    def test_stable(self):
        assert derive_replication_seed(7, 3) == derive_replication_seed(7, 3)
        assert derive_replication_seed(0, 0) == mix64(0x9E3779B97F4A7C15)

    def test_no_collisions_over_million_indices(self):
        from stochqi.sampling import GAMMA

        s = 123456789
        idx = np.arange(1, 1_000_001, dtype=np.uint64)
        with np.errstate(over="ignore"):
            seeds_ = mix64(np.uint64(s) + idx * np.uint64(GAMMA))
        assert int(seeds_[0]) == derive_replication_seed(s, 0)
        assert int(seeds_[-1]) == derive_replication_seed(s, 999_999)
        assert np.unique(seeds_).size == 1_000_000

    def test_negative_index(self):
        with pytest.raises(ValueError):
            derive_replication_seed(0, -1)


class TestParseLaw:
    @pytest.mark.parametrize("law", [SamplingLaw.uniform(), SamplingLaw.truncnormal(),
                                     SamplingLaw.truncnormal((0.1, 0.2), 0.3)])
    def test_round_trip(self, law):
        assert parse_law(law.spec_string()) == law

    def test_bare_truncnormal(self):
        assert parse_law("truncnormal").kind is LawKind.TRUNCNORMAL

    @pytest.mark.parametrize("text", ["cauchy", "truncnormal(scale=1)", "truncnormal[mean=0]"])
    def test_rejects(self, text):
        with pytest.raises(ValueError):
            parse_law(text)
