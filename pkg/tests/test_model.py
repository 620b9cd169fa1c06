import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from csdyn import rng as rng_mod
from csdyn.model import (
    ProblemInstance,
    SignalPrior,
    dump_binary,
    dump_json,
    load_binary,
    load_json,
    make_instance,
    n_measurements,
    sample_matrix,
    sample_signal,
    synthesize,
)


def gen(seed=0):
    return np.random.default_rng(seed)


class TestSignalPrior:
    @pytest.mark.parametrize("rho", [-0.1, 1.5, float("nan")])
    def test_rejects_out_of_range(self, rho):
        with pytest.raises(ValueError):
            SignalPrior(rho)

    def test_second_moment(self):
        assert SignalPrior(0.3).second_moment == pytest.approx(0.3)


class TestSampleSignal:
    def test_rho_zero_is_all_zero(self):
        assert np.array_equal(sample_signal(5, SignalPrior(0.0), gen()), np.zeros(5))

    def test_rho_one_second_moment(self):
        x = sample_signal(100_000, SignalPrior(1.0), gen(1))
        assert np.all(x != 0)
        assert abs(np.mean(x**2) - 1) < 0.05

    def test_nonzero_fraction_within_binomial_bound(self):
        n, rho = 1_000_000, 0.1
        # two-sided 1e-6 binomial quantiles, well inside the +-0.002 window
        lo, hi = stats.binom.ppf([5e-7, 1 - 5e-7], n, rho) / n
        assert 0.098 < lo and hi < 0.102
        frac = np.mean(sample_signal(n, SignalPrior(rho), gen(2)) != 0)
        assert lo <= frac <= hi

    def test_nonzero_values_are_standard_normal(self):
        x = sample_signal(200_000, SignalPrior(0.5), gen(3))
        nz = x[x != 0]
        assert stats.kstest(nz, "norm").pvalue > 1e-4

    def test_bad_count(self):
        with pytest.raises(ValueError):
            sample_signal(0, SignalPrior(0.1), gen())


class TestSampleMatrix:
    def test_column_norms(self):
        A = sample_matrix(500, 1000, gen(4))
        assert abs(np.mean(np.sum(A**2, axis=0)) - 1) < 0.05

    def test_entry_variance(self):
        A = sample_matrix(500, 1000, gen(5))
        assert abs(A.var() * 500 - 1) < 0.05

    def test_scalar_entry_variance_over_seeds(self):
        vals = np.array([sample_matrix(1, 1, rng_mod.substream(s, "matrix"))[0, 0] for s in range(4000)])
        # variance 1, sample-variance stderr sqrt(2/n)
        assert abs(vals.var() - 1) < 5 * math.sqrt(2 / len(vals))

    def test_column_norm_mean_over_seeds(self):
        means = [np.mean(np.sum(sample_matrix(50, 80, rng_mod.substream(s, "matrix")) ** 2, axis=0))
                 for s in range(100)]
        se = np.std(means, ddof=1) / math.sqrt(len(means))
        assert abs(np.mean(means) - 1) < 5 * se

    def test_bad_dims(self):
        with pytest.raises(ValueError):
            sample_matrix(0, 3, gen())


class TestSynthesize:
    def test_zero_signal_zero_noise(self):
        A = sample_matrix(3, 5, gen())
        inst = synthesize(A, np.zeros(5), 0.0, gen(), rho=0.0)
        assert np.array_equal(inst.y, np.zeros(3))

    def test_noiseless_y_is_Ax(self):
        g = gen(6)
        A = sample_matrix(30, 60, g)
        x0 = sample_signal(60, SignalPrior(0.2), g)
        inst = synthesize(A, x0, 0.0, g, rho=0.2)
        assert np.array_equal(inst.y, A @ x0)

    def test_measurement_energy(self):
        vals = []
        for seed in range(100):
            inst = make_instance(2000, 0.5, SignalPrior(0.1), 0.0, seed)
            assert inst.M == 1000
            vals.append(inst.y @ inst.y / inst.M)
        assert abs(np.mean(vals) - 0.2) < 0.02

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            synthesize(np.zeros((3, 4)), np.zeros(5), 0.0, gen())

    def test_negative_noise(self):
        with pytest.raises(ValueError):
            synthesize(np.zeros((3, 4)), np.zeros(4), -1.0, gen())

    def test_overdetermined_warns(self):
        with pytest.warns(UserWarning):
            synthesize(np.eye(4), np.zeros(4), 0.0, gen())

    def test_noise_variance(self):
        inst = make_instance(4000, 1.0, SignalPrior(0.0), 0.5, seed=3)
        assert abs(inst.omega.var() - 0.25) < 0.25 * 5 * math.sqrt(2 / inst.M)


@settings(max_examples=25, deadline=None)
@given(n=st.integers(2, 60), delta=st.floats(0.1, 0.95), rho=st.floats(0, 1), sigma=st.floats(0, 2),
       seed=st.integers(0, 2**32 - 1))
def test_reconstruction_identity(n, delta, rho, sigma, seed):
    inst = make_instance(n, delta, SignalPrior(rho), sigma, seed)
    resid = inst.y - inst.A @ inst.x0 - inst.omega
    assert np.max(np.abs(resid)) <= 1e-12 * max(1.0, np.max(np.abs(inst.y)))


def test_seed_determinism():
    a = make_instance(200, 0.5, SignalPrior(0.1), 0.1, seed=9, trial=3)
    b = make_instance(200, 0.5, SignalPrior(0.1), 0.1, seed=9, trial=3)
    for f in ("A", "x0", "omega", "y"):
        assert getattr(a, f).tobytes() == getattr(b, f).tobytes()
    c = make_instance(200, 0.5, SignalPrior(0.1), 0.1, seed=9, trial=4)
    assert not np.array_equal(a.A, c.A)


def test_signal_stream_independent_of_delta():
    a = make_instance(300, 0.5, SignalPrior(0.1), 0.0, seed=1)
    b = make_instance(300, 0.8, SignalPrior(0.1), 0.0, seed=1)
    assert np.array_equal(a.x0, b.x0)


@pytest.mark.parametrize("n,delta,m", [(2000, 0.5, 1000), (2000, 0.8, 1600), (3, 0.5, 2), (10, 0.01, 1)])
def test_n_measurements(n, delta, m):
    assert n_measurements(n, delta) == m


def test_instance_properties():
    inst = make_instance(100, 0.3, SignalPrior(0.1), 0.0, seed=0)
    assert (inst.M, inst.N) == (30, 100)
    assert inst.delta == pytest.approx(0.3)
    assert inst.underdetermined


class TestSerialization:
    def instance(self):
        return make_instance(40, 0.5, SignalPrior(0.2), 0.05, seed=11)

    def test_json_roundtrip(self):
        inst = self.instance()
        buf = io.StringIO()
        dump_json(inst, buf)
        buf.seek(0)
        back = load_json(buf)
        assert back == inst
        assert back.y.tobytes() == inst.y.tobytes()

    def test_binary_roundtrip(self):
        inst = self.instance()
        buf = io.BytesIO()
        dump_binary(inst, buf)
        buf.seek(0)
        back = load_binary(buf)
        assert back == inst
        assert back.A.tobytes() == inst.A.tobytes()
        assert back.seed == inst.seed and back.rho == inst.rho and back.sigma_omega == inst.sigma_omega

    def test_binary_rejects_garbage(self):
        with pytest.raises(ValueError):
            load_binary(io.BytesIO(b"not an instance at all"))

    def test_binary_rejects_truncation(self):
        buf = io.BytesIO()
        dump_binary(self.instance(), buf)
        with pytest.raises(ValueError):
            load_binary(io.BytesIO(buf.getvalue()[:-8]))

    def test_equality_detects_change(self):
        a = self.instance()
        b = ProblemInstance(A=a.A, x0=a.x0.copy(), omega=a.omega, y=a.y, sigma_omega=a.sigma_omega, rho=a.rho,
                            seed=a.seed)
        b.x0[0] += 1
        assert a != b


class TestRng:
    def test_substreams_are_reproducible_and_distinct(self):
        a = rng_mod.substream(5, "signal", 1).standard_normal(4)
        b = rng_mod.substream(5, "signal", 1).standard_normal(4)
        c = rng_mod.substream(5, "signal", 2).standard_normal(4)
        d = rng_mod.substream(5, "noise", 1).standard_normal(4)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c) and not np.array_equal(a, d)

    def test_negative_seed(self):
        with pytest.raises(ValueError):
            rng_mod.substream(-1, "signal")
