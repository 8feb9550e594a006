import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from persistx.model import (
    ARModel,
    Exponential,
    Gaussian,
    IIDInnovation,
    MAModel,
    PointMass,
    Rademacher,
    RequestedDensityOfAtomicLaw,
    StationaryAR1Gaussian,
    SurvivalConvention,
    Uniform,
    cdf,
    density,
    model_from_json,
    sample,
    sample_initial,
    substream,
)


class TestDistributionValues:
    def test_uniform_cdf_and_quantile(self):
        u = Uniform(-1.0, 1.0)
        assert u.cdf(0.0) == pytest.approx(0.5)
        assert u.quantile(0.25) == pytest.approx(-0.5)
        assert u.cdf(-2.0) == 0.0 and u.cdf(2.0) == 1.0

    def test_uniform_density(self):
        u = Uniform(-1.0, 3.0)
        assert u.density(0.0) == pytest.approx(0.25)
        assert u.density(-1.5) == 0.0 and u.density(3.5) == 0.0

    def test_gaussian_cdf(self):
        g = Gaussian()
        assert g.cdf(0.0) == pytest.approx(0.5)
        assert g.cdf(1.96) == pytest.approx(0.9750021048517795, abs=1e-12)
        assert g.density(0.0) == pytest.approx(1.0 / math.sqrt(2 * math.pi))

    def test_gaussian_sd_scaling(self):
        g = Gaussian(2.0)
        assert g.cdf(2.0) == pytest.approx(Gaussian().cdf(1.0))
        assert g.quantile(0.975) == pytest.approx(2.0 * Gaussian().quantile(0.975))

    def test_exponential(self):
        e = Exponential()
        assert e.cdf(1.0) == pytest.approx(1.0 - math.exp(-1.0))
        assert e.cdf(-0.5) == 0.0
        assert e.density(-0.5) == 0.0
        assert e.density(2.0) == pytest.approx(math.exp(-2.0))
        assert e.quantile(0.5) == pytest.approx(math.log(2.0))

    def test_rademacher_cdf_steps(self):
        r = Rademacher()
        got = r.cdf(np.array([-1.5, -1.0, 0.0, 0.99, 1.0, 2.0]))
        assert got.tolist() == [0.0, 0.5, 0.5, 0.5, 1.0, 1.0]

    def test_rademacher_density_refuses(self):
        with pytest.raises(RequestedDensityOfAtomicLaw):
            Rademacher().density(0.0)
        with pytest.raises(RequestedDensityOfAtomicLaw):
            density(Rademacher(), np.zeros(3))

    def test_rademacher_quantile(self):
        r = Rademacher()
        assert r.quantile(0.25) == -1.0
        assert r.quantile(0.75) == 1.0

    def test_module_level_aliases(self):
        u = Uniform(0.0, 2.0)
        assert density(u, 1.0) == pytest.approx(0.5)
        assert cdf(u, 1.0) == pytest.approx(0.5)
        x = sample(u, substream(0, "alias"), 10)
        assert x.shape == (10,) and np.all((x >= 0.0) & (x <= 2.0))

    def test_uniform_validation(self):
        with pytest.raises(ValueError):
            Uniform(1.0, 1.0)
        with pytest.raises(ValueError):
            Gaussian(0.0)

    def test_tail_radius_bounds_tail_mass(self):
        for dist in (Uniform(-1.0, 3.0), Gaussian(1.5), Exponential(), Rademacher()):
            r = dist.tail_radius(1e-6)
            tail = (1.0 - dist.cdf(r)) + dist.cdf(-r - 1e-12)
            assert tail <= 1e-6 + 1e-12

    def test_decay_rates(self):
        assert Uniform(-1.0, 1.0).exponential_decay_rate() == math.inf
        assert Gaussian(2.0).exponential_decay_rate() == pytest.approx(0.5)
        assert Exponential().exponential_decay_rate() == 1.0


class TestQuantileCdfInverse:
    @given(st.floats(-0.999, 2.999))
    def test_uniform_roundtrip(self, x):
        u = Uniform(-1.0, 3.0)
        assert u.quantile(u.cdf(x)) == pytest.approx(x, abs=1e-12)

    @given(st.floats(0.001, 20.0))
    def test_exponential_roundtrip(self, x):
        # representing F(x) near 1 costs eps/(1-F(x)) of relative precision,
        # about 5e-8 at x = 20, so the bound tracks the tail mass
        e = Exponential()
        tol = max(1e-12, 2e-16 / math.exp(-x))
        assert e.quantile(e.cdf(x)) == pytest.approx(x, abs=tol)

    @given(st.floats(-5.0, 5.0))
    def test_gaussian_roundtrip(self, x):
        g = Gaussian()
        assert g.quantile(g.cdf(x)) == pytest.approx(x, abs=1e-9)

    @given(st.floats(0.0001, 0.9999))
    def test_cdf_of_quantile(self, u):
        for dist in (Uniform(-2.0, 1.0), Gaussian(0.7), Exponential()):
            assert dist.cdf(dist.quantile(u)) == pytest.approx(u, abs=1e-9)


class TestSampling:
    def test_sampler_matches_law_moments(self):
        n = 1_000_000
        x = Uniform(-1.0, 1.0).sample(substream(0, "lln", 0), n)
        assert abs(x.mean()) < 5e-3 and abs(x.var() - 1.0 / 3.0) < 5e-3
        x = Gaussian().sample(substream(0, "lln", 1), n)
        assert abs(x.mean()) < 5e-3 and abs(x.var() - 1.0) < 1e-2
        x = Exponential().sample(substream(0, "lln", 2), n)
        assert abs(x.mean() - 1.0) < 5e-3 and np.all(x >= 0.0)
        x = Rademacher().sample(substream(0, "lln", 3), n)
        assert set(np.unique(x)) == {-1.0, 1.0}
        assert abs(x.mean()) < 5e-3

    def test_sample_shapes(self):
        g = Gaussian()
        s = substream(1, "shape")
        assert np.shape(g.sample(s)) == ()
        assert g.sample(s, 7).shape == (7,)
        assert g.sample(s, (3, 4)).shape == (3, 4)

    def test_substream_is_deterministic_and_path_dependent(self):
        a = substream(42, "crude", 3).random(5)
        b = substream(42, "crude", 3).random(5)
        c = substream(42, "crude", 4).random(5)
        d = substream(43, "crude", 3).random(5)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)
        assert not np.array_equal(a, d)


class TestInitialLaws:
    def test_point_mass(self):
        init = PointMass((1.0, -2.0))
        got = init.sample(2, substream(0, "i"))
        assert got.tolist() == [1.0, -2.0]
        got = init.sample(2, substream(0, "i"), size=3)
        assert got.shape == (3, 2) and np.all(got == [1.0, -2.0])

    def test_iid_initial(self):
        init = IIDInnovation(Exponential())
        got = init.sample(4, substream(0, "i"), size=100)
        assert got.shape == (100, 4) and np.all(got >= 0.0)

    def test_unbound_iid_initial_refuses_to_sample(self):
        with pytest.raises(ValueError):
            IIDInnovation().sample(2, substream(0, "i"))

    def test_stationary_ar1(self):
        init = StationaryAR1Gaussian(0.6)
        x = init.sample(1, substream(0, "i"), size=200_000)
        assert x.shape == (200_000, 1)
        target_var = 1.0 / (1.0 - 0.36)
        assert x.var() == pytest.approx(target_var, rel=2e-2)

    def test_stationary_requires_contraction(self):
        with pytest.raises(ValueError):
            StationaryAR1Gaussian(1.0)

    def test_sample_initial_dispatch(self):
        got = sample_initial(PointMass((0.5,)), 1, substream(0, "x"))
        assert got.tolist() == [0.5]


class TestModels:
    def test_ar_model_basics(self):
        m = ARModel((0.5, 0.25), Gaussian(), IIDInnovation(), SurvivalConvention.NON_NEGATIVE)
        assert m.order == 2
        assert m.coeffs == (0.5, 0.25)
        assert m.initial.innovation == Gaussian()

    def test_order_mismatch(self):
        with pytest.raises(ValueError):
            ARModel((0.5,), Gaussian(), IIDInnovation(), order=2)
        with pytest.raises(ValueError):
            MAModel((0.5, 0.1), Gaussian(), order=1)

    def test_point_mass_length_checked(self):
        with pytest.raises(ValueError):
            ARModel((0.5, 0.2), Gaussian(), PointMass((1.0,)))

    def test_stationary_initial_needs_order_one(self):
        with pytest.raises(ValueError):
            ARModel((0.5, 0.2), Gaussian(), StationaryAR1Gaussian(0.5))

    def test_empty_coeffs_rejected(self):
        with pytest.raises(ValueError):
            ARModel((), Gaussian(), IIDInnovation())

    def test_survival_conventions(self):
        z = np.array([-1.0, 0.0, 1.0])
        assert SurvivalConvention.NON_NEGATIVE.survives(z).tolist() == [False, True, True]
        assert SurvivalConvention.STRICTLY_POSITIVE.survives(z).tolist() == [False, False, True]


class TestJsonSchema:
    def test_ar_roundtrip(self):
        m = ARModel((-1.0,), Uniform(-1.0, 1.0), PointMass((0.0,)),
                    SurvivalConvention.STRICTLY_POSITIVE)
        assert model_from_json(m.to_json()) == m

    def test_ma_roundtrip(self):
        m = MAModel((0.7, -0.2), Gaussian(2.0))
        assert model_from_json(m.to_json()) == m

    def test_default_initial_is_iid_innovation(self):
        m = model_from_json({"process": "ar", "coeffs": [0.5],
                             "innovation": {"kind": "exponential"}})
        assert m.initial == IIDInnovation(Exponential())

    def test_stationary_roundtrip(self):
        m = ARModel((0.6,), Gaussian(), StationaryAR1Gaussian(0.6))
        assert model_from_json(m.to_json()) == m

    def test_ma_rejects_initial(self):
        with pytest.raises(ValueError, match="initial"):
            model_from_json({"process": "ma", "coeffs": [0.5],
                             "innovation": {"kind": "gaussian"},
                             "initial": {"kind": "point_mass", "values": [0.0]}})

    def test_unknown_tags_are_named(self):
        with pytest.raises(ValueError, match="arma"):
            model_from_json({"process": "arma", "coeffs": [0.5],
                             "innovation": {"kind": "gaussian"}})
        with pytest.raises(ValueError, match="cauchy"):
            model_from_json({"process": "ar", "coeffs": [0.5],
                             "innovation": {"kind": "cauchy"}})
        with pytest.raises(ValueError, match="geq"):
            model_from_json({"process": "ar", "coeffs": [0.5],
                             "innovation": {"kind": "gaussian"}, "convention": "geq"})

    def test_extra_keys_ignored(self):
        m = model_from_json({"process": "ma", "coeffs": [1.0],
                             "innovation": {"kind": "gaussian"},
                             "seed": 3, "mc": {"method": "crude"}})
        assert isinstance(m, MAModel)
