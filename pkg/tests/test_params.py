"""Parameter layer: degree laws, derived constants, RNG streams."""

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from polyagraph import (
    ModelSpec,
    OutDegreeLaw,
    ParameterError,
    derive_constants,
    lambda_fn,
    parse_degree_dist,
    sample_out_degrees,
    stream,
)
from polyagraph.params import sample_beta, sample_gamma


def unif12():
    return OutDegreeLaw.uniform_range(1, 2)


class TestOutDegreeLaw:
    def test_degenerate(self):
        law = OutDegreeLaw.degenerate(3)
        assert law.mean() == 3.0
        assert law.prob(3) == 1.0
        assert law.prob(2) == 0.0
        assert law.min_support == 3

    def test_uniform_range(self):
        law = unif12()
        assert law.mean() == 1.5
        assert law.prob(1) == 0.5
        assert law.prob(2) == 0.5

    def test_truncated_zeta_small_cutoff(self):
        # exponent 3, cutoff 3: weights 1, 1/8, 1/27; hand-frozen values
        law = OutDegreeLaw.truncated_zeta(3.0, cutoff=3)
        z = 1.0 + 1.0 / 8.0 + 1.0 / 27.0
        assert law.prob(1) == pytest.approx(1.0 / z, rel=1e-15)
        assert law.prob(3) == pytest.approx((1.0 / 27.0) / z, rel=1e-15)
        assert law.mean() == pytest.approx((1 + 2 / 8 + 3 / 27) / z, rel=1e-15)
        assert law.tail_exponent() == 3.0

    def test_truncated_zeta_rejects_heavy(self):
        with pytest.raises(ParameterError):
            OutDegreeLaw.truncated_zeta(2.0)

    def test_geometric_exact_mean_and_tail(self):
        law = OutDegreeLaw.geometric(0.5)
        assert law.mean() == 2.0
        assert law.prob(1) == 0.5
        assert law.prob(2) == 0.25
        assert 0.0 < law.tail_mass < 1e-13
        assert law.pmf.sum() + law.tail_mass == pytest.approx(1.0, abs=1e-15)

    def test_explicit_pmf(self):
        law = OutDegreeLaw.explicit({2: 0.25, 1: 0.75})
        assert law.min_support == 1
        assert law.mean() == 1.25
        with pytest.raises(ParameterError):
            OutDegreeLaw.explicit({1: 0.5, 2: 0.6})
        with pytest.raises(ParameterError):
            OutDegreeLaw.explicit({0: 0.5, 2: 0.5})

    def test_size_biased_uniform12(self):
        # (m + 0) * (1/2) / 1.5 -> {1: 1/3, 2: 2/3}
        sb = unif12().size_biased(0.0)
        assert sb.prob(1) == pytest.approx(1.0 / 3.0, rel=1e-15)
        assert sb.prob(2) == pytest.approx(2.0 / 3.0, rel=1e-15)

    def test_size_biased_with_delta(self):
        # (m + 1) * (1/2) / (1.5 + 1) -> {1: 2/5, 2: 3/5}
        sb = unif12().size_biased(1.0)
        assert sb.prob(1) == pytest.approx(0.4, rel=1e-15)
        assert sb.prob(2) == pytest.approx(0.6, rel=1e-15)

    def test_size_biased_degenerate_is_degenerate(self):
        sb = OutDegreeLaw.degenerate(2).size_biased(0.5)
        assert sb.prob(2) == 1.0

    def test_json_roundtrip(self):
        for law in [
            OutDegreeLaw.degenerate(2),
            unif12(),
            OutDegreeLaw.truncated_zeta(2.5, cutoff=100),
            OutDegreeLaw.geometric(0.3),
            OutDegreeLaw.explicit({1: 0.5, 3: 0.5}),
        ]:
            back = OutDegreeLaw.from_json(json.loads(json.dumps(law.to_json())))
            assert back == law

    def test_config_block(self):
        law = OutDegreeLaw.from_config("kind = uniform-range\na = 1\nb = 3\n# comment\n")
        assert law == OutDegreeLaw.uniform_range(1, 3)
        law = OutDegreeLaw.from_config("kind=explicit-pmf\ntable=1:0.5,2:0.5")
        assert law == OutDegreeLaw.explicit({1: 0.5, 2: 0.5})
        with pytest.raises(ParameterError):
            OutDegreeLaw.from_config("a = 1\nb = 2")


class TestParseCompact:
    @pytest.mark.parametrize(
        "text,expected",
        [
            ("degenerate:1", OutDegreeLaw.degenerate(1)),
            ("uniform:1-2", OutDegreeLaw.uniform_range(1, 2)),
            ("zeta:2.5:50", OutDegreeLaw.truncated_zeta(2.5, 50)),
            ("geometric:0.5", OutDegreeLaw.geometric(0.5)),
            ("pmf:1=0.25,2=0.75", OutDegreeLaw.explicit({1: 0.25, 2: 0.75})),
        ],
    )
    def test_ok(self, text, expected):
        assert parse_degree_dist(text) == expected

    @pytest.mark.parametrize("text", ["", "zipf:2.5", "uniform:2", "pmf:1", "degenerate:x"])
    def test_bad(self, text):
        with pytest.raises(ParameterError):
            parse_degree_dist(text)


class TestModelSpec:
    def test_defaults(self):
        spec = ModelSpec("A", 0.0, OutDegreeLaw.degenerate(1))
        assert spec.initial_degrees == (1, 1)
        assert spec.a_sum == 2

    def test_delta_guard(self):
        ModelSpec("A", -0.99, OutDegreeLaw.degenerate(1))
        with pytest.raises(ParameterError):
            ModelSpec("A", -1.0, OutDegreeLaw.degenerate(1))
        # min supp 2 allows deltas down to -2, but seed degrees (1,1) cap at -1
        with pytest.raises(ParameterError):
            ModelSpec("A", -1.5, OutDegreeLaw.degenerate(2))
        ModelSpec(
            "A",
            -1.5,
            OutDegreeLaw.degenerate(2),
            initial_degrees=(2, 2),
            initial_edges=((1, 2), (1, 2)),
        )

    def test_initial_edge_consistency(self):
        with pytest.raises(ParameterError):
            ModelSpec("A", 0.0, OutDegreeLaw.degenerate(1), initial_degrees=(2, 1))
        spec = ModelSpec(
            "A",
            0.0,
            OutDegreeLaw.degenerate(1),
            initial_degrees=(3, 1),
            initial_edges=((1, 1), (1, 2)),
        )
        assert spec.a_sum == 4

    def test_variant_check(self):
        with pytest.raises(ParameterError):
            ModelSpec("C", 0.0, OutDegreeLaw.degenerate(1))

    def test_json_roundtrip(self):
        spec = ModelSpec("D", 0.5, unif12())
        assert ModelSpec.from_json(json.loads(spec.header_json())) == spec


class TestDerivedConstants:
    def test_frozen_m2_delta1(self):
        # E[M]=2, delta=1: chi=3/5, phi=2/3, tau_e=3.5
        d = derive_constants(ModelSpec("A", 1.0, OutDegreeLaw.degenerate(2)))
        assert d.chi == pytest.approx(0.6, rel=1e-15)
        assert d.phi == pytest.approx(2.0 / 3.0, rel=1e-15)
        assert d.tau_e == pytest.approx(3.5, rel=1e-15)
        assert d.tau == pytest.approx(3.5, rel=1e-15)

    def test_frozen_m1_delta0(self):
        d = derive_constants(ModelSpec("A", 0.0, OutDegreeLaw.degenerate(1)))
        assert d.chi == 0.5
        assert d.tau_e == 3.0

    def test_tau_caps_at_degree_tail(self):
        d = derive_constants(ModelSpec("A", 0.0, OutDegreeLaw.truncated_zeta(2.5, 100)))
        assert d.tau == 2.5
        assert d.tau_e == 3.0

    def test_identity_tau_e(self):
        # tau_e = 1 + 1/(1 - chi) always
        for law, delta in [(unif12(), 0.5), (OutDegreeLaw.degenerate(3), -0.25)]:
            d = derive_constants(ModelSpec("A", delta, law))
            assert d.tau_e == pytest.approx(1.0 + 1.0 / (1.0 - d.chi), rel=1e-12)


class TestLambda:
    def test_frozen_value(self):
        # chi = 1/2: lambda(1/4) = (1 - 1/2) / (1/2) = 1
        assert lambda_fn(0.25, 0.5) == pytest.approx(1.0, rel=1e-15)

    def test_endpoint(self):
        assert lambda_fn(1.0, 0.7) == 0.0

    def test_vectorized_and_domain(self):
        out = lambda_fn(np.array([0.25, 1.0]), 0.5)
        assert out == pytest.approx([1.0, 0.0])
        with pytest.raises(ParameterError):
            lambda_fn(0.0, 0.5)
        with pytest.raises(ParameterError):
            lambda_fn(1.5, 0.5)


class TestSampling:
    def test_out_degrees_shape_and_seed_slots(self):
        m = sample_out_degrees(unif12(), 10, stream(7, "t"))
        assert m.shape == (11,)
        assert m[0] == 0 and m[1] == 1 and m[2] == 1
        assert np.all((m[3:] >= 1) & (m[3:] <= 2))

    def test_out_degrees_deterministic(self):
        a = sample_out_degrees(unif12(), 50, stream(11, "x"))
        b = sample_out_degrees(unif12(), 50, stream(11, "x"))
        assert np.array_equal(a, b)

    def test_stream_purpose_separation(self):
        a = stream(11, "x").random(8)
        b = stream(11, "y").random(8)
        c = stream(11, "x", replica=1).random(8)
        assert not np.array_equal(a, b)
        assert not np.array_equal(a, c)

    @pytest.mark.parametrize(
        "law",
        [
            OutDegreeLaw.uniform_range(1, 3),
            OutDegreeLaw.geometric(0.4),
            OutDegreeLaw.truncated_zeta(2.5, 50),
            OutDegreeLaw.explicit({1: 0.2, 2: 0.3, 5: 0.5}),
        ],
        ids=["unif", "geom", "zeta", "pmf"],
    )
    def test_sampler_matches_pmf_chisq(self, law):
        n = 100_000
        x = law.sample(n, stream(2024, "law-gof"))
        support = law.support[law.pmf > 1e-9]
        probs = law.pmf[law.pmf > 1e-9]
        counts = np.array([(x == s).sum() for s in support])
        # lump everything beyond the listed support (geometric tail) in
        keep = probs * n >= 5
        obs = np.append(counts[keep], n - counts[keep].sum())
        exp = np.append(probs[keep] * n, n - probs[keep].sum() * n)
        if exp[-1] < 1e-9:
            obs, exp = obs[:-1], exp[:-1]
        chi2 = ((obs - exp) ** 2 / exp).sum()
        p = stats.chi2.sf(chi2, df=len(obs) - 1)
        assert p > 0.01, f"chi-square GOF rejected: p={p}"

    def test_gamma_ks(self):
        x = sample_gamma(2.5, 1.0, stream(5, "gamma-ks"), size=100_000)
        p = stats.kstest(x, "gamma", args=(2.5,)).pvalue
        assert p > 0.01

    def test_gamma_rate_scaling(self):
        x = sample_gamma(1.5, 4.0, stream(6, "gamma-rate"), size=200_000)
        assert np.mean(x) == pytest.approx(1.5 / 4.0, rel=0.02)

    def test_beta_ks_fractional(self):
        x = sample_beta(0.75, 2.25, stream(7, "beta-ks"), size=100_000)
        p = stats.kstest(x, "beta", args=(0.75, 2.25)).pvalue
        assert p > 0.01

    def test_beta_zero_second_parameter_is_one(self):
        assert sample_beta(1.0, 0.0, stream(8, "beta0")) == 1.0
        assert np.all(sample_beta(2.0, 0.0, stream(8, "beta0"), size=5) == 1.0)

    def test_negative_parameters_rejected(self):
        with pytest.raises(ParameterError):
            sample_gamma(0.0, 1.0, stream(9, "g"))
        with pytest.raises(ParameterError):
            sample_beta(-1.0, 1.0, stream(9, "b"))


law_strategy = st.one_of(
    st.integers(1, 6).map(OutDegreeLaw.degenerate),
    st.tuples(st.integers(1, 4), st.integers(0, 4)).map(
        lambda ab: OutDegreeLaw.uniform_range(ab[0], ab[0] + ab[1])
    ),
    st.floats(0.05, 0.95).map(OutDegreeLaw.geometric),
    st.floats(2.1, 4.0).map(lambda e: OutDegreeLaw.truncated_zeta(e, 200)),
)


@settings(max_examples=60, deadline=None)
@given(law=law_strategy)
def test_pmf_mass_property(law):
    assert law.pmf.sum() + law.tail_mass == pytest.approx(1.0, abs=1e-11)
    assert law.mean() >= law.min_support


@settings(max_examples=60, deadline=None)
@given(law=law_strategy, delta=st.floats(-0.9, 5.0))
def test_size_biased_mass_property(law, delta):
    if law.tail_mass > 1e-12:
        law = OutDegreeLaw.explicit(
            {int(m): w / law.pmf.sum() for m, w in zip(law.support, law.pmf)}
        )
    sb = law.size_biased(delta)
    assert sb.pmf.sum() == pytest.approx(1.0, abs=1e-11)
    # size-biasing shifts mass upward: mean must not decrease
    assert sb.mean() >= law.mean() - 1e-12


@settings(max_examples=100, deadline=None)
@given(
    mu=st.floats(1.0, 10.0),
    delta=st.floats(-0.9, 10.0),
    x=st.floats(1e-6, 1.0),
)
def test_chi_lambda_identities(mu, delta, x):
    chi = (mu + delta) / (2 * mu + delta)
    assert 0.0 < chi < 1.0
    tau_e = 3.0 + delta / mu
    assert tau_e == pytest.approx(1.0 + 1.0 / (1.0 - chi), rel=1e-9)
    lam = lambda_fn(x, chi)
    # inverting: x = (1 + lambda)^(-1/(1-chi))
    assert (1.0 + lam) ** (-1.0 / (1.0 - chi)) == pytest.approx(x, rel=1e-7)
