import math

import numpy as np
import pytest

from asym_sim.model import (
    ContractError,
    InfluencerSpec,
    KernelSpec,
    OpinionSpace,
    UpdateWeights,
    check_influencers,
    feedback_array,
    feedback_prob,
    normalized,
    popularity_increment,
    sample_topic,
    update_opinion,
    update_opinion_stubbornness,
    visibility,
    visibility_array,
)


@pytest.mark.parametrize("d,pi,rho,expected", [
    (0.0, 0.5, 1.0, 1.0),
    (0.5, 0.25, 1.0, math.exp(-1.0)),
    (0.7, 0.0, 2.0, 0.0),
    (0.0, 0.0, 2.0, 1.0),
    (0.9, 0.0, 0.0, 1.0),
])
def test_visibility_examples(d, pi, rho, expected):
    assert visibility(d, pi, rho) == pytest.approx(expected, abs=1e-15)


def test_visibility_hand_value():
    assert visibility(0.5, 0.25, 1.0) == pytest.approx(0.36788, abs=1e-5)


def test_visibility_array_matches_scalar():
    d = np.array([0.0, 0.1, 0.5, 0.7, 0.7])
    pi = np.array([0.0, 0.3, 0.25, 0.0, 1.0])
    got = visibility_array(d, pi, 2.0)
    assert np.allclose(got, [visibility(a, b, 2.0) for a, b in zip(d, pi)], rtol=1e-14, atol=0)


def test_feedback_examples():
    lin = KernelSpec()
    assert feedback_prob(0.0, lin) == 1.0
    assert feedback_prob(1.0, lin) == 0.0
    g = KernelSpec(feedback="gaussian", feedback_scale=8.25)
    assert feedback_prob(0.5, g) == pytest.approx(math.exp(-2.0625), abs=1e-15)
    assert feedback_prob(0.5, g) == pytest.approx(0.12714, abs=1e-5)


def test_feedback_linear_rejects_long_distance():
    with pytest.raises(ContractError):
        feedback_prob(1.2, KernelSpec())
    with pytest.raises(ContractError):
        feedback_prob(-0.1, KernelSpec())


def test_feedback_array_in_unit_interval():
    d = np.linspace(0, 1, 101)
    for spec in (KernelSpec(), KernelSpec(feedback="gaussian", feedback_scale=3.0)):
        v = feedback_array(d, spec)
        assert np.all((v >= 0) & (v <= 1))


def test_update_examples():
    w = UpdateWeights(0.05, 0.93, 0.02)
    assert update_opinion(0.4, 0.4, 1.0, w) == pytest.approx(0.412, abs=1e-15)
    assert update_opinion(0.5, 0.5, 0.5, UpdateWeights(0.3, 0.65)) == pytest.approx(0.5, abs=1e-15)
    assert update_opinion_stubbornness(0.4, 0.4, 1.0, w) == pytest.approx(0.412, abs=1e-12)


def test_weights_derived_fields():
    w = UpdateWeights(0.05, 0.93)
    assert w.gamma == pytest.approx(0.02)
    assert w.delta == pytest.approx(0.05 / 0.07)
    assert w.m == pytest.approx(2 / 7)
    assert w.q_factor == pytest.approx(5 / 7)
    v = UpdateWeights.from_stubbornness(w.delta, 0.93)
    assert (v.alpha, v.gamma) == pytest.approx((0.05, 0.02), abs=1e-15)


@pytest.mark.parametrize("kw", [
    {"alpha": 0.5, "beta": 0.6},
    {"alpha": 0.1, "beta": 0.1, "gamma": 0.1},
    {"alpha": -0.1, "beta": 0.5},
])
def test_weights_reject_off_simplex(kw):
    with pytest.raises(ContractError):
        UpdateWeights(**kw)


def test_sample_topic(rng):
    certain = InfluencerSpec((0.0, 1.0), reference_dir=1, consistency=1.0)
    assert all(sample_topic(certain, rng) == 1 for _ in range(200))
    one_d = InfluencerSpec((0.3,), consistency=0.2)
    assert all(sample_topic(one_d, rng) == 0 for _ in range(200))
    s = InfluencerSpec((0.0, 1.0), reference_dir=0, consistency=0.8)
    hits = sum(sample_topic(s, rng) == 0 for _ in range(100_000))
    assert hits / 100_000 == pytest.approx(0.8, abs=0.01)


def test_popularity_increment():
    assert popularity_increment(0, 10000) == 0.0
    assert popularity_increment(10000, 10000) == 1.0
    assert popularity_increment(137, 1000) == pytest.approx(0.137, abs=1e-15)
    with pytest.raises(ContractError):
        popularity_increment(5, 0)


def test_check_influencers_sum_of_frequencies():
    space = OpinionSpace(dims=1)
    good = [InfluencerSpec((0.0,), post_freq=0.3), InfluencerSpec((1.0,), post_freq=0.7)]
    check_influencers(good, space)
    bad = [InfluencerSpec((0.0,), post_freq=0.6), InfluencerSpec((1.0,), post_freq=0.6)]
    with pytest.raises(ContractError, match=r"post_freq"):
        check_influencers(bad, space)
    with pytest.raises(ContractError):
        check_influencers([InfluencerSpec((1.5,))], space)


def test_domain_type_invariants():
    with pytest.raises(ContractError):
        OpinionSpace(dims=0)
    with pytest.raises(ContractError):
        OpinionSpace(lower=1.0, upper=0.0)
    with pytest.raises(ContractError):
        InfluencerSpec((0.0, 1.0), reference_dir=2)
    with pytest.raises(ContractError):
        KernelSpec(rho=-1.0)
    with pytest.raises(ContractError):
        KernelSpec(feedback="cubic")


def test_normalized():
    assert np.allclose(normalized([100, 300]), [0.25, 0.75])
    with pytest.raises(ContractError):
        normalized([0.0, 0.0])
