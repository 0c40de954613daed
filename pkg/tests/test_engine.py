import os
import subprocess
import sys

import numpy as np
import pytest

from asym_sim.config import from_dict, load_config
from asym_sim.engine import (
    confidence_interval,
    ensemble,
    initial_state,
    marginal_modes,
    opinion_histogram,
    run,
    step,
)


def single_influencer_cfg(n_users=50):
    return from_dict({
        "space": {"dims": 2},
        "influencers": [{"opinion": [0.9, 0.2], "reference_dir": 1, "consistency": 1.0, "post_freq": 1.0}],
        "population": {"n_users": n_users},
        "weights": {"alpha": 0.05, "beta": 0.93},
        # theta == 1 everywhere: exp(-1e-300 d^2) rounds to exactly 1
        "kernels": {"visibility": {"rho": 0.0}, "feedback": {"family": "gaussian", "scale": 1e-300}},
    })


def test_step_moves_every_user_by_the_update_increment():
    cfg = single_influencer_cfg()
    s0 = initial_state(cfg, seed=4)
    s1 = step(s0, cfg, seed=4)
    a, b = cfg.weights.alpha, cfg.weights.beta
    x_i = 0.2  # topic is always the reference axis 1
    expected = s0.opinions[:, 1] + a * (s0.prejudices[:, 1] - x_i) + (1 - b) * (x_i - s0.opinions[:, 1])
    assert np.allclose(s1.opinions[:, 1], expected, atol=1e-15)
    assert np.array_equal(s1.opinions[:, 0], s0.opinions[:, 0])
    assert s1.popularities[0] - s0.popularities[0] == pytest.approx(1.0, abs=1e-12)
    assert s1.step == 1 and s0.step == 0


def test_step_keeps_pi_normalized(small_cfg):
    s = initial_state(small_cfg, seed=1)
    for _ in range(20):
        s = step(s, small_cfg, seed=1)
        assert s.pi.sum() == pytest.approx(1.0, abs=1e-12)


def test_like_fraction_at_midpoint():
    cfg = from_dict({
        "space": {"dims": 1},
        "influencers": [{"opinion": [0.0], "post_freq": 0.5, "consistency": 1.0},
                        {"opinion": [1.0], "post_freq": 0.5, "consistency": 1.0}],
        "population": {"n_users": 10000, "init": "point", "point": [0.5]},
    })
    s0 = initial_state(cfg, 0)
    s1 = step(s0, cfg, seed=0)
    gained = (s1.popularities - s0.popularities).sum()
    assert gained == pytest.approx(0.5, abs=0.02)


def test_zero_steps_returns_initial_sample(appendix_cfg):
    tr = run(appendix_cfg, seed=0, n_iter=0)
    assert tr.pi.shape == (1, 2)
    assert np.allclose(tr.pi[0], [0.5, 0.5])


def test_run_is_deterministic(small_cfg):
    a = run(small_cfg, seed=3)
    b = run(small_cfg, seed=3)
    assert np.array_equal(a.pi, b.pi)
    assert np.array_equal(a.final.opinions, b.final.opinions)
    c = run(small_cfg, seed=4)
    assert not np.array_equal(a.pi, c.pi)


def test_chunked_runs_match_single_run(small_cfg):
    from asym_sim.engine import advance
    from asym_sim.rng import stream_key

    whole = run(small_cfg, seed=2, n_iter=1000)
    s = initial_state(small_cfg, 2)
    for _ in range(4):
        advance(s, small_cfg, stream_key(2, 0), 250)
    assert np.array_equal(s.opinions, whole.final.opinions)
    assert np.array_equal(s.popularities, whole.final.popularities)


def test_appendix_long_run(appendix_cfg):
    tr = run(appendix_cfg, seed=0)
    pi1, _ = tr.tail_mean(100)
    assert pi1[1] == pytest.approx(0.682, abs=0.02)


def test_backends_agree(small_cfg):
    cfg = small_cfg.with_overrides({"kernels.visibility.rho": 1.0})
    a = run(cfg, seed=5, backend="numpy")
    b = run(cfg, seed=5)
    assert np.array_equal(a.pi, b.pi)
    assert np.array_equal(a.final.opinions, b.final.opinions)
    assert np.allclose(a.mean_opinion, b.mean_opinion, atol=1e-12)


def test_env_flag_selects_numpy_fallback():
    code = (
        "import numpy as np; from asym_sim import backend_name, load_config; from asym_sim.engine import run;"
        "cfg = load_config('default').with_overrides({'population.n_users': 100, 'kernels.rho': 0.5});"
        "t = run(cfg, seed=1, n_iter=300); print(backend_name()); print(repr(t.pi[-1, 0]))"
    )
    outs = []
    for flag in ("0", "1"):
        env = {**os.environ, "ASYM_SIM_NUMBA": flag}
        r = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        outs.append(r.stdout.split())
    assert outs[0][0] == "numpy" and outs[1][0] == "numba"
    assert outs[0][1] == outs[1][1]


def test_ensemble_identical_streams_have_zero_ci(small_cfg):
    res = ensemble(small_cfg, seeds=[7, 7, 7], tail_samples=5)
    assert np.all(res.pi_ci == 0.0)
    assert np.all(res.opinion_ci == 0.0)


def test_ensemble_independent_of_thread_count(small_cfg):
    a = ensemble(small_cfg, runs=3, tail_samples=5, threads=1)
    b = ensemble(small_cfg, runs=3, tail_samples=5, threads=3)
    assert np.array_equal(a.per_run_pi, b.per_run_pi)


def test_confidence_interval():
    m, h = confidence_interval(np.array([[1.0], [2.0], [3.0]]))
    assert m[0] == 2.0
    assert h[0] == pytest.approx(4.302652729749464 / np.sqrt(3), rel=1e-9)
    _, h1 = confidence_interval(np.array([[5.0]]))
    assert h1[0] == 0.0


def test_histogram_counts():
    x = np.full((40, 2), 0.3)
    counts, _ = opinion_histogram(x, 5)
    assert counts.sum() == 40 and np.count_nonzero(counts) == 1
    rand = np.random.default_rng(0).random((333, 2))
    assert opinion_histogram(rand, 7)[0].sum() == 333


def test_marginal_modes_bimodal_and_unimodal():
    g = np.random.default_rng(1)
    two = np.concatenate([g.normal(0.3, 0.03, 600), g.normal(0.75, 0.03, 400)])
    m = marginal_modes(two)
    assert len(m.positions) == 2
    assert m.masses == pytest.approx([0.6, 0.4], abs=0.01)
    one = g.normal(0.5, 0.05, 1000)
    assert len(marginal_modes(one).positions) == 1
