import numpy as np

from asym_sim.rng import CounterStream, stream_key, user_bits, split_uniforms, step_key


def test_stream_is_counter_addressable():
    s = CounterStream(7, 3)
    a = s.uniforms(41, 50)
    b = CounterStream(7, 3).uniforms(41, 50)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_streams_differ_by_seed_and_realization():
    assert stream_key(1, 0) != stream_key(2, 0)
    assert stream_key(1, 0) != stream_key(1, 1)


def test_uniforms_look_uniform():
    skey = step_key(stream_key(0, 0), 0)
    u, v = split_uniforms(user_bits(skey, 200_000))
    for x in (u, v):
        assert x.min() >= 0.0 and x.max() < 1.0
        assert abs(x.mean() - 0.5) < 0.005
        assert abs(x.var() - 1 / 12) < 0.002
    assert abs(np.corrcoef(u, v)[0, 1]) < 0.01
