"""Simulation inner loop: a numba kernel and a vectorized numpy twin.

Both consume the counter-based stream of :mod:`asym_sim.rng` in the same
way, so for a given key they make the same exposure and feedback decisions.
Per step ``n``:

* output 0 of the step key: high word picks the influencer, low word the topic;
* output ``u + 1``: high word is user ``u``'s exposure draw, low word the like draw.

Samples are recorded for every step count listed in ``sample_steps`` (the
state *before* executing step ``n``, i.e. after ``n`` steps).
"""

from __future__ import annotations

import numpy as np

from ._jit import USE_NUMBA, njit
from .model import influencer_from_uniform, topic_from_uniform
from .rng import hi_uniform, lo_uniform, mix64, split_uniforms, step_bits, step_keys, user_bits, GOLDEN


@njit(cache=True)
def _forced_topic(n, ph_start, ph_end, ph_topic, i):
    for k in range(ph_start.shape[0]):
        if ph_start[k] <= n < ph_end[k]:
            return ph_topic[k, i]
    return -1


@njit(cache=True)
def _record(XT, p, out_pi, out_mean, slot):
    dims, n_users = XT.shape
    total = 0.0
    for i in range(p.shape[0]):
        total += p[i]
    for i in range(p.shape[0]):
        out_pi[slot, i] = p[i] / total
    for j in range(dims):
        s = 0.0
        for u in range(n_users):
            s += XT[j, u]
        out_mean[slot, j] = s / n_users


def _build_kernel(fb_code: int):
    """Compile the simulation loop for one feedback family.

    The family, the visibility branch and the axis aliasing are all fixed
    outside the user loop so that LLVM sees a tight straight-line body;
    runtime switches inside the loop cost a factor of 2 to 3.
    """

    @njit(cache=True)
    def feedback(dist, scale, width):
        if fb_code == 0:
            v = 1.0 - dist / width
            return v if v > 0.0 else 0.0
        return np.exp(-scale * dist * dist)

    @njit(cache=True, nogil=True)
    def users_plain(x, z, skey, xj, fb_scale, width, alpha, beta, gx):
        likes = 0
        for u in range(x.shape[0]):
            h = mix64(skey + np.uint64(u + 1) * GOLDEN)
            xo = x[u]
            hit = lo_uniform(h) < feedback(abs(xo - xj), fb_scale, width)
            x[u] = alpha * z[u] + beta * xo + gx if hit else xo
            likes += hit
        return likes

    @njit(cache=True, nogil=True)
    def users_same_axis(x, z, skey, xj, rate, fb_scale, width, alpha, beta, gx):
        likes = 0
        for u in range(x.shape[0]):
            h = mix64(skey + np.uint64(u + 1) * GOLDEN)
            xo = x[u]
            d = xo - xj
            w = np.exp(-rate * d * d)
            th = feedback(abs(d), fb_scale, width)
            hit = (hi_uniform(h) < w) & (lo_uniform(h) < th)
            x[u] = alpha * z[u] + beta * xo + gx if hit else xo
            likes += hit
        return likes

    @njit(cache=True, nogil=True)
    def users_cross_axis(xr_col, x, z, skey, xr, xj, rate, fb_scale, width, alpha, beta, gx):
        likes = 0
        for u in range(x.shape[0]):
            h = mix64(skey + np.uint64(u + 1) * GOLDEN)
            d = xr_col[u] - xr
            w = np.exp(-rate * d * d)
            xo = x[u]
            th = feedback(abs(xo - xj), fb_scale, width)
            hit = (hi_uniform(h) < w) & (lo_uniform(h) < th)
            x[u] = alpha * z[u] + beta * xo + gx if hit else xo
            likes += hit
        return likes

    @njit(cache=True, nogil=True)
    def users_zero_popularity(xr_col, x, z, skey, xr, xj, fb_scale, width, alpha, beta, gx):
        # pi_i = 0 with rho > 0: only users exactly at the influencer's reference coordinate see it
        likes = 0
        for u in range(x.shape[0]):
            h = mix64(skey + np.uint64(u + 1) * GOLDEN)
            xo = x[u]
            hit = (xr_col[u] == xr) & (lo_uniform(h) < feedback(abs(xo - xj), fb_scale, width))
            x[u] = alpha * z[u] + beta * xo + gx if hit else xo
            likes += hit
        return likes

    @njit(cache=True, nogil=True)
    def simulate_jit(XT, ZT, p, inf_op, inf_ref, inf_cons, cum_freq, alpha, beta, gamma, rho,
                     fb_scale, width, key, step0, n_steps, sample_steps,
                     ph_start, ph_end, ph_topic, out_pi, out_mean):
        dims, n_users = XT.shape
        n_samples = sample_steps.shape[0]
        slot = 0
        while slot < n_samples and sample_steps[slot] < step0:
            slot += 1
        for n in range(step0, step0 + n_steps):
            while slot < n_samples and sample_steps[slot] == n:
                _record(XT, p, out_pi, out_mean, slot)
                slot += 1
            skey = mix64(key + np.uint64(n + 1) * GOLDEN)
            h0 = mix64(skey)
            i = influencer_from_uniform(hi_uniform(h0), cum_freq)
            j = _forced_topic(n, ph_start, ph_end, ph_topic, i)
            if j < 0:
                j = topic_from_uniform(lo_uniform(h0), inf_ref[i], inf_cons[i], dims)
            total = 0.0
            for k in range(p.shape[0]):
                total += p[k]
            pi_i = p[i] / total
            r = inf_ref[i]
            xr = inf_op[i, r]
            xj = inf_op[i, j]
            gx = gamma * xj
            if rho == 0.0:
                likes = users_plain(XT[j], ZT[j], skey, xj, fb_scale, width, alpha, beta, gx)
            elif pi_i <= 0.0:
                likes = users_zero_popularity(XT[r], XT[j], ZT[j], skey, xr, xj, fb_scale, width,
                                              alpha, beta, gx)
            elif r == j:
                likes = users_same_axis(XT[j], ZT[j], skey, xj, rho / pi_i, fb_scale, width,
                                        alpha, beta, gx)
            else:
                likes = users_cross_axis(XT[r], XT[j], ZT[j], skey, xr, xj, rho / pi_i, fb_scale,
                                         width, alpha, beta, gx)
            p[i] += likes / n_users
        end = step0 + n_steps
        while slot < n_samples and sample_steps[slot] == end:
            _record(XT, p, out_pi, out_mean, slot)
            slot += 1

    return simulate_jit


_KERNELS = {}


def _jit_kernel(fb_code: int):
    if fb_code not in _KERNELS:
        _KERNELS[fb_code] = _build_kernel(fb_code)
    return _KERNELS[fb_code]


def _record_np(XT, p, out_pi, out_mean, slot):
    total = 0.0
    for v in p:
        total += v
    out_pi[slot] = p / total
    out_mean[slot] = XT.sum(axis=1) / XT.shape[1]


def _simulate_np(XT, ZT, p, inf_op, inf_ref, inf_cons, cum_freq, alpha, beta, gamma, rho,
                 fb_code, fb_scale, width, key, step0, n_steps, sample_steps,
                 ph_start, ph_end, ph_topic, out_pi, out_mean):
    dims, n_users = XT.shape
    samples = {int(s): k for k, s in enumerate(sample_steps)}
    keys = step_keys(key, np.arange(step0, step0 + n_steps, dtype=np.int64))
    for k_step in range(n_steps):
        n = step0 + k_step
        if n in samples:
            _record_np(XT, p, out_pi, out_mean, samples[n])
        skey = keys[k_step]
        u_inf, u_top = split_uniforms(np.array([step_bits(skey)]))
        i = influencer_from_uniform(float(u_inf[0]), cum_freq)
        j = _forced_topic(n, ph_start, ph_end, ph_topic, i)
        if j < 0:
            j = topic_from_uniform(float(u_top[0]), inf_ref[i], inf_cons[i], dims)
        total = 0.0
        for v in p:
            total += v
        pi_i = p[i] / total
        r = inf_ref[i]
        u_exp, u_fb = split_uniforms(user_bits(skey, n_users))
        x = XT[j]
        d_top = np.abs(x - inf_op[i, j])
        if fb_code == 0:
            th = np.maximum(1.0 - d_top / width, 0.0)
        else:
            th = np.exp(-fb_scale * d_top * d_top)
        like = u_fb < th
        if rho != 0.0:
            d = XT[r] - inf_op[i, r]
            if pi_i > 0.0:
                like &= u_exp < np.exp(-(rho / pi_i) * d * d)
            else:
                like &= d == 0.0
        x[like] = alpha * ZT[j, like] + beta * x[like] + gamma * inf_op[i, j]
        p[i] += int(np.count_nonzero(like)) / n_users
    end = step0 + n_steps
    if end in samples:
        _record_np(XT, p, out_pi, out_mean, samples[end])


def simulate(X, Z, p, inf, weights, kernels, width, key, step0, n_steps, sample_steps,
             schedule_arrays, out_pi, out_mean, backend: str | None = None):
    """Advance opinions ``X`` (users x axes) and popularities ``p`` in place.

    ``inf`` is an :class:`~asym_sim.model.InfluencerArrays`; ``schedule_arrays``
    the ``(start, end, topic)`` triple of :meth:`PhaseSchedule.as_arrays`.
    The kernels work on an axis-major copy so each topic column is contiguous.
    """
    use_jit = USE_NUMBA if backend is None else backend == "numba"
    if use_jit and not USE_NUMBA:
        raise RuntimeError("numba backend requested but disabled by ASYM_SIM_NUMBA")
    ph_start, ph_end, ph_topic = schedule_arrays
    XT = np.ascontiguousarray(X.T)
    ZT = np.ascontiguousarray(Z.T)
    common = (
        XT, ZT, p, inf.opinion, inf.reference, inf.consistency, inf.cum_freq,
        float(weights.alpha), float(weights.beta), float(weights.gamma), float(kernels.rho),
    )
    tail = (
        float(kernels.feedback_scale), float(width), np.uint64(key), int(step0), int(n_steps),
        np.asarray(sample_steps, dtype=np.int64), ph_start, ph_end, ph_topic, out_pi, out_mean,
    )
    if use_jit:
        _jit_kernel(int(kernels.feedback_code))(*common, *tail)
    else:
        _simulate_np(*common, int(kernels.feedback_code), *tail)
    X[...] = XT.T
