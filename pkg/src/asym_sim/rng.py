"""Counter-based random stream keyed by (seed, realization, step, user).

Every draw is a pure function of its coordinates, so results do not depend
on loop order, chunking, or worker count. The mixer is the SplitMix64
finalizer; a step key is the SplitMix64 state from which user ``u`` takes
output ``u + 1`` (output 0 is reserved for the step-level draws).

One 64-bit output yields two independent 32-bit uniforms: the high word
and the low word.
"""

import numpy as np

from ._jit import njit

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S32 = np.uint64(32)
_LOW = np.uint64(0xFFFFFFFF)
_SALT = np.uint64(0xD1B54A32D192ED03)
INV32 = 2.0**-32


@njit(cache=True)
def mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(cache=True)
def step_key(key, step):
    return mix64(key + np.uint64(step + 1) * GOLDEN)


@njit(cache=True)
def hi_uniform(h):
    return float(h >> _S32) * INV32


@njit(cache=True)
def lo_uniform(h):
    return float(h & _LOW) * INV32


def _mix64_array(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = (z ^ (z >> _S30)) * _M1
        z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def stream_key(seed: int, realization: int = 0) -> np.uint64:
    """Key of one realization's stream."""
    if seed < 0 or realization < 0:
        raise ValueError("seed and realization must be non-negative")
    s = np.array([seed % 2**64], dtype=np.uint64)
    r = np.array([realization % 2**64], dtype=np.uint64)
    with np.errstate(over="ignore"):
        k = _mix64_array(s + GOLDEN)
        k = _mix64_array(k ^ ((r + np.uint64(1)) * _SALT))
    return k[0]


def step_keys(key: np.uint64, steps: np.ndarray) -> np.ndarray:
    """Vectorized ``step_key`` for an array of step indices."""
    steps = np.asarray(steps, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return _mix64_array(np.uint64(key) + (steps + np.uint64(1)) * GOLDEN)


def user_bits(skey: np.uint64, n_users: int) -> np.ndarray:
    """Raw 64-bit outputs for users ``0..n_users-1`` under one step key."""
    idx = np.arange(1, n_users + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return _mix64_array(np.uint64(skey) + idx * GOLDEN)


def step_bits(skey: np.uint64) -> np.uint64:
    """Raw output reserved for the influencer/topic draws of a step."""
    return _mix64_array(np.array([skey], dtype=np.uint64))[0]


def split_uniforms(bits: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    bits = np.asarray(bits, dtype=np.uint64)
    return (bits >> _S32).astype(np.float64) * INV32, (bits & _LOW).astype(np.float64) * INV32


class CounterStream:
    """Convenience handle on one realization's stream."""

    def __init__(self, seed: int, realization: int = 0):
        self.seed = int(seed)
        self.realization = int(realization)
        self.key = stream_key(self.seed, self.realization)

    def uniforms(self, step: int, n_users: int) -> tuple[np.ndarray, np.ndarray]:
        """(exposure, feedback) uniforms of every user at ``step``."""
        skey = step_keys(self.key, np.array([step]))[0]
        return split_uniforms(user_bits(skey, n_users))

    def step_uniforms(self, step: int) -> tuple[float, float]:
        """(influencer, topic) uniforms of ``step``."""
        skey = step_keys(self.key, np.array([step]))[0]
        hi, lo = split_uniforms(np.array([step_bits(skey)]))
        return float(hi[0]), float(lo[0])
