"""Domain types and the elementary update formulas of the model.

Influencers are stubborn agents with a fixed opinion vector. Each post is
delivered to a user with probability ``visibility`` (platform filtering on
the influencer's reference axis) and liked with probability ``feedback_prob``
(distance on the post's topic axis). A like moves the user's opinion on
that topic by a convex combination of prejudice, current opinion and the
influencer's opinion, and adds ``1/N_u`` to the influencer's popularity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._jit import njit

WEIGHT_TOL = 1e-12
FREQ_TOL = 1e-12

FEEDBACK_LINEAR = 0
FEEDBACK_GAUSSIAN = 1
_FEEDBACK_CODES = {"linear": FEEDBACK_LINEAR, "gaussian": FEEDBACK_GAUSSIAN}


class ContractError(ValueError):
    """An input violates a documented precondition."""


@dataclass(frozen=True)
class OpinionSpace:
    dims: int = 1
    lower: float = 0.0
    upper: float = 1.0

    def __post_init__(self):
        if int(self.dims) != self.dims or self.dims < 1:
            raise ContractError(f"dims must be a positive integer, got {self.dims!r}")
        if not self.lower < self.upper:
            raise ContractError(f"lower ({self.lower}) must be < upper ({self.upper})")

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def contains(self, x, tol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))


@dataclass(frozen=True)
class InfluencerSpec:
    opinion: tuple[float, ...]
    reference_dir: int = 0
    consistency: float = 1.0
    post_freq: float = 1.0
    initial_popularity: float = 100.0

    def __post_init__(self):
        object.__setattr__(self, "opinion", tuple(float(v) for v in np.atleast_1d(self.opinion)))
        if not 0 <= self.reference_dir < len(self.opinion):
            raise ContractError(
                f"reference_dir {self.reference_dir} outside [0, {len(self.opinion)})"
            )
        if not 0.0 <= self.consistency <= 1.0:
            raise ContractError(f"consistency must lie in [0,1], got {self.consistency}")
        if not 0.0 <= self.post_freq <= 1.0:
            raise ContractError(f"post_freq must lie in [0,1], got {self.post_freq}")
        if self.initial_popularity < 0:
            raise ContractError("initial_popularity must be non-negative")


def check_influencers(specs: list[InfluencerSpec], space: OpinionSpace) -> None:
    """Cross-influencer invariants: dimensions, box containment, sum of frequencies."""
    if not specs:
        raise ContractError("at least one influencer is required")
    for k, s in enumerate(specs):
        if len(s.opinion) != space.dims:
            raise ContractError(f"influencers[{k}].opinion has length {len(s.opinion)}, expected {space.dims}")
        if not space.contains(s.opinion):
            raise ContractError(f"influencers[{k}].opinion outside [{space.lower}, {space.upper}]")
    total = sum(s.post_freq for s in specs)
    if abs(total - 1.0) > FREQ_TOL:
        raise ContractError(f"influencers[].post_freq must sum to 1, got {total!r}")
    if sum(s.initial_popularity for s in specs) <= 0:
        raise ContractError("influencers[].initial_popularity must not all be zero")


@dataclass
class UserState:
    opinion: np.ndarray
    prejudice: np.ndarray

    def __post_init__(self):
        self.opinion = np.asarray(self.opinion, dtype=float)
        self.prejudice = np.asarray(self.prejudice, dtype=float)
        if self.opinion.shape != self.prejudice.shape:
            raise ContractError("opinion and prejudice must have the same length")


@dataclass(frozen=True)
class UpdateWeights:
    """Weights of the opinion update: prejudice ``alpha``, inertia ``beta``, influencer ``gamma``."""

    alpha: float = 0.05
    beta: float = 0.93
    gamma: float | None = None

    def __post_init__(self):
        if self.gamma is None:
            object.__setattr__(self, "gamma", 1.0 - self.alpha - self.beta)
        for name in ("alpha", "beta", "gamma"):
            v = getattr(self, name)
            if v < -WEIGHT_TOL:
                raise ContractError(f"weights.{name} must be >= 0, got {v}")
        s = self.alpha + self.beta + self.gamma
        if abs(s - 1.0) > WEIGHT_TOL:
            raise ContractError(f"weights alpha+beta+gamma must equal 1, got {s!r}")
        if self.gamma < 0:
            object.__setattr__(self, "gamma", 0.0)

    @classmethod
    def from_stubbornness(cls, delta: float, beta: float) -> "UpdateWeights":
        """Weights with prejudice share ``delta`` of the non-inertial mass."""
        if not 0.0 <= delta <= 1.0:
            raise ContractError(f"stubbornness must lie in [0,1], got {delta}")
        return cls(alpha=delta * (1.0 - beta), beta=beta, gamma=(1.0 - delta) * (1.0 - beta))

    @property
    def delta(self) -> float:
        s = self.alpha + self.gamma
        return self.alpha / s if s > 0 else 0.0

    @property
    def m(self) -> float:
        return self.gamma / (1.0 - self.beta)

    @property
    def q_factor(self) -> float:
        return self.alpha / (1.0 - self.beta)


@dataclass(frozen=True)
class KernelSpec:
    """Visibility family (always the popularity-modulated gaussian) and feedback family."""

    rho: float = 0.0
    feedback: str = "linear"
    feedback_scale: float = 1.0
    visibility: str = "gaussian"

    def __post_init__(self):
        if self.visibility != "gaussian":
            raise ContractError(f"unknown visibility family {self.visibility!r}")
        if self.feedback not in _FEEDBACK_CODES:
            raise ContractError(f"unknown feedback family {self.feedback!r}")
        if self.rho < 0 or not math.isfinite(self.rho):
            raise ContractError(f"kernels.visibility.rho must be finite and >= 0, got {self.rho}")
        if self.feedback == "gaussian" and not self.feedback_scale > 0:
            raise ContractError("kernels.feedback.scale must be > 0")

    @property
    def feedback_code(self) -> int:
        return _FEEDBACK_CODES[self.feedback]


@njit(cache=True)
def visibility_scalar(dist_ref, pi, rho):
    if rho == 0.0:
        return 1.0
    if pi <= 0.0:
        return 1.0 if dist_ref == 0.0 else 0.0
    return np.exp(-rho * dist_ref * dist_ref / pi)


@njit(cache=True)
def feedback_scalar(dist, code, scale, width):
    if code == 0:
        v = 1.0 - dist / width
        return v if v > 0.0 else 0.0
    return np.exp(-scale * dist * dist)


@njit(cache=True)
def topic_from_uniform(u, ref, consistency, dims):
    """Posting direction from one uniform draw: reference w.p. ``consistency``, else uniform."""
    if dims == 1:
        return 0
    if u < consistency:
        return ref
    v = (u - consistency) / (1.0 - consistency)
    k = int(v * (dims - 1))
    if k > dims - 2:
        k = dims - 2
    return k if k < ref else k + 1


@njit(cache=True)
def influencer_from_uniform(u, cum_freq):
    n = cum_freq.shape[0]
    for i in range(n - 1):
        if u < cum_freq[i]:
            return i
    return n - 1


def visibility(dist_ref: float, pi: float, rho: float) -> float:
    """Probability that a post reaches a user at reference-axis distance ``dist_ref``.

    ``exp(-rho * dist_ref**2 / pi)``; at ``pi = 0`` the continuous limit is used.
    """
    return float(visibility_scalar(float(dist_ref), float(pi), float(rho)))


def visibility_array(dist_ref, pi, rho: float) -> np.ndarray:
    d = np.asarray(dist_ref, dtype=float)
    p = np.broadcast_to(np.asarray(pi, dtype=float), d.shape)
    if rho == 0.0:
        return np.ones_like(d)
    out = np.where(d == 0.0, 1.0, 0.0)
    pos = p > 0
    with np.errstate(over="ignore"):
        out = np.where(pos, np.exp(-rho * d * d / np.where(pos, p, 1.0)), out)
    return out


def feedback_prob(dist: float, spec: KernelSpec, width: float = 1.0) -> float:
    """Probability of a like at topic-axis distance ``dist``."""
    if dist < 0:
        raise ContractError("distance must be non-negative")
    if spec.feedback == "linear" and dist > width * (1.0 + 1e-12):
        raise ContractError(f"linear feedback needs dist <= {width}, got {dist}")
    return float(feedback_scalar(float(dist), spec.feedback_code, float(spec.feedback_scale), float(width)))


def feedback_array(dist, spec: KernelSpec, width: float = 1.0) -> np.ndarray:
    d = np.asarray(dist, dtype=float)
    if spec.feedback == "linear":
        return np.clip(1.0 - d / width, 0.0, 1.0)
    return np.exp(-spec.feedback_scale * d * d)


def update_opinion(x, z, x_inf, w: UpdateWeights):
    return w.alpha * z + w.beta * x + w.gamma * x_inf


def update_opinion_stubbornness(x, z, x_inf, w: UpdateWeights):
    """Same update written with inertia and stubbornness."""
    d = w.delta
    return (1.0 - w.beta) * (d * z + (1.0 - d) * x_inf) + w.beta * x


def sample_topic(spec: InfluencerSpec, rng: np.random.Generator) -> int:
    return int(topic_from_uniform(rng.random(), spec.reference_dir, spec.consistency, len(spec.opinion)))


def popularity_increment(n_likes: int, n_users: int) -> float:
    if n_users <= 0:
        raise ContractError("n_users must be positive")
    if n_likes < 0 or n_likes > n_users:
        raise ContractError(f"n_likes must lie in [0, n_users], got {n_likes} of {n_users}")
    return n_likes / n_users


def normalized(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    total = p.sum()
    if total <= 0:
        raise ContractError("popularities must have a positive sum")
    return p / total


@dataclass
class InfluencerArrays:
    """Column view of a list of influencer specs, as consumed by the kernels."""

    opinion: np.ndarray
    reference: np.ndarray
    consistency: np.ndarray
    post_freq: np.ndarray
    cum_freq: np.ndarray
    initial_popularity: np.ndarray = field(repr=False)

    @classmethod
    def from_specs(cls, specs: list[InfluencerSpec]) -> "InfluencerArrays":
        f = np.array([s.post_freq for s in specs], dtype=float)
        cum = np.cumsum(f)
        cum[-1] = 1.0
        return cls(
            opinion=np.array([s.opinion for s in specs], dtype=float),
            reference=np.array([s.reference_dir for s in specs], dtype=np.int64),
            consistency=np.array([s.consistency for s in specs], dtype=float),
            post_freq=f,
            cum_freq=cum,
            initial_popularity=np.array([s.initial_popularity for s in specs], dtype=float),
        )
