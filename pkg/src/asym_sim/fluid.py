"""First-order (fluid) stationary analysis of the single-topic model.

Given normalized popularities, users with prejudice ``z`` settle where the
mean opinion drift vanishes:

    x = q z + m * sum_i w_i x_i / sum_i w_i,    w_i = f_i omega(pi_i, d_i) theta(d_i)

with ``q = alpha/(1-beta)``, ``m = gamma/(1-beta)`` and ``d_i = |x - x_i|``.
Given those equilibrium opinions, popularities satisfy
``pi_i = F_i(pi_i) / sum_j F_j(pi_j)`` where ``F_i`` integrates ``w_i`` over
the prejudice density. Both are solved by damped fixed-point iteration.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .config import ModelConfig
from .model import ContractError, KernelSpec, UpdateWeights, feedback_array, visibility_array

DAMPING = 0.5
DERIV_STEP = 1e-4


class ConvergenceError(RuntimeError):
    """Fixed-point iteration stopped without meeting its tolerance."""

    def __init__(self, message: str, last=None, residual: float = math.nan, iterations: int = 0):
        super().__init__(message)
        self.last = last
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class FluidScenario:
    """One-dimensional scenario: influencer positions, frequencies and prejudice law.

    ``z_nodes``/``z_weights`` discretize the prejudice density (a single
    node of weight 1 for a point mass).
    """

    positions: np.ndarray
    post_freq: np.ndarray
    weights: UpdateWeights
    kernels: KernelSpec
    z_nodes: np.ndarray
    z_weights: np.ndarray
    lower: float = 0.0
    upper: float = 1.0
    initial_pi: np.ndarray | None = None

    @property
    def width(self) -> float:
        return self.upper - self.lower

    @property
    def point_mass(self) -> bool:
        return self.z_nodes.size == 1

    @property
    def n_influencers(self) -> int:
        return self.positions.size

    @classmethod
    def build(cls, positions, post_freq, z=None, weights=None, kernels=None, density=None,
              n_nodes: int = 201, lower: float = 0.0, upper: float = 1.0, initial_pi=None):
        """Point-mass prejudice ``z`` or a density callable sampled on ``n_nodes`` nodes."""
        positions = np.asarray(positions, dtype=float)
        post_freq = np.asarray(post_freq, dtype=float)
        if positions.shape != post_freq.shape:
            raise ContractError("positions and post_freq must have the same length")
        if abs(post_freq.sum() - 1.0) > 1e-12:
            raise ContractError("post_freq must sum to 1")
        if (z is None) == (density is None):
            raise ContractError("give exactly one of z (point mass) or density")
        if z is not None:
            nodes, w = np.array([float(z)]), np.array([1.0])
        else:
            nodes = np.linspace(lower, upper, n_nodes)
            w = trapezoid_weights(nodes) * np.asarray(density(nodes), dtype=float)
            if w.sum() <= 0:
                raise ContractError("prejudice density has no mass on the grid")
            w = w / w.sum()
        return cls(positions, post_freq, weights or UpdateWeights(), kernels or KernelSpec(),
                   nodes, w, lower, upper, None if initial_pi is None else np.asarray(initial_pi, float))

    @classmethod
    def from_config(cls, cfg: ModelConfig, axis: int = 0, n_nodes: int = 201) -> "FluidScenario":
        """Project a config onto one axis (the whole model when it is 1-D)."""
        space = cfg.space
        pos = np.array([s.opinion[axis] for s in cfg.influencers])
        f = np.array([s.post_freq for s in cfg.influencers])
        p0 = np.array([s.initial_popularity for s in cfg.influencers])
        pop = cfg.population
        if pop.init == "point":
            return cls.build(pos, f, z=pop.point[axis], weights=cfg.weights, kernels=cfg.kernels,
                             lower=space.lower, upper=space.upper, initial_pi=p0 / p0.sum())
        a, b = pop.shape_for_axis(axis)
        law = stats.beta(a, b, loc=space.lower, scale=space.width)
        return cls.build(pos, f, density=law.pdf, weights=cfg.weights, kernels=cfg.kernels,
                         n_nodes=n_nodes, lower=space.lower, upper=space.upper, initial_pi=p0 / p0.sum())

    def attraction(self, x, pi) -> np.ndarray:
        """``w_i(x)`` for every influencer (rows) and opinion in ``x`` (columns)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        pi = np.asarray(pi, dtype=float)
        d = np.abs(x[None, :] - self.positions[:, None])
        om = visibility_array(d, pi[:, None], self.kernels.rho)
        th = feedback_array(d, self.kernels, self.width)
        return self.post_freq[:, None] * om * th

    def rhs(self, x, z, pi) -> np.ndarray:
        """Right-hand side of the equilibrium-opinion equation."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        w = self.attraction(x, pi)
        tot = w.sum(axis=0)
        pulled = np.divide((w * self.positions[:, None]).sum(axis=0), tot,
                           out=np.zeros_like(tot), where=tot > 0)
        out = self.weights.q_factor * np.asarray(z, dtype=float) + self.weights.m * pulled
        # no influencer reaches these users: the drift vanishes wherever they are
        return np.where(tot > 0, out, x)

    def popularity_mass(self, xbar, pi) -> np.ndarray:
        """``F_i(pi_i)`` given equilibrium opinions ``xbar`` on the prejudice nodes."""
        return self.attraction(xbar, pi) @ self.z_weights

    def reflected(self) -> "FluidScenario":
        """Mirror image ``x -> lower + upper - x`` with influencer order reversed."""
        s = self.lower + self.upper
        ipi = None if self.initial_pi is None else self.initial_pi[::-1].copy()
        return FluidScenario(s - self.positions[::-1], self.post_freq[::-1].copy(), self.weights, self.kernels,
                             s - self.z_nodes[::-1], self.z_weights[::-1].copy(), self.lower, self.upper, ipi)


def trapezoid_weights(nodes: np.ndarray) -> np.ndarray:
    dx = np.diff(nodes)
    w = np.zeros_like(nodes)
    w[:-1] += dx / 2
    w[1:] += dx / 2
    return w


def _check_pi(pi, n):
    pi = np.asarray(pi, dtype=float)
    if pi.shape != (n,) or np.any(pi < -1e-12) or abs(pi.sum() - 1.0) > 1e-10:
        raise ContractError(f"pi must be a point of the {n}-simplex, got {pi}")
    return np.clip(pi, 0.0, 1.0)


def equilibrium_opinion(z: float, pi, scen: FluidScenario, x0: float | None = None,
                        tol: float = 1e-10, max_iter: int = 10_000, damping: float = DAMPING) -> float:
    """Root of the equilibrium-opinion equation for prejudice ``z``, iterated from ``x0`` (default ``z``)."""
    pi = _check_pi(pi, scen.n_influencers)
    x = float(z if x0 is None else x0)
    res = math.inf
    for it in range(1, max_iter + 1):
        x = (1.0 - damping) * x + damping * float(scen.rhs(x, z, pi)[0])
        res = abs(x - float(scen.rhs(x, z, pi)[0]))
        if res < tol:
            return x
    raise ConvergenceError(f"equilibrium opinion did not converge (residual {res:.3g})", x, res, max_iter)


def equilibrium_roots(z: float, pi, scen: FluidScenario, n_starts: int = 41, tol: float = 1e-10) -> list[float]:
    """All distinct roots reached from a grid of starting points."""
    roots: list[float] = []
    for x0 in np.linspace(scen.lower, scen.upper, n_starts):
        try:
            r = equilibrium_opinion(z, pi, scen, x0=x0, tol=tol)
        except ConvergenceError:
            continue
        if all(abs(r - s) > 1e-7 for s in roots):
            roots.append(r)
    return sorted(roots)


def _pop_map(scen: FluidScenario, xbar, pi):
    F = scen.popularity_mass(xbar, pi)
    tot = F.sum()
    if tot <= 0:
        raise ConvergenceError("no influencer receives any feedback: popularity map undefined", pi)
    return F / tot


def popularity_fixed_point(xbar, scen: FluidScenario, pi0=None, tol: float = 1e-10,
                           max_iter: int = 10_000, damping: float = DAMPING) -> np.ndarray:
    """Solve ``pi_i = F_i(pi_i) / sum_j F_j(pi_j)`` with the opinions held at ``xbar``."""
    xbar = np.atleast_1d(np.asarray(xbar, dtype=float))
    pi = _start_pi(scen, pi0)
    res = math.inf
    for _ in range(max_iter):
        pi = (1.0 - damping) * pi + damping * _pop_map(scen, xbar, pi)
        pi = pi / pi.sum()
        res = np.max(np.abs(pi - _pop_map(scen, xbar, pi)))
        if res < tol:
            return pi
    raise ConvergenceError(f"popularity iteration did not converge (residual {res:.3g})", pi, res, max_iter)


def _start_pi(scen, pi0):
    if pi0 is not None:
        return _check_pi(pi0, scen.n_influencers).copy()
    if scen.initial_pi is not None:
        return scen.initial_pi.copy()
    return np.full(scen.n_influencers, 1.0 / scen.n_influencers)


@dataclass
class FixedPointSolution:
    xbar: np.ndarray
    pi: np.ndarray
    residual: float
    iterations: int
    converged: bool
    z_nodes: np.ndarray = field(repr=False, default=None)

    @property
    def mean_opinion(self) -> float:
        return float(self.xbar[0]) if self.xbar.size == 1 else math.nan


def joint_residual(scen: FluidScenario, xbar, pi) -> float:
    rx = np.max(np.abs(xbar - scen.rhs(xbar, scen.z_nodes, pi)))
    rp = np.max(np.abs(pi - _pop_map(scen, xbar, pi)))
    return float(max(rx, rp))


def joint_fixed_point(scen: FluidScenario, pi0=None, tol: float = 1e-8, max_iter: int = 10_000,
                      damping: float = DAMPING, raise_on_failure: bool = False) -> FixedPointSolution:
    """Alternate equilibrium opinions (every prejudice node) and a damped popularity update.

    Opinions start at the prejudices and are warm-started from the previous
    outer iterate. Non-convergence is reported in the result (or raised).
    """
    pi = _start_pi(scen, pi0)
    xbar = scen.z_nodes.copy()
    res = math.inf
    for it in range(1, max_iter + 1):
        for _ in range(10_000):
            new = (1.0 - damping) * xbar + damping * scen.rhs(xbar, scen.z_nodes, pi)
            step = np.max(np.abs(new - xbar))
            xbar = new
            if step < tol * 1e-2:
                break
        pi = (1.0 - damping) * pi + damping * _pop_map(scen, xbar, pi)
        pi = pi / pi.sum()
        res = joint_residual(scen, xbar, pi)
        if res < tol:
            return FixedPointSolution(xbar, pi, res, it, True, scen.z_nodes)
    if raise_on_failure:
        raise ConvergenceError(f"joint fixed point did not converge (residual {res:.3g})", (xbar, pi), res, max_iter)
    return FixedPointSolution(xbar, pi, res, max_iter, False, scen.z_nodes)


def two_influencer_map(pi1: float, scen: FluidScenario, printed_form: bool = False) -> float:
    """Scalar popularity map for two influencers and a point-mass prejudice.

    The mean opinion is ``q z + m (pi0 x0 + pi1 x1)``; each influencer's
    visibility uses its own normalized popularity. ``printed_form=True``
    uses ``pi1`` in both visibility exponents instead.
    """
    if scen.n_influencers != 2 or not scen.point_mass:
        raise ContractError("two_influencer_map needs two influencers and a point-mass prejudice")
    pi1 = float(min(max(pi1, 0.0), 1.0))
    pi = np.array([1.0 - pi1, pi1])
    x = scen.weights.q_factor * scen.z_nodes[0] + scen.weights.m * float(pi @ scen.positions)
    vis_pi = np.array([pi1, pi1]) if printed_form else pi
    w = scen.attraction(x, vis_pi)[:, 0]
    tot = w.sum()
    if tot <= 0:
        return pi1
    return float(w[1] / tot)


def closed_form_rho0(f0: float, f1: float, m: float, q: float) -> float:
    """Root in [0, 1] of ``m(f1-f0) pi^2 + [f0(1-q) + f1(q-m)] pi - f1 q = 0``.

    Holds for rho=0, influencers at 0 and 1 and linear feedback. The
    polynomial is <= 0 at 0 and >= 0 at 1, so the root is unique unless
    ``q = 0``, in which case the smallest root (0) is returned.
    """
    if q < 0 or q + m > 1 + 1e-12:
        raise ContractError("need 0 <= q and q + m <= 1")
    a = m * (f1 - f0)
    b = f0 * (1.0 - q) + f1 * (q - m)
    c = -f1 * q
    if abs(a) < 1e-15:
        if b == 0:
            raise ContractError("degenerate equation has no unique root")
        roots = [-c / b]
    else:
        disc = b * b - 4 * a * c
        if disc < 0:
            raise ContractError("no real root")
        s = math.sqrt(disc)
        # numerically stable pair
        t = -0.5 * (b + math.copysign(s, b)) if b != 0 else 0.5 * s
        roots = [t / a, c / t] if t != 0 else [0.0, -b / a]
    inside = sorted(r for r in roots if -1e-12 <= r <= 1 + 1e-12)
    if not inside:
        raise ContractError(f"no root in [0, 1] (roots {roots})")
    return float(min(max(inside[0], 0.0), 1.0))


def winner_opinion(z: float, x_win: float, weights: UpdateWeights) -> float:
    """Limit of repeated updates against a single influencer: ``q z + m x_win``."""
    if weights.beta >= 1.0:
        raise ContractError("beta = 1 freezes opinions; the limit is undefined")
    return weights.q_factor * z + weights.m * x_win


@dataclass
class FixedPoint:
    pi: float
    derivative: float
    stable: bool


@dataclass
class ScalarMapScan:
    grid: np.ndarray
    values: np.ndarray
    fixed_points: list[FixedPoint]

    @property
    def stable_points(self) -> list[float]:
        return [fp.pi for fp in self.fixed_points if fp.stable]


def find_fixed_points_1d(fn, grid_size: int = 1000, tolerance: float = 1e-12,
                         include_zero: bool = False) -> ScalarMapScan:
    """Fixed points of a map on [0, 1] with stability ``|f'| < 1``.

    Interior roots come from sign changes of ``f(p) - p`` refined by
    bisection; ``p = 1`` is always tested explicitly (one-sided derivative).
    ``p = 0`` is tested only when ``include_zero`` is set.
    """
    if grid_size < 100:
        raise ContractError("grid_size must be >= 100")
    grid = np.linspace(0.0, 1.0, grid_size + 1)
    vals = np.array([fn(p) for p in grid])
    g = vals - grid
    found: list[FixedPoint] = []

    def deriv(p):
        # central difference, one-sided at the ends of [0, 1]
        lo, hi = max(p - DERIV_STEP, 0.0), min(p + DERIV_STEP, 1.0)
        return (fn(hi) - fn(lo)) / (hi - lo)

    def add(p):
        if any(abs(p - fp.pi) < 1e-7 for fp in found):
            return
        d = deriv(p)
        found.append(FixedPoint(float(p), float(d), bool(abs(d) < 1.0)))

    for k in range(1, grid_size):
        if g[k] == 0.0:
            add(grid[k])
    for k in range(grid_size):
        a, b = grid[k], grid[k + 1]
        ga, gb = g[k], g[k + 1]
        if k == 0 and not include_zero:
            # avoid the endpoint itself: bracket from a tiny offset
            a = 1e-9
            ga = fn(a) - a
        if ga == 0.0 or gb == 0.0 or np.sign(ga) == np.sign(gb):
            continue
        while b - a > tolerance:
            mid = 0.5 * (a + b)
            gm = fn(mid) - mid
            if gm == 0.0:
                a = b = mid
                break
            if np.sign(gm) == np.sign(ga):
                a, ga = mid, gm
            else:
                b = mid
        root = 0.5 * (a + b)
        if root < 1.0 - 1e-7 and (include_zero or root > 1e-7):
            add(root)
    if abs(g[-1]) < 1e-10:
        add(1.0)
    if include_zero and abs(g[0]) < 1e-10:
        add(0.0)
    found.sort(key=lambda fp: fp.pi)
    return ScalarMapScan(grid, vals, found)


@dataclass
class FpaRow:
    rho: float
    pi1: float
    xbar: float
    scan: ScalarMapScan
    converged: bool


def fpa_scan(scen: FluidScenario, rhos, grid_size: int = 1000, printed_form: bool = False) -> list[FpaRow]:
    """Joint fixed point and map fixed points for each visibility sharpness."""
    rows = []
    for rho in rhos:
        k = KernelSpec(rho=float(rho), feedback=scen.kernels.feedback,
                       feedback_scale=scen.kernels.feedback_scale)
        s = FluidScenario(scen.positions, scen.post_freq, scen.weights, k, scen.z_nodes, scen.z_weights,
                          scen.lower, scen.upper, scen.initial_pi)
        sol = joint_fixed_point(s)
        if s.n_influencers == 2 and s.point_mass:
            scan = find_fixed_points_1d(lambda p, s=s: two_influencer_map(p, s, printed_form), grid_size)
        else:
            scan = ScalarMapScan(np.zeros(0), np.zeros(0), [])
        xbar = float(sol.xbar[0]) if s.point_mass else float(sol.xbar @ s.z_weights)
        rows.append(FpaRow(float(rho), float(sol.pi[-1]), xbar, scan, sol.converged))
    return rows


def write_fpa_csv(path, rows: list[FpaRow]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["rho", "pi1_fpa", "xbar", "n_fixed_points", "stable_points"])
        for r in rows:
            stable = ";".join(f"{p:.6f}" for p in r.scan.stable_points)
            w.writerow([r.rho, f"{r.pi1:.6f}", f"{r.xbar:.6f}", len(r.scan.fixed_points), stable])
