"""Monte-Carlo engine: state initialization, runs, ensembles, histograms."""

from __future__ import annotations

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats
from scipy.signal import find_peaks

from . import kernels
from .config import ModelConfig
from .model import ContractError, InfluencerArrays
from .rng import stream_key


@dataclass
class SimState:
    step: int
    opinions: np.ndarray
    prejudices: np.ndarray
    popularities: np.ndarray

    @property
    def pi(self) -> np.ndarray:
        return self.popularities / self.popularities.sum()

    def copy(self) -> "SimState":
        return SimState(self.step, self.opinions.copy(), self.prejudices.copy(), self.popularities.copy())


@dataclass
class Trajectory:
    steps: np.ndarray
    pi: np.ndarray  # (n_samples, N_i)
    mean_opinion: np.ndarray  # (n_samples, d)
    final: SimState | None = None

    def tail_mean(self, tail: int) -> tuple[np.ndarray, np.ndarray]:
        if tail > len(self.steps):
            raise ContractError(f"tail_samples={tail} exceeds the {len(self.steps)} recorded samples")
        return self.pi[-tail:].mean(axis=0), self.mean_opinion[-tail:].mean(axis=0)

    def write_csv(self, path) -> None:
        n_inf, dims = self.pi.shape[1], self.mean_opinion.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step"] + [f"pi_{i}" for i in range(n_inf)] + [f"meanx_{j}" for j in range(dims)])
            for s, pi, mx in zip(self.steps, self.pi, self.mean_opinion):
                w.writerow([int(s)] + [repr(float(v)) for v in pi] + [repr(float(v)) for v in mx])


def initial_state(cfg: ModelConfig, seed: int, realization: int = 0) -> SimState:
    """Users' prejudices drawn per axis from Beta(a, b) rescaled to the box (or a point mass)."""
    pop, space = cfg.population, cfg.space
    n, d = pop.n_users, space.dims
    if pop.init == "point":
        Z = np.tile(np.asarray(pop.point, dtype=float), (n, 1))
        X = Z.copy()
    else:
        gen = np.random.default_rng([seed, realization])

        def draw():
            cols = [gen.beta(*pop.shape_for_axis(j), size=n) for j in range(d)]
            return space.lower + space.width * np.column_stack(cols)

        Z = draw()
        X = draw() if pop.prejudice_mode == "independent" else Z.copy()
    p = np.array([s.initial_popularity for s in cfg.influencers], dtype=float)
    return SimState(0, np.ascontiguousarray(X), np.ascontiguousarray(Z), p)


def sample_schedule(n_iter: int, stride: int, start: int = 0) -> np.ndarray:
    """Sample steps ``start, start+stride, ...`` plus the final step."""
    s = np.arange(start, n_iter + 1, stride, dtype=np.int64)
    if s.size == 0 or s[-1] != n_iter:
        s = np.append(s, np.int64(n_iter))
    return s


def advance(state: SimState, cfg: ModelConfig, key, n_steps: int, sample_steps=None,
            backend: str | None = None) -> Trajectory:
    """Run ``n_steps`` steps in place on ``state``, recording the listed samples."""
    inf = InfluencerArrays.from_specs(list(cfg.influencers))
    if sample_steps is None:
        sample_steps = np.zeros(0, dtype=np.int64)
    sample_steps = np.asarray(sample_steps, dtype=np.int64)
    out_pi = np.full((len(sample_steps), cfg.n_influencers), np.nan)
    out_mean = np.full((len(sample_steps), cfg.space.dims), np.nan)
    kernels.simulate(
        state.opinions, state.prejudices, state.popularities, inf, cfg.weights, cfg.kernels,
        cfg.space.width, key, state.step, n_steps, sample_steps,
        cfg.schedule.as_arrays(cfg.n_influencers), out_pi, out_mean, backend=backend,
    )
    state.step += n_steps
    return Trajectory(sample_steps, out_pi, out_mean)


def step(state: SimState, cfg: ModelConfig, seed: int = 0, realization: int = 0,
         backend: str | None = None) -> SimState:
    """Return the state after one post emission (the input is left untouched)."""
    new = state.copy()
    advance(new, cfg, stream_key(seed, realization), 1, backend=backend)
    return new


def run(cfg: ModelConfig, seed: int | None = None, n_iter: int | None = None, realization: int = 0,
        sample_steps=None, keep_final: bool = True, backend: str | None = None) -> Trajectory:
    """One realization from the configured initial state."""
    cfg.validate()
    seed = cfg.run.seed if seed is None else int(seed)
    n_iter = cfg.run.n_iter if n_iter is None else int(n_iter)
    if n_iter < 0:
        raise ContractError("n_iter must be >= 0")
    if seed < 0:
        raise ContractError("seed must be >= 0")
    if sample_steps is None:
        stride = cfg.run.sample_stride or max(1, n_iter // 1000)
        sample_steps = sample_schedule(n_iter, stride)
    state = initial_state(cfg, seed, realization)
    traj = advance(state, cfg, stream_key(seed, realization), n_iter, sample_steps, backend=backend)
    if keep_final:
        traj.final = state
    return traj


def confidence_interval(values, level: float = 0.95) -> tuple[np.ndarray, np.ndarray]:
    """Mean and Student-t half-width across the first axis; width 0 for one run."""
    v = np.asarray(values, dtype=float)
    mean = v.mean(axis=0)
    n = v.shape[0]
    if n < 2:
        return mean, np.zeros_like(mean)
    sd = v.std(axis=0, ddof=1)
    half = stats.t.ppf(0.5 + level / 2, n - 1) * sd / np.sqrt(n)
    return mean, np.where(np.ptp(v, axis=0) == 0, 0.0, half)


@dataclass
class EnsembleResult:
    pi_mean: np.ndarray
    pi_ci: np.ndarray
    opinion_mean: np.ndarray
    opinion_ci: np.ndarray
    per_run_pi: np.ndarray
    per_run_opinion: np.ndarray
    streams: list = field(default_factory=list)
    trajectories: list = field(default_factory=list)


def _worker_count(threads: int | None, jobs: int) -> int:
    if threads is None:
        env = os.environ.get("ASYM_SIM_THREADS")
        threads = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(int(threads), jobs))


def map_runs(fn, items, threads: int | None = None) -> list:
    """Apply ``fn`` to each item, possibly concurrently; results keep input order."""
    items = list(items)
    workers = _worker_count(threads, len(items))
    if workers == 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def ensemble(cfg: ModelConfig, seeds=None, n_iter: int | None = None, tail_samples: int | None = None,
             runs: int | None = None, threads: int | None = None, keep_trajectories: bool = False,
             backend: str | None = None) -> EnsembleResult:
    """Independent realizations aggregated over the tail of each run.

    ``seeds`` lists master seeds (one realization each); otherwise ``runs``
    realizations of the configured seed are used.
    """
    cfg.validate()
    n_iter = cfg.run.n_iter if n_iter is None else int(n_iter)
    tail = cfg.run.tail_samples if tail_samples is None else int(tail_samples)
    if seeds is not None:
        streams = [(int(s), 0) for s in seeds]
    else:
        streams = [(cfg.run.seed, k) for k in range(runs or cfg.run.runs)]
    if not streams:
        raise ContractError("ensemble needs at least one seed")
    stride = cfg.run.sample_stride or max(1, n_iter // 1000)
    samples = sample_schedule(n_iter, stride)
    if tail > len(samples):
        raise ContractError(f"tail_samples={tail} exceeds the {len(samples)} samples of each run")

    def one(stream):
        seed, real = stream
        return run(cfg, seed, n_iter, realization=real, sample_steps=samples,
                   keep_final=keep_trajectories, backend=backend)

    trajs = map_runs(one, streams, threads)
    tails = [t.tail_mean(tail) for t in trajs]
    per_pi = np.array([t[0] for t in tails])
    per_x = np.array([t[1] for t in tails])
    pi_mean, pi_ci = confidence_interval(per_pi)
    x_mean, x_ci = confidence_interval(per_x)
    return EnsembleResult(pi_mean, pi_ci, x_mean, x_ci, per_pi, per_x, streams,
                          trajs if keep_trajectories else [])


def opinion_histogram(state_or_opinions, bins_per_axis: int, lower: float = 0.0, upper: float = 1.0):
    """Counts on a uniform ``bins_per_axis``^d grid over the box, plus the bin edges."""
    if bins_per_axis < 2:
        raise ContractError("bins_per_axis must be >= 2")
    X = state_or_opinions.opinions if isinstance(state_or_opinions, SimState) else state_or_opinions
    X = np.atleast_2d(np.asarray(X, dtype=float))
    edges = np.linspace(lower, upper, bins_per_axis + 1)
    counts, _ = np.histogramdd(X, bins=[edges] * X.shape[1])
    return counts.astype(np.int64), edges


def write_histogram_csv(path, counts: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"bin_{j}" for j in range(counts.ndim)] + ["count"])
        for idx in np.ndindex(counts.shape):
            w.writerow(list(idx) + [int(counts[idx])])


@dataclass
class MarginalModes:
    positions: np.ndarray
    masses: np.ndarray
    grid: np.ndarray
    density: np.ndarray


def marginal_modes(values, lower: float = 0.0, upper: float = 1.0, n_grid: int = 401,
                   bandwidth: float | None = 0.02, min_prominence: float = 0.1) -> MarginalModes:
    """Local maxima of a smoothed 1-D marginal and the user share of each basin.

    Peaks below ``min_prominence`` times the highest density are ignored;
    basins are split at the density minimum between consecutive peaks.
    """
    v = np.asarray(values, dtype=float).ravel()
    grid = np.linspace(lower, upper, n_grid)
    if np.ptp(v) == 0:
        dens = np.exp(-0.5 * ((grid - v[0]) / (bandwidth or 0.02)) ** 2)
    else:
        kde = stats.gaussian_kde(v, bw_method=None if bandwidth is None else bandwidth / v.std(ddof=1))
        dens = kde(grid)
    padded = np.concatenate([[0.0], dens, [0.0]])
    peaks, _ = find_peaks(padded, prominence=min_prominence * dens.max())
    peaks = peaks - 1
    pos = grid[peaks]
    cuts = [grid[peaks[k] + np.argmin(dens[peaks[k]:peaks[k + 1] + 1])] for k in range(len(peaks) - 1)]
    edges = np.concatenate([[-np.inf], cuts, [np.inf]])
    masses = np.histogram(v, bins=edges)[0] / v.size
    return MarginalModes(pos, masses, grid, dens)


def time_averaged_marginal(cfg: ModelConfig, seed: int | None = None, n_iter: int | None = None, axis: int = 0,
                           snapshots: int = 100, realization: int = 0, **mode_kw) -> MarginalModes:
    """Modes of the opinion marginal on ``axis`` pooled over evenly spaced snapshots of one run."""
    cfg.validate()
    seed = cfg.run.seed if seed is None else int(seed)
    n_iter = cfg.run.n_iter if n_iter is None else int(n_iter)
    if snapshots < 1 or n_iter < snapshots:
        raise ContractError("need 1 <= snapshots <= n_iter")
    state = initial_state(cfg, seed, realization)
    key = stream_key(seed, realization)
    bounds = np.linspace(0, n_iter, snapshots + 1).astype(np.int64)
    pooled = []
    for a, b in zip(bounds[:-1], bounds[1:]):
        advance(state, cfg, key, int(b - a))
        pooled.append(state.opinions[:, axis].copy())
    return marginal_modes(np.concatenate(pooled), cfg.space.lower, cfg.space.upper, **mode_kw)


def write_manifest(path, payload: dict) -> None:
    import json

    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True, default=str))
