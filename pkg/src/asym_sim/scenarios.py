"""Named experiments: parameter sweeps, the government-crisis case study, its sensitivity grid."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .config import ConfigError, ModelConfig
from .engine import EnsembleResult, confidence_interval, map_runs, run, sample_schedule

# Sweepable parameters with their legal ranges.
SWEEP_RANGES = {
    "influencers.0.post_freq": (0.0, 1.0),
    "influencers.1.post_freq": (0.0, 1.0),
    "influencers.0.consistency": (0.0, 1.0),
    "influencers.1.consistency": (0.0, 1.0),
    "weights.stubbornness": (0.0, 1.0),
    "kernels.visibility.rho": (0.0, np.inf),
    "kernels.rho": (0.0, np.inf),
    "kernels.feedback.scale": (0.0, np.inf),
}

# alpha, beta, feedback scale, x_Conte (Politics), x_Salvini (Politics)
SENSITIVITY_TABLE = [
    (alpha, beta, scale, xc, xs)
    for scale in (8.0, 8.25, 8.5)
    for alpha, beta in ((0.25, 0.708), (0.45, 0.475))
    for xc in (0.74, 0.78)
    for xs in (0.01, 0.05)
]


@dataclass(frozen=True)
class SweepSpec:
    param: str
    values: tuple
    runs: int = 10
    tail_samples: int | None = None
    n_iter: int | None = None

    def validate(self) -> None:
        if not self.values:
            raise ConfigError("sweep.values", "at least one value is required")
        lo, hi = SWEEP_RANGES.get(self.param, (-np.inf, np.inf))
        for v in self.values:
            if not lo <= float(v) <= hi:
                raise ConfigError("sweep.values", f"{self.param}={v} outside [{lo}, {hi}]")
        if self.runs < 1:
            raise ConfigError("sweep.runs", "must be >= 1")


def sweep_overrides(cfg: ModelConfig, param: str, value) -> dict:
    """Overrides for one sweep point, keeping coupled parameters consistent."""
    ov = {param: value}
    if param.endswith(".post_freq") and cfg.n_influencers == 2:
        k = int(param.split(".")[1])
        ov[f"influencers.{1 - k}.post_freq"] = 1.0 - float(value)
    if param == "weights.stubbornness":
        ov["weights.beta"] = cfg.weights.beta
    return ov


@dataclass
class SweepResult:
    param: str
    values: list
    results: list[EnsembleResult]

    def rows(self):
        """Per-run rows ``(param, value, run, pi..., meanx...)`` in declared order."""
        out = []
        for v, res in zip(self.values, self.results):
            for k, (pi, mx) in enumerate(zip(res.per_run_pi, res.per_run_opinion)):
                out.append([self.param, v, k, *pi.tolist(), *mx.tolist()])
        return out

    def write_csv(self, path) -> None:
        n_inf = self.results[0].pi_mean.size
        dims = self.results[0].opinion_mean.size
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["param", "value", "run"] + [f"pi_{i}" for i in range(n_inf)] + [f"meanx_{j}" for j in range(dims)])
            for row in self.rows():
                w.writerow(row[:3] + [repr(float(x)) for x in row[3:]])

    def summary(self):
        return [(v, r.pi_mean, r.pi_ci, r.opinion_mean) for v, r in zip(self.values, self.results)]


def run_sweep(base: ModelConfig, sweep: SweepSpec, threads: int | None = None) -> SweepResult:
    """One ensemble per value (all runs of all values share the worker pool)."""
    sweep.validate()
    cfgs = [base.with_overrides(sweep_overrides(base, sweep.param, v)) for v in sweep.values]
    n_iter = sweep.n_iter or base.run.n_iter
    jobs = [(k, r) for k in range(len(cfgs)) for r in range(sweep.runs)]

    stride = base.run.sample_stride or max(1, n_iter // 1000)
    samples = sample_schedule(n_iter, stride)
    tail = sweep.tail_samples or base.run.tail_samples
    if tail > len(samples):
        raise ConfigError("sweep.tail_samples", f"exceeds the {len(samples)} samples of each run")

    # every (value, realization) pair goes through one pool; aggregation keeps declared order
    def one(job):
        k, r = job
        traj = run(cfgs[k], cfgs[k].run.seed, n_iter, realization=r, sample_steps=samples, keep_final=False)
        return traj.tail_mean(tail)

    parts = map_runs(one, jobs, threads)
    results = []
    for k in range(len(cfgs)):
        chunk = [parts[i] for i, (kk, _) in enumerate(jobs) if kk == k]
        per_pi = np.array([c[0] for c in chunk])
        per_x = np.array([c[1] for c in chunk])
        pm, pc = confidence_interval(per_pi)
        xm, xc = confidence_interval(per_x)
        streams = [(cfgs[k].run.seed, r) for r in range(sweep.runs)]
        results.append(EnsembleResult(pm, pc, xm, xc, per_pi, per_x, streams))
    return SweepResult(sweep.param, list(sweep.values), results)


@dataclass
class CaseStudyResult:
    weeks: np.ndarray
    per_run: np.ndarray  # (runs, weeks + 1) tracked influencer's pi at week boundaries
    mean: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    start_week: int
    end_week: int
    transient_pi: np.ndarray = field(default=None)

    @property
    def rise(self) -> np.ndarray:
        """Per-run change of pi across the crisis window."""
        return self.per_run[:, self.end_week] - self.per_run[:, self.start_week]

    @property
    def rise_flag(self) -> np.ndarray:
        return self.rise > 0

    @property
    def stays_above(self) -> np.ndarray:
        """After the window, pi never returns to its pre-crisis level."""
        after = self.per_run[:, self.end_week:]
        return np.all(after > self.per_run[:, [self.start_week]], axis=1)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["week", "pi_conte", "ci_low", "ci_high"])
            for k, m, lo, hi in zip(self.weeks, self.mean, self.ci_low, self.ci_high):
                w.writerow([int(k), repr(float(m)), repr(float(lo)), repr(float(hi))])


def run_case_study(cfg: ModelConfig, runs: int | None = None, seed: int | None = None,
                   threads: int | None = None) -> CaseStudyResult:
    """Weekly series of the tracked influencer's normalized popularity.

    The crisis is the config's phase schedule (built from the case-study
    timeline unless given explicitly). Week ``k`` is sampled at step
    ``transient + k * steps_per_week``.
    """
    cs = cfg.case_study
    if cs is None:
        raise ConfigError("case_study", "section required")
    cfg.validate()
    steps = cs.week_steps()
    samples = np.unique(np.concatenate([[cs.transient], steps]))
    runs = runs or cfg.run.runs
    seed = cfg.run.seed if seed is None else seed
    n_iter = max(cfg.run.n_iter, int(steps[-1]))

    def one(r):
        return run(cfg, seed, n_iter, realization=r, sample_steps=samples, keep_final=False)

    trajs = map_runs(one, range(runs), threads)
    idx = np.searchsorted(samples, steps)
    per_run = np.array([t.pi[idx, cs.tracked] for t in trajs])
    mean, half = confidence_interval(per_run)
    start_week = cs.crisis_start_week
    end_week = int(round((cs.crisis_end - cs.transient) / cs.steps_per_week))
    end_week = min(end_week, cs.weeks)
    return CaseStudyResult(np.arange(cs.weeks + 1), per_run, mean, mean - half, mean + half,
                           start_week, end_week, per_run[:, 0])


def sensitivity_config(base: ModelConfig, row) -> ModelConfig:
    alpha, beta, scale, xc, xs = row
    return base.with_overrides({
        "weights.alpha": alpha,
        "weights.beta": beta,
        "kernels.feedback.scale": scale,
        "influencers.0.opinion.0": xc,
        "influencers.1.opinion.0": xs,
    })


def run_sensitivity(base: ModelConfig, table=SENSITIVITY_TABLE, runs: int | None = None,
                    threads: int | None = None) -> list[CaseStudyResult]:
    """One case study per scenario row, in table order."""
    return [run_case_study(sensitivity_config(base, row), runs=runs, threads=threads) for row in table]


def write_sensitivity_csv(path, results: list[CaseStudyResult], table=SENSITIVITY_TABLE) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["scenario", "alpha", "beta", "theta_scale", "x_conte", "x_salvini", "week", "pi_conte",
                    "ci_low", "ci_high", "rise_flag"])
        for k, (row, res) in enumerate(zip(table, results), start=1):
            flag = int(res.mean[res.end_week] > res.mean[res.start_week])
            for wk, m, lo, hi in zip(res.weeks, res.mean, res.ci_low, res.ci_high):
                w.writerow([k, *row, int(wk), repr(float(m)), repr(float(lo)), repr(float(hi)), flag])
