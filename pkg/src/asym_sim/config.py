"""Scenario configuration: JSON schema, defaults, validation, overrides.

A config file has the sections ``space``, ``influencers``, ``population``,
``weights``, ``kernels``, ``run``, ``schedule`` and ``case_study``; every
section and every field is optional. Omitted fields take the reference
two-influencer scenario defaults (two antipodal influencers, 10 000 users
with Beta(10, 10) prejudices, alpha=0.05, beta=0.93, 10^5 posts).
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

from .model import (
    ContractError,
    InfluencerSpec,
    KernelSpec,
    OpinionSpace,
    UpdateWeights,
    check_influencers,
)


class ConfigError(ContractError):
    """Schema or invariant violation, tagged with the offending field path."""

    def __init__(self, path: str, message: str):
        super().__init__(message if message.startswith(path) else f"{path}: {message}")
        self.path = path


KEY_ALIASES = {
    "kernels.rho": "kernels.visibility.rho",
    "kernels.feedback_scale": "kernels.feedback.scale",
    "weights.stubbornness": "weights.stubbornness",
}

_SECTIONS = ("space", "influencers", "population", "weights", "kernels", "run", "schedule", "case_study")


@dataclass(frozen=True)
class Phase:
    start: int
    end: int
    topics: tuple[int | None, ...]


@dataclass(frozen=True)
class PhaseSchedule:
    """Windows ``[start, end)`` during which influencers' topics are forced."""

    phases: tuple[Phase, ...] = ()

    def validate(self, n_iter: int, n_influencers: int, dims: int) -> None:
        prev_end = 0
        for k, ph in enumerate(sorted(self.phases, key=lambda p: p.start)):
            path = f"schedule.phases[{k}]"
            if not 0 <= ph.start <= ph.end <= n_iter:
                raise ConfigError(path, f"window [{ph.start}, {ph.end}) outside [0, {n_iter})")
            if ph.start < prev_end:
                raise ConfigError(path, "phases overlap")
            if len(ph.topics) != n_influencers:
                raise ConfigError(path + ".topics", f"expected {n_influencers} entries")
            for t in ph.topics:
                if t is not None and not 0 <= t < dims:
                    raise ConfigError(path + ".topics", f"topic {t} outside [0, {dims})")
            prev_end = ph.end

    def as_arrays(self, n_influencers: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        ph = sorted(self.phases, key=lambda p: p.start)
        starts = np.array([p.start for p in ph], dtype=np.int64)
        ends = np.array([p.end for p in ph], dtype=np.int64)
        topics = np.full((len(ph), n_influencers), -1, dtype=np.int64)
        for k, p in enumerate(ph):
            for i, t in enumerate(p.topics):
                if t is not None:
                    topics[k, i] = t
        return starts, ends, topics


@dataclass(frozen=True)
class PopulationSpec:
    n_users: int = 10_000
    init: str = "beta"
    beta_shape: tuple[tuple[float, float], ...] = ((10.0, 10.0),)
    point: tuple[float, ...] | None = None
    prejudice_mode: str = "equal"

    def shape_for_axis(self, axis: int) -> tuple[float, float]:
        return self.beta_shape[axis] if len(self.beta_shape) > 1 else self.beta_shape[0]


@dataclass(frozen=True)
class RunSpec:
    n_iter: int = 100_000
    seed: int = 0
    sample_stride: int | None = None
    runs: int = 10
    tail_samples: int = 100
    lam: float = 1.0

    @property
    def stride(self) -> int:
        if self.sample_stride:
            return int(self.sample_stride)
        return max(1, self.n_iter // 1000)


@dataclass(frozen=True)
class CaseStudySpec:
    transient: int = 10_000
    crisis_length: int = 550
    steps_per_week: int = 110
    crisis_start_week: int = 3
    weeks: int = 11
    crisis_topic: int = 1
    tracked: int = 0

    @property
    def crisis_start(self) -> int:
        return self.transient + self.crisis_start_week * self.steps_per_week

    @property
    def crisis_end(self) -> int:
        return self.crisis_start + self.crisis_length

    @property
    def observation_end(self) -> int:
        return self.transient + self.weeks * self.steps_per_week

    def week_steps(self) -> np.ndarray:
        return self.transient + self.steps_per_week * np.arange(self.weeks + 1, dtype=np.int64)


@dataclass(frozen=True)
class ModelConfig:
    space: OpinionSpace = field(default_factory=lambda: OpinionSpace(dims=2))
    influencers: tuple[InfluencerSpec, ...] = ()
    population: PopulationSpec = field(default_factory=PopulationSpec)
    weights: UpdateWeights = field(default_factory=UpdateWeights)
    kernels: KernelSpec = field(default_factory=KernelSpec)
    run: RunSpec = field(default_factory=RunSpec)
    schedule: PhaseSchedule = field(default_factory=PhaseSchedule)
    case_study: CaseStudySpec | None = None

    @property
    def n_influencers(self) -> int:
        return len(self.influencers)

    def validate(self) -> "ModelConfig":
        try:
            check_influencers(list(self.influencers), self.space)
        except ConfigError:
            raise
        except ContractError as exc:
            raise ConfigError(_guess_influencer_path(str(exc)), str(exc)) from None
        pop = self.population
        if pop.n_users < 1:
            raise ConfigError("population.n_users", "must be >= 1")
        if pop.init == "point":
            if pop.point is None or len(pop.point) != self.space.dims:
                raise ConfigError("population.point", f"needs {self.space.dims} coordinates")
            if not self.space.contains(pop.point):
                raise ConfigError("population.point", "outside the opinion box")
        elif pop.init == "beta":
            if len(pop.beta_shape) not in (1, self.space.dims):
                raise ConfigError("population.beta_shape", "give one shape or one per axis")
            for a, b in pop.beta_shape:
                if a <= 0 or b <= 0:
                    raise ConfigError("population.beta_shape", "shape parameters must be > 0")
        else:
            raise ConfigError("population.init", f"unknown init {pop.init!r} (use 'beta' or 'point')")
        if pop.prejudice_mode not in ("equal", "independent"):
            raise ConfigError("population.prejudice_mode", "must be 'equal' or 'independent'")
        if self.run.n_iter < 0:
            raise ConfigError("run.n_iter", "must be >= 0")
        if self.run.seed < 0:
            raise ConfigError("run.seed", "must be >= 0")
        if self.run.runs < 1:
            raise ConfigError("run.runs", "must be >= 1")
        if self.run.tail_samples < 1:
            raise ConfigError("run.tail_samples", "must be >= 1")
        if self.run.lam <= 0:
            raise ConfigError("run.lambda", "must be > 0")
        self.schedule.validate(max(self.run.n_iter, 0), self.n_influencers, self.space.dims)
        if self.case_study is not None:
            cs = self.case_study
            if cs.observation_end > self.run.n_iter or cs.crisis_end > self.run.n_iter:
                raise ConfigError("case_study", f"timeline ends after run.n_iter={self.run.n_iter}")
            if not 0 <= cs.tracked < self.n_influencers:
                raise ConfigError("case_study.tracked", "not an influencer index")
            if not 0 <= cs.crisis_topic < self.space.dims:
                raise ConfigError("case_study.crisis_topic", "not an axis index")
        return self

    def to_dict(self) -> dict[str, Any]:
        pop = self.population
        d = {
            "space": {"dims": self.space.dims, "lower": self.space.lower, "upper": self.space.upper},
            "influencers": [
                {
                    "opinion": list(s.opinion),
                    "reference_dir": s.reference_dir,
                    "consistency": s.consistency,
                    "post_freq": s.post_freq,
                    "initial_popularity": s.initial_popularity,
                }
                for s in self.influencers
            ],
            "population": {
                "n_users": pop.n_users,
                "init": pop.init,
                "beta_shape": [list(s) for s in pop.beta_shape],
                "point": None if pop.point is None else list(pop.point),
                "prejudice_mode": pop.prejudice_mode,
            },
            "weights": {"alpha": self.weights.alpha, "beta": self.weights.beta, "gamma": self.weights.gamma},
            "kernels": {
                "visibility": {"family": self.kernels.visibility, "rho": self.kernels.rho},
                "feedback": {"family": self.kernels.feedback, "scale": self.kernels.feedback_scale},
            },
            "run": {
                "n_iter": self.run.n_iter,
                "seed": self.run.seed,
                "sample_stride": self.run.sample_stride,
                "runs": self.run.runs,
                "tail_samples": self.run.tail_samples,
                "lambda": self.run.lam,
            },
            "schedule": {
                "phases": [{"start": p.start, "end": p.end, "topics": list(p.topics)} for p in self._explicit_phases()]
            },
            "case_study": None,
        }
        if self.case_study is not None:
            cs = self.case_study
            d["case_study"] = {
                "transient": cs.transient,
                "crisis_length": cs.crisis_length,
                "steps_per_week": cs.steps_per_week,
                "crisis_start_week": cs.crisis_start_week,
                "weeks": cs.weeks,
                "crisis_topic": cs.crisis_topic,
                "tracked": cs.tracked,
            }
        return d

    def _explicit_phases(self) -> tuple[Phase, ...]:
        # the crisis window derived from the case-study timeline is not written out,
        # so that overriding the timeline moves the window with it
        if self.case_study is not None and self.schedule.phases == (crisis_phase(self.case_study, self.n_influencers),):
            return ()
        return self.schedule.phases

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def with_overrides(self, overrides: dict[str, Any]) -> "ModelConfig":
        d = self.to_dict()
        for key, value in overrides.items():
            set_path(d, key, value)
        return from_dict(d)


def crisis_phase(cs: CaseStudySpec, n_influencers: int) -> Phase:
    """Every influencer forced onto the crisis topic during the crisis window."""
    return Phase(cs.crisis_start, cs.crisis_end, tuple([cs.crisis_topic] * n_influencers))


def _guess_influencer_path(msg: str) -> str:
    if "post_freq" in msg:
        return "influencers[].post_freq"
    if msg.startswith("influencers["):
        return msg.split(":")[0].split(" ")[0]
    return "influencers"


def _section(raw: dict, name: str) -> dict:
    sec = raw.get(name)
    if sec is None:
        return {}
    if not isinstance(sec, dict):
        raise ConfigError(name, "must be an object")
    return sec


def _num(sec: dict, key: str, default, path: str, kind=float):
    v = sec.get(key, default)
    if v is None:
        return None
    try:
        if kind is int:
            if isinstance(v, bool) or float(v) != int(v):
                raise ValueError
            return int(v)
        return float(v)
    except (TypeError, ValueError):
        raise ConfigError(f"{path}.{key}", f"expected {kind.__name__}, got {v!r}") from None


def _default_influencers(dims: int) -> list[dict]:
    return [
        {"opinion": [0.0] * dims, "reference_dir": 0},
        {"opinion": [1.0] * dims, "reference_dir": 1 if dims > 1 else 0},
    ]


def from_dict(raw: dict[str, Any]) -> ModelConfig:
    """Build and validate a config, filling defaults for every omitted field."""
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    unknown = set(raw) - set(_SECTIONS)
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown section")

    sp = _section(raw, "space")
    dims = _num(sp, "dims", 2, "space", int)
    try:
        space = OpinionSpace(dims=dims, lower=_num(sp, "lower", 0.0, "space"), upper=_num(sp, "upper", 1.0, "space"))
    except ContractError as exc:
        raise ConfigError("space", str(exc)) from None

    raw_inf = raw.get("influencers")
    if raw_inf is None:
        raw_inf = _default_influencers(dims)
    if not isinstance(raw_inf, list) or not raw_inf:
        raise ConfigError("influencers", "must be a non-empty list")
    n_inf = len(raw_inf)
    fallback = _default_influencers(dims) if n_inf == 2 else []
    influencers = []
    for k, item in enumerate(raw_inf):
        path = f"influencers[{k}]"
        if not isinstance(item, dict):
            raise ConfigError(path, "must be an object")
        # a two-influencer list inherits the default positions for omitted fields
        if fallback:
            item = {**fallback[k], **item}
        opinion = item.get("opinion")
        if opinion is None:
            raise ConfigError(path + ".opinion", "required")
        opinion = np.atleast_1d(np.asarray(opinion, dtype=float))
        if opinion.size == 1 and dims > 1:
            opinion = np.full(dims, float(opinion[0]))
        try:
            influencers.append(
                InfluencerSpec(
                    opinion=tuple(opinion),
                    reference_dir=_num(item, "reference_dir", 0, path, int),
                    consistency=_num(item, "consistency", 0.8, path),
                    post_freq=_num(item, "post_freq", 1.0 / n_inf, path),
                    initial_popularity=_num(item, "initial_popularity", 100.0, path),
                )
            )
        except ContractError as exc:
            field_name = next((f for f in ("reference_dir", "consistency", "post_freq", "initial_popularity")
                               if f in str(exc)), "opinion")
            raise ConfigError(f"{path}.{field_name}", str(exc)) from None

    po = _section(raw, "population")
    shape = po.get("beta_shape", [10.0, 10.0])
    shape = np.asarray(shape, dtype=float)
    if shape.ndim == 1:
        if shape.size != 2:
            raise ConfigError("population.beta_shape", "expected [a, b] or a list of [a, b]")
        shape = shape[None, :]
    if shape.ndim != 2 or shape.shape[1] != 2:
        raise ConfigError("population.beta_shape", "expected [a, b] or a list of [a, b]")
    point = po.get("point")
    if point is not None:
        point = np.atleast_1d(np.asarray(point, dtype=float))
        if point.size == 1 and dims > 1:
            point = np.full(dims, float(point[0]))
        point = tuple(float(v) for v in point)
    population = PopulationSpec(
        n_users=_num(po, "n_users", 10_000, "population", int),
        init=str(po.get("init", "point" if point is not None and "init" not in po else "beta")),
        beta_shape=tuple((float(a), float(b)) for a, b in shape),
        point=point,
        prejudice_mode=str(po.get("prejudice_mode", "equal")),
    )

    we = _section(raw, "weights")
    try:
        if "stubbornness" in we and we["stubbornness"] is not None:
            weights = UpdateWeights.from_stubbornness(
                _num(we, "stubbornness", None, "weights"), _num(we, "beta", 0.93, "weights")
            )
        else:
            weights = UpdateWeights(
                alpha=_num(we, "alpha", 0.05, "weights"),
                beta=_num(we, "beta", 0.93, "weights"),
                gamma=_num(we, "gamma", None, "weights"),
            )
    except ContractError as exc:
        raise ConfigError("weights", str(exc)) from None

    ke = _section(raw, "kernels")
    vis = ke.get("visibility", {}) or {}
    fb = ke.get("feedback", {}) or {}
    if isinstance(fb, str):
        fb = {"family": fb}
    try:
        kernels = KernelSpec(
            rho=_num(vis, "rho", ke.get("rho", 0.0), "kernels.visibility"),
            visibility=str(vis.get("family", "gaussian")),
            feedback=str(fb.get("family", "linear")),
            feedback_scale=_num(fb, "scale", 1.0, "kernels.feedback"),
        )
    except ContractError as exc:
        raise ConfigError("kernels", str(exc)) from None

    ru = _section(raw, "run")
    run = RunSpec(
        n_iter=_num(ru, "n_iter", 100_000, "run", int),
        seed=_num(ru, "seed", 0, "run", int),
        sample_stride=_num(ru, "sample_stride", None, "run", int),
        runs=_num(ru, "runs", 10, "run", int),
        tail_samples=_num(ru, "tail_samples", 100, "run", int),
        lam=_num(ru, "lambda", 1.0, "run"),
    )
    if run.sample_stride is not None and run.sample_stride < 1:
        raise ConfigError("run.sample_stride", "must be >= 1")

    sc = _section(raw, "schedule")
    phases = []
    for k, ph in enumerate(sc.get("phases", []) or []):
        path = f"schedule.phases[{k}]"
        topics = ph.get("topics")
        if topics is None:
            raise ConfigError(path + ".topics", "required")
        phases.append(
            Phase(
                start=_num(ph, "start", None, path, int),
                end=_num(ph, "end", None, path, int),
                topics=tuple(None if t is None else int(t) for t in topics),
            )
        )

    cs_raw = raw.get("case_study")
    case_study = None
    if cs_raw:
        defaults = CaseStudySpec()
        case_study = CaseStudySpec(
            **{k: _num(cs_raw, k, getattr(defaults, k), "case_study", int) for k in defaults.__dataclass_fields__}
        )
        if not phases:
            phases.append(crisis_phase(case_study, n_inf))

    cfg = ModelConfig(
        space=space,
        influencers=tuple(influencers),
        population=population,
        weights=weights,
        kernels=kernels,
        run=run,
        schedule=PhaseSchedule(tuple(phases)),
        case_study=case_study,
    )
    return cfg.validate()


def load_config(path: str | Path) -> ModelConfig:
    """Read a JSON config file; bare names resolve to the bundled configs."""
    p = Path(path)
    if not p.exists():
        name = p.name if p.suffix == ".json" else p.name + ".json"
        bundled = resources.files("asym_sim") / "configs" / name
        if bundled.is_file():
            return from_dict(json.loads(bundled.read_text()))
        raise FileNotFoundError(f"config file not found: {path}")
    try:
        raw = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("<root>", f"invalid JSON: {exc}") from None
    return from_dict(raw)


def bundled_config(name: str) -> ModelConfig:
    return load_config(name)


def parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def set_path(d: dict, key: str, value: Any) -> None:
    """Assign ``value`` at a dotted path; list indices are plain integers."""
    key = KEY_ALIASES.get(key, key)
    parts = key.split(".")
    cur: Any = d
    for k, part in enumerate(parts[:-1]):
        nxt_is_index = parts[k + 1].isdigit()
        if isinstance(cur, list):
            idx = int(part)
            if idx >= len(cur):
                raise ConfigError(key, f"index {idx} out of range")
            cur = cur[idx]
            continue
        if part not in cur or cur[part] is None:
            cur[part] = [] if nxt_is_index else {}
        cur = cur[part]
    last = parts[-1]
    if isinstance(cur, list):
        idx = int(last)
        if idx >= len(cur):
            raise ConfigError(key, f"index {idx} out of range")
        cur[idx] = value
    else:
        if parts[0] == "weights" and last in ("alpha", "beta", "gamma", "stubbornness"):
            # re-derive the dependent weight when only one is overridden
            if last == "stubbornness":
                cur.pop("alpha", None)
                cur.pop("gamma", None)
            elif last == "alpha":
                cur.pop("gamma", None)
                cur.pop("stubbornness", None)
            elif last == "beta":
                # alpha is kept unless the weights are given through stubbornness
                cur.pop("gamma", None)
        cur[last] = value


def apply_overrides(cfg: ModelConfig, pairs: list[str]) -> ModelConfig:
    """Apply ``key=value`` strings, then re-validate."""
    overrides = {}
    for item in pairs:
        if "=" not in item:
            raise ConfigError(item, "override must look like key=value")
        k, v = item.split("=", 1)
        overrides[k.strip()] = parse_value(v.strip())
    return cfg.with_overrides(overrides)


def deep_copy_dict(cfg: ModelConfig) -> dict:
    return copy.deepcopy(cfg.to_dict())
