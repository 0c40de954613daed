"""Statistics on influencers' post streams and follower counts."""

from __future__ import annotations

import csv
import warnings
from collections import Counter, defaultdict
from dataclasses import dataclass
from datetime import datetime

import numpy as np

from .model import ContractError


class AnalysisError(ContractError):
    """Input makes the requested statistic undefined."""


@dataclass(frozen=True)
class PostRecord:
    influencer_id: str
    timestamp: datetime
    topic: str | None = None


@dataclass(frozen=True)
class FollowerRecord:
    influencer_id: str
    month: str  # YYYY-MM
    followers: int


@dataclass(frozen=True)
class ConsistencyEstimate:
    reference_topic: str
    consistency: float
    tie: bool
    shares: dict


def consistency_estimate(posts) -> ConsistencyEstimate:
    """Most frequent topic label and its share of the labeled posts.

    Accepts ``PostRecord`` objects or bare labels; ``None``/empty labels and
    multi-label entries (containing ``|``) are skipped. Ties go to the
    lexicographically smallest label and set ``tie``.
    """
    labels = [p.topic if isinstance(p, PostRecord) else p for p in posts]
    labels = [t for t in labels if t and "|" not in t]
    if not labels:
        raise AnalysisError("no labeled posts: consistency cannot be estimated")
    counts = Counter(labels)
    top = max(counts.values())
    leaders = sorted(t for t, c in counts.items() if c == top)
    n = len(labels)
    return ConsistencyEstimate(leaders[0], top / n, len(leaders) > 1, {t: c / n for t, c in sorted(counts.items())})


def normalized_autocovariance(seq, max_lag: int) -> np.ndarray:
    """Lag sums divided by ``N - i``, over the divide-by-``N`` sample variance."""
    x = np.asarray(seq, dtype=float)
    n = x.size
    if max_lag < 0 or n <= max_lag:
        raise AnalysisError(f"sequence length {n} must exceed max_lag {max_lag}")
    d = x - x.mean()
    var = float(d @ d) / n
    if var == 0.0:
        raise AnalysisError("constant sequence: autocovariance undefined")
    out = np.empty(max_lag + 1)
    out[0] = 1.0
    for i in range(1, max_lag + 1):
        out[i] = float(d[:-i] @ d[i:]) / (n - i) / var
    return out


def independence_band(n: int) -> float:
    """``3 / sqrt(N)``: bound on non-zero-lag values for an i.i.d. sequence."""
    return 3.0 / np.sqrt(n)


def pearson(x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.size < 3:
        raise AnalysisError("need two aligned series of at least 3 points")
    dx, dy = x - x.mean(), y - y.mean()
    sx, sy = float(dx @ dx), float(dy @ dy)
    if sx == 0.0 or sy == 0.0:
        raise AnalysisError("constant series: correlation undefined")
    return float(np.clip((dx @ dy) / np.sqrt(sx * sy), -1.0, 1.0))


def posts_followers_pearson(monthly_posts, relative_growth) -> float:
    """Pearson r between monthly post counts and relative follower change."""
    return pearson(monthly_posts, relative_growth)


def relative_growth(followers: dict[str, int]) -> dict[str, float]:
    """``(F[next] - F[m]) / F[m]`` for each month ``m`` with a following month.

    Months are ``YYYY-MM`` keys; a month's count is read as its opening
    count. Months with zero opening followers are dropped with a warning.
    """
    months = sorted(followers)
    out = {}
    for a, b in zip(months, months[1:]):
        if followers[a] == 0:
            warnings.warn(f"month {a} starts with zero followers; excluded", stacklevel=2)
            continue
        out[a] = (followers[b] - followers[a]) / followers[a]
    return out


def indicator_sequences(posts, topics=None, reference: str | None = None) -> dict[str, np.ndarray]:
    """Chronological 0/1 sequences, one per secondary topic.

    ``reference`` defaults to the consistency estimate; ``topics`` to every
    label seen. The reference topic is excluded.
    """
    posts = sorted(posts, key=lambda p: p.timestamp)
    labels = [p.topic for p in posts]
    if reference is None:
        reference = consistency_estimate(posts).reference_topic
    if topics is None:
        topics = sorted({t for t in labels if t})
    return {t: np.array([1 if lab == t else 0 for lab in labels], dtype=np.int8) for t in topics if t != reference}


def monthly_counts(posts) -> dict[str, int]:
    c: Counter = Counter()
    for p in posts:
        c[p.timestamp.strftime("%Y-%m")] += 1
    return dict(c)


def read_posts(path) -> dict[str, list[PostRecord]]:
    by_inf: dict[str, list[PostRecord]] = defaultdict(list)
    with open(path, newline="", encoding="utf-8") as fh:
        for k, row in enumerate(csv.DictReader(fh)):
            try:
                ts = datetime.fromisoformat(row["timestamp"].strip().replace("Z", "+00:00"))
            except (KeyError, ValueError) as exc:
                raise AnalysisError(f"posts row {k + 2}: bad timestamp ({exc})") from None
            topic = (row.get("topic") or "").strip() or None
            by_inf[row["influencer_id"].strip()].append(PostRecord(row["influencer_id"].strip(), ts, topic))
    for v in by_inf.values():
        v.sort(key=lambda p: p.timestamp)
    return dict(by_inf)


def read_followers(path) -> dict[str, dict[str, int]]:
    out: dict[str, dict[str, int]] = defaultdict(dict)
    with open(path, newline="", encoding="utf-8") as fh:
        for k, row in enumerate(csv.DictReader(fh)):
            inf, month = row["influencer_id"].strip(), row["month"].strip()
            try:
                datetime.strptime(month, "%Y-%m")
                n = int(row["followers"])
            except ValueError as exc:
                raise AnalysisError(f"followers row {k + 2}: {exc}") from None
            if n < 0:
                raise AnalysisError(f"followers row {k + 2}: negative count")
            if month in out[inf]:
                raise AnalysisError(f"followers: duplicate record for ({inf}, {month})")
            out[inf][month] = n
    return dict(out)


def analyze_files(posts_path, followers_path=None, max_lag: int = 20, out_dir=None) -> dict:
    """Consistency, autocovariances and (optionally) posts/followers correlation per influencer."""
    from pathlib import Path

    posts = read_posts(posts_path)
    cons_rows, acov_rows, pear_rows = [], [], []
    for inf in sorted(posts):
        try:
            est = consistency_estimate(posts[inf])
        except AnalysisError as exc:
            warnings.warn(f"{inf}: {exc}", stacklevel=2)
            continue
        cons_rows.append([inf, est.reference_topic, est.consistency, int(est.tie), len(posts[inf])])
        for topic, seq in indicator_sequences(posts[inf], reference=est.reference_topic).items():
            lag = min(max_lag, len(seq) - 1)
            try:
                vals = normalized_autocovariance(seq, lag)
            except AnalysisError:
                continue
            acov_rows.extend([inf, topic, i, v] for i, v in enumerate(vals))
    if followers_path is not None:
        fol = read_followers(followers_path)
        for inf in sorted(set(fol) & set(posts)):
            growth = relative_growth(fol[inf])
            counts = monthly_counts(posts[inf])
            months = sorted(growth)
            try:
                r = posts_followers_pearson([counts.get(m, 0) for m in months], [growth[m] for m in months])
            except AnalysisError as exc:
                warnings.warn(f"{inf}: {exc}", stacklevel=2)
                continue
            pear_rows.append([inf, len(months), r])
    result = {"consistency": cons_rows, "acov": acov_rows, "pearson": pear_rows}
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write(out / "consistency.csv", ["influencer_id", "reference_topic", "consistency", "tie", "n_posts"], cons_rows)
        _write(out / "acov.csv", ["influencer_id", "topic", "lag", "value"], acov_rows)
        if followers_path is not None:
            _write(out / "pearson.csv", ["influencer_id", "months", "r"], pear_rows)
    return result


def _write(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
