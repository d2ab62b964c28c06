"""Retrieval evaluation: gold labels from transcriptions, term-weighted
values, per-query statistics, one-sided paired t-tests, and report emission.

Trials are item-level: a (query, item) pair is a target trial when the query
token sequence occurs anywhere in the item transcription. P_fa for a query is
therefore false alarms over non-target items, not over speech duration; the
emitted reports state this definition in their header.
"""

from __future__ import annotations

import json
import math
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dtwsearch import DetectionScore
from .errors import DegenerateVarianceError, EvaluationError


@dataclass
class EvalConfig:
    cost_fa: float = 1.0
    cost_miss: float = 10.0
    p_target: float = 0.0278
    # Per-query MTWVs (for t-tests) use each query's own optimal threshold by
    # default; False evaluates every query at the pooled optimum instead.
    per_query_threshold: bool = True

    def __post_init__(self) -> None:
        if self.cost_fa <= 0 or self.cost_miss <= 0:
            raise ValueError("costs must be positive")
        if not 0 < self.p_target < 1:
            raise ValueError(f"p_target must be in (0, 1), got {self.p_target}")

    @property
    def beta(self) -> float:
        return (self.cost_fa / self.cost_miss) * (1.0 / self.p_target - 1.0)


@dataclass
class GoldLabelSet:
    """Boolean occurrence label for every (query, item) pair."""

    labels: dict[tuple[str, str], bool]
    counts: dict[str, int]
    query_ids: list[str]
    item_ids: list[str]
    diagnostics: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        expected = len(self.query_ids) * len(self.item_ids)
        if len(self.labels) != expected:
            raise ValueError(
                f"gold labels cover {len(self.labels)} pairs, expected {expected}"
            )


@dataclass
class TwvPoint:
    threshold: float
    p_miss: float
    p_fa: float
    twv: float


@dataclass
class TTestResult:
    t_value: float
    degrees_of_freedom: int
    p_value_one_sided: float


@dataclass
class MtwvResult:
    mtwv: float
    optimal_threshold: float
    curve: list[TwvPoint]
    per_query_mtwv: dict[str, float]
    excluded_queries: list[str] = field(default_factory=list)


def _normalize_tokens(text: str) -> list[str]:
    folded = text.casefold()
    cleaned = "".join(
        " " if unicodedata.category(ch).startswith("P") else ch for ch in folded
    )
    return cleaned.split()


def _occurs(query_tokens: list[str], item_tokens: list[str]) -> bool:
    n = len(query_tokens)
    if n == 0 or len(item_tokens) < n:
        return False
    return any(
        item_tokens[i : i + n] == query_tokens
        for i in range(len(item_tokens) - n + 1)
    )


def make_gold(queries, items) -> GoldLabelSet:
    """Label each pair by whole-word contiguous occurrence of the query's
    token sequence in the item's token sequence (case-folded, punctuation
    stripped). Pairs involving an empty-after-normalization transcription are
    labeled false and reported in diagnostics."""
    diagnostics: list[str] = []

    def tokens_of(entry, role: str) -> list[str]:
        toks = _normalize_tokens(entry.transcription)
        if not toks:
            diagnostics.append(
                f"{role} {entry.id}: transcription empty after normalization"
            )
        return toks

    query_tokens = {q.id: tokens_of(q, "query") for q in queries}
    item_tokens = {t.id: tokens_of(t, "item") for t in items}

    labels: dict[tuple[str, str], bool] = {}
    counts: dict[str, int] = {}
    for q in queries:
        count = 0
        for t in items:
            hit = _occurs(query_tokens[q.id], item_tokens[t.id])
            labels[(q.id, t.id)] = hit
            count += int(hit)
        counts[q.id] = count
    return GoldLabelSet(
        labels=labels,
        counts=counts,
        query_ids=[q.id for q in queries],
        item_ids=[t.id for t in items],
        diagnostics=diagnostics,
    )


def read_gold_tsv(path: str | Path) -> GoldLabelSet:
    """Load an explicit gold grid: `query<TAB>item<TAB>label(0|1)` rows."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    labels: dict[tuple[str, str], bool] = {}
    for lineno, line in enumerate(lines, start=1):
        if not line.strip() or (lineno == 1 and line.startswith("query\t")):
            continue
        cols = line.split("\t")
        if len(cols) != 3 or cols[2] not in ("0", "1"):
            raise ValueError(f"{path}:{lineno}: expected `query<TAB>item<TAB>0|1`")
        labels[(cols[0], cols[1])] = cols[2] == "1"
    query_ids = sorted({q for q, _ in labels})
    item_ids = sorted({i for _, i in labels})
    counts = {
        q: sum(1 for i in item_ids if labels.get((q, i), False)) for q in query_ids
    }
    return GoldLabelSet(
        labels=labels, counts=counts, query_ids=query_ids, item_ids=item_ids
    )


def _split_scores(
    scores: list[DetectionScore], gold: GoldLabelSet
) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Per query: (sorted target-pair scores, sorted non-target-pair scores)."""
    score_map = {(s.query_id, s.item_id): s.score for s in scores}
    if set(score_map) != set(gold.labels):
        missing = sorted(set(gold.labels) - set(score_map))[:5]
        extra = sorted(set(score_map) - set(gold.labels))[:5]
        raise ValueError(
            f"scores and gold labels cover different pair sets "
            f"(missing {missing}, unexpected {extra})"
        )
    split = {}
    for q in gold.query_ids:
        true_scores = []
        false_scores = []
        for i in gold.item_ids:
            (true_scores if gold.labels[(q, i)] else false_scores).append(
                score_map[(q, i)]
            )
        split[q] = (np.sort(true_scores), np.sort(false_scores))
    return split


def _rates(
    true_sorted: np.ndarray, false_sorted: np.ndarray, thresholds: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Miss and false-alarm rates at each threshold, detection rule score >= t."""
    misses = np.searchsorted(true_sorted, thresholds, side="left")
    p_miss = misses / len(true_sorted)
    if len(false_sorted):
        fa = len(false_sorted) - np.searchsorted(false_sorted, thresholds, side="left")
        p_fa = fa / len(false_sorted)
    else:
        p_fa = np.zeros_like(thresholds)
    return p_miss, p_fa


def _sweep_thresholds(values: np.ndarray) -> np.ndarray:
    """Distinct observed scores plus one sentinel above the maximum, so the
    curve always contains the detect-nothing operating point."""
    distinct = np.unique(values)
    return np.append(distinct, distinct[-1] + 1.0)


def twv_curve(
    scores: list[DetectionScore], gold: GoldLabelSet, cfg: EvalConfig | None = None
) -> list[TwvPoint]:
    """Term-weighted value at every distinct score threshold.

    Per included query (those with at least one target item): p_miss over
    targets, p_fa over non-targets; pooled rates are unweighted means.
    """
    if cfg is None:
        cfg = EvalConfig()
    split = _split_scores(scores, gold)
    included = [q for q in gold.query_ids if gold.counts[q] > 0]
    if not included:
        raise EvaluationError("no query has any true occurrence; TWV is undefined")

    thresholds = _sweep_thresholds(np.array([s.score for s in scores]))
    p_miss_sum = np.zeros(len(thresholds))
    p_fa_sum = np.zeros(len(thresholds))
    for q in included:
        p_miss, p_fa = _rates(*split[q], thresholds)
        p_miss_sum += p_miss
        p_fa_sum += p_fa
    p_miss_mean = p_miss_sum / len(included)
    p_fa_mean = p_fa_sum / len(included)
    twv = 1.0 - p_miss_mean - cfg.beta * p_fa_mean
    return [
        TwvPoint(float(t), float(m), float(f), float(v))
        for t, m, f, v in zip(thresholds, p_miss_mean, p_fa_mean, twv)
    ]


def mtwv(
    curve: list[TwvPoint],
    scores: list[DetectionScore],
    gold: GoldLabelSet,
    cfg: EvalConfig | None = None,
) -> MtwvResult:
    """Maximum TWV over the sweep (clamped at 0) plus per-query maxima."""
    if cfg is None:
        cfg = EvalConfig()
    if not curve:
        raise ValueError("curve must be nonempty")
    twvs = np.array([p.twv for p in curve])
    best = int(np.argmax(twvs))  # thresholds ascend, so this is the smallest
    result = max(0.0, float(twvs[best]))

    split = _split_scores(scores, gold)
    included = [q for q in gold.query_ids if gold.counts[q] > 0]
    per_query: dict[str, float] = {}
    for q in included:
        true_sorted, false_sorted = split[q]
        if cfg.per_query_threshold:
            thresholds = _sweep_thresholds(np.concatenate([true_sorted, false_sorted]))
        else:
            thresholds = np.array([curve[best].threshold])
        p_miss, p_fa = _rates(true_sorted, false_sorted, thresholds)
        q_twv = 1.0 - p_miss - cfg.beta * p_fa
        per_query[q] = max(0.0, float(q_twv.max()))

    return MtwvResult(
        mtwv=result,
        optimal_threshold=curve[best].threshold,
        curve=curve,
        per_query_mtwv=per_query,
        excluded_queries=[q for q in gold.query_ids if gold.counts[q] == 0],
    )


def evaluate_scores(
    scores: list[DetectionScore], gold: GoldLabelSet, cfg: EvalConfig | None = None
) -> MtwvResult:
    """Convenience: full sweep and MTWV in one call."""
    if cfg is None:
        cfg = EvalConfig()
    curve = twv_curve(scores, gold, cfg)
    return mtwv(curve, scores, gold, cfg)


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    max_iterations = 300
    eps = 3e-16
    tiny = 1e-300
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, max_iterations + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            break
    return h


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) via the continued fraction, using the symmetry
    I_x(a,b) = 1 - I_{1-x}(b,a) for fast convergence on either side."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_sf(t: float, df: int) -> float:
    """One-sided upper-tail probability P(T_df > t)."""
    if df < 1:
        raise ValueError(f"degrees of freedom must be >= 1, got {df}")
    if t < 0:
        return 1.0 - student_t_sf(-t, df)
    x = df / (df + t * t)
    return 0.5 * regularized_incomplete_beta(df / 2.0, 0.5, x)


def paired_t_test_one_sided(a, b) -> TTestResult:
    """Paired t-test of H1: mean(a - b) > 0; inputs aligned by query."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"paired samples must be equal-length vectors, got {a.shape} vs {b.shape}")
    n = len(a)
    if n < 2:
        raise ValueError(f"need at least 2 pairs, got {n}")
    d = a - b
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    df = n - 1
    if sd == 0.0:
        if mean == 0.0:
            return TTestResult(t_value=0.0, degrees_of_freedom=df, p_value_one_sided=0.5)
        raise DegenerateVarianceError(
            f"paired differences are all equal to {mean}; t is undefined"
        )
    # Spread at rounding-noise level around a nonzero mean is the same
    # degeneracy: all differences are equal up to float error.
    if sd < 1e-9 * abs(mean):
        raise DegenerateVarianceError(
            f"paired differences have negligible spread ({sd:g}) around "
            f"nonzero mean {mean:g}; t is undefined"
        )
    t = mean / (sd / math.sqrt(n))
    return TTestResult(
        t_value=t,
        degrees_of_freedom=df,
        p_value_one_sided=student_t_sf(t, df),
    )


@dataclass
class ComparisonRecord:
    """One directional t-test between two systems' per-query MTWVs."""

    system_a: str
    system_b: str
    hypothesis: str  # e.g. "mfcc39 > ls960-t11"
    result: TTestResult


TRIAL_DEFINITION = (
    "item-level occurrence trials; per query, P_fa = false alarms / non-target items"
)


def _result_payload(result: MtwvResult, cfg: EvalConfig) -> dict:
    values = list(result.per_query_mtwv.values())
    return {
        "mtwv": result.mtwv,
        "optimal_threshold": result.optimal_threshold,
        "num_queries_scored": len(result.per_query_mtwv),
        "excluded_queries": result.excluded_queries,
        "per_query_mtwv": dict(sorted(result.per_query_mtwv.items())),
        "per_query_mean": float(np.mean(values)) if values else 0.0,
        "per_query_sd": float(np.std(values, ddof=1)) if len(values) > 1 else 0.0,
        "per_query_threshold": cfg.per_query_threshold,
        "curve": [
            {"threshold": p.threshold, "p_miss": p.p_miss, "p_fa": p.p_fa, "twv": p.twv}
            for p in result.curve
        ],
    }


def write_report(
    results: dict[str, MtwvResult],
    comparisons: list[ComparisonRecord],
    json_path: str | Path,
    csv_path: str | Path,
    dataset_id: str = "",
    cfg: EvalConfig | None = None,
) -> None:
    """Emit the JSON report and the CSV summary (mean, sd, t, p columns)."""
    if cfg is None:
        cfg = EvalConfig()
    if not results:
        raise ValueError("need at least one system to report")

    report = {
        "dataset_id": dataset_id,
        "trial_definition": TRIAL_DEFINITION,
        "costs": {"false_alarm": cfg.cost_fa, "miss": cfg.cost_miss},
        "p_target": cfg.p_target,
        "beta": cfg.beta,
        "systems": {
            tag: _result_payload(result, cfg) for tag, result in sorted(results.items())
        },
        "comparisons": [
            {
                "system_a": c.system_a,
                "system_b": c.system_b,
                "hypothesis": c.hypothesis,
                "t_value": c.result.t_value,
                "degrees_of_freedom": c.result.degrees_of_freedom,
                "p_value_one_sided": c.result.p_value_one_sided,
            }
            for c in comparisons
        ],
    }
    Path(json_path).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")

    lines = ["row_type,name,n_queries,mtwv,per_query_mean,per_query_sd,t_value,df,p_value"]
    for tag, result in sorted(results.items()):
        payload = _result_payload(result, cfg)
        lines.append(
            f"system,{tag},{payload['num_queries_scored']},{result.mtwv:.6f},"
            f"{payload['per_query_mean']:.6f},{payload['per_query_sd']:.6f},,,"
        )
    for c in comparisons:
        lines.append(
            f"t_test,{c.hypothesis},,,,,"
            f"{c.result.t_value:.6f},{c.result.degrees_of_freedom},"
            f"{c.result.p_value_one_sided:.6f}"
        )
    Path(csv_path).write_text("\n".join(lines) + "\n")
