"""Detection stage: standardized Euclidean frame distances, range
normalization, query-sized sliding-window DTW, and the parallel corpus scan.

The score for a (query, item) pair is 1 minus the minimum windowed DTW cost,
so a verbatim occurrence of the query inside the item scores exactly 1.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from . import kernels
from .errors import ShapeError
from .featio import FeatureMatrix


@dataclass
class SearchConfig:
    window_stride_frames: int = 1
    window_scale: float = 1.0
    variance_floor: float = 1e-8

    def __post_init__(self) -> None:
        if self.window_stride_frames < 1:
            raise ValueError(f"stride must be >= 1, got {self.window_stride_frames}")
        if self.window_scale <= 0:
            raise ValueError(f"window_scale must be > 0, got {self.window_scale}")
        if self.variance_floor <= 0:
            raise ValueError(f"variance_floor must be > 0, got {self.variance_floor}")


@dataclass
class DistanceMatrix:
    values: np.ndarray
    normalized: bool = False


@dataclass
class DetectionScore:
    query_id: str
    item_id: str
    score: float
    best_window_start_frame: int
    best_window_end_frame: int


def pooled_variances(
    query: FeatureMatrix, item: FeatureMatrix, floor: float = 1e-8
) -> np.ndarray:
    """Per-dimension population variance over the concatenated frames of the
    pair, floored to keep constant dimensions usable."""
    if query.num_dims != item.num_dims:
        raise ShapeError(
            f"dimension mismatch: query has {query.num_dims} dims, "
            f"item has {item.num_dims}"
        )
    stacked = np.vstack(
        [query.data.astype(np.float64), item.data.astype(np.float64)]
    )
    return np.maximum(np.var(stacked, axis=0), floor)


def distance_matrix(
    query: FeatureMatrix, item: FeatureMatrix, variances: np.ndarray
) -> DistanceMatrix:
    """Standardized Euclidean distances between every query frame and every
    item frame: cell (i, j) = sqrt(sum_d (q[i,d] - t[j,d])^2 / var[d])."""
    if query.num_dims != item.num_dims:
        raise ShapeError(
            f"dimension mismatch: query has {query.num_dims} dims, "
            f"item has {item.num_dims}"
        )
    variances = np.asarray(variances, dtype=np.float64)
    if variances.shape != (query.num_dims,):
        raise ShapeError(
            f"expected {query.num_dims} variances, got shape {variances.shape}"
        )
    if np.any(variances <= 0):
        raise ValueError("variances must be strictly positive")
    inv_std = 1.0 / np.sqrt(variances)
    qs = np.ascontiguousarray(query.data.astype(np.float64) * inv_std)
    ts = np.ascontiguousarray(item.data.astype(np.float64) * inv_std)
    backend = kernels.get_backend()
    return DistanceMatrix(values=backend.scaled_distance_matrix(qs, ts))


def range_normalize(matrix: DistanceMatrix) -> DistanceMatrix:
    """Affine rescale of the whole matrix to [0, 1]; a constant matrix maps
    to all zeros (no localization information)."""
    if matrix.normalized:
        raise ValueError("matrix is already normalized")
    values = matrix.values
    lo = values.min()
    hi = values.max()
    if hi == lo:
        return DistanceMatrix(values=np.zeros_like(values), normalized=True)
    return DistanceMatrix(values=(values - lo) / (hi - lo), normalized=True)


def dtw_window_cost(window: np.ndarray) -> float:
    """Minimum over monotone corner-to-corner paths (steps diagonal, down,
    right) of the mean cell cost along the path."""
    window = np.ascontiguousarray(window, dtype=np.float64)
    if window.ndim != 2 or window.size == 0:
        raise ValueError(f"window must be a nonempty 2-D matrix, got shape {window.shape}")
    backend = kernels.get_backend()
    costs = backend.window_dtw_costs(window, window.shape[1], np.zeros(1, dtype=np.int64))
    return float(costs[0])


def window_length(query_frames: int, item_frames: int, cfg: SearchConfig) -> int:
    if query_frames > item_frames:
        return item_frames
    return min(max(1, int(round(cfg.window_scale * query_frames))), item_frames)


def window_starts(item_frames: int, length: int, stride: int) -> np.ndarray:
    """Start offsets {0, stride, 2*stride, ...} clamped so the final window
    ends at the last item frame; that final start is always evaluated."""
    last = item_frames - length
    starts = np.arange(0, last + 1, stride, dtype=np.int64)
    if starts[-1] != last:
        starts = np.append(starts, np.int64(last))
    return starts


def num_windows(query_frames: int, item_frames: int, cfg: SearchConfig) -> int:
    length = window_length(query_frames, item_frames, cfg)
    return len(window_starts(item_frames, length, cfg.window_stride_frames))


def detection_score(
    query: FeatureMatrix, item: FeatureMatrix, cfg: SearchConfig | None = None
) -> DetectionScore:
    """Score one (query, item) pair: normalized distance matrix, sliding
    window DTW, score = 1 - minimum window cost."""
    if cfg is None:
        cfg = SearchConfig()
    variances = pooled_variances(query, item, cfg.variance_floor)
    dist = range_normalize(distance_matrix(query, item, variances))
    length = window_length(query.num_frames, item.num_frames, cfg)
    starts = window_starts(item.num_frames, length, cfg.window_stride_frames)
    backend = kernels.get_backend()
    costs = backend.window_dtw_costs(dist.values, length, starts)
    best = int(np.argmin(costs))
    score = min(1.0, max(0.0, 1.0 - float(costs[best])))
    return DetectionScore(
        query_id=query.source_id,
        item_id=item.source_id,
        score=score,
        best_window_start_frame=int(starts[best]),
        best_window_end_frame=int(starts[best]) + length - 1,
    )


def _check_corpus_dims(queries: Iterable[FeatureMatrix], items: Iterable[FeatureMatrix]) -> int:
    dims: int | None = None
    ref = ""
    for matrix in list(queries) + list(items):
        if dims is None:
            dims = matrix.num_dims
            ref = f"{matrix.source_id} ({matrix.extractor_tag or 'untagged'}, {dims} dims)"
        elif matrix.num_dims != dims:
            raise ShapeError(
                f"feature dimensionality mismatch: {ref} vs {matrix.source_id} "
                f"({matrix.extractor_tag or 'untagged'}, {matrix.num_dims} dims)"
            )
    return dims or 0


def search_corpus(
    queries: list[FeatureMatrix],
    items: list[FeatureMatrix],
    cfg: SearchConfig | None = None,
    workers: int = 1,
    progress: Callable[[str], None] | None = None,
) -> list[DetectionScore]:
    """Score every (query, item) pair; results sorted by (query_id, item_id)
    and independent of worker count."""
    if cfg is None:
        cfg = SearchConfig()
    _check_corpus_dims(queries, items)

    def scan_query(query: FeatureMatrix) -> list[DetectionScore]:
        return [detection_score(query, item, cfg) for item in items]

    results: list[DetectionScore] = []
    if workers <= 1:
        for query in queries:
            results.extend(scan_query(query))
            if progress is not None:
                progress(query.source_id)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for query, scores in zip(queries, pool.map(scan_query, queries)):
                results.extend(scores)
                if progress is not None:
                    progress(query.source_id)
    results.sort(key=lambda s: (s.query_id, s.item_id))
    return results


SCORES_HEADER = ("query", "item", "score", "start_frame", "end_frame")


def write_scores_tsv(scores: list[DetectionScore], path: str | Path) -> None:
    lines = ["\t".join(SCORES_HEADER)]
    for s in sorted(scores, key=lambda s: (s.query_id, s.item_id)):
        lines.append(
            f"{s.query_id}\t{s.item_id}\t{s.score:.6f}"
            f"\t{s.best_window_start_frame}\t{s.best_window_end_frame}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_scores_tsv(path: str | Path) -> list[DetectionScore]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or tuple(lines[0].split("\t")) != SCORES_HEADER:
        raise ValueError(f"{path}: not a scores TSV (bad header)")
    scores = []
    for line in lines[1:]:
        if not line.strip():
            continue
        query_id, item_id, score, start, end = line.split("\t")
        scores.append(
            DetectionScore(
                query_id=query_id,
                item_id=item_id,
                score=float(score),
                best_window_start_frame=int(start),
                best_window_end_frame=int(end),
            )
        )
    return scores
