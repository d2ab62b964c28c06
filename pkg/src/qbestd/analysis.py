"""Feature-space analysis: segment averaging, classical (Torgerson) MDS via a
cyclic Jacobi eigensolver, 95% data ellipses, and CSV/SVG emission.

Inputs are small (tens to hundreds of segment tokens), so everything here is
single-threaded and favors clarity over speed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .featio import FeatureMatrix

# chi-square 2-df 95% quantile: CDF is 1 - exp(-x/2), so x = -2*ln(0.05)
CHI2_2DF_95 = 5.991464


@dataclass
class SegmentToken:
    label: str
    feature_vector: np.ndarray
    source_id: str = ""

    def __post_init__(self) -> None:
        self.feature_vector = np.asarray(self.feature_vector, dtype=np.float64)
        if self.feature_vector.ndim != 1:
            raise ValueError("feature_vector must be 1-D")
        if not np.isfinite(self.feature_vector).all():
            raise ValueError("feature_vector contains non-finite values")


@dataclass
class MdsEmbedding:
    points: np.ndarray  # (n, k)
    eigenvalues: np.ndarray  # all n, descending
    stress: float


@dataclass
class EllipseParams:
    label: str
    center: tuple[float, float]
    semi_axes: tuple[float, float]
    rotation_radians: float
    degenerate: bool = False


@dataclass
class LabeledInterval:
    label: str
    start_ms: float
    end_ms: float
    source_id: str = ""


def average_segment_features(
    features: FeatureMatrix, intervals: list[LabeledInterval]
) -> tuple[list[SegmentToken], list[str]]:
    """Mean feature vector over the frames whose start time falls inside each
    interval [start_ms, end_ms). Zero-frame intervals are skipped with a
    diagnostic."""
    tokens: list[SegmentToken] = []
    diagnostics: list[str] = []
    starts_ms = np.arange(features.num_frames) * features.frame_shift_ms
    for interval in intervals:
        if interval.start_ms >= interval.end_ms:
            diagnostics.append(
                f"{interval.label}: empty interval "
                f"[{interval.start_ms}, {interval.end_ms})"
            )
            continue
        mask = (starts_ms >= interval.start_ms) & (starts_ms < interval.end_ms)
        if not mask.any():
            diagnostics.append(
                f"{interval.label}: no frame starts in "
                f"[{interval.start_ms}, {interval.end_ms}) ms"
            )
            continue
        tokens.append(
            SegmentToken(
                label=interval.label,
                feature_vector=features.data[mask].astype(np.float64).mean(axis=0),
                source_id=interval.source_id or features.source_id,
            )
        )
    return tokens, diagnostics


def class_distance_matrix(tokens: list[SegmentToken]) -> np.ndarray:
    """Pairwise Euclidean distances between token vectors."""
    if len(tokens) < 2:
        raise ValueError(f"need at least 2 tokens, got {len(tokens)}")
    vectors = np.stack([t.feature_vector for t in tokens])
    diff = vectors[:, None, :] - vectors[None, :, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    np.fill_diagonal(dist, 0.0)
    return dist


def jacobi_eigh(
    matrix: np.ndarray, off_diagonal_tol: float = 1e-12, max_sweeps: int = 100
) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric eigendecomposition by cyclic Jacobi rotations.

    Sweeps until every off-diagonal magnitude is below `off_diagonal_tol`.
    Returns (eigenvalues descending, eigenvectors as columns).
    """
    a = np.array(matrix, dtype=np.float64)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError(f"matrix must be square, got {a.shape}")
    v = np.eye(n)
    for _ in range(max_sweeps):
        off = np.abs(a - np.diag(np.diag(a))).max() if n > 1 else 0.0
        if off < off_diagonal_tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) < off_diagonal_tol:
                    continue
                # stable rotation angle (Rutishauser)
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                if tau >= 0:
                    t = 1.0 / (tau + math.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                rot_p = c * a[:, p] - s * a[:, q]
                rot_q = s * a[:, p] + c * a[:, q]
                a[:, p] = rot_p
                a[:, q] = rot_q
                rot_p = c * a[p, :] - s * a[q, :]
                rot_q = s * a[p, :] + c * a[q, :]
                a[p, :] = rot_p
                a[q, :] = rot_q
                a[p, q] = 0.0
                a[q, p] = 0.0
                rot_p = c * v[:, p] - s * v[:, q]
                rot_q = s * v[:, p] + c * v[:, q]
                v[:, p] = rot_p
                v[:, q] = rot_q
    eigenvalues = np.diag(a).copy()
    order = np.argsort(eigenvalues)[::-1]
    return eigenvalues[order], v[:, order]


def classical_mds(distances: np.ndarray, k: int = 2) -> MdsEmbedding:
    """Torgerson MDS: double-center the squared distances, eigendecompose,
    scale the top-k eigenvectors by sqrt(max(eigenvalue, 0)).

    Column signs are fixed so each coordinate's largest-magnitude entry is
    positive; stress is the relative residual over all pairs.
    """
    d = np.asarray(distances, dtype=np.float64)
    n = d.shape[0]
    if d.ndim != 2 or d.shape != (n, n):
        raise ValueError(f"distance matrix must be square, got {d.shape}")
    if n < 3:
        raise ValueError(f"need at least 3 points, got {n}")
    if not np.allclose(d, d.T, atol=1e-9):
        raise ValueError("distance matrix must be symmetric")
    if not np.allclose(np.diag(d), 0.0, atol=1e-9):
        raise ValueError("distance matrix must have a zero diagonal")

    centering = np.eye(n) - np.full((n, n), 1.0 / n)
    b = -0.5 * centering @ (d * d) @ centering
    eigenvalues, eigenvectors = jacobi_eigh(b)

    coords = eigenvectors[:, :k] * np.sqrt(np.maximum(eigenvalues[:k], 0.0))
    for col in range(coords.shape[1]):
        pivot = np.abs(coords[:, col]).argmax()
        if coords[pivot, col] < 0:
            coords[:, col] = -coords[:, col]

    delta = np.sqrt(
        np.maximum(
            np.einsum("ik,ik->i", coords, coords)[:, None]
            + np.einsum("ik,ik->i", coords, coords)[None, :]
            - 2.0 * coords @ coords.T,
            0.0,
        )
    )
    upper = np.triu_indices(n, 1)
    denom = float(np.sum(d[upper] ** 2))
    if denom == 0.0:
        stress = 0.0
    else:
        stress = math.sqrt(float(np.sum((d[upper] - delta[upper]) ** 2)) / denom)
    return MdsEmbedding(points=coords, eigenvalues=eigenvalues, stress=stress)


def ellipse_95(points: np.ndarray, label: str = "") -> EllipseParams:
    """Covariance data ellipse holding 95% of a Gaussian cloud: semi-axes are
    sqrt(CHI2_2DF_95 * eigenvalue) of the sample covariance."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError(f"points must be (n, 2), got {pts.shape}")
    if len(pts) < 3:
        raise ValueError(f"need at least 3 points, got {len(pts)}")
    center = pts.mean(axis=0)
    cov = np.cov(pts.T, ddof=1)
    eigenvalues, eigenvectors = jacobi_eigh(cov)
    eigenvalues = np.maximum(eigenvalues, 0.0)
    major = math.sqrt(CHI2_2DF_95 * eigenvalues[0])
    minor = math.sqrt(CHI2_2DF_95 * eigenvalues[1])
    degenerate = eigenvalues[1] <= 1e-12 * max(eigenvalues[0], 1.0)
    if degenerate:
        minor = 0.0
    principal = eigenvectors[:, 0]
    rotation = math.atan2(principal[1], principal[0]) % math.pi
    return EllipseParams(
        label=label,
        center=(float(center[0]), float(center[1])),
        semi_axes=(major, minor),
        rotation_radians=rotation,
        degenerate=degenerate,
    )


def class_ellipses(
    embedding: MdsEmbedding, labels: list[str]
) -> tuple[list[EllipseParams], list[str]]:
    """One 95% ellipse per label with >= 3 tokens; smaller classes are skipped
    with a diagnostic."""
    ellipses: list[EllipseParams] = []
    diagnostics: list[str] = []
    for label in sorted(set(labels)):
        mask = np.array([l == label for l in labels])
        if mask.sum() < 3:
            diagnostics.append(f"{label}: only {int(mask.sum())} tokens, no ellipse")
            continue
        params = ellipse_95(embedding.points[mask], label=label)
        if params.degenerate:
            diagnostics.append(f"{label}: degenerate ellipse (collinear points)")
        ellipses.append(params)
    return ellipses, diagnostics


INTERVALS_COLUMNS = ("source", "label", "start_ms", "end_ms")


def load_intervals_tsv(path: str | Path) -> list[LabeledInterval]:
    """Segment intervals TSV. Either 4 columns `source label start_ms end_ms`
    or, for a single-source analysis, 3 columns `label start_ms end_ms`."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    intervals: list[LabeledInterval] = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        cols = line.split("\t")
        if lineno == 1 and cols[0] in ("label", "source"):
            continue
        if len(cols) == 4:
            source, label, start, end = cols
        elif len(cols) == 3:
            source = ""
            label, start, end = cols
        else:
            raise ValueError(
                f"{path}:{lineno}: expected 3 or 4 tab-separated columns, got {len(cols)}"
            )
        intervals.append(
            LabeledInterval(
                label=label,
                start_ms=float(start),
                end_ms=float(end),
                source_id=source,
            )
        )
    return intervals


def _svg_scatter(
    points: np.ndarray, labels: list[str], ellipses: list[EllipseParams]
) -> str:
    width = height = 640.0
    margin = 60.0
    xs = [points[:, 0].min(), points[:, 0].max()]
    ys = [points[:, 1].min(), points[:, 1].max()]
    for e in ellipses:
        reach = max(e.semi_axes)
        xs.extend([e.center[0] - reach, e.center[0] + reach])
        ys.extend([e.center[1] - reach, e.center[1] + reach])
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    span = max(x_hi - x_lo, y_hi - y_lo, 1e-9)
    scale = (width - 2 * margin) / span

    def to_px(x: float, y: float) -> tuple[float, float]:
        return (
            margin + (x - x_lo) * scale,
            height - margin - (y - y_lo) * scale,
        )

    palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    color_of = {
        label: palette[i % len(palette)] for i, label in enumerate(sorted(set(labels)))
    }

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" '
        f'height="{height:.0f}" viewBox="0 0 {width:.0f} {height:.0f}">',
        f'<rect width="{width:.0f}" height="{height:.0f}" fill="white"/>',
    ]
    for (x, y), label in zip(points, labels):
        px, py = to_px(x, y)
        parts.append(
            f'<circle cx="{px:.2f}" cy="{py:.2f}" r="3" fill="{color_of[label]}" '
            f'fill-opacity="0.6"/>'
        )
    for e in ellipses:
        cx, cy = to_px(*e.center)
        rx = max(e.semi_axes[0] * scale, 0.5)
        ry = max(e.semi_axes[1] * scale, 0.5)
        angle_deg = -math.degrees(e.rotation_radians)  # SVG y-axis points down
        parts.append(
            f'<ellipse cx="0" cy="0" rx="{rx:.2f}" ry="{ry:.2f}" fill="none" '
            f'stroke="{color_of.get(e.label, "#333333")}" stroke-width="1.5" '
            f'transform="translate({cx:.2f} {cy:.2f}) rotate({angle_deg:.2f})"/>'
        )
    for label in sorted(set(labels)):
        mask = np.array([l == label for l in labels])
        mx, my = points[mask].mean(axis=0)
        px, py = to_px(mx, my)
        parts.append(
            f'<text x="{px:.2f}" y="{py:.2f}" font-size="14" font-family="sans-serif" '
            f'text-anchor="middle" fill="#111111">{label}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_mds_outputs(
    embedding: MdsEmbedding,
    labels: list[str],
    ellipses: list[EllipseParams],
    path_prefix: str | Path,
) -> dict[str, Path]:
    """Write `<prefix>_coords.csv`, `<prefix>_ellipses.csv`, `<prefix>.svg`,
    and `<prefix>_meta.json`; returns the paths keyed by kind."""
    if len(labels) != len(embedding.points):
        raise ValueError(
            f"{len(labels)} labels for {len(embedding.points)} embedded points"
        )
    prefix = Path(path_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    paths = {
        "coords": prefix.with_name(prefix.name + "_coords.csv"),
        "ellipses": prefix.with_name(prefix.name + "_ellipses.csv"),
        "svg": prefix.with_name(prefix.name + ".svg"),
        "meta": prefix.with_name(prefix.name + "_meta.json"),
    }

    coord_lines = ["label,x,y"]
    for (x, y), label in zip(embedding.points, labels):
        coord_lines.append(f"{label},{float(x)!r},{float(y)!r}")
    paths["coords"].write_text("\n".join(coord_lines) + "\n")

    ellipse_lines = ["label,cx,cy,a,b,theta"]
    for e in ellipses:
        ellipse_lines.append(
            f"{e.label},{e.center[0]!r},{e.center[1]!r},"
            f"{e.semi_axes[0]!r},{e.semi_axes[1]!r},{e.rotation_radians!r}"
        )
    paths["ellipses"].write_text("\n".join(ellipse_lines) + "\n")

    paths["svg"].write_text(_svg_scatter(embedding.points, labels, ellipses))

    meta = {
        "method": "classical (Torgerson) MDS, Euclidean token distances",
        "ellipses": "95% covariance data ellipses",
        "stress": embedding.stress,
        "eigenvalues": embedding.eigenvalues.tolist(),
        "num_tokens": len(labels),
        "num_classes": len(set(labels)),
    }
    paths["meta"].write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return paths
