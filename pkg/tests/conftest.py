import struct

import numpy as np
import pytest

from qbestd import kernels
from qbestd.featio import FeatureMatrix


@pytest.fixture(params=kernels.available_backends())
def backend(request, monkeypatch):
    """Run the test once per kernel backend (numba and the numpy fallback)."""
    monkeypatch.setenv(kernels.ENV_VAR, request.param)
    return request.param


def make_wav_bytes(
    samples: np.ndarray,
    sample_rate: int = 16000,
    channels: int = 1,
    bits: int = 16,
    audio_format: int = 1,
) -> bytes:
    """Hand-assembled RIFF/WAVE bytes (independent of any package writer)."""
    pcm = np.asarray(samples, dtype="<i2").tobytes()
    byte_rate = sample_rate * channels * bits // 8
    block_align = channels * bits // 8
    fmt = struct.pack(
        "<HHIIHH", audio_format, channels, sample_rate, byte_rate, block_align, bits
    )
    chunks = (
        b"WAVE"
        + b"fmt " + struct.pack("<I", len(fmt)) + fmt
        + b"data" + struct.pack("<I", len(pcm)) + pcm
    )
    return b"RIFF" + struct.pack("<I", len(chunks)) + chunks


def write_wav(path, samples, sample_rate=16000):
    path.write_bytes(make_wav_bytes(samples, sample_rate))
    return path


def enumerate_min_ratio_cost(window: np.ndarray) -> float:
    """Oracle: exhaustive monotone-path enumeration for the window DTW cost.

    Walks every corner-to-corner path with steps (1,1), (1,0), (0,1) and
    returns the minimum of (cell sum / cell count). Feasible up to ~6x6.
    """
    m, n = window.shape
    best = [np.inf]

    def walk(i: int, j: int, total: float, cells: int) -> None:
        total += window[i, j]
        cells += 1
        if i == m - 1 and j == n - 1:
            ratio = total / cells
            if ratio < best[0]:
                best[0] = ratio
            return
        if i + 1 < m and j + 1 < n:
            walk(i + 1, j + 1, total, cells)
        if i + 1 < m:
            walk(i + 1, j, total, cells)
        if j + 1 < n:
            walk(i, j + 1, total, cells)

    walk(0, 0, 0.0, 0)
    return best[0]


def stretch_frames(frames: np.ndarray, factor: float) -> np.ndarray:
    """Linear time-stretch of a (frames x dims) matrix by `factor`."""
    n = len(frames)
    out_len = max(2, int(round(n * factor)))
    src = np.linspace(0.0, n - 1.0, out_len)
    base = np.arange(n, dtype=np.float64)
    out = np.empty((out_len, frames.shape[1]), dtype=np.float64)
    for d in range(frames.shape[1]):
        out[:, d] = np.interp(src, base, frames[:, d].astype(np.float64))
    return out


def build_embedded_corpus(
    seed: int,
    n_queries: int = 50,
    n_items: int = 200,
    dims: int = 39,
    noise_scale: float = 0.0,
    stretch: float = 0.0,
    query_frames: tuple[int, int] = (45, 56),
    item_frames: tuple[int, int] = (120, 181),
):
    """Random corpus where query i occurs in item i and nowhere else.

    The embedded copy is verbatim float32 unless noise/stretch are requested;
    noise sigma is noise_scale times the query's feature standard deviation.
    Returns (queries, items, embedding) with embedding[query_id] = item_id.
    """
    rng = np.random.default_rng(seed)
    queries: list[FeatureMatrix] = []
    items: list[FeatureMatrix] = []
    embedding: dict[str, str] = {}

    item_data = [
        rng.standard_normal((rng.integers(*item_frames), dims)).astype(np.float32)
        for _ in range(n_items)
    ]
    for qi in range(n_queries):
        q = rng.standard_normal((rng.integers(*query_frames), dims)).astype(np.float32)
        region = q.astype(np.float64)
        if stretch > 0.0:
            factor = rng.uniform(1.0 - stretch, 1.0 + stretch)
            region = stretch_frames(region, factor)
        if noise_scale > 0.0:
            sigma = noise_scale * float(q.std())
            region = region + rng.normal(0.0, sigma, region.shape)
        region32 = region.astype(np.float32)
        host = item_data[qi]
        offset = int(rng.integers(0, len(host) - len(region32) + 1))
        host[offset : offset + len(region32)] = region32

        qid = f"q{qi:03d}"
        queries.append(
            FeatureMatrix(q, frame_shift_ms=10.0, frame_length_ms=25.0,
                          source_id=qid, extractor_tag="synth39")
        )
        embedding[qid] = f"t{qi:03d}"

    for ti, data in enumerate(item_data):
        items.append(
            FeatureMatrix(data, frame_shift_ms=10.0, frame_length_ms=25.0,
                          source_id=f"t{ti:03d}", extractor_tag="synth39")
        )
    return queries, items, embedding


def gold_from_embedding(queries, items, embedding):
    from qbestd.evalkit import GoldLabelSet

    query_ids = [q.source_id for q in queries]
    item_ids = [t.source_id for t in items]
    labels = {
        (q, t): embedding.get(q) == t for q in query_ids for t in item_ids
    }
    counts = {q: sum(labels[(q, t)] for t in item_ids) for q in query_ids}
    return GoldLabelSet(
        labels=labels, counts=counts, query_ids=query_ids, item_ids=item_ids
    )
