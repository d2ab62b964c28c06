"""Audio and feature-matrix I/O: WAV reading, the ".qf" feature file format,
2x decimation, and dataset manifests.

The ".qf" format is a little-endian binary with a fixed 32-byte header:

    bytes  0-3   magic "QFEA"
    bytes  4-5   u16 format version (currently 1)
    bytes  6-7   reserved, zero
    bytes  8-11  u32 num_frames
    bytes 12-15  u32 num_dims
    bytes 16-19  f32 frame_shift_ms
    bytes 20-23  f32 frame_length_ms
    bytes 24-31  reserved, zero

followed by num_frames * num_dims float32 values, row-major.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CorruptFileError, UnsupportedFormatError

QF_MAGIC = b"QFEA"
QF_VERSION = 1
QF_HEADER_SIZE = 32

_INT16_SCALE = 32768.0


@dataclass
class AudioBuffer:
    """Mono PCM audio normalized to [-1, 1)."""

    samples: np.ndarray
    sample_rate_hz: int
    channels: int = 1

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples, dtype=np.float32)
        if self.channels != 1:
            raise ValueError(f"AudioBuffer is mono only, got channels={self.channels}")
        if self.sample_rate_hz <= 0:
            raise ValueError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate_hz


@dataclass
class FeatureMatrix:
    """Per-frame feature vectors with frame timing metadata.

    Data is held as C-contiguous float32 so that a write/read round trip
    through a ".qf" file is bit-exact; timing metadata is quantized to
    float32 for the same reason.
    """

    data: np.ndarray
    frame_shift_ms: float
    frame_length_ms: float
    source_id: str = ""
    extractor_tag: str = ""

    def __post_init__(self) -> None:
        self.data = np.ascontiguousarray(self.data, dtype=np.float32)
        if self.data.ndim != 2:
            raise ValueError(f"feature data must be 2-D, got shape {self.data.shape}")
        if self.data.shape[0] < 1 or self.data.shape[1] < 1:
            raise ValueError(f"feature matrix must be at least 1x1, got {self.data.shape}")
        if not np.isfinite(self.data).all():
            raise ValueError("feature matrix contains non-finite values")
        self.frame_shift_ms = float(np.float32(self.frame_shift_ms))
        self.frame_length_ms = float(np.float32(self.frame_length_ms))
        if self.frame_shift_ms <= 0 or self.frame_length_ms <= 0:
            raise ValueError("frame timing must be positive")

    @property
    def num_frames(self) -> int:
        return self.data.shape[0]

    @property
    def num_dims(self) -> int:
        return self.data.shape[1]

    def frame_start_ms(self, index: int) -> float:
        return index * self.frame_shift_ms


@dataclass
class ManifestEntry:
    """One row of a manifest TSV; `path` is resolved against the TSV location."""

    id: str
    path: Path
    transcription: str


@dataclass
class DatasetManifest:
    dataset_id: str
    queries: list[ManifestEntry] = field(default_factory=list)
    items: list[ManifestEntry] = field(default_factory=list)


def read_wav(path: str | Path) -> AudioBuffer:
    """Read a RIFF/WAVE file containing mono 16-bit PCM.

    Samples are normalized by 1/32768, so -32768 maps exactly to -1.0.
    """
    raw = Path(path).read_bytes()
    if len(raw) < 12 or raw[0:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise CorruptFileError(f"{path}: not a RIFF/WAVE file")

    fmt = None
    data = None
    pos = 12
    while pos + 8 <= len(raw):
        chunk_id = raw[pos : pos + 4]
        (chunk_size,) = struct.unpack_from("<I", raw, pos + 4)
        body_start = pos + 8
        if body_start + chunk_size > len(raw):
            raise CorruptFileError(
                f"{path}: chunk {chunk_id!r} claims {chunk_size} bytes, "
                f"only {len(raw) - body_start} available"
            )
        if chunk_id == b"fmt ":
            if chunk_size < 16:
                raise CorruptFileError(f"{path}: fmt chunk too short ({chunk_size} bytes)")
            fmt = struct.unpack_from("<HHIIHH", raw, body_start)
        elif chunk_id == b"data":
            data = raw[body_start : body_start + chunk_size]
        pos = body_start + chunk_size + (chunk_size & 1)

    if fmt is None:
        raise CorruptFileError(f"{path}: missing fmt chunk")
    if data is None:
        raise CorruptFileError(f"{path}: missing data chunk")

    audio_format, channels, sample_rate, _byte_rate, _block_align, bits = fmt
    if audio_format != 1:
        raise UnsupportedFormatError(
            f"{path}: audio format code {audio_format} (only PCM, code 1, is supported)"
        )
    if channels != 1:
        raise UnsupportedFormatError(f"{path}: {channels} channels (only mono is supported)")
    if bits != 16:
        raise UnsupportedFormatError(f"{path}: {bits}-bit samples (only 16-bit is supported)")
    if len(data) % 2 != 0:
        raise CorruptFileError(f"{path}: data chunk has odd byte length {len(data)}")

    pcm = np.frombuffer(data, dtype="<i2")
    samples = pcm.astype(np.float32) / _INT16_SCALE
    return AudioBuffer(samples=samples, sample_rate_hz=sample_rate)


def _decimation_taps(num_taps: int = 63, cutoff_ratio: float = 0.45) -> np.ndarray:
    """Hamming-windowed sinc low-pass, cutoff as a fraction of input Nyquist,
    normalized to unit DC gain."""
    mid = (num_taps - 1) / 2
    n = np.arange(num_taps) - mid
    # sinc argument in units of the input sample rate: cutoff_hz = ratio * nyquist
    taps = cutoff_ratio * np.sinc(cutoff_ratio * n)
    taps *= np.hamming(num_taps)
    return taps / taps.sum()


_DECIMATION_TAPS = _decimation_taps()


def decimate_2x(audio: AudioBuffer) -> AudioBuffer:
    """Halve the sample rate: 63-tap linear-phase low-pass, then keep every
    second sample. Edges are zero-padded; output is clipped back to [-1, 1)."""
    if audio.sample_rate_hz % 2 != 0:
        raise ValueError(
            f"decimate_2x requires an even sample rate, got {audio.sample_rate_hz}"
        )
    x = audio.samples.astype(np.float64)
    half = (len(_DECIMATION_TAPS) - 1) // 2
    filtered = np.convolve(x, _DECIMATION_TAPS, mode="full")[half : half + len(x)]
    out = filtered[::2]
    out = np.clip(out, -1.0, (_INT16_SCALE - 1.0) / _INT16_SCALE)
    return AudioBuffer(
        samples=out.astype(np.float32), sample_rate_hz=audio.sample_rate_hz // 2
    )


def write_feature_file(matrix: FeatureMatrix, path: str | Path) -> None:
    header = struct.pack(
        "<4sHHIIff8x",
        QF_MAGIC,
        QF_VERSION,
        0,
        matrix.num_frames,
        matrix.num_dims,
        np.float32(matrix.frame_shift_ms),
        np.float32(matrix.frame_length_ms),
    )
    payload = matrix.data.astype("<f4", copy=False).tobytes(order="C")
    Path(path).write_bytes(header + payload)


def read_feature_file(
    path: str | Path, source_id: str = "", extractor_tag: str = ""
) -> FeatureMatrix:
    raw = Path(path).read_bytes()
    if len(raw) < QF_HEADER_SIZE:
        raise CorruptFileError(
            f"{path}: expected at least {QF_HEADER_SIZE} header bytes, found {len(raw)}"
        )
    magic, version, _reserved, num_frames, num_dims, shift_ms, length_ms = struct.unpack_from(
        "<4sHHIIff", raw, 0
    )
    if magic != QF_MAGIC:
        raise CorruptFileError(f"{path}: bad magic: expected {QF_MAGIC!r}, found {magic!r}")
    if version != QF_VERSION:
        raise CorruptFileError(
            f"{path}: unsupported format version: expected {QF_VERSION}, found {version}"
        )
    expected = num_frames * num_dims * 4
    payload = raw[QF_HEADER_SIZE:]
    if len(payload) != expected:
        raise CorruptFileError(
            f"{path}: header claims {num_frames}x{num_dims} frames "
            f"({expected} payload bytes), found {len(payload)}"
        )
    data = np.frombuffer(payload, dtype="<f4").reshape(num_frames, num_dims)
    return FeatureMatrix(
        data=data,
        frame_shift_ms=shift_ms,
        frame_length_ms=length_ms,
        source_id=source_id,
        extractor_tag=extractor_tag,
    )


MANIFEST_HEADER = ("id", "path", "transcription")


def load_manifest_rows(path: str | Path) -> list[ManifestEntry]:
    """Parse one manifest TSV (header `id<TAB>path<TAB>transcription`).

    Paths are resolved relative to the TSV's directory. Malformed TSV raises;
    semantic problems (duplicates, missing files) are left to validate_manifest.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines:
        raise CorruptFileError(f"{path}: empty manifest")
    header = tuple(lines[0].split("\t"))
    if header != MANIFEST_HEADER:
        raise CorruptFileError(
            f"{path}: bad header {header!r}, expected {MANIFEST_HEADER!r}"
        )
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cols = line.split("\t")
        if len(cols) != 3:
            raise CorruptFileError(
                f"{path}:{lineno}: expected 3 tab-separated columns, found {len(cols)}"
            )
        entry_id, rel_path, transcription = cols
        rows.append(
            ManifestEntry(
                id=entry_id,
                path=(path.parent / rel_path).resolve(),
                transcription=transcription,
            )
        )
    return rows


def load_manifest(
    queries_path: str | Path, items_path: str | Path, dataset_id: str | None = None
) -> DatasetManifest:
    if dataset_id is None:
        dataset_id = Path(queries_path).resolve().parent.name
    return DatasetManifest(
        dataset_id=dataset_id,
        queries=load_manifest_rows(queries_path),
        items=load_manifest_rows(items_path),
    )


def validate_manifest(manifest: DatasetManifest) -> list[str]:
    """Collect all id and path problems; empty list means the manifest is clean."""
    diagnostics: list[str] = []
    for role, entries in (("query", manifest.queries), ("item", manifest.items)):
        seen: set[str] = set()
        for entry in entries:
            if entry.id in seen:
                diagnostics.append(f"duplicate {role} id: {entry.id}")
            seen.add(entry.id)
            if not entry.path.exists():
                diagnostics.append(f"{role} {entry.id}: missing file {entry.path}")
    return diagnostics


def write_manifest_rows(rows: list[ManifestEntry], path: str | Path) -> None:
    """Write a manifest TSV; entry paths are stored relative to the TSV when possible."""
    path = Path(path)
    lines = ["\t".join(MANIFEST_HEADER)]
    for row in rows:
        try:
            rel = row.path.relative_to(path.parent.resolve())
        except ValueError:
            rel = row.path
        lines.append(f"{row.id}\t{rel}\t{row.transcription}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
