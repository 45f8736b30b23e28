"""Corpus representation, on-disk formats, and context-window splicing.

Binary corpus format (all integers little-endian u32, floats little-endian
f64):

    magic "STKCORP1"
    S (senone count), D (feature dim), N (utterance count)
    per utterance:
        id byte length, UTF-8 id bytes
        T (frame count)
        T*D feature floats, row-major (frame-major)
        T labels

A line-oriented text import exists for hand-authored fixtures: one frame per
line, "utterance-id label f1 ... fD", consecutive lines with the same id
forming one utterance.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError

MAGIC = b"STKCORP1"


@dataclass
class Utterance:
    """A sequence of per-frame feature vectors with per-frame senone labels."""

    utt_id: str
    frames: np.ndarray  # (T, D) float64
    labels: np.ndarray  # (T,) int64

    def __post_init__(self):
        self.frames = np.ascontiguousarray(self.frames, dtype=np.float64)
        self.labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        if self.frames.ndim != 2 or self.frames.shape[0] < 1:
            raise DataError(f"utterance {self.utt_id!r}: frames must be a (T, D) matrix with T >= 1")
        if self.labels.shape != (self.frames.shape[0],):
            raise DataError(
                f"utterance {self.utt_id!r}: {self.labels.shape[0]} labels "
                f"for {self.frames.shape[0]} frames"
            )
        if not np.isfinite(self.frames).all():
            raise DataError(f"utterance {self.utt_id!r}: non-finite feature values")
        if self.labels.min(initial=0) < 0:
            raise DataError(f"utterance {self.utt_id!r}: negative label")

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.frames.shape[1]


@dataclass
class Corpus:
    """Utterances sharing one feature dimension and senone inventory.

    `split` is in-memory metadata only; the binary format does not carry it.
    """

    utterances: list[Utterance]
    num_senones: int
    feature_dim: int
    split: str | None = None

    def __post_init__(self):
        if self.num_senones < 1 or self.feature_dim < 1:
            raise DataError("num_senones and feature_dim must be positive")
        for utt in self.utterances:
            if utt.feature_dim != self.feature_dim:
                raise DataError(
                    f"utterance {utt.utt_id!r}: feature dim {utt.feature_dim} "
                    f"does not match corpus dim {self.feature_dim}"
                )
            if utt.labels.size and int(utt.labels.max()) >= self.num_senones:
                raise DataError(
                    f"utterance {utt.utt_id!r}: label {int(utt.labels.max())} "
                    f">= num_senones {self.num_senones}"
                )

    @property
    def num_frames(self) -> int:
        return sum(u.num_frames for u in self.utterances)


@dataclass(frozen=True)
class SpliceConfig:
    """Context window: left/right neighbor frames concatenated around each frame."""

    left: int = 9
    right: int = 9

    def __post_init__(self):
        if self.left < 0 or self.right < 0:
            raise ConfigError("splice context sizes must be nonnegative")

    @property
    def width(self) -> int:
        return self.left + self.right + 1

    def spliced_dim(self, feature_dim: int) -> int:
        return feature_dim * self.width


def splice(utt: Utterance, cfg: SpliceConfig, t: int) -> np.ndarray:
    """Concatenate frames t-left .. t+right in temporal order.

    Out-of-range neighbors are clamped to frame 0 / frame T-1 (edge
    replication, never zero padding), so feature statistics at utterance
    boundaries stay unchanged."""
    if not 0 <= t < utt.num_frames:
        raise DataError(f"frame index {t} out of range for T={utt.num_frames}")
    idx = np.clip(np.arange(t - cfg.left, t + cfg.right + 1), 0, utt.num_frames - 1)
    return utt.frames[idx].reshape(-1)


def splice_all(utt: Utterance, cfg: SpliceConfig) -> np.ndarray:
    """All frames spliced at once: row t equals splice(utt, cfg, t) bit for bit."""
    t = np.arange(utt.num_frames)[:, None]
    idx = np.clip(t + np.arange(-cfg.left, cfg.right + 1)[None, :], 0, utt.num_frames - 1)
    return utt.frames[idx].reshape(utt.num_frames, -1)


def save_corpus(corpus: Corpus, path) -> None:
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<III", corpus.num_senones, corpus.feature_dim,
                            len(corpus.utterances)))
        for utt in corpus.utterances:
            id_bytes = utt.utt_id.encode("utf-8")
            f.write(struct.pack("<I", len(id_bytes)))
            f.write(id_bytes)
            f.write(struct.pack("<I", utt.num_frames))
            f.write(np.ascontiguousarray(utt.frames, dtype="<f8").tobytes())
            f.write(utt.labels.astype("<u4").tobytes())


class _Reader:
    def __init__(self, data: bytes, path):
        self.data = data
        self.off = 0
        self.path = path

    def take(self, n: int, what: str) -> bytes:
        if self.off + n > len(self.data):
            raise DataError(f"{self.path}: truncated file while reading {what}")
        chunk = self.data[self.off:self.off + n]
        self.off += n
        return chunk

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]


def load_corpus(path, split: str | None = None) -> Corpus:
    with open(path, "rb") as f:
        data = f.read()
    r = _Reader(data, path)
    if r.take(len(MAGIC), "magic") != MAGIC:
        raise DataError(f"{path}: bad magic (not a corpus file)")
    num_senones = r.u32("senone count")
    feature_dim = r.u32("feature dim")
    n_utts = r.u32("utterance count")
    if num_senones < 1 or feature_dim < 1:
        raise DataError(f"{path}: invalid header (S={num_senones}, D={feature_dim})")
    utterances = []
    for i in range(n_utts):
        id_len = r.u32(f"utterance {i} id length")
        utt_id = r.take(id_len, f"utterance {i} id").decode("utf-8")
        n_frames = r.u32(f"utterance {utt_id!r} frame count")
        if n_frames < 1:
            raise DataError(f"{path}: utterance {utt_id!r} has no frames")
        raw = r.take(n_frames * feature_dim * 8, f"utterance {utt_id!r} features")
        frames = np.frombuffer(raw, dtype="<f8").reshape(n_frames, feature_dim)
        raw = r.take(n_frames * 4, f"utterance {utt_id!r} labels")
        labels = np.frombuffer(raw, dtype="<u4").astype(np.int64)
        if labels.max(initial=0) >= num_senones:
            raise DataError(
                f"{path}: utterance {utt_id!r} has label {int(labels.max())} "
                f">= num_senones {num_senones}"
            )
        utterances.append(Utterance(utt_id, frames.copy(), labels))
    if r.off != len(data):
        raise DataError(f"{path}: {len(data) - r.off} trailing bytes after last utterance")
    return Corpus(utterances, num_senones, feature_dim, split=split)


def load_corpus_text(path, num_senones: int | None = None,
                     split: str | None = None) -> Corpus:
    """Import the line-oriented fixture format (see module docstring)."""
    groups: list[tuple[str, list[int], list[list[float]]]] = []
    feature_dim = None
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) < 3:
                raise DataError(f"{path}:{lineno}: expected 'utt-id label f1 ... fD'")
            utt_id = parts[0]
            try:
                label = int(parts[1])
                feats = [float(v) for v in parts[2:]]
            except ValueError:
                raise DataError(f"{path}:{lineno}: bad label or feature value") from None
            if feature_dim is None:
                feature_dim = len(feats)
            elif len(feats) != feature_dim:
                raise DataError(
                    f"{path}:{lineno}: {len(feats)} features, expected {feature_dim}"
                )
            if not groups or groups[-1][0] != utt_id:
                groups.append((utt_id, [], []))
            groups[-1][1].append(label)
            groups[-1][2].append(feats)
    if not groups:
        raise DataError(f"{path}: no frames found")
    seen = set()
    for utt_id, _, _ in groups:
        if utt_id in seen:
            raise DataError(f"{path}: utterance {utt_id!r} appears in non-consecutive lines")
        seen.add(utt_id)
    utterances = [
        Utterance(utt_id, np.array(feats, dtype=np.float64), np.array(labels, dtype=np.int64))
        for utt_id, labels, feats in groups
    ]
    if num_senones is None:
        num_senones = max(int(u.labels.max()) for u in utterances) + 1
    return Corpus(utterances, num_senones, feature_dim, split=split)
