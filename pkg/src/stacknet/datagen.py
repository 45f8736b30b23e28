"""Seeded synthetic corpus generator.

Labels follow a sticky Markov chain over monophones: each frame keeps the
current monophone with self_transition_prob, otherwise jumps uniformly to a
different one. The frame's senone is uniform among the monophone's senones,
and its features are that senone's fixed mean vector plus Gaussian noise.
Consecutive labels therefore carry mutual information while single noisy
frames stay ambiguous, which is exactly the structure phoneme-level feedback
can exploit.

Splits draw from disjoint counter-based RNG substreams, so train/dev/test
never share noise and changing one split's size leaves the others unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .compression import SenoneMap
from .corpus import Corpus, Utterance
from .errors import ConfigError
from .rng import STREAM_MEANS, STREAM_SEQUENCE, make_stream

_SPLIT_INDEX = {"train": 0, "dev": 1, "test": 2}
_UTTS_PER_SPLIT_LIMIT = 2**20  # substream layout: split * 2^20 + utterance


@dataclass
class GenConfig:
    num_monophones: int = 8
    senones_per_monophone: int = 4
    feature_dim: int = 10
    self_transition_prob: float = 0.85
    noise_sigma: float = 1.0
    train_utterances: int = 200
    dev_utterances: int = 50
    test_utterances: int = 50
    min_frames: int = 100
    max_frames: int = 200
    seed: int = 0

    def __post_init__(self):
        for name in ("num_monophones", "senones_per_monophone", "feature_dim",
                     "train_utterances", "dev_utterances", "test_utterances",
                     "min_frames", "max_frames"):
            value = getattr(self, name)
            if value < 1:
                raise ConfigError(f"{name} must be >= 1, got {value}")
        if not 0.0 <= self.self_transition_prob <= 1.0:
            raise ConfigError(
                f"self_transition_prob must be in [0, 1], got {self.self_transition_prob}"
            )
        if self.noise_sigma < 0:
            raise ConfigError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if self.min_frames > self.max_frames:
            raise ConfigError(
                f"min_frames {self.min_frames} exceeds max_frames {self.max_frames}"
            )
        for name in ("train_utterances", "dev_utterances", "test_utterances"):
            if getattr(self, name) >= _UTTS_PER_SPLIT_LIMIT:
                raise ConfigError(f"{name} must be < {_UTTS_PER_SPLIT_LIMIT}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    @property
    def num_senones(self) -> int:
        return self.num_monophones * self.senones_per_monophone


def _monophone_chain(cfg: GenConfig, rng: np.random.Generator,
                     num_frames: int) -> np.ndarray:
    m = cfg.num_monophones
    chain = np.empty(num_frames, dtype=np.int64)
    chain[0] = rng.integers(m)
    for t in range(1, num_frames):
        if m == 1 or rng.random() < cfg.self_transition_prob:
            chain[t] = chain[t - 1]
        else:
            # uniform over the other m-1 monophones
            j = rng.integers(m - 1)
            chain[t] = j + (j >= chain[t - 1])
    return chain


def _generate_utterance(cfg: GenConfig, means: np.ndarray, split: str,
                        index: int) -> Utterance:
    rng = make_stream(cfg.seed, STREAM_SEQUENCE,
                      _SPLIT_INDEX[split] * _UTTS_PER_SPLIT_LIMIT + index)
    num_frames = int(rng.integers(cfg.min_frames, cfg.max_frames + 1))
    chain = _monophone_chain(cfg, rng, num_frames)
    senone_offsets = rng.integers(cfg.senones_per_monophone, size=num_frames)
    labels = chain * cfg.senones_per_monophone + senone_offsets
    noise = rng.standard_normal((num_frames, cfg.feature_dim))
    frames = means[labels] + cfg.noise_sigma * noise
    return Utterance(f"{split}-{index:05d}", frames, labels)


def senone_means(cfg: GenConfig) -> np.ndarray:
    """The fixed per-senone mean vectors, components uniform in [-2, 2]."""
    rng = make_stream(cfg.seed, STREAM_MEANS)
    return rng.uniform(-2.0, 2.0, size=(cfg.num_senones, cfg.feature_dim))


def generate_corpus(cfg: GenConfig) -> tuple[Corpus, Corpus, Corpus, SenoneMap]:
    """Generate the three splits and the senone-to-monophone map.

    Senones are grouped in ascending blocks: senone s belongs to monophone
    s // senones_per_monophone.
    """
    means = senone_means(cfg)
    smap = SenoneMap(np.arange(cfg.num_senones) // cfg.senones_per_monophone)
    splits = []
    for split, count in (("train", cfg.train_utterances),
                         ("dev", cfg.dev_utterances),
                         ("test", cfg.test_utterances)):
        utts = [_generate_utterance(cfg, means, split, i) for i in range(count)]
        splits.append(Corpus(utts, cfg.num_senones, cfg.feature_dim, split))
    train, dev, test = splits
    return train, dev, test, smap
