"""Seeded, named random streams.

All randomness in the package flows through counter-based Philox generators
keyed by (seed, stream, substream), so runs are reproducible across platforms
and each consumer owns an independent stream:

  INIT      weight initialization (baseline build and stacking warm-start)
  DROPOUT   dropout masks during training
  ORDER     utterance shuffling per epoch
  MEANS     synthetic-corpus class mean vectors
  SEQUENCE  synthetic-corpus sequence sampling, one substream per split

Streams never share state: drawing from one can never perturb another.
"""

from __future__ import annotations

import numpy as np

STREAM_INIT = 0
STREAM_DROPOUT = 1
STREAM_ORDER = 2
STREAM_MEANS = 3
STREAM_SEQUENCE = 4

_SUBSTREAM_BITS = 32


def make_stream(seed: int, stream: int, substream: int = 0) -> np.random.Generator:
    """Return an independent generator for (seed, stream, substream)."""
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    if stream < 0 or substream < 0 or substream >= 2**_SUBSTREAM_BITS:
        raise ValueError(f"bad stream id ({stream}, {substream})")
    key = np.array([seed, (stream << _SUBSTREAM_BITS) | substream], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
