"""Bipass stacking: whole-utterance passes instead of per-frame recurrence.

Pass 1 runs every frame with an all-zero recurrent block, so frames are
independent. Pass p >= 2 reruns the utterance with frame t's recurrent block
holding the compressed pass-(p-1) posteriors of frames t-1 .. t-k (zeros
where those frames do not exist). The scheme generalizes to any number of
passes and shares its model type and checkpoint format with the per-frame
recurrent scheme, so one trained model can be evaluated under either.

Training puts the loss on the final pass only. Earlier passes are recomputed
with the current weights but treated as constants: their job is to supply
feedback, and no gradient crosses a pass boundary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .compression import compress
from .corpus import Corpus, SpliceConfig, Utterance, splice_all
from .errors import ConfigError, DataError
from .nn import TrainConfig, backward, cross_entropy, forward
from .rdsn import RdsnModel, RecurrentBuffer, _check_utterance
from .training import (EpochStats, MinibatchAccumulator, _check_loss,
                       shuffled_utterances)


@dataclass
class BpsnConfig:
    k: int = 9
    passes: int = 2

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if self.passes < 2:
            raise ConfigError(f"passes must be >= 2, got {self.passes}")


@dataclass
class BpsnEvalStats:
    """Per-pass mean cross-entropies plus final-pass frame accuracy."""

    per_pass_ce: list[float]
    accuracy: float
    frames: int

    @property
    def mean_ce(self) -> float:
        return self.per_pass_ce[-1]


def _compress_all(model: RdsnModel, posteriors: np.ndarray) -> np.ndarray:
    out = np.empty((posteriors.shape[0], model.num_monophones))
    for t in range(posteriors.shape[0]):
        out[t] = compress(posteriors[t], model.senone_map)
    return out


def _run_pass(model: RdsnModel, spliced: np.ndarray,
              prev_compressed: np.ndarray | None, mode: str,
              rng: np.random.Generator | None) -> np.ndarray:
    """One pass over an utterance. prev_compressed=None means pass 1
    (all-zero recurrent blocks); otherwise frame t reads the previous pass's
    compressed outputs at frames t-1 .. t-k."""
    num_frames = spliced.shape[0]
    posteriors = np.empty((num_frames, model.num_senones))
    buf = RecurrentBuffer(model.k, model.num_monophones)
    for t in range(num_frames):
        posteriors[t] = forward(
            model.net, [spliced[t], buf.as_input()], mode, rng
        ).posterior
        if prev_compressed is not None:
            buf.push(prev_compressed[t])
    return posteriors


def bpsn_forward_utterance(model: RdsnModel, utt: Utterance,
                           splice_cfg: SpliceConfig, passes: int,
                           mode: str = "eval",
                           rng: np.random.Generator | None = None,
                           ) -> list[np.ndarray]:
    """Run all passes over one utterance; returns one (T, S) posterior array
    per pass, first to last."""
    if passes < 1:
        raise DataError(f"passes must be >= 1, got {passes}")
    _check_utterance(model, utt, splice_cfg)
    spliced = splice_all(utt, splice_cfg)
    all_posteriors: list[np.ndarray] = []
    prev_compressed = None
    for _ in range(passes):
        posteriors = _run_pass(model, spliced, prev_compressed, mode, rng)
        all_posteriors.append(posteriors)
        prev_compressed = _compress_all(model, posteriors)
    return all_posteriors


def bpsn_evaluate(model: RdsnModel, corpus: Corpus, splice_cfg: SpliceConfig,
                  passes: int) -> BpsnEvalStats:
    """Dropout-off evaluation; accuracy is scored on the final pass."""
    ce_sums = np.zeros(passes)
    correct = 0
    frames = 0
    for utt in corpus.utterances:
        all_posteriors = bpsn_forward_utterance(model, utt, splice_cfg, passes)
        for t in range(utt.num_frames):
            label = int(utt.labels[t])
            for p in range(passes):
                ce_sums[p] += cross_entropy(all_posteriors[p][t], label)
            correct += int(np.argmax(all_posteriors[-1][t])) == label
        frames += utt.num_frames
    if frames == 0:
        return BpsnEvalStats([0.0] * passes, 0.0, 0)
    return BpsnEvalStats((ce_sums / frames).tolist(), correct / frames, frames)


def bpsn_train_epoch(model: RdsnModel, corpus: Corpus, splice_cfg: SpliceConfig,
                     passes: int, train_cfg: TrainConfig,
                     order_rng: np.random.Generator,
                     dropout_rng: np.random.Generator) -> EpochStats:
    """One epoch of final-pass SGD.

    Per utterance: passes 1 .. P-1 run in eval mode (their outputs are
    feedback, i.e. data), then the final pass runs in train mode and its
    frames drive minibatch updates exactly as in the other trainers. Metrics
    carry the mean CE of every pass; the headline train CE is the final
    pass's.
    """
    if passes < 2:
        raise DataError(f"passes must be >= 2, got {passes}")
    acc = MinibatchAccumulator(model.net, train_cfg.learning_rate,
                               train_cfg.minibatch_size)
    ce_sums = np.zeros(passes)
    correct = 0
    frames = 0
    for ui in shuffled_utterances(corpus, order_rng):
        utt = corpus.utterances[ui]
        _check_utterance(model, utt, splice_cfg)
        spliced = splice_all(utt, splice_cfg)
        prev_compressed = None
        for p in range(passes - 1):
            posteriors = _run_pass(model, spliced, prev_compressed, "eval", None)
            for t in range(utt.num_frames):
                ce_sums[p] += cross_entropy(posteriors[t], int(utt.labels[t]))
            prev_compressed = _compress_all(model, posteriors)
        buf = RecurrentBuffer(model.k, model.num_monophones)
        for t in range(utt.num_frames):
            label = int(utt.labels[t])
            cache = forward(model.net, [spliced[t], buf.as_input()], "train",
                            dropout_rng)
            ce = cross_entropy(cache.posterior, label)
            _check_loss(ce, utt.utt_id, t)
            ce_sums[-1] += ce
            correct += int(np.argmax(cache.posterior)) == label
            acc.add(backward(model.net, cache, label))
            buf.push(prev_compressed[t])
        acc.flush()
        frames += utt.num_frames
    if frames == 0:
        return EpochStats(0.0, 0.0, 0, per_pass_ce=[0.0] * passes)
    per_pass = (ce_sums / frames).tolist()
    return EpochStats(per_pass[-1], correct / frames, frames, per_pass_ce=per_pass)
