"""Shared training machinery plus the plain feedforward (baseline) trainer.

Training is frame-level minibatch SGD: utterances are visited in a seeded
shuffled order, frames inside an utterance strictly in temporal order, and
the mean gradient over each minibatch of frames is applied with the weights
frozen at minibatch start. The minibatch accumulator flushes at utterance
boundaries, so utterances stay independent units of work.

Everything here computes per-frame matrix-vector products; no frame batching
happens even where it would be legal, so eval paths of different model kinds
produce bit-identical numbers on identical inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .corpus import Corpus, SpliceConfig, splice_all
from .errors import NumericError
from .nn import Gradients, Mlp, TrainConfig, backward, cross_entropy, forward, sgd_step


@dataclass
class EvalStats:
    mean_ce: float
    accuracy: float
    frames: int


@dataclass
class EpochStats:
    """Metrics accumulated while training one epoch."""

    train_ce: float
    train_accuracy: float
    frames: int
    per_pass_ce: list[float] | None = None  # multi-pass trainers only


class MinibatchAccumulator:
    """Sums per-frame gradients and applies the mean every `size` frames."""

    def __init__(self, model: Mlp, learning_rate: float, size: int):
        self.model = model
        self.learning_rate = learning_rate
        self.size = size
        self._sum = Gradients.zeros_like(model)
        self._count = 0

    def add(self, grads: Gradients) -> None:
        self._sum.add_(grads)
        self._count += 1
        if self._count >= self.size:
            self.flush()

    def flush(self) -> None:
        if self._count == 0:
            return
        self._sum.scale_(1.0 / self._count)
        sgd_step(self.model, self._sum, self.learning_rate)
        self._sum = Gradients.zeros_like(self.model)
        self._count = 0


def _check_loss(ce: float, utt_id: str, t: int) -> None:
    if not math.isfinite(ce):
        raise NumericError(f"non-finite loss at utterance {utt_id!r} frame {t}")


def evaluate_baseline(model: Mlp, corpus: Corpus, splice_cfg: SpliceConfig) -> EvalStats:
    """Mean per-frame cross-entropy and frame accuracy, dropout off.

    An empty corpus yields frames=0 and zero metrics."""
    total_ce = 0.0
    correct = 0
    frames = 0
    for utt in corpus.utterances:
        spliced = splice_all(utt, splice_cfg)
        for t in range(utt.num_frames):
            posterior = forward(model, spliced[t], "eval").posterior
            total_ce += cross_entropy(posterior, int(utt.labels[t]))
            correct += int(np.argmax(posterior)) == int(utt.labels[t])
        frames += utt.num_frames
    if frames == 0:
        return EvalStats(0.0, 0.0, 0)
    return EvalStats(total_ce / frames, correct / frames, frames)


def shuffled_utterances(corpus: Corpus, order_rng: np.random.Generator) -> list[int]:
    return list(order_rng.permutation(len(corpus.utterances)))


def baseline_train_epoch(model: Mlp, corpus: Corpus, splice_cfg: SpliceConfig,
                         train_cfg: TrainConfig, order_rng: np.random.Generator,
                         dropout_rng: np.random.Generator) -> EpochStats:
    """One epoch of minibatch SGD on spliced frames."""
    acc = MinibatchAccumulator(model, train_cfg.learning_rate, train_cfg.minibatch_size)
    total_ce = 0.0
    correct = 0
    frames = 0
    for ui in shuffled_utterances(corpus, order_rng):
        utt = corpus.utterances[ui]
        spliced = splice_all(utt, splice_cfg)
        for t in range(utt.num_frames):
            label = int(utt.labels[t])
            cache = forward(model, spliced[t], "train", dropout_rng)
            ce = cross_entropy(cache.posterior, label)
            _check_loss(ce, utt.utt_id, t)
            total_ce += ce
            correct += int(np.argmax(cache.posterior)) == label
            acc.add(backward(model, cache, label))
        acc.flush()
        frames += utt.num_frames
    if frames == 0:
        return EpochStats(0.0, 0.0, 0)
    return EpochStats(total_ce / frames, correct / frames, frames)
