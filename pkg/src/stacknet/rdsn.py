"""Recurrent deep stacking: per-frame sequential forward passes that feed the
compressed posteriors of the previous k frames back in as extra inputs.

The recurrent block extends the first layer's input: frame t sees
[spliced features || c_{t-1} || ... || c_{t-k}], most recent first, where
c_j is the compressed (monophone) posterior pushed after frame j. The buffer
starts all-zero at every utterance, and the model's own output at frame t is
never part of frame t's input.

Training is stacking-style, not backpropagation through time: gradients
w.r.t. the recurrent inputs exist (backward returns them) but are never
propagated to earlier frames. Feedback content is either the model's own
posteriors (free running, matching inference) or the one-hot compressed
reference labels (teacher forcing).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .compression import SenoneMap, compress, one_hot_compress
from .corpus import Corpus, SpliceConfig, Utterance, splice_all
from .errors import ConfigError, DataError
from .nn import (Mlp, TrainConfig, backward, cross_entropy, forward,
                 glorot_uniform)
from .training import (EpochStats, EvalStats, MinibatchAccumulator,
                       _check_loss, shuffled_utterances)

FEEDBACK_FREE_RUNNING = "free_running"
FEEDBACK_TEACHER_FORCED = "teacher_forced"
FEEDBACK_MODES = (FEEDBACK_FREE_RUNNING, FEEDBACK_TEACHER_FORCED)


@dataclass
class RdsnConfig:
    k: int = 9
    causal: bool = False  # causal variant drops the right splice context
    feedback_mode: str = FEEDBACK_FREE_RUNNING

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if self.feedback_mode not in FEEDBACK_MODES:
            raise ConfigError(f"unknown feedback mode {self.feedback_mode!r}")

    def splice_config(self, context: int = 9) -> SpliceConfig:
        """Context window implied by the causal flag: the causal variant may
        not look at future frames, so its right context is zero."""
        return SpliceConfig(context, 0 if self.causal else context)


@dataclass
class RdsnModel:
    """An Mlp whose first layer consumes spliced features plus k compressed
    posteriors of earlier frames."""

    net: Mlp
    k: int
    senone_map: SenoneMap

    def __post_init__(self):
        if self.k < 1:
            raise DataError(f"k must be >= 1, got {self.k}")
        if self.net.output_dim != self.senone_map.num_senones:
            raise DataError(
                f"network output width {self.net.output_dim} does not match "
                f"{self.senone_map.num_senones} senones"
            )
        if self.net.input_dim <= self.rec_dim:
            raise DataError(
                f"network input width {self.net.input_dim} leaves no room for "
                f"{self.rec_dim} recurrent inputs"
            )

    @property
    def num_monophones(self) -> int:
        return self.senone_map.num_monophones

    @property
    def num_senones(self) -> int:
        return self.senone_map.num_senones

    @property
    def rec_dim(self) -> int:
        return self.k * self.senone_map.num_monophones

    @property
    def spliced_dim(self) -> int:
        return self.net.input_dim - self.rec_dim


class RecurrentBuffer:
    """The last k compressed posteriors, most recent first, zero-initialized."""

    def __init__(self, k: int, num_monophones: int):
        self.slots = np.zeros((k, num_monophones))

    def push(self, vec: np.ndarray) -> None:
        self.slots[1:] = self.slots[:-1]
        self.slots[0] = vec

    def as_input(self) -> np.ndarray:
        """Flat slot-1 .. slot-k concatenation."""
        return self.slots.reshape(-1).copy()


def warm_start(baseline: Mlp, k: int, senone_map: SenoneMap,
               rng: np.random.Generator, zero_recurrent: bool = False) -> RdsnModel:
    """Grow a trained feedforward model into a stacking model.

    Every baseline weight is copied verbatim; the first layer gains k*M new
    input columns for the recurrent block, drawn from the same init scheme as
    fresh layers (or zeroed, which makes the stacking model reproduce the
    baseline bit for bit — useful for debugging and equivalence tests).
    """
    m = senone_map.num_monophones
    if baseline.output_dim != senone_map.num_senones:
        raise DataError(
            f"baseline output width {baseline.output_dim} does not match "
            f"{senone_map.num_senones} senones"
        )
    net = baseline.copy()
    first = net.layers[0]
    rec_dim = k * m
    fan_in = first.in_dim + rec_dim
    fan_out = first.out_dim
    if zero_recurrent:
        new_cols = np.zeros((first.out_dim, rec_dim))
    else:
        new_cols = glorot_uniform(first.out_dim, rec_dim, fan_in, fan_out, rng)
    net.layers[0] = type(first)(
        np.concatenate([first.weights, new_cols], axis=1),
        first.bias,
        first.activation,
        first.dropout_rate,
    )
    return RdsnModel(net, k, senone_map)


def _check_utterance(model: RdsnModel, utt: Utterance, splice_cfg: SpliceConfig) -> None:
    if splice_cfg.spliced_dim(utt.feature_dim) != model.spliced_dim:
        raise DataError(
            f"utterance {utt.utt_id!r}: spliced width "
            f"{splice_cfg.spliced_dim(utt.feature_dim)} does not match model "
            f"spliced width {model.spliced_dim}"
        )


def _feedback_vector(model: RdsnModel, posterior: np.ndarray, label: int,
                     feedback_mode: str) -> np.ndarray:
    if feedback_mode == FEEDBACK_FREE_RUNNING:
        return compress(posterior, model.senone_map)
    return one_hot_compress(label, model.senone_map)


def rdsn_forward_utterance(model: RdsnModel, utt: Utterance,
                           splice_cfg: SpliceConfig, mode: str = "eval",
                           feedback_mode: str = FEEDBACK_FREE_RUNNING,
                           rng: np.random.Generator | None = None,
                           ) -> tuple[np.ndarray, np.ndarray]:
    """Run one utterance strictly in frame order.

    Returns (posteriors, compressed_trace): posteriors[t] is the (T, S)
    output, compressed_trace[t] the (T, M) vector pushed into the buffer
    after frame t."""
    if feedback_mode not in FEEDBACK_MODES:
        raise DataError(f"unknown feedback mode {feedback_mode!r}")
    _check_utterance(model, utt, splice_cfg)
    spliced = splice_all(utt, splice_cfg)
    buf = RecurrentBuffer(model.k, model.num_monophones)
    posteriors = np.empty((utt.num_frames, model.num_senones))
    trace = np.empty((utt.num_frames, model.num_monophones))
    for t in range(utt.num_frames):
        cache = forward(model.net, [spliced[t], buf.as_input()], mode, rng)
        posteriors[t] = cache.posterior
        fb = _feedback_vector(model, cache.posterior, int(utt.labels[t]), feedback_mode)
        trace[t] = fb
        buf.push(fb)
    return posteriors, trace


def rdsn_evaluate(model: RdsnModel, corpus: Corpus, splice_cfg: SpliceConfig,
                  feedback_mode: str = FEEDBACK_FREE_RUNNING) -> EvalStats:
    """Free-running (by default), dropout-off evaluation over a corpus."""
    total_ce = 0.0
    correct = 0
    frames = 0
    for utt in corpus.utterances:
        posteriors, _ = rdsn_forward_utterance(
            model, utt, splice_cfg, "eval", feedback_mode
        )
        for t in range(utt.num_frames):
            label = int(utt.labels[t])
            total_ce += cross_entropy(posteriors[t], label)
            correct += int(np.argmax(posteriors[t])) == label
        frames += utt.num_frames
    if frames == 0:
        return EvalStats(0.0, 0.0, 0)
    return EvalStats(total_ce / frames, correct / frames, frames)


def rdsn_train_epoch(model: RdsnModel, corpus: Corpus, splice_cfg: SpliceConfig,
                     train_cfg: TrainConfig, order_rng: np.random.Generator,
                     dropout_rng: np.random.Generator,
                     feedback_mode: str = FEEDBACK_FREE_RUNNING) -> EpochStats:
    """One epoch of stacking-style SGD.

    Frames run sequentially for feedback; the mean gradient of each minibatch
    of frames is applied with weights frozen at minibatch start. Recurrent
    inputs are constants: no gradient crosses the feedback path.
    """
    if feedback_mode not in FEEDBACK_MODES:
        raise DataError(f"unknown feedback mode {feedback_mode!r}")
    acc = MinibatchAccumulator(model.net, train_cfg.learning_rate,
                               train_cfg.minibatch_size)
    total_ce = 0.0
    correct = 0
    frames = 0
    for ui in shuffled_utterances(corpus, order_rng):
        utt = corpus.utterances[ui]
        _check_utterance(model, utt, splice_cfg)
        spliced = splice_all(utt, splice_cfg)
        buf = RecurrentBuffer(model.k, model.num_monophones)
        for t in range(utt.num_frames):
            label = int(utt.labels[t])
            cache = forward(model.net, [spliced[t], buf.as_input()], "train", dropout_rng)
            ce = cross_entropy(cache.posterior, label)
            _check_loss(ce, utt.utt_id, t)
            total_ce += ce
            correct += int(np.argmax(cache.posterior)) == label
            acc.add(backward(model.net, cache, label))
            buf.push(_feedback_vector(model, cache.posterior, label, feedback_mode))
        acc.flush()
        frames += utt.num_frames
    if frames == 0:
        return EpochStats(0.0, 0.0, 0)
    return EpochStats(total_ce / frames, correct / frames, frames)
