"""Shared fixtures: tiny corpora, maps, and models sized for fast tests."""

import numpy as np
import pytest

from stacknet.compression import SenoneMap
from stacknet.corpus import Corpus, SpliceConfig, Utterance
from stacknet.nn import build_mlp
from stacknet.rng import STREAM_INIT, make_stream


def make_utterance(rng, utt_id, num_frames, feature_dim, num_senones):
    frames = rng.standard_normal((num_frames, feature_dim))
    labels = rng.integers(num_senones, size=num_frames)
    return Utterance(utt_id, frames, labels)


def make_corpus(seed=0, num_utterances=4, num_frames=12, feature_dim=3,
                num_senones=6):
    rng = np.random.default_rng(seed)
    utts = [
        make_utterance(rng, f"u{i:03d}", num_frames, feature_dim, num_senones)
        for i in range(num_utterances)
    ]
    return Corpus(utts, num_senones, feature_dim)


@pytest.fixture
def tiny_corpus():
    return make_corpus()


@pytest.fixture
def tiny_map():
    # 6 senones over 3 monophones, two each
    return SenoneMap(np.array([0, 0, 1, 1, 2, 2]))


@pytest.fixture
def splice_cfg():
    return SpliceConfig(2, 2)


@pytest.fixture
def tiny_net(tiny_corpus, splice_cfg):
    rng = make_stream(5, STREAM_INIT)
    return build_mlp(splice_cfg.spliced_dim(tiny_corpus.feature_dim), [8, 8],
                     tiny_corpus.num_senones, 0.0, rng)
