"""Synthetic corpus generator: determinism, statistics, split independence."""

import numpy as np
import pytest

from stacknet.datagen import GenConfig, generate_corpus, senone_means
from stacknet.errors import ConfigError


def small_config(**overrides):
    defaults = dict(
        num_monophones=4,
        senones_per_monophone=3,
        feature_dim=5,
        train_utterances=6,
        dev_utterances=3,
        test_utterances=2,
        min_frames=20,
        max_frames=40,
        seed=0,
    )
    defaults.update(overrides)
    return GenConfig(**defaults)


def corpora_equal(a, b):
    if len(a.utterances) != len(b.utterances):
        return False
    return all(
        ua.utt_id == ub.utt_id
        and np.array_equal(ua.frames, ub.frames)
        and np.array_equal(ua.labels, ub.labels)
        for ua, ub in zip(a.utterances, b.utterances)
    )


class TestGenConfig:
    def test_defaults(self):
        cfg = GenConfig()
        assert cfg.num_senones == 32
        assert cfg.self_transition_prob == 0.85

    @pytest.mark.parametrize("field,value", [
        ("num_monophones", 0),
        ("senones_per_monophone", 0),
        ("feature_dim", 0),
        ("train_utterances", 0),
        ("min_frames", 0),
    ])
    def test_counts_must_be_positive(self, field, value):
        with pytest.raises(ConfigError, match=field):
            small_config(**{field: value})

    def test_probability_range(self):
        with pytest.raises(ConfigError, match="self_transition_prob"):
            small_config(self_transition_prob=1.5)
        with pytest.raises(ConfigError, match="self_transition_prob"):
            small_config(self_transition_prob=-0.1)
        # both endpoints are legal
        small_config(self_transition_prob=0.0)
        small_config(self_transition_prob=1.0)

    def test_negative_sigma(self):
        with pytest.raises(ConfigError, match="noise_sigma"):
            small_config(noise_sigma=-1.0)

    def test_frame_range_order(self):
        with pytest.raises(ConfigError, match="min_frames"):
            small_config(min_frames=50, max_frames=40)

    def test_bad_seed(self):
        with pytest.raises(ConfigError, match="seed"):
            small_config(seed=-1)


class TestStructure:
    def test_split_sizes_and_ids(self):
        train, dev, test, smap = generate_corpus(small_config())
        assert len(train.utterances) == 6
        assert len(dev.utterances) == 3
        assert len(test.utterances) == 2
        assert train.utterances[0].utt_id == "train-00000"
        assert dev.utterances[2].utt_id == "dev-00002"
        assert train.split == "train"

    def test_map_groups_ascending_blocks(self):
        _, _, _, smap = generate_corpus(small_config())
        assert np.array_equal(smap.mapping, [0, 0, 0, 1, 1, 1, 2, 2, 2, 3, 3, 3])

    def test_frame_counts_in_range(self):
        train, _, _, _ = generate_corpus(small_config())
        for utt in train.utterances:
            assert 20 <= utt.num_frames <= 40

    def test_labels_in_range(self):
        cfg = small_config()
        train, _, _, _ = generate_corpus(cfg)
        for utt in train.utterances:
            assert utt.labels.min() >= 0
            assert utt.labels.max() < cfg.num_senones

    def test_feature_shape(self):
        train, _, _, _ = generate_corpus(small_config())
        utt = train.utterances[0]
        assert utt.frames.shape == (utt.num_frames, 5)


class TestDeterminism:
    def test_same_seed_bitwise_identical(self):
        a = generate_corpus(small_config())
        b = generate_corpus(small_config())
        for ca, cb in zip(a[:3], b[:3]):
            assert corpora_equal(ca, cb)

    def test_different_seed_differs(self):
        a, _, _, _ = generate_corpus(small_config(seed=0))
        b, _, _, _ = generate_corpus(small_config(seed=1))
        assert not corpora_equal(a, b)

    def test_resizing_dev_leaves_train_unchanged(self):
        # Disjoint substreams per split: per-utterance draws never shift.
        a_train, _, a_test, _ = generate_corpus(small_config(dev_utterances=3))
        b_train, _, b_test, _ = generate_corpus(small_config(dev_utterances=9))
        assert corpora_equal(a_train, b_train)
        assert corpora_equal(a_test, b_test)

    def test_growing_a_split_keeps_existing_utterances(self):
        a_train, _, _, _ = generate_corpus(small_config(train_utterances=4))
        b_train, _, _, _ = generate_corpus(small_config(train_utterances=6))
        for ua, ub in zip(a_train.utterances, b_train.utterances):
            assert np.array_equal(ua.frames, ub.frames)
            assert np.array_equal(ua.labels, ub.labels)

    def test_splits_are_distinct(self):
        train, dev, _, _ = generate_corpus(
            small_config(train_utterances=2, dev_utterances=2))
        ua, ub = train.utterances[0], dev.utterances[0]
        assert ua.frames.shape != ub.frames.shape or \
            not np.array_equal(ua.frames, ub.frames)


class TestStatistics:
    def test_noiseless_frames_equal_senone_means(self):
        cfg = small_config(noise_sigma=0.0)
        means = senone_means(cfg)
        train, _, _, _ = generate_corpus(cfg)
        for utt in train.utterances:
            assert np.array_equal(utt.frames, means[utt.labels])

    def test_sticky_chain_never_leaves_monophone_at_prob_one(self):
        cfg = small_config(self_transition_prob=1.0)
        train, _, _, _ = generate_corpus(cfg)
        for utt in train.utterances:
            monophones = utt.labels // cfg.senones_per_monophone
            assert np.all(monophones == monophones[0])

    def test_chain_always_moves_at_prob_zero(self):
        cfg = small_config(self_transition_prob=0.0)
        train, _, _, _ = generate_corpus(cfg)
        for utt in train.utterances:
            monophones = utt.labels // cfg.senones_per_monophone
            assert np.all(monophones[1:] != monophones[:-1])

    def test_self_transition_frequency(self):
        # >= 1e5 consecutive pairs keeps the empirical rate well inside 0.01.
        cfg = GenConfig(train_utterances=600, dev_utterances=1, test_utterances=1,
                        min_frames=200, max_frames=200, seed=3)
        train, _, _, _ = generate_corpus(cfg)
        same = 0
        pairs = 0
        for utt in train.utterances:
            monophones = utt.labels // cfg.senones_per_monophone
            same += int(np.sum(monophones[1:] == monophones[:-1]))
            pairs += utt.num_frames - 1
        assert pairs >= 100_000
        assert abs(same / pairs - 0.85) < 0.01

    def test_senone_uniform_within_monophone(self):
        cfg = GenConfig(num_monophones=2, senones_per_monophone=4,
                        train_utterances=100, dev_utterances=1,
                        test_utterances=1, min_frames=200, max_frames=200)
        train, _, _, _ = generate_corpus(cfg)
        labels = np.concatenate([u.labels for u in train.utterances])
        offsets = labels % cfg.senones_per_monophone
        counts = np.bincount(offsets, minlength=4)
        freqs = counts / counts.sum()
        assert np.abs(freqs - 0.25).max() < 0.01

    def test_consecutive_labels_share_monophone_more_than_chance(self):
        # The feedback signal exists only if neighbours are correlated.
        cfg = small_config(num_monophones=8, train_utterances=50,
                           min_frames=100, max_frames=100)
        train, _, _, _ = generate_corpus(cfg)
        same = 0
        pairs = 0
        for utt in train.utterances:
            monophones = utt.labels // cfg.senones_per_monophone
            same += int(np.sum(monophones[1:] == monophones[:-1]))
            pairs += utt.num_frames - 1
        assert same / pairs > 0.5  # chance would be 1/8

    def test_noise_scale(self):
        cfg = small_config(noise_sigma=2.0, train_utterances=50,
                           min_frames=100, max_frames=100)
        means = senone_means(cfg)
        train, _, _, _ = generate_corpus(cfg)
        residuals = np.concatenate(
            [u.frames - means[u.labels] for u in train.utterances])
        assert abs(residuals.std() - 2.0) < 0.05

    def test_means_are_bounded(self):
        means = senone_means(small_config())
        assert means.shape == (12, 5)
        assert means.min() >= -2.0
        assert means.max() <= 2.0

    def test_single_monophone_chain_is_constant(self):
        cfg = small_config(num_monophones=1, self_transition_prob=0.5)
        train, _, _, _ = generate_corpus(cfg)
        for utt in train.utterances:
            monophones = utt.labels // cfg.senones_per_monophone
            assert np.all(monophones == 0)
