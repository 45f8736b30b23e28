"""Checkpoint serialization: bit-exact round trips and corruption handling."""

import numpy as np
import pytest

from stacknet.checkpoint import (
    FORMAT_VERSION,
    MAGIC,
    Checkpoint,
    load_checkpoint,
    save_checkpoint,
)
from stacknet.compression import SenoneMap
from stacknet.errors import DataError
from stacknet.nn import ACT_ELU, ACT_SOFTMAX, DenseLayer, Mlp, build_mlp
from stacknet.rng import STREAM_INIT, make_stream


def small_map():
    return SenoneMap(np.array([0, 0, 1, 1, 2, 2]))


def small_checkpoint(k=0, seed=7):
    smap = small_map()
    rec = k * smap.num_monophones
    net = build_mlp(5 + rec, [8, 4], smap.num_senones, 0.0,
                    make_stream(seed, STREAM_INIT))
    return Checkpoint(net, k, smap)


class TestRoundTrip:
    def test_bit_exact(self, tmp_path):
        ckpt = small_checkpoint(k=2)
        path = tmp_path / "m.ckpt"
        save_checkpoint(ckpt, path)
        loaded = load_checkpoint(path)

        assert loaded.k == 2
        assert np.array_equal(loaded.senone_map.mapping, ckpt.senone_map.mapping)
        assert len(loaded.model.layers) == len(ckpt.model.layers)
        for a, b in zip(loaded.model.layers, ckpt.model.layers):
            assert np.array_equal(a.weights, b.weights)
            assert np.array_equal(a.bias, b.bias)
            assert a.activation == b.activation
            assert a.dropout_rate == b.dropout_rate

    def test_rewrite_is_byte_identical(self, tmp_path):
        ckpt = small_checkpoint(k=1)
        p1 = tmp_path / "a.ckpt"
        p2 = tmp_path / "b.ckpt"
        save_checkpoint(ckpt, p1)
        save_checkpoint(load_checkpoint(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_k_zero_marks_baseline(self, tmp_path):
        path = tmp_path / "m.ckpt"
        save_checkpoint(small_checkpoint(k=0), path)
        assert load_checkpoint(path).k == 0

    def test_dropout_rates_survive(self, tmp_path):
        smap = small_map()
        net = build_mlp(5, [8], smap.num_senones, 0.3, make_stream(0, STREAM_INIT))
        path = tmp_path / "m.ckpt"
        save_checkpoint(Checkpoint(net, 0, smap), path)
        loaded = load_checkpoint(path)
        assert loaded.model.layers[0].dropout_rate == 0.3
        assert loaded.model.layers[-1].dropout_rate == 0.0

    def test_elu_alpha_not_persisted(self, tmp_path):
        # Deliberate format limitation: alpha resets to the default on load.
        smap = small_map()
        net = build_mlp(5, [4], smap.num_senones, 0.0, make_stream(0, STREAM_INIT),
                        elu_alpha=2.0)
        path = tmp_path / "m.ckpt"
        save_checkpoint(Checkpoint(net, 0, smap), path)
        assert load_checkpoint(path).model.elu_alpha == 1.0


class TestValidation:
    def test_negative_k(self):
        smap = small_map()
        net = build_mlp(5, [4], smap.num_senones, 0.0, make_stream(0, STREAM_INIT))
        with pytest.raises(DataError, match="k must be >= 0"):
            Checkpoint(net, -1, smap)

    def test_output_width_mismatch(self):
        net = build_mlp(5, [4], 7, 0.0, make_stream(0, STREAM_INIT))
        with pytest.raises(DataError, match="does not match"):
            Checkpoint(net, 0, small_map())

    def test_no_room_for_recurrent_inputs(self):
        smap = small_map()
        # k=2 with M=3 needs strictly more than 6 input columns.
        net = build_mlp(6, [4], smap.num_senones, 0.0, make_stream(0, STREAM_INIT))
        with pytest.raises(DataError, match="leaves no room"):
            Checkpoint(net, 2, smap)

    def test_spliced_dim(self):
        ckpt = small_checkpoint(k=2)
        assert ckpt.spliced_dim == 5
        assert ckpt.num_monophones == 3
        assert ckpt.num_senones == 6


class TestCorruptFiles:
    def write(self, tmp_path, mutate=None):
        path = tmp_path / "m.ckpt"
        save_checkpoint(small_checkpoint(k=1), path)
        if mutate is not None:
            data = bytearray(path.read_bytes())
            mutate(data)
            path.write_bytes(bytes(data))
        return path

    def test_bad_magic(self, tmp_path):
        def mutate(data):
            data[:8] = b"NOTCKPT0"
        path = self.write(tmp_path, mutate)
        with pytest.raises(DataError, match="bad magic"):
            load_checkpoint(path)

    def test_unsupported_version(self, tmp_path):
        def mutate(data):
            data[8:12] = (FORMAT_VERSION + 1).to_bytes(4, "little")
        path = self.write(tmp_path, mutate)
        with pytest.raises(DataError, match="unsupported format version"):
            load_checkpoint(path)

    def test_unknown_activation_tag(self, tmp_path):
        # Tag byte of layer 0 sits right after magic+version+count+shape.
        def mutate(data):
            data[len(MAGIC) + 8 + 8] = 9
        path = self.write(tmp_path, mutate)
        with pytest.raises(DataError, match="unknown activation tag"):
            load_checkpoint(path)

    def test_truncated(self, tmp_path):
        path = self.write(tmp_path)
        data = path.read_bytes()
        for cut in (4, 12, 20, 40, len(data) - 1):
            path.write_bytes(data[:cut])
            with pytest.raises(DataError, match="truncated"):
                load_checkpoint(path)

    def test_trailing_bytes(self, tmp_path):
        path = self.write(tmp_path)
        path.write_bytes(path.read_bytes() + b"\x00\x00")
        with pytest.raises(DataError, match="trailing bytes"):
            load_checkpoint(path)

    def test_zero_layer_count(self, tmp_path):
        def mutate(data):
            data[12:16] = (0).to_bytes(4, "little")
        path = self.write(tmp_path, mutate)
        with pytest.raises(DataError, match="no layers"):
            load_checkpoint(path)

    def test_bad_embedded_map(self, tmp_path):
        smap = SenoneMap(np.array([0, 0, 1, 1, 2, 2]))
        net = build_mlp(5, [4], 6, 0.0, make_stream(0, STREAM_INIT))
        path = tmp_path / "m.ckpt"
        save_checkpoint(Checkpoint(net, 0, smap), path)
        data = bytearray(path.read_bytes())
        # Map entries are the last S u32 words; pointing them all at
        # monophone 2 leaves 0 and 1 uncovered.
        map_off = len(data) - 6 * 4
        for i in range(6):
            data[map_off + 4 * i:map_off + 4 * i + 4] = (2).to_bytes(4, "little")
        path.write_bytes(bytes(data))
        with pytest.raises(DataError, match="embedded senone map"):
            load_checkpoint(path)

    def test_monophone_count_mismatch(self, tmp_path):
        path = self.write(tmp_path)
        data = bytearray(path.read_bytes())
        # The (k, M, S) triple sits just before the S map words; M is the
        # middle field.
        m_off = len(data) - 6 * 4 - 8
        data[m_off:m_off + 4] = (5).to_bytes(4, "little")
        path.write_bytes(bytes(data))
        with pytest.raises(DataError, match="embedded map"):
            load_checkpoint(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            load_checkpoint(tmp_path / "nope.ckpt")


def test_handwritten_layer_round_trip(tmp_path):
    # Exact float payloads, no RNG: values must come back verbatim.
    w1 = np.array([[0.5, -1.25], [3.0, 0.125]])
    b1 = np.array([0.1, -0.2])
    w2 = np.array([[1.0, 0.0], [0.0, 1.0], [0.25, 0.75]])
    b2 = np.zeros(3)
    net = Mlp([
        DenseLayer(w1, b1, ACT_ELU, 0.5),
        DenseLayer(w2, b2, ACT_SOFTMAX, 0.0),
    ])
    smap = SenoneMap(np.array([0, 1, 2]))
    path = tmp_path / "m.ckpt"
    save_checkpoint(Checkpoint(net, 0, smap), path)
    loaded = load_checkpoint(path)
    assert np.array_equal(loaded.model.layers[0].weights, w1)
    assert np.array_equal(loaded.model.layers[0].bias, b1)
    assert np.array_equal(loaded.model.layers[1].weights, w2)
    assert loaded.model.layers[0].dropout_rate == 0.5
