"""Model checkpoints, shared by every model kind.

Binary layout (integers little-endian u32 unless noted, floats little-endian
f64):

    magic "STKCKPT1"
    format version (currently 1)
    layer count
    per layer:
        rows (output width), cols (input width)
        activation tag (u8: 0=linear, 1=elu, 2=softmax)
        dropout rate (f64)
        rows*cols weights, row-major
        rows biases
    k (recurrent frame count; 0 marks a plain feedforward model)
    M (monophone count), S (senone count)
    S senone-map entries

Round-trips are bit-exact. The ELU alpha is not part of the format; loaded
models use the default alpha of 1.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .compression import SenoneMap
from .errors import DataError
from .nn import ACT_ELU, ACT_LINEAR, ACT_SOFTMAX, DenseLayer, Mlp

MAGIC = b"STKCKPT1"
FORMAT_VERSION = 1

_ACT_TO_TAG = {ACT_LINEAR: 0, ACT_ELU: 1, ACT_SOFTMAX: 2}
_TAG_TO_ACT = {v: k for k, v in _ACT_TO_TAG.items()}


@dataclass
class Checkpoint:
    """A model plus the recurrent-input geometry it was trained with."""

    model: Mlp
    k: int  # 0 for a plain feedforward model
    senone_map: SenoneMap

    def __post_init__(self):
        if self.k < 0:
            raise DataError(f"k must be >= 0, got {self.k}")
        if self.model.output_dim != self.senone_map.num_senones:
            raise DataError(
                f"model output width {self.model.output_dim} does not match "
                f"senone map size {self.senone_map.num_senones}"
            )
        if self.k > 0:
            rec = self.k * self.senone_map.num_monophones
            if self.model.input_dim <= rec:
                raise DataError(
                    f"model input width {self.model.input_dim} leaves no room "
                    f"for {rec} recurrent inputs"
                )

    @property
    def num_monophones(self) -> int:
        return self.senone_map.num_monophones

    @property
    def num_senones(self) -> int:
        return self.senone_map.num_senones

    @property
    def spliced_dim(self) -> int:
        return self.model.input_dim - self.k * self.num_monophones


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", FORMAT_VERSION, len(ckpt.model.layers)))
        for layer in ckpt.model.layers:
            f.write(struct.pack("<II", layer.out_dim, layer.in_dim))
            f.write(struct.pack("<B", _ACT_TO_TAG[layer.activation]))
            f.write(struct.pack("<d", layer.dropout_rate))
            f.write(np.ascontiguousarray(layer.weights, dtype="<f8").tobytes())
            f.write(np.ascontiguousarray(layer.bias, dtype="<f8").tobytes())
        smap = ckpt.senone_map
        f.write(struct.pack("<III", ckpt.k, smap.num_monophones, smap.num_senones))
        f.write(smap.mapping.astype("<u4").tobytes())


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as f:
        data = f.read()
    off = 0

    def take(n: int, what: str) -> bytes:
        nonlocal off
        if off + n > len(data):
            raise DataError(f"{path}: truncated file while reading {what}")
        chunk = data[off:off + n]
        off += n
        return chunk

    if take(len(MAGIC), "magic") != MAGIC:
        raise DataError(f"{path}: bad magic (not a checkpoint file)")
    version, n_layers = struct.unpack("<II", take(8, "header"))
    if version != FORMAT_VERSION:
        raise DataError(f"{path}: unsupported format version {version}")
    if n_layers < 1:
        raise DataError(f"{path}: checkpoint has no layers")

    layers = []
    for i in range(n_layers):
        rows, cols = struct.unpack("<II", take(8, f"layer {i} shape"))
        if rows < 1 or cols < 1:
            raise DataError(f"{path}: layer {i} has invalid shape {rows}x{cols}")
        (tag,) = struct.unpack("<B", take(1, f"layer {i} activation"))
        if tag not in _TAG_TO_ACT:
            raise DataError(f"{path}: layer {i} has unknown activation tag {tag}")
        (dropout,) = struct.unpack("<d", take(8, f"layer {i} dropout"))
        weights = np.frombuffer(
            take(rows * cols * 8, f"layer {i} weights"), dtype="<f8"
        ).reshape(rows, cols).copy()
        bias = np.frombuffer(take(rows * 8, f"layer {i} biases"), dtype="<f8").copy()
        try:
            layers.append(DenseLayer(weights, bias, _TAG_TO_ACT[tag], dropout))
        except DataError as e:
            raise DataError(f"{path}: layer {i}: {e}") from None

    k, num_mono, num_senones = struct.unpack("<III", take(12, "model geometry"))
    mapping = np.frombuffer(take(num_senones * 4, "senone map"), dtype="<u4").astype(np.int64)
    if off != len(data):
        raise DataError(f"{path}: {len(data) - off} trailing bytes")
    try:
        smap = SenoneMap(mapping)
    except DataError as e:
        raise DataError(f"{path}: embedded senone map: {e}") from None
    if smap.num_monophones != num_mono:
        raise DataError(
            f"{path}: header says {num_mono} monophones but the embedded map "
            f"has {smap.num_monophones}"
        )
    try:
        model = Mlp(layers)
        return Checkpoint(model, k, smap)
    except DataError as e:
        raise DataError(f"{path}: {e}") from None
