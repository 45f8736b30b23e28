"""Dense feedforward networks with ELU hidden layers, softmax output,
cross-entropy loss, hand-written reverse-mode gradients, and plain SGD.

Everything runs in float64 on single frames. The forward pass accepts the
input either as one vector or as a list of segments; the first layer is then
computed as a sum of per-segment matrix-vector products over the matching
column blocks. The reduction order inside each block is fixed by shape, so a
model whose extra input columns are zero produces bit-identical posteriors
to the same model without those columns. Stacking models rely on this.

Dropout is inverted: surviving activations are scaled by 1/(1-rate) at train
time so the eval-mode pass is a plain forward pass. The output (softmax)
layer never has dropout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError, NumericError

ACT_LINEAR = "linear"
ACT_ELU = "elu"
ACT_SOFTMAX = "softmax"
ACTIVATIONS = (ACT_LINEAR, ACT_ELU, ACT_SOFTMAX)

LOSS_FLOOR = 1e-30


def elu(x, alpha: float = 1.0):
    """Exponential linear unit: x for x > 0, alpha*(exp(x)-1) otherwise.

    Continuous at 0, bounded below by -alpha. Works on scalars and arrays.
    """
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    x = np.asarray(x, dtype=np.float64)
    out = np.where(x > 0, x, alpha * np.expm1(np.minimum(x, 0.0)))
    return float(out) if out.ndim == 0 else out


def elu_grad(x, alpha: float = 1.0):
    """Derivative of elu w.r.t. its pre-activation (alpha*exp(x) below 0)."""
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    x = np.asarray(x, dtype=np.float64)
    out = np.where(x > 0, 1.0, alpha * np.exp(np.minimum(x, 0.0)))
    return float(out) if out.ndim == 0 else out


def softmax(z: np.ndarray) -> np.ndarray:
    """Numerically stable softmax of a logit vector."""
    e = np.exp(z - np.max(z))
    return e / np.sum(e)


def cross_entropy(posterior: np.ndarray, label: int) -> float:
    """-ln(posterior[label] + floor). The floor (1e-30) only guards against
    infinities; it is not part of the analytic gradient."""
    posterior = np.asarray(posterior, dtype=np.float64)
    if not 0 <= label < posterior.shape[0]:
        raise DataError(f"label {label} out of range for {posterior.shape[0]} classes")
    total = float(np.sum(posterior))
    if abs(total - 1.0) > 1e-6:
        raise DataError(f"posterior does not sum to 1 (sum={total!r})")
    return float(-np.log(posterior[label] + LOSS_FLOOR))


@dataclass
class DenseLayer:
    """One dense layer: out = activation(weights @ in + bias), then dropout."""

    weights: np.ndarray  # (out_dim, in_dim)
    bias: np.ndarray  # (out_dim,)
    activation: str = ACT_ELU
    dropout_rate: float = 0.0

    def __post_init__(self):
        self.weights = np.ascontiguousarray(self.weights, dtype=np.float64)
        self.bias = np.ascontiguousarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 2 or self.bias.ndim != 1:
            raise DataError("weights must be 2-d and bias 1-d")
        if self.weights.shape[0] != self.bias.shape[0]:
            raise DataError(
                f"bias length {self.bias.shape[0]} does not match "
                f"weight rows {self.weights.shape[0]}"
            )
        if self.activation not in ACTIVATIONS:
            raise DataError(f"unknown activation {self.activation!r}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise DataError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if self.activation == ACT_SOFTMAX and self.dropout_rate != 0.0:
            raise DataError("softmax output layer must not have dropout")
        if not (np.isfinite(self.weights).all() and np.isfinite(self.bias).all()):
            raise DataError("layer parameters must be finite")

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    def copy(self) -> "DenseLayer":
        return DenseLayer(
            self.weights.copy(), self.bias.copy(), self.activation, self.dropout_rate
        )


@dataclass
class Mlp:
    """A stack of dense layers ending in a softmax over the class set."""

    layers: list[DenseLayer]
    elu_alpha: float = 1.0

    def __post_init__(self):
        if not self.layers:
            raise DataError("model needs at least one layer")
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if prev.out_dim != nxt.in_dim:
                raise DataError(
                    f"layer output width {prev.out_dim} does not feed "
                    f"layer input width {nxt.in_dim}"
                )
        if self.layers[-1].activation != ACT_SOFTMAX:
            raise DataError("final layer must be softmax")
        if self.elu_alpha <= 0:
            raise DataError("elu_alpha must be positive")

    @property
    def input_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_dim

    def num_params(self) -> int:
        return sum(l.weights.size + l.bias.size for l in self.layers)

    def copy(self) -> "Mlp":
        return Mlp([l.copy() for l in self.layers], self.elu_alpha)


@dataclass
class TrainConfig:
    learning_rate: float = 0.01
    epochs: int = 10
    dropout_rate: float = 0.1
    seed: int = 0
    minibatch_size: int = 32

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ConfigError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if self.minibatch_size < 1:
            raise ConfigError(f"minibatch_size must be >= 1, got {self.minibatch_size}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed}")


def glorot_uniform(out_dim: int, in_dim: int, fan_in: int, fan_out: int,
                   rng: np.random.Generator) -> np.ndarray:
    """Uniform init in +-sqrt(6/(fan_in+fan_out)); fans may exceed the drawn
    block's own shape (warm-start draws only the new columns)."""
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(out_dim, in_dim))


def build_mlp(input_dim: int, hidden_dims: list[int], output_dim: int,
              dropout_rate: float, rng: np.random.Generator,
              elu_alpha: float = 1.0) -> Mlp:
    """ELU hidden layers plus a softmax output layer, Glorot-uniform weights,
    zero biases. Dropout applies to hidden-layer outputs only."""
    dims = [input_dim] + list(hidden_dims) + [output_dim]
    layers = []
    for i, (d_in, d_out) in enumerate(zip(dims, dims[1:])):
        last = i == len(dims) - 2
        layers.append(
            DenseLayer(
                weights=glorot_uniform(d_out, d_in, d_in, d_out, rng),
                bias=np.zeros(d_out),
                activation=ACT_SOFTMAX if last else ACT_ELU,
                dropout_rate=0.0 if last else dropout_rate,
            )
        )
    return Mlp(layers)


@dataclass
class ForwardCache:
    """Everything backward() needs: no recomputation required."""

    input_full: np.ndarray  # concatenated input vector
    layer_inputs: list[np.ndarray]  # input seen by each layer
    pre_acts: list[np.ndarray]  # z = W @ in + b per layer
    masks: list[np.ndarray | None]  # scaled dropout masks (None = no dropout)
    posterior: np.ndarray


def _normalize_segments(x) -> list[np.ndarray]:
    if isinstance(x, np.ndarray):
        segs = [x]
    else:
        segs = [np.asarray(s, dtype=np.float64) for s in x]
    out = []
    for s in segs:
        s = np.asarray(s, dtype=np.float64)
        if s.ndim != 1:
            raise DataError(f"input segments must be 1-d, got shape {s.shape}")
        out.append(s)
    return out


def forward(model: Mlp, x, mode: str = "eval",
            rng: np.random.Generator | None = None) -> ForwardCache:
    """Run the network on one frame.

    `x` is a 1-d vector or a sequence of 1-d segments whose lengths sum to
    model.input_dim. Segments map onto column blocks of the first layer and
    are multiplied block-by-block, which keeps per-block results independent
    of the other blocks' widths.

    mode="train" draws fresh dropout masks from `rng` for every layer with a
    nonzero rate; "eval" disables dropout entirely.
    """
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    segs = _normalize_segments(x)
    total = sum(s.shape[0] for s in segs)
    if total != model.input_dim:
        raise DataError(
            f"input length {total} does not match model input_dim {model.input_dim}"
        )
    for s in segs:
        if not np.isfinite(s).all():
            raise DataError("non-finite values in input")
    needs_mask = mode == "train" and any(l.dropout_rate > 0 for l in model.layers)
    if needs_mask and rng is None:
        raise ValueError("train-mode forward with dropout requires an rng")

    input_full = segs[0] if len(segs) == 1 else np.concatenate(segs)
    layer_inputs: list[np.ndarray] = []
    pre_acts: list[np.ndarray] = []
    masks: list[np.ndarray | None] = []

    a = input_full
    for i, layer in enumerate(model.layers):
        layer_inputs.append(a)
        if i == 0 and len(segs) > 1:
            z = layer.bias.copy()
            off = 0
            for s in segs:
                z += layer.weights[:, off:off + s.shape[0]] @ s
                off += s.shape[0]
        else:
            z = layer.weights @ a + layer.bias
        pre_acts.append(z)
        if layer.activation == ACT_ELU:
            a = elu(z, model.elu_alpha)
        elif layer.activation == ACT_LINEAR:
            a = z
        else:
            a = softmax(z)
        if mode == "train" and layer.dropout_rate > 0.0:
            keep = 1.0 - layer.dropout_rate
            mask = (rng.random(a.shape[0]) < keep) / keep
            a = a * mask
            masks.append(mask)
        else:
            masks.append(None)

    return ForwardCache(input_full, layer_inputs, pre_acts, masks, a)


@dataclass
class Gradients:
    """Per-layer weight/bias gradients plus the gradient w.r.t. the input."""

    d_weights: list[np.ndarray]
    d_biases: list[np.ndarray]
    d_input: np.ndarray | None = None

    @classmethod
    def zeros_like(cls, model: Mlp) -> "Gradients":
        return cls(
            [np.zeros_like(l.weights) for l in model.layers],
            [np.zeros_like(l.bias) for l in model.layers],
        )

    def add_(self, other: "Gradients") -> "Gradients":
        for a, b in zip(self.d_weights, other.d_weights):
            a += b
        for a, b in zip(self.d_biases, other.d_biases):
            a += b
        return self

    def scale_(self, factor: float) -> "Gradients":
        for a in self.d_weights:
            a *= factor
        for a in self.d_biases:
            a *= factor
        return self


def backward(model: Mlp, cache: ForwardCache, label: int) -> Gradients:
    """Exact gradients of the cross-entropy loss for the frame in `cache`.

    Reuses the dropout masks drawn during forward. Also returns the gradient
    w.r.t. the input vector; callers that feed posteriors back as inputs must
    treat that feedback as a constant and ignore it.
    """
    n_out = model.output_dim
    if not 0 <= label < n_out:
        raise DataError(f"label {label} out of range for {n_out} classes")
    if len(cache.pre_acts) != len(model.layers):
        raise DataError("cache does not match model layer count")

    d_weights: list[np.ndarray] = [None] * len(model.layers)  # type: ignore[list-item]
    d_biases: list[np.ndarray] = [None] * len(model.layers)  # type: ignore[list-item]

    # softmax + cross-entropy collapses to (posterior - one_hot) at the logits
    delta = cache.posterior.copy()
    delta[label] -= 1.0

    for i in range(len(model.layers) - 1, -1, -1):
        layer = model.layers[i]
        if layer.activation == ACT_ELU:
            delta = delta * elu_grad(cache.pre_acts[i], model.elu_alpha)
        elif layer.activation == ACT_LINEAR:
            pass
        # softmax handled by the (posterior - one_hot) seed
        d_weights[i] = np.outer(delta, cache.layer_inputs[i])
        d_biases[i] = delta.copy()
        delta = layer.weights.T @ delta
        if i > 0 and cache.masks[i - 1] is not None:
            delta = delta * cache.masks[i - 1]

    return Gradients(d_weights, d_biases, d_input=delta)


def sgd_step(model: Mlp, grads: Gradients, learning_rate: float) -> Mlp:
    """In-place p -= learning_rate * g for every weight and bias."""
    if learning_rate < 0:
        raise ValueError(f"learning_rate must be >= 0, got {learning_rate}")
    if len(grads.d_weights) != len(model.layers):
        raise DataError("gradient layer count does not match model")
    for layer, dw, db in zip(model.layers, grads.d_weights, grads.d_biases):
        if dw.shape != layer.weights.shape or db.shape != layer.bias.shape:
            raise DataError(
                f"gradient shape {dw.shape}/{db.shape} does not match "
                f"layer {layer.weights.shape}/{layer.bias.shape}"
            )
        if not (np.isfinite(dw).all() and np.isfinite(db).all()):
            raise NumericError("non-finite gradient entries; training aborted")
    for layer, dw, db in zip(model.layers, grads.d_weights, grads.d_biases):
        layer.weights -= learning_rate * dw
        layer.bias -= learning_rate * db
    return model


def frame_loss(model: Mlp, x, label: int) -> float:
    """Eval-mode cross-entropy of one frame (deterministic, dropout off)."""
    return cross_entropy(forward(model, x, "eval").posterior, label)


def grad_check(model: Mlp, x, label: int, h: float = 1e-5) -> float:
    """Worst analytic-vs-central-finite-difference gradient discrepancy.

    The discrepancy is measured per parameter as |analytic - numeric| scaled
    by the largest gradient magnitude in the whole model, which keeps the
    finite-difference noise floor (~1e-10 in float64) from dominating entries
    whose true gradient happens to be tiny. Run with dropout off; the loss
    must be deterministic for finite differences to mean anything.
    """
    if h == 0:
        raise ValueError("h must be nonzero")
    cache = forward(model, x, "eval")
    analytic = backward(model, cache, label)

    worst = 0.0
    scale = 0.0
    for layer, dw, db in zip(model.layers, analytic.d_weights, analytic.d_biases):
        for param, grad in ((layer.weights, dw), (layer.bias, db)):
            flat_p = param.reshape(-1)
            flat_g = grad.reshape(-1)
            for j in range(flat_p.shape[0]):
                orig = flat_p[j]
                flat_p[j] = orig + h
                lo_hi = frame_loss(model, x, label)
                flat_p[j] = orig - h
                lo_lo = frame_loss(model, x, label)
                flat_p[j] = orig
                numeric = (lo_hi - lo_lo) / (2.0 * h)
                worst = max(worst, abs(flat_g[j] - numeric))
                scale = max(scale, abs(flat_g[j]), abs(numeric))
    return worst / max(scale, 1e-12)
