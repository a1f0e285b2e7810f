"""Small dense feedforward classifier with explicit forward/backward passes.

Everything is float64 and value-semantic: `forward` returns a full activation
trace, `backward` consumes externally supplied partials for the logits and
(optionally) the penultimate features, so batch-level feature losses can
inject their gradients without the net knowing about them. Input gradients
are available on request (needed by the perturbation-based scorer).
"""

from dataclasses import dataclass, field

import numpy as np

from . import container
from .kernels import ACT_RELU, ACT_TANH, backward_chain, forward_chain

_ACTIVATION_IDS = {"relu": ACT_RELU, "tanh": ACT_TANH}


@dataclass
class DenseNet:
    """Parameters of the classifier: len(layer_sizes)-1 affine layers.

    With `residual` set, width-preserving hidden layers add their input to
    the activation output (identity skip), which keeps the feature map
    geometry-preserving -- the distance-based scorers rely on that.
    """

    layer_sizes: tuple
    weights: list
    biases: list
    activation: str = "relu"
    seed: int = 0
    residual: bool = False

    @property
    def skips(self):
        """Per-hidden-layer skip flags (width-preserving layers only)."""
        sizes = self.layer_sizes
        return [self.residual and sizes[i] == sizes[i + 1]
                for i in range(len(sizes) - 2)]

    @property
    def input_dim(self):
        return self.layer_sizes[0]

    @property
    def n_classes(self):
        return self.layer_sizes[-1]

    @property
    def penultimate_dim(self):
        return self.layer_sizes[-2]

    @property
    def n_hidden(self):
        return len(self.layer_sizes) - 2

    def copy(self):
        return DenseNet(self.layer_sizes, [w.copy() for w in self.weights],
                        [b.copy() for b in self.biases], self.activation,
                        self.seed, self.residual)


@dataclass
class ForwardTrace:
    """Per-layer activation record for one batch."""

    inputs: np.ndarray                  # batch x d
    pre: list = field(default_factory=list)    # hidden pre-activations
    post: list = field(default_factory=list)   # hidden post-activations
    logits: np.ndarray = None           # batch x K

    @property
    def penultimate(self):
        """Features feeding the final affine layer (the input if no hidden)."""
        return self.post[-1] if self.post else self.inputs

    @property
    def hidden(self):
        """Post-activations of each hidden layer, shallow to deep."""
        return self.post


@dataclass
class GradientSet:
    """Parameter gradients, shape-matched to a DenseNet, plus optional d_input."""

    d_weights: list
    d_biases: list
    d_input: np.ndarray = None


def init_net(layer_sizes, seed, activation="relu", residual=False):
    """Build a net with fan-in scaled uniform weights and zero biases.

    Weight_ij ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), drawn layer by layer from
    a generator seeded with `seed`, so identical (sizes, seed) give
    bit-identical parameters.
    """
    sizes = tuple(int(s) for s in layer_sizes)
    if len(sizes) < 2:
        raise ValueError(f"need at least input and output sizes, got {sizes}")
    if any(s < 1 for s in sizes):
        raise ValueError(f"layer sizes must be >= 1, got {sizes}")
    if sizes[-2] < 2:
        raise ValueError(
            f"penultimate width must be >= 2 (correlation terms need two "
            f"feature dimensions), got {sizes[-2]}")
    if activation not in _ACTIVATION_IDS:
        raise ValueError(f"unknown activation {activation!r}")
    rng = np.random.default_rng(seed)
    weights = []
    biases = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return DenseNet(sizes, weights, biases, activation, int(seed),
                    bool(residual))


def _as_batch(x, dim, what="batch"):
    arr = np.ascontiguousarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{what} must be 2-D, got shape {arr.shape}")
    if arr.shape[1] != dim:
        raise ValueError(
            f"{what} width {arr.shape[1]} does not match expected {dim}")
    return arr


def forward(net, batch):
    """Run the batch through the net, recording every layer activation."""
    x = _as_batch(batch, net.input_dim, "input batch")
    pre, post, logits = forward_chain(
        net.weights, net.biases, x, _ACTIVATION_IDS[net.activation],
        net.skips)
    return ForwardTrace(inputs=x, pre=pre, post=post, logits=logits)


def backward(net, trace, d_logits, d_penultimate=None, want_input_grad=False):
    """Backpropagate supplied partials to every parameter.

    `d_logits` are the partials of some scalar with respect to the logits;
    `d_penultimate` (optional) is added at the penultimate features. Input
    gradients are populated only when requested.
    """
    d_logits = _as_batch(d_logits, net.n_classes, "d_logits")
    if d_logits.shape[0] != trace.logits.shape[0]:
        raise ValueError(
            f"d_logits rows {d_logits.shape[0]} != batch {trace.logits.shape[0]}")
    if d_penultimate is not None:
        d_penultimate = _as_batch(
            d_penultimate, net.penultimate_dim, "d_penultimate")
        if d_penultimate.shape[0] != d_logits.shape[0]:
            raise ValueError("d_penultimate rows do not match d_logits rows")
    d_w, d_b, d_x = backward_chain(
        net.weights, trace.pre, trace.post, trace.inputs, d_logits,
        d_penultimate, _ACTIVATION_IDS[net.activation], net.skips,
        bool(want_input_grad))
    return GradientSet(d_weights=d_w, d_biases=d_b, d_input=d_x)


def save_net(net, path):
    """Write parameters to the versioned container format."""
    arrays = {}
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        arrays[f"w{i}"] = w
        arrays[f"b{i}"] = b
    meta = {"layer_sizes": list(net.layer_sizes),
            "activation": net.activation, "seed": net.seed,
            "residual": net.residual}
    container.write_container(path, "dense_net", meta, arrays)


def load_net(path):
    kind, meta, arrays = container.read_container(path)
    if kind != "dense_net":
        raise container.ContainerError(
            f"{path}: expected a dense_net container, found {kind!r}")
    sizes = tuple(meta["layer_sizes"])
    weights = [arrays[f"w{i}"] for i in range(len(sizes) - 1)]
    biases = [arrays[f"b{i}"] for i in range(len(sizes) - 1)]
    return DenseNet(sizes, weights, biases, meta["activation"], meta["seed"],
                    meta.get("residual", False))
