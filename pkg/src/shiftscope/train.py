"""Mini-batch training of the dense classifier.

Batches are stratified: each epoch shuffles every class independently and
deals the samples across batches, so every mini-batch contains all classes
(the batch-level loss terms need every class mean). The optimizer is
adaptive-moment SGD. A (seed, data, config) triple fully determines the
trained parameters; the input net is never mutated.
"""

from dataclasses import dataclass, field

import numpy as np

from .losses import total_loss
from .net import DenseNet, backward, forward


@dataclass
class OptConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 64
    weight_decay: float = 0.0   # decoupled decay on weights (not biases)

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be >= 0")


@dataclass
class TrainLog:
    """Per-epoch means of the loss components (sample-weighted)."""

    total: np.ndarray = field(default_factory=lambda: np.zeros(0))
    ce: np.ndarray = field(default_factory=lambda: np.zeros(0))
    dist: np.ndarray = field(default_factory=lambda: np.zeros(0))
    entropy: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __len__(self):
        return len(self.total)


def _stratified_batches(labels, n_classes, n_batches, rng):
    """Deal each class's shuffled indices across `n_batches` batches."""
    per_class = [np.flatnonzero(labels == c + 1) for c in range(n_classes)]
    chunks = [np.array_split(rng.permutation(idx), n_batches)
              for idx in per_class]
    return [np.concatenate([chunks[c][b] for c in range(n_classes)])
            for b in range(n_batches)]


def train(net, data, loss_cfg, opt_cfg=None, epochs=200, seed=0):
    """Train a copy of `net` on `data`; returns (trained net, TrainLog)."""
    opt_cfg = opt_cfg or OptConfig()
    x = np.ascontiguousarray(data.inputs, dtype=np.float64)
    y = np.asarray(data.labels, dtype=np.int64).ravel()
    n = x.shape[0]
    if n == 0:
        raise ValueError("empty dataset")
    k = net.n_classes
    counts = np.bincount(y - 1, minlength=k) if y.min() >= 1 else None
    if counts is None or y.max() > k or (counts == 0).any():
        raise ValueError(
            f"dataset labels must cover every class in 1..{k}")
    n_batches = max(1, int(np.ceil(n / opt_cfg.batch_size)))
    if loss_cfg.batch_terms_active:
        if opt_cfg.batch_size < 2 * k:
            raise ValueError(
                f"batch_size {opt_cfg.batch_size} < 2*K={2 * k}: too small "
                f"for batch-level loss terms")
        if counts.min() < n_batches:
            raise ValueError(
                f"smallest class has {counts.min()} samples but stratified "
                f"batching needs >= {n_batches} per class")

    rng = np.random.default_rng(seed)
    params_w = [w.copy() for w in net.weights]
    params_b = [b.copy() for b in net.biases]
    work = DenseNet(net.layer_sizes, params_w, params_b, net.activation,
                    net.seed, net.residual)

    m_w = [np.zeros_like(w) for w in params_w]
    v_w = [np.zeros_like(w) for w in params_w]
    m_b = [np.zeros_like(b) for b in params_b]
    v_b = [np.zeros_like(b) for b in params_b]
    step = 0
    lr, b1, b2, eps = (opt_cfg.learning_rate, opt_cfg.beta1, opt_cfg.beta2,
                       opt_cfg.eps)
    wd = opt_cfg.weight_decay

    log_total = np.zeros(epochs)
    log_ce = np.zeros(epochs)
    log_dist = np.zeros(epochs)
    log_ent = np.zeros(epochs)

    for epoch in range(epochs):
        batches = _stratified_batches(y, k, n_batches, rng)
        sums = np.zeros(4)
        for idx in batches:
            xb = np.ascontiguousarray(x[idx])
            yb = y[idx]
            trace = forward(work, xb)
            bd = total_loss(trace, yb, loss_cfg, n_classes=k)
            grads = backward(work, trace, bd.d_logits, bd.d_penultimate)
            step += 1
            corr1 = 1.0 - b1**step
            corr2 = 1.0 - b2**step
            for w, g, m, v in zip(params_w, grads.d_weights, m_w, v_w):
                m *= b1
                m += (1 - b1) * g
                v *= b2
                v += (1 - b2) * g * g
                w -= lr * (m / corr1) / (np.sqrt(v / corr2) + eps)
                if wd:
                    w -= lr * wd * w
            for b, g, m, v in zip(params_b, grads.d_biases, m_b, v_b):
                m *= b1
                m += (1 - b1) * g
                v *= b2
                v += (1 - b2) * g * g
                b -= lr * (m / corr1) / (np.sqrt(v / corr2) + eps)
            nb = len(idx)
            sums += nb * np.array([bd.total, bd.ce, bd.dist, bd.entropy])
        log_total[epoch], log_ce[epoch], log_dist[epoch], log_ent[epoch] = (
            sums / n)

    log = TrainLog(total=log_total, ce=log_ce, dist=log_dist, entropy=log_ent)
    return work, log


def accuracy(net, data):
    """Fraction of samples whose argmax logit matches the label."""
    trace = forward(net, data.inputs)
    pred = trace.logits.argmax(axis=1) + 1
    return float((pred == np.asarray(data.labels)).mean())
