"""In-distribution score functions.

Five scorers, one orientation: higher score = more in-distribution. The
confidence pair (max-softmax, tempered-softmax-with-perturbation) reads the
logits; the distance pair (class-Mahalanobis, gram-bound deviation) reads
hidden-layer features; the energy score is a tempered logsumexp of the
logits. The distance scorers are fitted on training features and are
immutable afterwards; fitted state round-trips through the same container
format as the classifier parameters.

"Layers" for the distance scorers are hidden post-activations, indexed from
the first hidden layer; the penultimate layer is the last one.
"""

from dataclasses import dataclass, field

import numpy as np

from . import container
from .net import ForwardTrace, backward, forward

GRAM_EPS = 1e-9


def softmax(logits, axis=-1):
    z = np.asarray(logits, dtype=np.float64)
    shifted = z - z.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def logsumexp(values, axis=-1):
    v = np.asarray(values, dtype=np.float64)
    m = v.max(axis=axis, keepdims=True)
    out = m.squeeze(axis) + np.log(np.exp(v - m).sum(axis=axis))
    return out


def score_msp(logits):
    """Maximum softmax probability; works on a vector or a batch."""
    p = softmax(logits)
    return p.max(axis=-1)


@dataclass
class OdinConfig:
    temperature: float = 1000.0
    epsilon: float = 0.0

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")


def score_odin(net, x, cfg=None):
    """Tempered max-softmax after one signed-gradient input step.

    With epsilon > 0 the input moves by -epsilon * sign(grad) of the tempered
    negative log max-softmax, which can only be computed through the net's
    input gradient. epsilon = 0 (the default, no shifted-validation tuning)
    reduces to tempered MSP; (T=1, epsilon=0) is exactly MSP.
    """
    cfg = cfg or OdinConfig()
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    xb = np.ascontiguousarray(np.atleast_2d(x))
    trace = forward(net, xb)
    if cfg.epsilon > 0:
        t = cfg.temperature
        p = softmax(trace.logits / t)
        top = p.argmax(axis=1)
        d_logits = p.copy()
        d_logits[np.arange(len(top)), top] -= 1.0
        d_logits /= t
        grads = backward(net, trace, d_logits, want_input_grad=True)
        xb = xb - cfg.epsilon * np.sign(grads.d_input)
        trace = forward(net, xb)
    scores = softmax(trace.logits / cfg.temperature).max(axis=1)
    return float(scores[0]) if single else scores


def score_energy(logits, temperature=1.0):
    """Negative free energy, T * logsumexp(logits / T); shift-equivariant."""
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    return temperature * logsumexp(np.asarray(logits) / temperature)


# ---------------------------------------------------------------------------
# Mahalanobis


@dataclass
class MahalanobisModel:
    """Per-layer class means and tied precision, plus layer weights."""

    layer_ids: tuple
    means: list                 # per layer: K x D_l
    precisions: list            # per layer: D_l x D_l, symmetric PD
    layer_weights: np.ndarray   # alpha_l >= 0


def _as_feature_layers(features):
    if isinstance(features, ForwardTrace):
        raise TypeError("pass trace features via layer selection helpers")
    if isinstance(features, np.ndarray):
        return [np.asarray(features, dtype=np.float64)]
    return [np.asarray(f, dtype=np.float64) for f in features]


def select_layers(trace, layers="penultimate"):
    """Pick feature matrices out of a trace.

    `layers` is "penultimate", "all", or a sequence of hidden-layer indices
    (0 = first hidden layer). Nets without hidden layers expose the input as
    their only feature layer.
    """
    hidden = trace.hidden if trace.hidden else [trace.inputs]
    n = len(hidden)
    if layers == "penultimate":
        ids = (n - 1,)
    elif layers == "all":
        ids = tuple(range(n))
    else:
        ids = tuple(int(i) for i in layers)
        if any(i < 0 or i >= n for i in ids):
            raise ValueError(f"layer ids {ids} out of range for {n} layers")
    return ids, [hidden[i] for i in ids]


def fit_mahalanobis(features, labels, ridge=None, layer_ids=None,
                    layer_weights=None):
    """Fit class means and tied covariance per layer.

    `features` is one matrix or a sequence of per-layer matrices (n x D_l).
    The tied covariance pools class-centered samples over all classes
    (population normalization) and is ridged by `ridge` (default
    1e-6 * trace(cov)/D) before inversion.
    """
    layers = _as_feature_layers(features)
    labels = np.asarray(labels, dtype=np.int64).ravel()
    k = int(labels.max())
    counts = np.bincount(labels - 1, minlength=k)
    if (counts < 2).any():
        raise ValueError(
            f"every class needs >= 2 samples, got counts {counts.tolist()}")
    means = []
    precisions = []
    for z in layers:
        n, d = z.shape
        mu = np.zeros((k, d))
        np.add.at(mu, labels - 1, z)
        mu /= counts[:, None]
        centered = z - mu[labels - 1]
        cov = centered.T @ centered / n
        r = 1e-6 * np.trace(cov) / d if ridge is None else float(ridge)
        cov = cov + r * np.eye(d)
        try:
            np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise ValueError(
                "singular covariance; increase the ridge") from exc
        precisions.append(np.linalg.inv(cov))
        means.append(mu)
    ids = tuple(range(len(layers))) if layer_ids is None else tuple(layer_ids)
    alphas = (np.ones(len(layers)) if layer_weights is None
              else np.asarray(layer_weights, dtype=np.float64))
    if (alphas < 0).any() or len(alphas) != len(layers):
        raise ValueError("layer_weights must be nonnegative, one per layer")
    return MahalanobisModel(layer_ids=ids, means=means, precisions=precisions,
                            layer_weights=alphas)


def score_mahalanobis(model, features):
    """Weighted sum over layers of max-over-classes negative squared distance.

    `features` is one matrix or a sequence matching the model's layers.
    Always <= 0; equals 0 only when every layer feature sits on a class mean.
    """
    layers = _as_feature_layers(features)
    if len(layers) != len(model.means):
        raise ValueError(
            f"model has {len(model.means)} layers, got {len(layers)}")
    total = None
    for z, mu, prec, alpha in zip(layers, model.means, model.precisions,
                                  model.layer_weights):
        if z.shape[1] != mu.shape[1]:
            raise ValueError(
                f"feature width {z.shape[1]} != fitted width {mu.shape[1]}")
        diff = z[:, None, :] - mu[None, :, :]          # n x K x D
        d2 = np.einsum("nkd,de,nke->nk", diff, prec, diff)
        layer_score = alpha * (-d2).max(axis=1)
        total = layer_score if total is None else total + layer_score
    return total


def score_mahalanobis_trace(model, trace):
    """Score a forward trace using the model's recorded layer ids."""
    hidden = trace.hidden if trace.hidden else [trace.inputs]
    return score_mahalanobis(model, [hidden[i] for i in model.layer_ids])


# ---------------------------------------------------------------------------
# Gram-bound deviation


@dataclass
class GramBounds:
    """Per (class, layer, order) min/max of the gram-feature entries.

    Gram features of a layer activation vector a at order p are the
    upper-triangular entries (diagonal included) of outer(a^p, a^p).
    """

    layer_ids: tuple
    orders: tuple
    n_classes: int
    mins: list = field(default_factory=list)   # [class][layer][order] vectors
    maxs: list = field(default_factory=list)


def _gram_features(z, order):
    v = z**order
    d = z.shape[1]
    iu, ju = np.triu_indices(d)
    return v[:, iu] * v[:, ju]


def fit_gram(features, labels, orders=(1, 2), layer_ids=None):
    """Record per-class entrywise bounds of the gram features."""
    layers = _as_feature_layers(features)
    labels = np.asarray(labels, dtype=np.int64).ravel()
    k = int(labels.max())
    counts = np.bincount(labels - 1, minlength=k)
    if (counts < 1).any():
        raise ValueError(
            f"every class needs >= 1 training sample, got {counts.tolist()}")
    orders = tuple(int(p) for p in orders)
    if any(p < 1 for p in orders):
        raise ValueError("orders must be positive integers")
    mins = []
    maxs = []
    for c in range(k):
        sel = labels == c + 1
        mins_c = []
        maxs_c = []
        for z in layers:
            feats = [_gram_features(z[sel], p) for p in orders]
            mins_c.append([f.min(axis=0) for f in feats])
            maxs_c.append([f.max(axis=0) for f in feats])
        mins.append(mins_c)
        maxs.append(maxs_c)
    ids = tuple(range(len(layers))) if layer_ids is None else tuple(layer_ids)
    return GramBounds(layer_ids=ids, orders=orders, n_classes=k,
                      mins=mins, maxs=maxs)


def score_gram(bounds, features, predicted_labels):
    """Negative total normalized bound violation, per sample.

    Each entry outside its fitted [min, max] for the sample's predicted class
    contributes max(0, min-v, v-max) / (|min| + |max| + 1e-9); the score is
    minus the sum, so anything inside all bounds scores 0.
    """
    layers = _as_feature_layers(features)
    if len(layers) != len(bounds.layer_ids):
        raise ValueError(
            f"bounds cover {len(bounds.layer_ids)} layers, got {len(layers)}")
    predicted = np.asarray(predicted_labels, dtype=np.int64).ravel()
    if predicted.min() < 1 or predicted.max() > bounds.n_classes:
        raise ValueError("predicted labels outside the fitted class range")
    n = layers[0].shape[0]
    total = np.zeros(n)
    per_layer_feats = [[_gram_features(z, p) for p in bounds.orders]
                       for z in layers]
    for c in range(bounds.n_classes):
        sel = predicted == c + 1
        if not sel.any():
            continue
        for li in range(len(layers)):
            for oi in range(len(bounds.orders)):
                v = per_layer_feats[li][oi][sel]
                mn = bounds.mins[c][li][oi]
                mx = bounds.maxs[c][li][oi]
                excess = np.maximum(0.0, np.maximum(mn - v, v - mx))
                total[sel] += (excess / (np.abs(mn) + np.abs(mx) + GRAM_EPS)
                               ).sum(axis=1)
    return -total


def score_gram_trace(bounds, trace):
    hidden = trace.hidden if trace.hidden else [trace.inputs]
    predicted = trace.logits.argmax(axis=1) + 1
    return score_gram(bounds, [hidden[i] for i in bounds.layer_ids], predicted)


# ---------------------------------------------------------------------------
# Serialization

def save_mahalanobis(model, path):
    arrays = {}
    for i, (mu, prec) in enumerate(zip(model.means, model.precisions)):
        arrays[f"means{i}"] = mu
        arrays[f"precision{i}"] = prec
    arrays["layer_weights"] = model.layer_weights
    meta = {"layer_ids": list(model.layer_ids)}
    container.write_container(path, "mahalanobis", meta, arrays)


def load_mahalanobis(path):
    kind, meta, arrays = container.read_container(path)
    if kind != "mahalanobis":
        raise container.ContainerError(f"{path}: not a mahalanobis container")
    ids = tuple(meta["layer_ids"])
    means = [arrays[f"means{i}"] for i in range(len(ids))]
    precisions = [arrays[f"precision{i}"] for i in range(len(ids))]
    return MahalanobisModel(layer_ids=ids, means=means, precisions=precisions,
                            layer_weights=arrays["layer_weights"])


def save_gram(bounds, path):
    arrays = {}
    for c in range(bounds.n_classes):
        for li in range(len(bounds.layer_ids)):
            for oi in range(len(bounds.orders)):
                arrays[f"min_c{c}_l{li}_o{oi}"] = bounds.mins[c][li][oi]
                arrays[f"max_c{c}_l{li}_o{oi}"] = bounds.maxs[c][li][oi]
    meta = {"layer_ids": list(bounds.layer_ids),
            "orders": list(bounds.orders), "n_classes": bounds.n_classes}
    container.write_container(path, "gram_bounds", meta, arrays)


def load_gram(path):
    kind, meta, arrays = container.read_container(path)
    if kind != "gram_bounds":
        raise container.ContainerError(f"{path}: not a gram_bounds container")
    ids = tuple(meta["layer_ids"])
    orders = tuple(meta["orders"])
    k = meta["n_classes"]
    mins = [[[arrays[f"min_c{c}_l{li}_o{oi}"] for oi in range(len(orders))]
             for li in range(len(ids))] for c in range(k)]
    maxs = [[[arrays[f"max_c{c}_l{li}_o{oi}"] for oi in range(len(orders))]
             for li in range(len(ids))] for c in range(k)]
    return GramBounds(layer_ids=ids, orders=orders, n_classes=k,
                      mins=mins, maxs=maxs)


# ---------------------------------------------------------------------------
# Uniform front end used by the CLI and the landscape tool

SCORER_NAMES = ("msp", "odin", "mahalanobis", "mahalanobis-ensemble",
                "energy", "gram")


def fit_scorer(name, net, fit_data, odin_cfg=None):
    """Return a `score_fn(inputs) -> scores` closure for a named scorer.

    Distance scorers are fitted on `fit_data` (a LabeledDataset); confidence
    and energy scorers ignore it.
    """
    if name == "msp":
        return lambda x: score_msp(forward(net, x).logits)
    if name == "odin":
        cfg = odin_cfg or OdinConfig()
        return lambda x: score_odin(net, x, cfg)
    if name == "energy":
        return lambda x: score_energy(forward(net, x).logits)
    if name in ("mahalanobis", "mahalanobis-ensemble"):
        sel = "penultimate" if name == "mahalanobis" else "all"
        tr = forward(net, fit_data.inputs)
        ids, feats = select_layers(tr, sel)
        model = fit_mahalanobis(feats, fit_data.labels, layer_ids=ids)
        return lambda x: score_mahalanobis_trace(model, forward(net, x))
    if name == "gram":
        tr = forward(net, fit_data.inputs)
        ids, feats = select_layers(tr, "penultimate")
        bounds = fit_gram(feats, fit_data.labels, layer_ids=ids)
        return lambda x: score_gram_trace(bounds, forward(net, x))
    raise ValueError(
        f"unknown scorer {name!r}; valid scorers: {', '.join(SCORER_NAMES)}")
