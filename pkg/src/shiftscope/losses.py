"""Composite training objective and its gradients.

The total objective is cross-entropy on the logits plus two batch-level terms
on the penultimate features z (batch x D):

  * a class-separation term, -w_dist * mean over unordered class pairs of
    ||mu_l - mu_k||_2 / sqrt(D)  -- negative weight, so minimizing it pushes
    class means apart;
  * an "entropy" pair: w_var * D / sum_i Var(z_i) (rewards per-dimension
    spread) and w_corr * mean over unordered dimension pairs of C_ij^2
    (penalizes redundant dimensions), with C the feature correlation matrix.

Conventions, fixed once: population (divide-by-n) variance; pair sums run
over unordered pairs once (a doubled sum just rescales the weight);
correlations of near-constant dimensions (sigma < 1e-8) are defined as 0 and
flagged.
"""

from dataclasses import dataclass

import numpy as np

SIGMA_FLOOR = 1e-8          # below this a dimension counts as degenerate
_NORM_FLOOR = 1e-12         # class-mean pairs closer than this get zero grad


class DegenerateBatchError(ValueError):
    """Raised when batch statistics are undefined (zero total variance)."""


@dataclass
class LossConfig:
    """Term weights and toggles.

    `w_dist` is the magnitude of the separation weight; the implementation
    applies the negative sign itself, so all three knobs stay nonnegative.
    A term contributes only if its flag is on AND its weight is nonzero --
    zero-weight configurations follow the exact cross-entropy-only code path.
    """

    w_dist: float = 0.1
    w_var: float = 0.1
    w_corr: float = 0.0001
    enable_dist: bool = True
    enable_entropy: bool = True

    def __post_init__(self):
        for name in ("w_dist", "w_var", "w_corr"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {v}")

    @classmethod
    def ce_only(cls):
        return cls(w_dist=0.0, w_var=0.0, w_corr=0.0,
                   enable_dist=False, enable_entropy=False)

    @property
    def dist_active(self):
        return self.enable_dist and self.w_dist > 0

    @property
    def entropy_active(self):
        return self.enable_entropy and (self.w_var > 0 or self.w_corr > 0)

    @property
    def batch_terms_active(self):
        return self.dist_active or self.entropy_active


@dataclass
class BatchStats:
    """Per-batch feature statistics used by the batch-level terms."""

    class_means: np.ndarray        # K x D
    class_counts: np.ndarray       # K
    per_dim_variance: np.ndarray   # D (population)
    correlation: np.ndarray        # D x D, zeroed on degenerate dims
    degenerate: np.ndarray         # D bools, sigma < SIGMA_FLOOR


@dataclass
class LossBreakdown:
    """total = ce + dist + entropy; gradients ready for `net.backward`."""

    total: float
    ce: float
    dist: float
    entropy: float
    d_logits: np.ndarray
    d_penultimate: np.ndarray = None   # None when no batch term is active


def _check_labels(labels, n_classes):
    labels = np.asarray(labels, dtype=np.int64).ravel()
    if labels.size == 0:
        raise ValueError("empty label vector")
    if labels.min() < 1 or labels.max() > n_classes:
        raise ValueError(
            f"labels must lie in 1..{n_classes}, got range "
            f"[{labels.min()}, {labels.max()}]")
    return labels


def cross_entropy(logits, labels):
    """Mean negative log-softmax of the true class.

    Labels are 1-based. Returns (value, d_logits) with
    d_logits = (softmax - onehot) / batch.
    """
    logits = np.asarray(logits, dtype=np.float64)
    n, k = logits.shape
    labels = _check_labels(labels, k)
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    denom = exp.sum(axis=1, keepdims=True)
    log_p = shifted - np.log(denom)
    idx = labels - 1
    value = -log_p[np.arange(n), idx].mean()
    grad = exp / denom
    grad[np.arange(n), idx] -= 1.0
    grad /= n
    return float(value), grad


def batch_stats(z, labels, n_classes=None):
    """Class means plus batch-level variance/correlation of the features."""
    z = np.asarray(z, dtype=np.float64)
    n, d = z.shape
    if n < 2:
        raise ValueError(f"batch statistics need >= 2 samples, got {n}")
    labels = np.asarray(labels, dtype=np.int64).ravel()
    k = int(labels.max()) if n_classes is None else int(n_classes)
    labels = _check_labels(labels, k)

    counts = np.bincount(labels - 1, minlength=k).astype(np.int64)
    means = np.zeros((k, d))
    np.add.at(means, labels - 1, z)
    present = counts > 0
    means[present] /= counts[present, None]

    centered = z - z.mean(axis=0)
    variance = (centered * centered).mean(axis=0)
    sigma = np.sqrt(variance)
    degenerate = sigma < SIGMA_FLOOR
    cov = centered.T @ centered / n
    denom = np.outer(sigma, sigma)
    corr = np.zeros((d, d))
    ok = ~degenerate
    mask = np.outer(ok, ok)
    corr[mask] = (cov[mask] / denom[mask])
    corr[np.diag_indices(d)] = np.where(ok, 1.0, 0.0)
    return BatchStats(class_means=means, class_counts=counts,
                      per_dim_variance=variance, correlation=corr,
                      degenerate=degenerate)


def distance_loss(z, labels, cfg, n_classes=None):
    """Class-mean separation term: value and gradient with respect to z.

    value = -w_dist * (1/C(K,2)) * sum_{l<k} ||mu_l - mu_k|| / sqrt(D).
    Every class must appear in the batch. Coincident means contribute zero
    gradient (the norm's continuous limit).
    """
    z = np.asarray(z, dtype=np.float64)
    n, d = z.shape
    labels = np.asarray(labels, dtype=np.int64).ravel()
    k = int(labels.max()) if n_classes is None else int(n_classes)
    labels = _check_labels(labels, k)
    counts = np.bincount(labels - 1, minlength=k)
    if (counts == 0).any():
        missing = np.flatnonzero(counts == 0) + 1
        raise ValueError(f"classes absent from batch: {missing.tolist()}")
    if k < 2 or not cfg.dist_active:
        return 0.0, np.zeros_like(z)

    means = np.zeros((k, d))
    np.add.at(means, labels - 1, z)
    means /= counts[:, None]

    n_pairs = k * (k - 1) // 2
    scale = cfg.w_dist / (n_pairs * np.sqrt(d))
    value = 0.0
    mean_grad = np.zeros((k, d))    # d(value)/d(mu_c)
    for l in range(k):
        for m in range(l + 1, k):
            diff = means[l] - means[m]
            norm = np.linalg.norm(diff)
            value -= scale * norm
            if norm > _NORM_FLOOR:
                u = scale * diff / norm
                mean_grad[l] -= u
                mean_grad[m] += u
    d_z = mean_grad[labels - 1] / counts[labels - 1, None]
    return float(value), d_z


def entropy_loss(z, cfg):
    """Variance + correlation term: value and gradient with respect to z.

    value = w_var * D / sum_i Var(z_i)
          + w_corr * (1/C(D,2)) * sum_{i<j} C_ij^2.
    Raises DegenerateBatchError when the total variance vanishes.
    """
    z = np.asarray(z, dtype=np.float64)
    n, d = z.shape
    if n < 2:
        raise ValueError(f"entropy term needs >= 2 samples, got {n}")
    if d < 2:
        raise ValueError(f"entropy term needs >= 2 feature dims, got {d}")
    if not cfg.entropy_active:
        return 0.0, np.zeros_like(z)

    centered = z - z.mean(axis=0)
    variance = (centered * centered).mean(axis=0)
    total_var = variance.sum()
    if total_var <= _NORM_FLOOR:
        raise DegenerateBatchError(
            "all feature rows identical: total variance is zero")

    value = cfg.w_var * d / total_var
    # Upstream gradient into the covariance matrix entries; the variance term
    # only touches the diagonal.
    g_cov = np.zeros((d, d))
    np.fill_diagonal(g_cov, -cfg.w_var * d / total_var**2)

    if cfg.w_corr > 0:
        sigma = np.sqrt(variance)
        ok = sigma >= SIGMA_FLOOR
        cov = centered.T @ centered / n
        corr = np.zeros((d, d))
        mask = np.outer(ok, ok)
        denom = np.outer(sigma, sigma)
        corr[mask] = cov[mask] / denom[mask]
        np.fill_diagonal(corr, 0.0)     # only off-diagonal pairs count

        n_pairs = d * (d - 1) // 2
        value += cfg.w_corr * 0.5 * (corr**2).sum() / n_pairs

        # d(term)/dC_ij for each ordered off-diagonal pair, then chain through
        # C_ij = cov_ij / (sigma_i sigma_j); v_i = cov_ii gives the diagonal.
        t = (cfg.w_corr / n_pairs) * corr
        off = np.zeros((d, d))
        off[mask] = t[mask] / denom[mask]
        g_cov += off
        with np.errstate(divide="ignore", invalid="ignore"):
            diag_corr = -(t * corr).sum(axis=1) / variance
        diag_corr[~ok] = 0.0
        g_cov[np.diag_indices(d)] += diag_corr

    d_z = (2.0 / n) * centered @ g_cov
    return float(value), d_z


def entropy_terms(z):
    """Raw (unweighted) values of the two entropy components.

    Returns (D / sum Var, mean over unordered pairs of C_ij^2); used by the
    hyperparameter selection procedure.
    """
    z = np.asarray(z, dtype=np.float64)
    n, d = z.shape
    stats = batch_stats(z, np.ones(n, dtype=np.int64))
    total_var = stats.per_dim_variance.sum()
    if total_var <= _NORM_FLOOR:
        raise DegenerateBatchError("zero total variance")
    corr = stats.correlation.copy()
    np.fill_diagonal(corr, 0.0)
    n_pairs = d * (d - 1) // 2
    return float(d / total_var), float(0.5 * (corr**2).sum() / n_pairs)


def total_loss(trace, labels, cfg, n_classes=None):
    """Sum of enabled terms with gradients for the logits and penultimate z."""
    value_ce, d_logits = cross_entropy(trace.logits, labels)
    value_dist = 0.0
    value_ent = 0.0
    d_pen = None
    if cfg.batch_terms_active:
        z = trace.penultimate
        d_pen = np.zeros_like(z)
        if cfg.dist_active:
            value_dist, g = distance_loss(z, labels, cfg, n_classes=n_classes)
            d_pen += g
        if cfg.entropy_active:
            value_ent, g = entropy_loss(z, cfg)
            d_pen += g
    total = value_ce + value_dist + value_ent
    return LossBreakdown(total=float(total), ce=value_ce, dist=value_dist,
                         entropy=value_ent, d_logits=d_logits,
                         d_penultimate=d_pen)
