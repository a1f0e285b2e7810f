"""Feature-space diagnostics: PCA projections, confidence-vs-shift curves,
and planar score landscapes.

PCA is fitted on ID features only; shifted features are projected into that
fixed basis so their movement across shift degrees is comparable. Landscapes
evaluate a score function at every cell center of a rectangular grid and are
emitted as data (CSV), not images.
"""

from dataclasses import dataclass

import numpy as np

from .net import forward
from .scorers import score_msp


@dataclass
class PcaModel:
    mean: np.ndarray          # D
    components: np.ndarray    # k x D, orthonormal rows
    explained: np.ndarray     # k fractions, non-increasing


def pca_fit(features, n_components=2):
    """Top right-singular directions of the centered features."""
    f = np.asarray(features, dtype=np.float64)
    if f.ndim != 2 or f.shape[0] < 2:
        raise ValueError(f"PCA needs >= 2 samples, got shape {f.shape}")
    k = min(n_components, f.shape[1])
    mean = f.mean(axis=0)
    centered = f - mean
    _, sigma, vt = np.linalg.svd(centered, full_matrices=False)
    total = (sigma**2).sum()
    explained = (sigma[:k]**2 / total) if total > 0 else np.zeros(k)
    return PcaModel(mean=mean, components=vt[:k], explained=explained)


def pca_project(model, features):
    f = np.asarray(features, dtype=np.float64)
    return (f - model.mean) @ model.components.T


def confidence_curve(net, sequence):
    """Mean max-softmax per shift degree, in sequence order."""
    if not sequence:
        raise ValueError("empty shift sequence")
    out = []
    for delta, dataset in sequence:
        trace = forward(net, dataset.inputs)
        out.append((float(delta), float(score_msp(trace.logits).mean())))
    return out


@dataclass
class ScoreLandscape:
    xs: np.ndarray          # nx cell-center abscissae
    ys: np.ndarray          # ny cell-center ordinates
    scores: np.ndarray      # ny x nx

    def rows(self):
        """(x, y, score) triples, y-major, matching the CSV layout."""
        for j, y in enumerate(self.ys):
            for i, x in enumerate(self.xs):
                yield float(x), float(y), float(self.scores[j, i])


def write_pca_projection_csv(path, projections, labels, deltas):
    """Write `pc1,pc2,label,delta` rows (UTF-8, LF, 17 significant digits).

    One row per sample; `deltas` is a scalar or a per-sample vector, so ID
    and shifted sets projected into one basis can share a file.
    """
    projections = np.asarray(projections, dtype=np.float64)
    if projections.ndim != 2 or projections.shape[1] < 2:
        raise ValueError("projections must be n x 2 (or wider)")
    labels = np.asarray(labels, dtype=np.int64).ravel()
    deltas = np.broadcast_to(np.asarray(deltas, dtype=np.float64),
                             (len(labels),))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("pc1,pc2,label,delta\n")
        for row, label, delta in zip(projections, labels, deltas):
            fh.write(f"{row[0]:.17g},{row[1]:.17g},{label},{delta:.17g}\n")


def score_landscape(score_fn, bounds, resolution):
    """Evaluate `score_fn` on every cell center of the bounded grid.

    `bounds` is (xmin, xmax, ymin, ymax); `resolution` is (nx, ny) or one
    integer for both axes.
    """
    xmin, xmax, ymin, ymax = (float(v) for v in bounds)
    if not (xmax > xmin and ymax > ymin):
        raise ValueError(f"degenerate bounds {bounds}")
    if np.isscalar(resolution):
        nx = ny = int(resolution)
    else:
        nx, ny = (int(v) for v in resolution)
    if nx < 2 or ny < 2:
        raise ValueError("resolution must be >= 2 per axis")
    xs = xmin + (np.arange(nx) + 0.5) * (xmax - xmin) / nx
    ys = ymin + (np.arange(ny) + 0.5) * (ymax - ymin) / ny
    gx, gy = np.meshgrid(xs, ys)
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    scores = np.asarray(score_fn(pts), dtype=np.float64).reshape(ny, nx)
    return ScoreLandscape(xs=xs, ys=ys, scores=scores)
