"""Synthetic shifted datasets and CSV interchange.

The synthetic world is K isotropic Gaussian blobs in the plane (default:
three clusters on an equilateral triangle of side 6, unit spread). Shifted
sets come in three geometries, parameterized by a degree delta >= 0:

  category 1  blob samples displaced toward a cluster-pair midpoint by the
              fraction delta of the half-segment (near the boundary, between
              ID clusters);
  category 2  blob samples displaced radially outward -- from the centroid
              through their cluster center -- by distance delta (far from
              the boundary and from ID);
  category 3  samples on a pair's perpendicular bisector, delta beyond the
              midpoint moving away from the centroid, scattered along the
              bisector with the cluster spread (near the boundary, far from
              ID); delta = 0 falls back to sampling the two clusters
              directly.

delta = 0 reproduces the ID distribution for every category. Labels of
shifted samples are bookkeeping only: the nearest touched cluster's label.

CSV formats (UTF-8, LF, "." decimal separator, 17 significant digits):
  datasets  header x1,...,xd,label      labels 1-based integers
  features  header z1,...,zD,label
"""

from dataclasses import dataclass

import numpy as np


class CsvFormatError(ValueError):
    """Malformed dataset/feature CSV; message carries the 1-based line."""

    def __init__(self, path, line_number, message):
        self.path = str(path)
        self.line_number = line_number
        super().__init__(f"{path}:{line_number}: {message}")


@dataclass
class LabeledDataset:
    """Rows of d-dimensional inputs with 1-based integer class labels."""

    inputs: np.ndarray
    labels: np.ndarray
    attribute: str = ""
    value: float = 0.0

    def __post_init__(self):
        self.inputs = np.ascontiguousarray(self.inputs, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64).ravel()
        if self.inputs.ndim != 2:
            raise ValueError(f"inputs must be 2-D, got {self.inputs.shape}")
        if len(self.labels) != len(self.inputs):
            raise ValueError(
                f"{len(self.inputs)} rows but {len(self.labels)} labels")
        if len(self.labels) and self.labels.min() < 1:
            raise ValueError("labels must be 1-based positive integers")

    @property
    def n(self):
        return self.inputs.shape[0]

    @property
    def dim(self):
        return self.inputs.shape[1]

    @property
    def n_classes(self):
        return int(self.labels.max()) if len(self.labels) else 0


def default_centers(n_classes):
    """Cluster centers with side-6 spacing between neighbors.

    K points on a circle whose neighboring arc chord is 6; for K=3 this is
    the equilateral triangle of side 6 centered on the origin.
    """
    if n_classes < 2:
        raise ValueError("need at least 2 classes")
    radius = 3.0 / np.sin(np.pi / n_classes)
    angles = np.pi / 2 + 2 * np.pi * np.arange(n_classes) / n_classes
    return np.column_stack([radius * np.cos(angles), radius * np.sin(angles)])


@dataclass
class SynthConfig:
    n_classes: int = 3
    centers: np.ndarray = None
    spread: float = 1.0
    n_per_class: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.centers is None:
            self.centers = default_centers(self.n_classes)
        self.centers = np.asarray(self.centers, dtype=np.float64)
        if self.centers.shape != (self.n_classes, 2):
            raise ValueError(
                f"centers must be {self.n_classes} points in the plane")
        if len(np.unique(self.centers, axis=0)) != self.n_classes:
            raise ValueError("cluster centers must be distinct")
        if not self.spread > 0:
            raise ValueError(f"spread must be positive, got {self.spread}")
        if self.n_per_class < 1:
            raise ValueError("n_per_class must be >= 1")


def gen_id(cfg):
    """Isotropic Gaussian blobs, n_per_class per center, deterministic."""
    rng = np.random.default_rng(cfg.seed)
    parts = []
    labels = []
    for c in range(cfg.n_classes):
        pts = cfg.centers[c] + cfg.spread * rng.standard_normal(
            (cfg.n_per_class, 2))
        parts.append(pts)
        labels.append(np.full(cfg.n_per_class, c + 1, dtype=np.int64))
    return LabeledDataset(np.vstack(parts), np.concatenate(labels),
                          attribute="delta", value=0.0)


def _nas_streams(cfg, category, delta):
    """(mean point, label) pairs; samples cycle over these round-robin.

    Labels follow the nearest touched cluster of the *mean* point, so they
    depend only on the geometry: at delta = 0 every stream mean sits on its
    source center and labels match the ID generator exactly. Category-3
    means are equidistant from both touched centers, so each pair carries
    one stream per label; category-3 streams also carry the unit bisector
    direction, along which the sampler scatters (samples stay on the line).
    """
    centers = cfg.centers
    k = cfg.n_classes
    g = centers.mean(axis=0)
    streams = []
    if category == 1:
        for l in range(k):
            for m in range(k):
                if m == l:
                    continue
                mid = 0.5 * (centers[l] + centers[m])
                label = l if delta <= 1 else m
                streams.append((centers[l] + delta * (mid - centers[l]),
                                label + 1, None))
    elif category == 2:
        for c in range(k):
            u = centers[c] - g
            norm = np.linalg.norm(u)
            if norm == 0:
                raise ValueError(
                    f"cluster {c + 1} sits on the centroid; category 2 "
                    f"direction undefined")
            streams.append((centers[c] + delta * u / norm, c + 1, None))
    elif category == 3:
        for l in range(k):
            for m in range(l + 1, k):
                if delta == 0:
                    streams.append((centers[l], l + 1, None))
                    streams.append((centers[m], m + 1, None))
                    continue
                mid = 0.5 * (centers[l] + centers[m])
                w = mid - g
                norm = np.linalg.norm(w)
                if norm == 0:
                    # two-cluster case: the midpoint is the centroid; walk
                    # the bisector itself, covering both directions
                    seg = centers[m] - centers[l]
                    w = np.array([-seg[1], seg[0]])
                    norm = np.linalg.norm(w)
                    streams.append((mid - delta * w / norm, l + 1, -w / norm))
                    streams.append((mid - delta * w / norm, m + 1, -w / norm))
                streams.append((mid + delta * w / norm, l + 1, w / norm))
                streams.append((mid + delta * w / norm, m + 1, w / norm))
    else:
        raise ValueError(f"category must be 1, 2 or 3, got {category}")
    return streams


def gen_nas(cfg, category, delta, n, seed):
    """One shifted dataset of `n` samples at shift degree `delta`."""
    if delta < 0:
        raise ValueError(f"delta must be >= 0, got {delta}")
    if n < 1:
        raise ValueError("n must be >= 1")
    streams = _nas_streams(cfg, int(category), float(delta))
    rng = np.random.default_rng(seed)
    points = np.empty((n, 2))
    labels = np.empty(n, dtype=np.int64)
    for i in range(n):
        mean, label, line = streams[i % len(streams)]
        if line is None:
            points[i] = mean + cfg.spread * rng.standard_normal(2)
        else:
            points[i] = mean + cfg.spread * rng.standard_normal() * line
        labels[i] = label
    return LabeledDataset(points, labels, attribute=f"cat{int(category)}",
                          value=float(delta))


def gen_shift_sequence(cfg, category, deltas, n, seed):
    """One dataset per delta; child seeds derive from (seed, index).

    `deltas` must be strictly increasing and start at 0, so the first entry
    is drawn from the ID distribution.
    """
    deltas = [float(d) for d in deltas]
    if not deltas:
        raise ValueError("empty delta list")
    if deltas[0] != 0:
        raise ValueError(f"delta list must start at 0, got {deltas[0]}")
    if any(b <= a for a, b in zip(deltas, deltas[1:])):
        raise ValueError(f"deltas must be strictly increasing, got {deltas}")
    out = []
    for i, d in enumerate(deltas):
        child = int(np.random.SeedSequence(
            entropy=int(seed), spawn_key=(i,)).generate_state(1)[0])
        out.append((d, gen_nas(cfg, category, d, n, child)))
    return out


# ---------------------------------------------------------------------------
# CSV interchange


def _format_row(values, label):
    return ",".join(f"{v:.17g}" for v in values) + f",{label}\n"


def write_csv(dataset, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(f"x{i + 1}" for i in range(dataset.dim)) + ",label\n")
        for row, label in zip(dataset.inputs, dataset.labels):
            fh.write(_format_row(row, label))


def write_features_csv(features, labels, path):
    features = np.asarray(features, dtype=np.float64)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(f"z{i + 1}" for i in range(features.shape[1]))
                 + ",label\n")
        for row, label in zip(features, labels):
            fh.write(_format_row(row, int(label)))


def _read_matrix_csv(path, prefix):
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise CsvFormatError(path, 1, "empty file: no header")
    header = lines[0].split(",")
    width = len(header) - 1
    expected = [f"{prefix}{i + 1}" for i in range(width)] + ["label"]
    if width < 1 or header != expected:
        raise CsvFormatError(
            path, 1, f"bad header {lines[0]!r}; expected "
            f"'{prefix}1,...,{prefix}d,label'")
    rows = []
    labels = []
    for ln, line in enumerate(lines[1:], start=2):
        if line == "":
            continue
        fields = line.split(",")
        if len(fields) != width + 1:
            raise CsvFormatError(
                path, ln, f"expected {width + 1} fields, found {len(fields)}")
        try:
            rows.append([float(v) for v in fields[:-1]])
        except ValueError:
            raise CsvFormatError(path, ln,
                                 f"malformed numeric field in {line!r}") from None
        try:
            label = int(fields[-1])
        except ValueError:
            raise CsvFormatError(
                path, ln, f"non-integer label {fields[-1]!r}") from None
        if label < 1:
            raise CsvFormatError(path, ln, f"label must be >= 1, got {label}")
        labels.append(label)
    if not rows:
        raise CsvFormatError(path, 1, "no data rows")
    return np.asarray(rows), np.asarray(labels, dtype=np.int64)


def read_csv(path):
    inputs, labels = _read_matrix_csv(path, "x")
    return LabeledDataset(inputs, labels)


def read_features_csv(path):
    """Feature dumps exported from external models: (features, labels)."""
    return _read_matrix_csv(path, "z")
