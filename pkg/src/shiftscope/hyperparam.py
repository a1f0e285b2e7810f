"""Selection of the entropy-term weights without any shifted validation data.

The procedure trains one model per (w_var, w_corr) grid cell, ranks the
candidates by the harmonic mean of the two raw (unweighted) entropy
components measured on the ID training features, and walks that ranking:
a candidate is accepted when its penultimate features are less rank-deficient
than the separation-only reference -- residual singular mass (the sum of all
singular values beyond the two largest) strictly above the reference's --
and its ID accuracy stays within `accuracy_floor` of the plain cross-entropy
baseline. The full audit trail of every trained candidate is returned.
"""

from dataclasses import dataclass, field

import numpy as np

from .losses import LossConfig, entropy_terms
from .net import forward
from .train import accuracy


@dataclass
class SweepGrid:
    var_weights: tuple = (0.01, 0.1, 1.0, 10.0)
    corr_weights: tuple = (0.0001, 0.001, 0.01, 0.1, 1.0)
    w_dist: float = 0.1

    def __post_init__(self):
        if not self.var_weights or not self.corr_weights:
            raise ValueError("weight lists must be non-empty")
        if any(v <= 0 for v in self.var_weights) or any(
                v <= 0 for v in self.corr_weights):
            raise ValueError("grid weights must be positive")

    def cells(self):
        return [(v, c) for v in self.var_weights for c in self.corr_weights]


@dataclass
class SweepRecord:
    w_var: float
    w_corr: float
    raw_var_term: float
    raw_corr_term: float
    harmonic_mean: float
    residual_mass: float
    accuracy: float
    verdict: str = "unexamined"

    def to_dict(self):
        return {
            "w_var": self.w_var, "w_corr": self.w_corr,
            "raw_var_term": self.raw_var_term,
            "raw_corr_term": self.raw_corr_term,
            "harmonic_mean": self.harmonic_mean,
            "residual_mass": self.residual_mass,
            "accuracy": self.accuracy, "verdict": self.verdict,
        }


@dataclass
class SweepResult:
    accepted: tuple = None          # (w_var, w_corr) or None
    records: list = field(default_factory=list)   # ascending harmonic mean
    ce_accuracy: float = 0.0
    ce_mass: float = 0.0
    reference_mass: float = 0.0     # separation-only model


def residual_singular_mass(features):
    """Sum of the singular values of the (uncentered) features beyond the
    two largest; zero for matrices of rank <= 2."""
    f = np.asarray(features, dtype=np.float64)
    if f.ndim != 2 or f.shape[0] < 1:
        raise ValueError(f"need a non-empty 2-D matrix, got shape {f.shape}")
    sigma = np.linalg.svd(f, compute_uv=False)
    return float(sigma[2:].sum())


def harmonic_mean(a, b):
    """2ab / (a + b) for positive a, b."""
    if a <= 0 or b <= 0:
        raise ValueError(f"harmonic mean needs positive inputs, got {a}, {b}")
    return 2.0 * a * b / (a + b)


def _penultimate(net, data):
    return forward(net, data.inputs).penultimate


def evaluate_candidate(net, data, eval_data=None):
    """Raw entropy terms, their harmonic mean, residual mass and accuracy."""
    z = _penultimate(net, data)
    raw_var, raw_corr = entropy_terms(z)
    hm = 0.0 if min(raw_var, raw_corr) <= 0 else harmonic_mean(raw_var,
                                                               raw_corr)
    mass = residual_singular_mass(z)
    acc = accuracy(net, eval_data if eval_data is not None else data)
    return raw_var, raw_corr, hm, mass, acc


def rank_and_select(records, reference_mass, ce_accuracy, accuracy_floor):
    """Sort records by harmonic mean (ascending, in place) and walk them.

    The first record whose residual mass strictly exceeds the reference and
    whose accuracy is within the floor of the CE baseline is accepted;
    verdicts are written onto the records. Returns (w_var, w_corr) or None.
    """
    records.sort(key=lambda r: r.harmonic_mean)
    for rec in records:
        failures = []
        if not rec.residual_mass > reference_mass:
            failures.append("svd")
        if not rec.accuracy >= ce_accuracy - accuracy_floor:
            failures.append("accuracy")
        if failures:
            rec.verdict = "rejected: " + ", ".join(failures)
        else:
            rec.verdict = "accepted"
            return (rec.w_var, rec.w_corr)
    return None


def select_hyperparams(grid, id_data, train_fn, accuracy_floor=0.02,
                       eval_data=None, on_record=None):
    """Run the sweep; returns a SweepResult with the full audit trail.

    `train_fn(dataset, loss_cfg)` must return a trained net (seeding is the
    caller's business, so the procedure itself stays deterministic).
    `on_record` is called with each SweepRecord as soon as its training
    finishes -- the CLI uses it for crash-safe trail flushing.
    """
    net_ce = train_fn(id_data, LossConfig.ce_only())
    ce_acc = accuracy(net_ce, eval_data if eval_data is not None else id_data)
    ce_mass = residual_singular_mass(_penultimate(net_ce, id_data))

    net_ref = train_fn(id_data, LossConfig(
        w_dist=grid.w_dist, w_var=0.0, w_corr=0.0,
        enable_dist=True, enable_entropy=False))
    ref_mass = residual_singular_mass(_penultimate(net_ref, id_data))

    records = []
    for w_var, w_corr in grid.cells():
        cfg = LossConfig(w_dist=grid.w_dist, w_var=w_var, w_corr=w_corr)
        net = train_fn(id_data, cfg)
        raw_var, raw_corr, hm, mass, acc = evaluate_candidate(
            net, id_data, eval_data)
        rec = SweepRecord(w_var=w_var, w_corr=w_corr, raw_var_term=raw_var,
                          raw_corr_term=raw_corr, harmonic_mean=hm,
                          residual_mass=mass, accuracy=acc)
        records.append(rec)
        if on_record is not None:
            on_record(rec)

    accepted = rank_and_select(records, ref_mass, ce_acc, accuracy_floor)
    return SweepResult(accepted=accepted, records=records,
                       ce_accuracy=ce_acc, ce_mass=ce_mass,
                       reference_mass=ref_mass)
