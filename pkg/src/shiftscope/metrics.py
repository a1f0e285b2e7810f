"""Detection metrics over (ID scores, shifted-sample scores).

Every scorer in this package follows one orientation -- higher score means
more in-distribution -- and these metrics assume it. Conventions, fixed and
tested against brute-force oracles:

  * AUROC is the Mann-Whitney statistic with half credit for ties.
  * Threshold sweeps classify "ID" as score >= tau, with tau drawn from the
    observed score values.
  * AUPR is the average-precision form (step interpolation over distinct
    thresholds); AUPR-Out negates scores so the sweep runs the other way.
  * Detection accuracy is the threshold-maximized balanced accuracy.
"""

import numpy as np


def _validate(id_scores, nas_scores):
    a = np.asarray(id_scores, dtype=np.float64).ravel()
    b = np.asarray(nas_scores, dtype=np.float64).ravel()
    if a.size == 0 or b.size == 0:
        raise ValueError("both score vectors must be non-empty")
    return a, b


def _average_ranks(values):
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(len(values))
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def auroc(id_scores, nas_scores):
    """P(random ID score > random shifted score), ties counted half."""
    ids, nas = _validate(id_scores, nas_scores)
    ranks = _average_ranks(np.concatenate([nas, ids]))
    rank_sum = ranks[len(nas):].sum()
    u = rank_sum - len(ids) * (len(ids) + 1) / 2.0
    return float(u / (len(ids) * len(nas)))


def tnr_at_tpr(id_scores, nas_scores, tpr_target=0.95):
    """True-negative rate at the largest threshold keeping ID TPR >= target."""
    ids, nas = _validate(id_scores, nas_scores)
    if not 0 < tpr_target <= 1:
        raise ValueError(f"tpr_target must be in (0, 1], got {tpr_target}")
    k = int(np.ceil(tpr_target * len(ids)))
    tau = np.sort(ids)[len(ids) - k]      # k-th largest ID score
    return float((nas < tau).mean())


def aupr(id_scores, nas_scores, positive="id"):
    """Area under the precision-recall curve (average-precision form).

    positive="id" treats ID as the positive class (AUPR-In); positive="nas"
    negates the scores and treats the shifted side as positive
    (AUPR-Out).
    """
    ids, nas = _validate(id_scores, nas_scores)
    if positive == "id":
        pos, neg = ids, nas
    elif positive == "nas":
        pos, neg = -nas, -ids
    else:
        raise ValueError(f"positive must be 'id' or 'nas', got {positive!r}")
    thresholds = np.unique(np.concatenate([pos, neg]))[::-1]
    pos_sorted = np.sort(pos)
    neg_sorted = np.sort(neg)
    n_pos = len(pos)
    tp = n_pos - np.searchsorted(pos_sorted, thresholds, side="left")
    fp = len(neg) - np.searchsorted(neg_sorted, thresholds, side="left")
    recall = tp / n_pos
    precision = tp / np.maximum(tp + fp, 1)
    prev_recall = np.concatenate([[0.0], recall[:-1]])
    return float(((recall - prev_recall) * precision).sum())


def detection_accuracy(id_scores, nas_scores):
    """max over tau of (TPR(tau) + TNR(tau)) / 2, classes weighted equally."""
    ids, nas = _validate(id_scores, nas_scores)
    taus = np.unique(np.concatenate([ids, nas]))
    ids_sorted = np.sort(ids)
    nas_sorted = np.sort(nas)
    tpr = 1.0 - np.searchsorted(ids_sorted, taus, side="left") / len(ids)
    tnr = np.searchsorted(nas_sorted, taus, side="left") / len(nas)
    best = 0.5 * (tpr + tnr).max()
    # tau above every score rejects everything: balanced accuracy 1/2
    return float(max(best, 0.5))


METRIC_NAMES = ("auroc", "aupr-in", "aupr-out", "tnr95", "detection-accuracy")


def compute_metric(name, id_scores, nas_scores):
    """Dispatch by the CLI/report token in METRIC_NAMES."""
    if name == "auroc":
        return auroc(id_scores, nas_scores)
    if name == "aupr-in":
        return aupr(id_scores, nas_scores, positive="id")
    if name == "aupr-out":
        return aupr(id_scores, nas_scores, positive="nas")
    if name == "tnr95":
        return tnr_at_tpr(id_scores, nas_scores, tpr_target=0.95)
    if name == "detection-accuracy":
        return detection_accuracy(id_scores, nas_scores)
    raise ValueError(
        f"unknown metric {name!r}; valid metrics: {', '.join(METRIC_NAMES)}")
