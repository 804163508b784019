"""ROC/AUC and the early-detection metrics built on a benign pass-rate threshold.

A call is flagged malicious when its score is ``>= tau``. ``tau_of_p``
picks the smallest threshold letting at least a fraction ``p`` of benign
calls through. For one malicious number, ``fp_at`` is the 1-based index of
its first flagged call, capped at ``M + 1`` (the blacklist outcome).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np


class MetricError(ValueError):
    pass


@dataclass
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray

    def rows(self):
        return list(zip(self.fpr.tolist(), self.tpr.tolist(), self.thresholds.tolist()))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["fpr", "tpr", "threshold"])
            for f, t, th in self.rows():
                w.writerow([repr(f), repr(t), repr(th)])


def _scores_labels(scores, labels):
    s = np.asarray(scores, dtype=float).ravel()
    y = np.asarray(labels).ravel()
    if s.shape != y.shape:
        raise MetricError(f"{len(s)} scores but {len(y)} labels")
    if not np.all(np.isin(y, (0, 1))):
        raise MetricError("labels must be 0/1")
    y = y.astype(bool)
    if y.all() or not y.any():
        raise MetricError("ROC/AUC needs at least one example of each class")
    return s, y


def auc_score(scores, labels) -> float:
    """Mann-Whitney statistic: P(score_pos > score_neg) + P(tie) / 2."""
    s, y = _scores_labels(scores, labels)
    # midranks handle ties
    order = np.argsort(s, kind="mergesort")
    sorted_s = s[order]
    ranks = np.empty(len(s))
    _, start, counts = np.unique(sorted_s, return_index=True, return_counts=True)
    mid = start + (counts + 1) / 2.0
    ranks[order] = np.repeat(mid, counts)
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    return float((ranks[y].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def roc_curve(scores, labels) -> RocCurve:
    """Operating points for every distinct score used as a ``>=`` threshold.

    The first point uses threshold +inf and sits at (0, 0); the last uses the
    minimum score and sits at (1, 1).
    """
    s, y = _scores_labels(scores, labels)
    uniq = np.unique(s)[::-1]
    # positives/negatives with score >= each threshold
    idx = np.searchsorted(np.sort(s[y]), uniq, side="left")
    tp = y.sum() - idx
    idx = np.searchsorted(np.sort(s[~y]), uniq, side="left")
    fp = (~y).sum() - idx
    fpr = np.concatenate([[0.0], fp / (~y).sum()])
    tpr = np.concatenate([[0.0], tp / y.sum()])
    return RocCurve(fpr, tpr, np.concatenate([[np.inf], uniq]))


def roc_auc(scores, labels) -> tuple[RocCurve, float]:
    return roc_curve(scores, labels), auc_score(scores, labels)


def tau_of_p(benign_scores, p: float) -> float:
    """Smallest threshold among the distinct scores and +inf with pass-rate ``>= p``.

    The pass-rate of ``t`` is the fraction of benign scores strictly below ``t``.
    ``p = 0`` is accepted as the limiting case and yields the minimum score.
    """
    s = np.sort(np.asarray(benign_scores, dtype=float).ravel())
    if s.size == 0:
        raise MetricError("no benign scores to calibrate on")
    if not 0.0 <= p <= 1.0:
        raise MetricError(f"p must be in [0, 1], got {p}")
    candidates = np.unique(s)
    passed = np.searchsorted(s, candidates, side="left")
    ok = np.flatnonzero(passed >= p * s.size)
    return float(candidates[ok[0]]) if ok.size else math.inf


def pass_rate(benign_scores, tau: float) -> float:
    s = np.asarray(benign_scores, dtype=float)
    return float(np.mean(s < tau))


def first_firing(scores, tau: float) -> int | None:
    """1-based index of the first score ``>= tau``, or None."""
    hits = np.flatnonzero(np.asarray(scores, dtype=float) >= tau)
    return int(hits[0]) + 1 if hits.size else None


def fp_at(scores, tau: float, M: int) -> int:
    """First flagged position of one number's time-ordered call scores, capped at ``M + 1``.

    Only the first ``M`` calls are looked at.
    """
    if M < 1:
        raise MetricError(f"M must be >= 1, got {M}")
    s = np.asarray(scores, dtype=float)
    if s.size == 0:
        raise MetricError("number has no calls")
    i = first_firing(s[:M], tau)
    return M + 1 if i is None else i


def fp_values(sequences, tau: float, M: int) -> np.ndarray:
    seqs = list(sequences)
    if not seqs:
        raise MetricError("no malicious numbers")
    return np.array([fp_at(s, tau, M) for s in seqs], dtype=np.int64)


def afp(sequences, tau: float, M: int) -> float:
    return float(fp_values(sequences, tau, M).mean())


def mr_at(sequences, tau: float, n: int) -> float:
    """Fraction of numbers flagged within their first ``n`` calls."""
    if n < 1:
        raise MetricError(f"n must be >= 1, got {n}")
    return float(np.mean(fp_values(sequences, tau, n) <= n))


def mr_curve(sequences, tau: float, n_max: int = 30) -> list[float]:
    seqs = list(sequences)
    if not seqs:
        raise MetricError("no malicious numbers")
    firing = [first_firing(np.asarray(s, dtype=float)[:n_max], tau) for s in seqs]
    hit = np.array([f if f is not None else n_max + 1 for f in firing])
    return [float(np.mean(hit <= n)) for n in range(1, n_max + 1)]


def reduction_rate(afp_value: float, M: int) -> float:
    """Share of the ``M`` calls a blacklist lets through that the model stops."""
    if M < 1:
        raise MetricError(f"M must be >= 1, got {M}")
    if not 1.0 - 1e-12 <= afp_value <= M + 1 + 1e-12:
        raise MetricError(f"afp {afp_value} outside [1, {M + 1}]")
    return 1.0 - (afp_value - 1.0) / M


@dataclass
class EvalConfig:
    Ms: tuple = (10, 20, 30)
    p: float = 0.99
    n_max: int = 30
    calibration_fraction: float = 0.2

    def __post_init__(self):
        self.Ms = tuple(int(m) for m in self.Ms)
        if not self.Ms or min(self.Ms) < 1:
            raise MetricError("every M must be >= 1")
        if not 0.0 < self.p <= 1.0:
            raise MetricError(f"p must be in (0, 1], got {self.p}")
        if self.n_max < 1:
            raise MetricError("n_max must be >= 1")
        if not 0.0 < self.calibration_fraction < 1.0:
            raise MetricError("calibration_fraction must be in (0, 1)")

    def to_dict(self):
        return {"Ms": list(self.Ms), "p": self.p, "n_max": self.n_max, "calibration_fraction": self.calibration_fraction}

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass
class EvalReport:
    auc: float
    tau: float
    afp: dict
    mr: list
    reduction: dict
    baseline_afp: dict
    counts: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "auc": self.auc,
            "tau": self.tau if math.isfinite(self.tau) else "inf",
            "afp": {str(m): v for m, v in self.afp.items()},
            "mr": list(self.mr),
            "reduction": {str(m): v for m, v in self.reduction.items()},
            "baseline_afp": {str(m): v for m, v in self.baseline_afp.items()},
            "counts": dict(self.counts),
        }


def evaluate_scores(auc_scores, auc_labels, calibration_scores, sequences, config: EvalConfig) -> EvalReport:
    """Assemble a report from already computed scores.

    ``sequences`` holds each malicious number's time-ordered call scores.
    """
    seqs = [np.asarray(s, dtype=float) for s in sequences]
    _, auc = roc_auc(auc_scores, auc_labels)
    tau = tau_of_p(calibration_scores, config.p)
    afps = {m: afp(seqs, tau, m) for m in config.Ms}
    return EvalReport(
        auc=auc,
        tau=tau,
        afp=afps,
        mr=mr_curve(seqs, tau, config.n_max),
        reduction={m: reduction_rate(a, m) for m, a in afps.items()},
        baseline_afp={m: float(m + 1) for m in config.Ms},
        counts={
            "auc_examples": int(len(auc_labels)),
            "calibration_records": int(len(calibration_scores)),
            "malicious_numbers": len(seqs),
            "malicious_records": int(sum(len(s) for s in seqs)),
        },
    )
