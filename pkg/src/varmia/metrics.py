"""ROC, AUC, attack success rate and TPR at a fixed FPR.

Every function accepts either a sequence of ``AttackRecord`` or a
``(scores, is_member)`` pair of arrays.  Larger scores mean "member".
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import rankdata


def _unpack(records) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(records, tuple) and len(records) == 2:
        scores, labels = records
    else:
        scores = [r.score for r in records]
        labels = [r.is_member for r in records]
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=bool)
    if s.shape != y.shape or s.ndim != 1:
        raise ValueError("scores and labels must be 1-D and of equal length")
    if y.all() or not y.any():
        raise ValueError("need at least one member and one nonmember")
    return s, y


def _counts(records):
    """Cumulative (tp, fp) at every distinct threshold, highest first."""
    s, y = _unpack(records)
    thresholds, inv = np.unique(-s, return_inverse=True)
    tp = np.cumsum(np.bincount(inv, weights=y, minlength=len(thresholds)))
    fp = np.cumsum(np.bincount(inv, weights=~y, minlength=len(thresholds)))
    return -thresholds, tp, fp, int(y.sum()), int((~y).sum())


def roc_curve(records) -> list[tuple[float, float]]:
    """``(fpr, tpr)`` points from ``(0, 0)`` to ``(1, 1)``, one per distinct score."""
    _, tp, fp, P, N = _counts(records)
    return [(0.0, 0.0)] + [(float(f / N), float(t / P)) for t, f in zip(tp, fp)]


def auc(records) -> float:
    """Probability a random member outranks a random nonmember (ties count 1/2)."""
    s, y = _unpack(records)
    ranks = rankdata(s)
    P, N = int(y.sum()), int((~y).sum())
    return float((ranks[y].sum() - P * (P + 1) / 2.0) / (P * N))


def auc_oracle(records) -> float:
    """Brute-force pair count; slow, kept as an independent check on ``auc``."""
    s, y = _unpack(records)
    pos = [float(v) for v, m in zip(s, y) if m]
    neg = [float(v) for v, m in zip(s, y) if not m]
    wins = 0.0
    for a in pos:
        for b in neg:
            if a > b:
                wins += 1.0
            elif a == b:
                wins += 0.5
    return wins / (len(pos) * len(neg))


def trapezoid_area(points) -> float:
    pts = np.asarray(points, dtype=np.float64)
    return float(np.sum(np.diff(pts[:, 0]) * (pts[1:, 1] + pts[:-1, 1]) / 2.0))


def asr(records) -> float:
    """Best balanced accuracy over all thresholds."""
    pts = np.asarray(roc_curve(records))
    return float(np.max((pts[:, 1] + 1.0 - pts[:, 0]) / 2.0))


def tpr_at_fpr(records, target_fpr: float = 0.01) -> float:
    """Highest TPR reachable by a real threshold whose FPR stays within target."""
    if not 0.0 <= target_fpr <= 1.0:
        raise ValueError("target_fpr must lie in [0, 1]")
    _, tp, fp, P, N = _counts(records)
    allowed = np.floor(target_fpr * N + 1e-9)
    ok = fp <= allowed
    return float(tp[ok].max() / P) if ok.any() else 0.0


def accuracy_at_tau(records, tau: float) -> float:
    """Raw accuracy of the rule ``member iff score > -tau``."""
    s, y = _unpack(records)
    return float(np.mean((s > -tau) == y))


@dataclass
class RocSummary:
    points: list
    auc: float
    asr: float
    tpr_at_1pct_fpr: float
    target_fpr: float = 0.01
    accuracy_at_tau: float | None = None
    tau: float | None = None

    def to_json(self) -> str:
        d = asdict(self)
        d["points"] = [list(p) for p in self.points]
        return json.dumps(d, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "RocSummary":
        d = json.loads(text)
        d["points"] = [tuple(p) for p in d["points"]]
        return cls(**d)

    def points_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["fpr", "tpr"])
        for f, t in self.points:
            w.writerow([repr(float(f)), repr(float(t))])
        return buf.getvalue()


def summarize(records, target_fpr: float = 0.01, tau: float | None = None) -> RocSummary:
    return RocSummary(
        points=roc_curve(records),
        auc=auc(records),
        asr=asr(records),
        tpr_at_1pct_fpr=tpr_at_fpr(records, target_fpr),
        target_fpr=target_fpr,
        accuracy_at_tau=None if tau is None else accuracy_at_tau(records, tau),
        tau=tau,
    )
