"""CAT-style probe: how often thresholded attention agrees with AST closeness.

For a pair ``(i, j)`` with ``i != j`` the attention indicator is
``a_ij > theta_A`` and the structure indicator is ``d_ij < theta_D``; the
score is the fraction of off-diagonal pairs where the two agree.  This is our
own concrete agreement fraction, reported as a "CAT-style" score.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ShapeMismatch
from .syntax.distance import DistanceMatrix

HEAD_REDUCTIONS = ("mean", "per-head")


@dataclass(frozen=True)
class ProbeConfig:
    """``None`` thresholds mean the scale-free defaults ``1/n`` and the median distance."""

    theta_A: float | None = None
    theta_D: float | None = None
    layer_index: int = 0
    head_reduction: str = "mean"

    def __post_init__(self):
        if self.theta_A is not None and not 0 <= self.theta_A < 1:
            raise ValueError("theta_A must lie in [0, 1)")
        if self.theta_D is not None and not self.theta_D > 0:
            raise ValueError("theta_D must be positive")
        if self.head_reduction not in HEAD_REDUCTIONS:
            raise ValueError(f"head_reduction must be one of {HEAD_REDUCTIONS}")
        if self.layer_index < 0:
            raise ValueError("layer_index must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ProbeReport:
    scores: list
    mean: float
    config: dict
    label: str = "CAT-style score"
    per_head: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"label": self.label, "scores": self.scores, "mean": self.mean,
                "per_head": self.per_head, "config": self.config}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _dist(d) -> np.ndarray:
    return d.matrix if isinstance(d, DistanceMatrix) else np.asarray(d)


def default_thresholds(n: int, d: np.ndarray, cfg: ProbeConfig) -> tuple[float, float]:
    theta_a = cfg.theta_A if cfg.theta_A is not None else 1.0 / n
    if cfg.theta_D is not None:
        theta_d = cfg.theta_D
    else:
        off = d[~np.eye(n, dtype=bool)]
        theta_d = float(np.median(off)) if off.size else 1.0
    return theta_a, theta_d


def binarize(attn, d, cfg: ProbeConfig = ProbeConfig()):
    """Return ``(attention indicator, closeness indicator)`` boolean matrices."""
    a, dm = np.asarray(attn, dtype=np.float64), _dist(d)
    if a.ndim != 2 or a.shape != dm.shape or a.shape[0] != a.shape[1]:
        raise ShapeMismatch(f"attention {a.shape} vs distances {dm.shape}")
    theta_a, theta_d = default_thresholds(a.shape[0], dm, cfg)
    return a > theta_a, dm < theta_d


def agreement(a_hat: np.ndarray, d_hat: np.ndarray) -> float:
    n = a_hat.shape[0]
    if n < 2:
        return 1.0  # no off-diagonal pairs to disagree on
    off = ~np.eye(n, dtype=bool)
    return float((a_hat == d_hat)[off].mean())


def head_scores(attn, d, cfg: ProbeConfig = ProbeConfig()) -> list[float]:
    a = np.asarray(attn, dtype=np.float64)
    if a.ndim == 2:
        a = a[None]
    return [agreement(*binarize(head, d, cfg)) for head in a]


def cat_score(attn, d, cfg: ProbeConfig = ProbeConfig()) -> float:
    """Score of one example; ``attn`` is ``(n, n)`` or ``(h, n, n)``.

    ``mean`` reduction averages the heads' attention before thresholding;
    ``per-head`` averages the per-head scores.
    """
    a = np.asarray(attn, dtype=np.float64)
    if a.ndim == 2:
        a = a[None]
    if a.ndim != 3:
        raise ShapeMismatch(f"expected (h, n, n) attention, got {a.shape}")
    if cfg.head_reduction == "mean":
        return agreement(*binarize(a.mean(axis=0), d, cfg))
    return float(np.mean(head_scores(a, d, cfg)))


def probe_attention(examples, cfg: ProbeConfig = ProbeConfig()) -> ProbeReport:
    """``examples`` yields ``(attention (h, n, n), distance matrix)`` pairs."""
    scores, per_head = [], []
    for attn, d in examples:
        scores.append(cat_score(attn, d, cfg))
        per_head.append(head_scores(attn, d, cfg))
    mean = float(np.mean(scores)) if scores else float("nan")
    return ProbeReport(scores, mean, cfg.to_dict(), per_head=per_head)
