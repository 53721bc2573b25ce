"""Structure loss: Sinkhorn divergence between attention heads and encoded distances.

For each head ``i`` of the tapped layer, ``L_i = S(rows(A_i), rows(w * D + b))``;
the structure loss is the mean of ``L_i`` and the training objective is
``task + alpha * structure``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .autodiff import Tensor, as_tensor, parameter, stack
from .errors import EmptyHeads, ShapeMismatch
from .sinkhorn import SinkhornConfig, SinkhornResult, sinkhorn_divergence_tensor
from .syntax.distance import DistanceMatrix

ATTENTION_FORMS = ("post-softmax", "pre-softmax")


class StructureEncoder:
    """Learnable scalar affine map ``d -> w * d + b`` (init ``w = 1, b = 0``)."""

    def __init__(self, w: float = 1.0, b: float = 0.0):
        self.w = parameter(float(w), name="encoder.w")
        self.b = parameter(float(b), name="encoder.b")

    @property
    def params(self) -> dict:
        return {"encoder.w": self.w, "encoder.b": self.b}

    def __repr__(self):
        return f"StructureEncoder(w={float(self.w.data):.6g}, b={float(self.b.data):.6g})"


@dataclass(frozen=True)
class StructureLossConfig:
    alpha: float = 0.1
    layer_index: int = 0
    attention_form: str = "post-softmax"

    def __post_init__(self):
        if not self.alpha >= 0:
            raise ValueError("alpha must be >= 0")
        if self.layer_index < 0:
            raise ValueError("layer_index must be >= 0")
        if self.attention_form not in ATTENTION_FORMS:
            raise ValueError(f"attention_form must be one of {ATTENTION_FORMS}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, obj: dict) -> "StructureLossConfig":
        return cls(**obj)


@dataclass(frozen=True)
class LossBreakdown:
    task: float
    per_head: tuple
    structure: float
    alpha: float
    total: float

    def to_dict(self) -> dict:
        return {"task": self.task, "per_head": list(self.per_head),
                "structure": self.structure, "alpha": self.alpha, "total": self.total}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _matrix(d) -> np.ndarray:
    return d.matrix.astype(np.float64) if isinstance(d, DistanceMatrix) else np.asarray(d, float)


def encode_distance(d, enc: StructureEncoder) -> Tensor:
    """Elementwise ``w * d + b`` as a tensor differentiable in ``(w, b)``."""
    m = _matrix(d)
    if not np.all(np.isfinite(m)):
        raise ValueError("distance matrix must be finite")
    return enc.w * m + enc.b


def per_head_structure_loss(attn, d, enc: StructureEncoder,
                            cfg: SinkhornConfig = SinkhornConfig(),
                            results: list | None = None) -> list:
    """One divergence tensor per head.

    ``attn`` is an ``(h, n, n)`` tensor/array (or a single ``(n, n)`` head)
    already restricted to the code positions of ``d``.  Solver results are
    appended to ``results`` when a list is supplied.
    """
    a = as_tensor(attn)
    if a.ndim == 2:
        a = a.reshape(1, *a.shape)
    n = _matrix(d).shape[0]
    if a.ndim != 3 or a.shape[1:] != (n, n):
        raise ShapeMismatch(f"attention {a.shape} does not match distances ({n}, {n})")
    target = encode_distance(d, enc)
    losses = []
    for i in range(a.shape[0]):
        value, res = sinkhorn_divergence_tensor(a[i], target, cfg)
        losses.append(value)
        if results is not None:
            results.append(res)
    return losses


def structure_loss(per_head) -> Tensor:
    """Arithmetic mean over heads."""
    if len(per_head) == 0:
        raise EmptyHeads("structure loss needs at least one head")
    return stack([as_tensor(v) for v in per_head]).mean()


def combine_losses(task_loss: float, structure: float, alpha: float,
                   per_head=()) -> LossBreakdown:
    """Record ``total = task + alpha * structure`` from plain floats."""
    if not alpha >= 0:
        raise ValueError("alpha must be >= 0")
    task_loss, structure, alpha = float(task_loss), float(structure), float(alpha)
    return LossBreakdown(task_loss, tuple(float(v) for v in per_head), structure, alpha,
                         task_loss + alpha * structure)


def slice_code_positions(attn: Tensor, positions) -> Tensor:
    """Keep rows and columns at ``positions`` (no renormalisation of rows)."""
    idx = np.asarray(positions, dtype=np.int64)
    return attn[:, idx[:, None], idx[None, :]]


def solver_diagnostics(results: list[SinkhornResult]) -> dict:
    if not results:
        return {"solves": 0, "unconverged": 0, "max_iters": 0}
    return {"solves": len(results),
            "unconverged": sum(not r.converged for r in results),
            "max_iters": max(r.iters for r in results)}
