"""A small transformer encoder built on :mod:`structaware.autodiff`.

Post-norm encoder layers (self-attention, GELU feed-forward, residuals,
layer norm) over token embeddings plus sinusoidal positions, and a linear
head producing one distribution per position.  ``forward`` can record every
head's attention in every layer; recording only copies references, so the
logits are the same with or without it.
"""

from __future__ import annotations

import json
import math
from collections import OrderedDict
from dataclasses import asdict, dataclass

import numpy as np

from .autodiff import Tensor, parameter
from .errors import SequenceTooLong, ShapeMismatch


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    d_model: int = 16
    n_heads: int = 2
    n_layers: int = 2
    d_ff: int = 32
    max_len: int = 64
    seed: int = 0
    n_outputs: int | None = None  # output classes; defaults to vocab_size

    def __post_init__(self):
        for name in ("vocab_size", "d_model", "n_heads", "n_layers", "d_ff", "max_len"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.d_model % self.n_heads:
            raise ValueError("d_model must be divisible by n_heads")
        if self.n_outputs is not None and self.n_outputs < 1:
            raise ValueError("n_outputs must be positive")

    @property
    def outputs(self) -> int:
        return self.vocab_size if self.n_outputs is None else self.n_outputs

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, obj: dict) -> "ModelConfig":
        return cls(**obj)


@dataclass
class AttentionTensor:
    """``layers[l]`` is an ``(h, n, n)`` tensor (post- or pre-softmax)."""

    layers: list
    form: str = "post-softmax"

    def head(self, layer: int, head: int) -> np.ndarray:
        return self.layers[layer].data[head]

    def numpy(self, layer: int) -> np.ndarray:
        return self.layers[layer].data

    def to_dict(self, layer: int, head: int, tokens) -> dict:
        """Export one head in the distance-matrix JSON layout (float entries)."""
        return {"tokens": list(tokens), "matrix": self.head(layer, head).tolist(),
                "granularity": "subtoken"}


def sinusoidal_positions(n: int, d: int) -> np.ndarray:
    pos = np.arange(n)[:, None]
    i = np.arange(d)[None, :]
    angle = pos / np.power(10000.0, (2 * (i // 2)) / d)
    return np.where(i % 2 == 0, np.sin(angle), np.cos(angle))


def _layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    mu = x.mean(axis=-1, keepdims=True)
    centred = x - mu
    var = (centred * centred).mean(axis=-1, keepdims=True)
    return centred / (var + eps).sqrt() * gain + bias


class NanoTransformer:
    def __init__(self, cfg: ModelConfig):
        self.cfg = cfg
        rng = np.random.default_rng(cfg.seed)
        d, f = cfg.d_model, cfg.d_ff

        def dense(n_in, n_out):
            return rng.normal(0.0, 1.0 / math.sqrt(n_in), size=(n_in, n_out))

        p = OrderedDict()
        p["embed"] = rng.normal(0.0, 1.0, size=(cfg.vocab_size, d))
        for l in range(cfg.n_layers):
            for name in ("q", "k", "v", "o"):
                p[f"l{l}.w{name}"] = dense(d, d)
                p[f"l{l}.b{name}"] = np.zeros(d)
            p[f"l{l}.ln1.g"], p[f"l{l}.ln1.b"] = np.ones(d), np.zeros(d)
            p[f"l{l}.ff1.w"], p[f"l{l}.ff1.b"] = dense(d, f), np.zeros(f)
            p[f"l{l}.ff2.w"], p[f"l{l}.ff2.b"] = dense(f, d), np.zeros(d)
            p[f"l{l}.ln2.g"], p[f"l{l}.ln2.b"] = np.ones(d), np.zeros(d)
        p["head.w"], p["head.b"] = dense(d, cfg.outputs), np.zeros(cfg.outputs)
        self.params: "OrderedDict[str, Tensor]" = OrderedDict(
            (k, parameter(v, name=k)) for k, v in p.items())
        self._positions = sinusoidal_positions(cfg.max_len, d)

    def forward(self, ids, tap: bool = False, pre_softmax: bool = False):
        """Return ``(logits (n, outputs), AttentionTensor or None)``."""
        ids = np.asarray(ids, dtype=np.int64)
        cfg, p = self.cfg, self.params
        n = len(ids)
        if n > cfg.max_len:
            raise SequenceTooLong(f"sequence of {n} exceeds max_len {cfg.max_len}")
        if n == 0:
            raise ValueError("empty input sequence")
        h, dk = cfg.n_heads, cfg.d_model // cfg.n_heads
        x = p["embed"][ids] + self._positions[:n]
        taps = []
        for l in range(cfg.n_layers):
            def heads(name):
                t = x @ p[f"l{l}.w{name}"] + p[f"l{l}.b{name}"]
                return t.reshape(n, h, dk).transpose(1, 0, 2)

            q, k, v = heads("q"), heads("k"), heads("v")
            scores = (q @ k.transpose(0, 2, 1)) * (1.0 / math.sqrt(dk))
            attn = scores.softmax(axis=-1)
            if tap:
                taps.append(scores if pre_softmax else attn)
            ctx = (attn @ v).transpose(1, 0, 2).reshape(n, cfg.d_model)
            x = _layer_norm(x + ctx @ p[f"l{l}.wo"] + p[f"l{l}.bo"],
                            p[f"l{l}.ln1.g"], p[f"l{l}.ln1.b"])
            ff = (x @ p[f"l{l}.ff1.w"] + p[f"l{l}.ff1.b"]).gelu() @ p[f"l{l}.ff2.w"] \
                + p[f"l{l}.ff2.b"]
            x = _layer_norm(x + ff, p[f"l{l}.ln2.g"], p[f"l{l}.ln2.b"])
        logits = x @ p["head.w"] + p["head.b"]
        form = "pre-softmax" if pre_softmax else "post-softmax"
        return logits, (AttentionTensor(taps, form) if tap else None)

    __call__ = forward

    def zero_grad(self) -> None:
        for t in self.params.values():
            t.grad = None

    # checkpoints: flat name -> {shape, values}
    def state_dict(self) -> dict:
        return {k: {"shape": list(t.shape), "values": t.data.ravel().tolist()}
                for k, t in self.params.items()}

    def load_state_dict(self, state: dict) -> None:
        if set(state) != set(self.params):
            raise ShapeMismatch("checkpoint parameter names do not match the model")
        for k, t in self.params.items():
            shape = tuple(state[k]["shape"])
            if shape != t.shape:
                raise ShapeMismatch(f"{k}: checkpoint shape {shape} vs model {t.shape}")
            t.data = np.asarray(state[k]["values"], dtype=np.float64).reshape(shape)

    def to_json(self) -> str:
        return json.dumps({"config": self.cfg.to_dict(), "params": self.state_dict()})

    @classmethod
    def from_json(cls, text: str) -> "NanoTransformer":
        obj = json.loads(text)
        model = cls(ModelConfig.from_dict(obj["config"]))
        model.load_state_dict(obj["params"])
        return model


def task_loss(logits: Tensor, targets, ignore_index: int | None = None) -> Tensor:
    """Mean cross entropy over positions whose target is not ``ignore_index``."""
    targets = np.asarray(targets, dtype=np.int64)
    if logits.ndim != 2 or targets.shape != (logits.shape[0],):
        raise ShapeMismatch(f"logits {logits.shape} vs targets {targets.shape}")
    keep = np.arange(len(targets)) if ignore_index is None \
        else np.flatnonzero(targets != ignore_index)
    if keep.size == 0:
        raise ValueError("no positions left to score")
    logp = logits.log_softmax(axis=-1)
    return -logp[keep, targets[keep]].mean()


def sgd_step(params, lr: float, momentum: float = 0.0, state: dict | None = None,
             clip_norm: float | None = None) -> float:
    """In-place ``p <- p - lr * g`` (heavy-ball momentum when ``momentum > 0``).

    ``params`` maps names to tensors carrying ``.grad``; missing gradients
    count as zero.  Returns the global gradient norm before clipping.
    """
    if lr < 0:
        raise ValueError("lr must be non-negative")
    if momentum and state is None:
        raise ValueError("momentum needs a persistent state dict")
    grads = {k: (t.grad if t.grad is not None else np.zeros_like(t.data))
             for k, t in params.items()}
    norm = math.sqrt(sum(float((g * g).sum()) for g in grads.values()))
    scale = 1.0
    if clip_norm is not None and norm > clip_norm:
        scale = clip_norm / norm
    for k, t in params.items():
        g = grads[k] * scale
        if momentum:
            buf = state.setdefault(k, np.zeros_like(t.data))
            buf *= momentum
            buf += g
            g = buf
        t.data = t.data - lr * g
    return norm
