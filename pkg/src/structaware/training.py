"""Training runs under ``task + alpha * structure`` with per-step records.

A run is fully determined by its :class:`RunConfig`: the corpus is rebuilt
from ``corpus_size``/``corpus_seed``, the model is initialised from ``seed``
and the data order comes from ``seed`` too.  Two runs that differ only in
``alpha`` therefore see identical batches (paired comparison).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .autodiff import no_grad, stack
from .corpus import Corpus, build_toy_corpus, subsample
from .metrics import exact_match, smoothed_bleu4
from .model import ModelConfig, NanoTransformer, sgd_step, task_loss
from .probe import ProbeConfig, probe_attention
from .sinkhorn import SinkhornConfig
from .structure_loss import (StructureEncoder, StructureLossConfig, combine_losses,
                             per_head_structure_loss, slice_code_positions, solver_diagnostics,
                             structure_loss)


@dataclass(frozen=True)
class ModelSpec:
    """Model hyperparameters; vocabulary sizes come from the corpus."""

    d_model: int = 16
    n_heads: int = 2
    n_layers: int = 2
    d_ff: int = 32
    max_len: int = 64


@dataclass(frozen=True)
class RunConfig:
    model: ModelSpec = ModelSpec()
    sat: StructureLossConfig = StructureLossConfig()
    sinkhorn: SinkhornConfig = SinkhornConfig()
    lr: float = 0.05
    encoder_lr: float = 0.05
    momentum: float = 0.9
    encoder_momentum: float = 0.0
    clip_norm: float | None = 5.0
    steps: int = 500
    batch_size: int = 4
    sample_rate: float = 1.0
    seed: int = 0
    corpus_size: int = 200
    corpus_seed: int = 0
    eval_every: int = 0  # 0: evaluate once, after the last step
    eval_split: str = "test"

    def __post_init__(self):
        if not self.lr > 0 or self.encoder_lr < 0:
            raise ValueError("learning rates must be positive")
        if not (0 <= self.momentum < 1 and 0 <= self.encoder_momentum < 1):
            raise ValueError("momentum must lie in [0, 1)")
        if self.steps < 1 or self.batch_size < 1:
            raise ValueError("steps and batch_size must be positive")
        if not 0 < self.sample_rate <= 1:
            raise ValueError("sample_rate must lie in (0, 1]")
        if self.eval_every < 0:
            raise ValueError("eval_every must be >= 0")
        if self.eval_split not in ("valid", "test"):
            raise ValueError("eval_split must be 'valid' or 'test'")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, obj: dict) -> "RunConfig":
        obj = dict(obj)
        unknown = set(obj) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown run config keys: {sorted(unknown)}")
        if "model" in obj:
            obj["model"] = ModelSpec(**obj["model"])
        if "sat" in obj:
            obj["sat"] = StructureLossConfig.from_dict(obj["sat"])
        if "sinkhorn" in obj:
            obj["sinkhorn"] = SinkhornConfig.from_dict(obj["sinkhorn"])
        return cls(**obj)

    def replace(self, **changes) -> "RunConfig":
        d = self.to_dict()
        for key, value in changes.items():
            if key == "alpha":
                d["sat"]["alpha"] = value
            else:
                d[key] = value
        return RunConfig.from_dict(d)


@dataclass
class TrainRecord:
    step: int
    task_loss: float
    structure_loss: float
    total_loss: float
    alpha: float
    per_head: list = field(default_factory=list)
    unconverged: int = 0
    bleu: float | None = None
    exact_match: float | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        return {k: v for k, v in d.items() if v is not None}


@dataclass
class RunResult:
    config: RunConfig
    records: list
    model: NanoTransformer
    encoder: StructureEncoder
    corpus: Corpus
    final_metrics: dict

    def checkpoint(self) -> dict:
        return checkpoint(self.config, self.model, self.encoder)

    def summary(self) -> dict:
        return {"config": self.config.to_dict(), "final": self.final_metrics}


def checkpoint(config: RunConfig, model: NanoTransformer, encoder: StructureEncoder) -> dict:
    params = model.state_dict()
    for name, t in encoder.params.items():
        params[name] = {"shape": [], "values": [float(t.data)]}
    return {"config": config.to_dict(), "model_config": model.cfg.to_dict(), "params": params}


def load_checkpoint(obj: dict):
    """Rebuild ``(RunConfig, model, encoder)`` from :func:`checkpoint` output."""
    config = RunConfig.from_dict(obj["config"])
    model = NanoTransformer(ModelConfig.from_dict(obj["model_config"]))
    params = dict(obj["params"])
    enc = StructureEncoder(params.pop("encoder.w")["values"][0],
                           params.pop("encoder.b")["values"][0])
    model.load_state_dict(params)
    return config, model, enc


def build_model(config: RunConfig, corpus: Corpus) -> NanoTransformer:
    spec = config.model
    cfg = ModelConfig(vocab_size=len(corpus.vocab), n_outputs=len(corpus.labels),
                      d_model=spec.d_model, n_heads=spec.n_heads, n_layers=spec.n_layers,
                      d_ff=spec.d_ff, max_len=spec.max_len, seed=config.seed)
    return NanoTransformer(cfg)


def example_losses(model, encoder, ex, config: RunConfig, with_structure_grad: bool):
    """Task and structure loss tensors for one example, plus solver results."""
    sat = config.sat
    if sat.layer_index >= model.cfg.n_layers:
        raise ValueError("layer_index exceeds the model depth")
    logits, attn = model(ex.ids, tap=True, pre_softmax=sat.attention_form == "pre-softmax")
    task = task_loss(logits, ex.label_ids, ignore_index=None)
    results: list = []
    if with_structure_grad:
        a = slice_code_positions(attn.layers[sat.layer_index], ex.code_positions)
        per_head = per_head_structure_loss(a, ex.distances, encoder, config.sinkhorn, results)
    else:
        with no_grad():
            a = slice_code_positions(attn.layers[sat.layer_index].detach(), ex.code_positions)
            per_head = per_head_structure_loss(a, ex.distances, encoder, config.sinkhorn,
                                               results)
    return task, per_head, results


def predict(model, ex) -> list:
    with no_grad():
        logits, _ = model(ex.ids)
    return [int(i) for i in logits.data.argmax(axis=-1)]


def evaluate(model, corpus: Corpus, split: str = "test") -> dict:
    """Mean sentence BLEU-4 and exact match of predicted role sequences (code positions)."""
    bleus, ems = [], []
    for ex in corpus.part(split):
        pred = predict(model, ex)
        hyp = [pred[p] for p in ex.code_positions]
        ref = [int(ex.label_ids[p]) for p in ex.code_positions]
        bleus.append(smoothed_bleu4(hyp, ref))
        ems.append(exact_match(hyp, ref))
    return {"bleu": float(np.mean(bleus)), "exact_match": float(np.mean(ems))}


def probe_model(model, corpus: Corpus, split: str = "test",
                cfg: ProbeConfig = ProbeConfig()):
    def pairs():
        for ex in corpus.part(split):
            with no_grad():
                _, attn = model(ex.ids, tap=True)
            a = attn.numpy(cfg.layer_index)
            idx = np.asarray(ex.code_positions)
            yield a[:, idx[:, None], idx[None, :]], ex.distances

    return probe_attention(pairs(), cfg)


def train(config: RunConfig, corpus: Corpus | None = None, log=None) -> RunResult:
    """Run ``config.steps`` SGD steps; ``log`` receives each TrainRecord."""
    if corpus is None:
        corpus = build_toy_corpus(config.corpus_size, config.corpus_seed)
    corpus = subsample(corpus, config.sample_rate, config.corpus_seed)
    model = build_model(config, corpus)
    encoder = StructureEncoder()
    alpha = config.sat.alpha
    train_idx = list(corpus.split["train"])
    rng = np.random.default_rng(config.seed)
    order, cursor = [], 0
    momentum_state: dict = {}
    records = []
    for step in range(1, config.steps + 1):
        batch = []
        while len(batch) < config.batch_size:
            if cursor >= len(order):
                order, cursor = [train_idx[i] for i in rng.permutation(len(train_idx))], 0
            batch.append(corpus.examples[order[cursor]])
            cursor += 1
        model.zero_grad()
        for t in encoder.params.values():
            t.grad = None
        tasks, structs, heads, results = [], [], [], []
        for ex in batch:
            task, per_head, res = example_losses(model, encoder, ex, config, alpha > 0)
            tasks.append(task)
            structs.append(structure_loss(per_head))
            heads.append([float(v.data) for v in per_head])
            results += res
        task_mean = stack(tasks).mean()
        struct_mean = stack(structs).mean()
        objective = task_mean + alpha * struct_mean if alpha > 0 else task_mean
        objective.backward()
        sgd_step(model.params, config.lr, config.momentum, momentum_state, config.clip_norm)
        if alpha > 0:
            sgd_step(encoder.params, config.encoder_lr, config.encoder_momentum,
                     momentum_state, config.clip_norm)
        breakdown = combine_losses(task_mean.item(), struct_mean.item(), alpha,
                                   np.mean(heads, axis=0))
        record = TrainRecord(step, breakdown.task, breakdown.structure, breakdown.total, alpha,
                             list(breakdown.per_head), solver_diagnostics(results)["unconverged"])
        if (config.eval_every and step % config.eval_every == 0) or step == config.steps:
            metrics = evaluate(model, corpus, config.eval_split)
            record.bleu, record.exact_match = metrics["bleu"], metrics["exact_match"]
        records.append(record)
        if log is not None:
            log(record)
    final = {"bleu": records[-1].bleu, "exact_match": records[-1].exact_match,
             "cat_score": probe_model(model, corpus, config.eval_split).mean,
             "encoder": {"w": float(encoder.w.data), "b": float(encoder.b.data)},
             "train_examples": len(train_idx)}
    return RunResult(config, records, model, encoder, corpus, final)


def records_to_jsonl(records) -> str:
    return "".join(json.dumps(r.to_dict()) + "\n" for r in records)
