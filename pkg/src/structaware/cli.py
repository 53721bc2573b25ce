"""Command-line entry point: ``structaware <subcommand> ...``.

Exit codes: 0 success, 1 domain error (a JSON object is written to stderr),
2 usage error.  Every file is written atomically (temporary file + rename).
"""

from __future__ import annotations

import argparse
import itertools
import json
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import NotConverged, StructAwareError

SUBCOMMANDS = ("distances", "align", "sinkhorn", "train", "probe", "bleu")


class UsageError(Exception):
    pass


@dataclass
class Command:
    name: str
    args: argparse.Namespace


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="structaware", description="Structure-aware training toolkit.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    d = sub.add_parser("distances", help="leaf distance matrix of a source file")
    d.add_argument("--lang", required=True)
    d.add_argument("--in", dest="input", required=True)
    d.add_argument("--out")
    d.add_argument("--granularity", choices=("token", "subtoken"), default="token")
    d.add_argument("--lenient", action="store_true", help="accept trees with error nodes")

    a = sub.add_parser("align", help="subtokens and their owning tokens")
    a.add_argument("--lang", required=True)
    a.add_argument("--in", dest="input", required=True)
    a.add_argument("--out")
    a.add_argument("--scheme", choices=("identifier", "whole", "char"), default="identifier")

    s = sub.add_parser("sinkhorn", help="Sinkhorn divergence between two JSON matrices")
    s.add_argument("--in", dest="input", nargs=2, required=True, metavar=("A", "B"))
    s.add_argument("--config")
    s.add_argument("--out")
    s.add_argument("--strict", action="store_true", help="fail when the solver does not converge")

    t = sub.add_parser("train", help="training runs from a JSON run config")
    t.add_argument("--config")
    t.add_argument("--out", required=True, help="output directory")
    t.add_argument("--seed", type=int, nargs="+")
    t.add_argument("--alpha", type=float, nargs="+")
    t.add_argument("--sample-rate", type=float, nargs="+")
    t.add_argument("--steps", type=int)
    t.add_argument("--jobs", type=int, default=1)

    r = sub.add_parser("probe", help="CAT-style scores of one or two checkpoints")
    r.add_argument("--in", dest="input", nargs="+", required=True)
    r.add_argument("--out")
    r.add_argument("--split", choices=("valid", "test"), default="test")
    r.add_argument("--theta-a", type=float)
    r.add_argument("--theta-d", type=float)
    r.add_argument("--head-reduction", choices=("mean", "per-head"), default="mean")

    b = sub.add_parser("bleu", help="smoothed BLEU-4 and exact match of line-aligned files")
    b.add_argument("--hyp", required=True)
    b.add_argument("--ref", required=True)
    b.add_argument("--out")
    return p


def parse_args(argv) -> Command:
    ns = _build_parser().parse_args(list(argv))
    out = getattr(ns, "out", None)
    if out is not None:
        parent = Path(out).resolve().parent
        if not parent.is_dir():
            raise UsageError(f"output directory {str(parent)!r} does not exist")
    if ns.command == "train" and ns.jobs < 1:
        raise UsageError("--jobs must be >= 1")
    if ns.command == "probe" and len(ns.input) > 2:
        raise UsageError("probe takes one or two checkpoints")
    return Command(ns.command, ns)


def write_atomic(path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(obj, out) -> None:
    text = json.dumps(obj) + "\n"
    if out:
        write_atomic(out, text)
    else:
        sys.stdout.write(text)


def _read_matrix(path) -> np.ndarray:
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(obj, dict):
        obj = obj["matrix"]
    m = np.asarray(obj, dtype=np.float64)
    if m.ndim == 1:
        m = m[:, None]
    if m.ndim != 2:
        raise ValueError(f"{path}: expected a 2-D matrix")
    return m


def _source(args):
    from .syntax import SourceUnit
    return SourceUnit(Path(args.input).read_text(encoding="utf-8"), args.lang)


def _cmd_distances(args) -> int:
    from .alignment import align, expand_distance_matrix, subtokenize
    from .syntax import distance_matrix
    _, leaves, d = distance_matrix(_source(args), strict=not args.lenient)
    if args.granularity == "subtoken":
        subs = subtokenize(leaves)
        d = expand_distance_matrix(d, align(subs, leaves), subs)
    _emit(d.to_dict(), args.out)
    return 0


def _cmd_align(args) -> int:
    from .alignment import align, subtokenize
    from .syntax import distance_matrix
    _, leaves, _ = distance_matrix(_source(args))
    subs = subtokenize(leaves, args.scheme)
    _emit(align(subs, leaves).to_dict(subs), args.out)
    return 0


def _cmd_sinkhorn(args) -> int:
    from .sinkhorn import SinkhornConfig, sinkhorn_divergence
    cfg = SinkhornConfig()
    if args.config:
        cfg = SinkhornConfig.from_dict(json.loads(Path(args.config).read_text()))
    x, y = (_read_matrix(p) for p in args.input)
    res = sinkhorn_divergence(x, y, cfg, strict=args.strict)
    _emit(res.to_dict(), args.out)
    return 0


def _run_one(config_dict: dict, out_dir: str) -> dict:
    from .training import RunConfig, records_to_jsonl, train
    config = RunConfig.from_dict(config_dict)
    result = train(config)
    out = Path(out_dir)
    out.mkdir(exist_ok=True)
    write_atomic(out / "metrics.jsonl", records_to_jsonl(result.records))
    write_atomic(out / "summary.json", json.dumps(result.summary(), indent=2) + "\n")
    write_atomic(out / "checkpoint.json", json.dumps(result.checkpoint()) + "\n")
    return {"dir": str(out), **result.final_metrics}


def _cmd_train(args) -> int:
    from .training import RunConfig
    base = RunConfig()
    if args.config:
        base = RunConfig.from_dict(json.loads(Path(args.config).read_text(encoding="utf-8")))
    if args.steps is not None:
        base = base.replace(steps=args.steps)
    seeds = args.seed or [base.seed]
    alphas = args.alpha or [base.sat.alpha]
    rates = args.sample_rate or [base.sample_rate]
    grid = list(itertools.product(seeds, alphas, rates))
    out = Path(args.out)
    out.mkdir(exist_ok=True)
    jobs = []
    for seed, alpha, rate in grid:
        cfg = base.replace(seed=seed, alpha=alpha, sample_rate=rate)
        name = "." if len(grid) == 1 else f"seed{seed}_alpha{alpha:g}_rate{rate:g}"
        jobs.append((cfg.to_dict(), str(out / name)))
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            finals = list(pool.map(_run_one, *zip(*jobs)))
    else:
        finals = [_run_one(c, d) for c, d in jobs]
    sys.stdout.write(json.dumps({"runs": finals}) + "\n")
    return 0


def _cmd_probe(args) -> int:
    from .corpus import build_toy_corpus
    from .probe import ProbeConfig
    from .training import load_checkpoint, probe_model
    cfg = ProbeConfig(theta_A=args.theta_a, theta_D=args.theta_d,
                      head_reduction=args.head_reduction)
    reports = []
    for path in args.input:
        run, model, _ = load_checkpoint(json.loads(Path(path).read_text(encoding="utf-8")))
        corpus = build_toy_corpus(run.corpus_size, run.corpus_seed)
        report = probe_model(model, corpus, args.split, cfg)
        reports.append({"checkpoint": path, "alpha": run.sat.alpha, **report.to_dict()})
    payload = {"reports": reports}
    if len(reports) == 2:
        payload["paired"] = {"scores": [list(p) for p in zip(reports[0]["scores"],
                                                              reports[1]["scores"])],
                             "mean_difference": reports[1]["mean"] - reports[0]["mean"]}
    _emit(payload, args.out)
    return 0


def _cmd_bleu(args) -> int:
    from .metrics import exact_match, smoothed_bleu4
    hyps = Path(args.hyp).read_text(encoding="utf-8").splitlines()
    refs = Path(args.ref).read_text(encoding="utf-8").splitlines()
    if len(hyps) != len(refs):
        raise ValueError(f"{len(hyps)} hypotheses but {len(refs)} references")
    bleus = [smoothed_bleu4(h.split(), r.split()) for h, r in zip(hyps, refs)]
    ems = [exact_match(h.split(), r.split()) for h, r in zip(hyps, refs)]
    n = max(len(bleus), 1)
    _emit({"bleu": sum(bleus) / n, "exact_match": sum(ems) / n, "per_line": bleus}, args.out)
    return 0


_HANDLERS = {"distances": _cmd_distances, "align": _cmd_align, "sinkhorn": _cmd_sinkhorn,
             "train": _cmd_train, "probe": _cmd_probe, "bleu": _cmd_bleu}


def _error(kind: str, message: str) -> None:
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")


def execute(cmd: Command) -> int:
    try:
        return _HANDLERS[cmd.name](cmd.args)
    except NotConverged as exc:
        _error("NotConverged", str(exc))
        return 1
    except (StructAwareError, ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        _error(type(exc).__name__, str(exc))
        return 1


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cmd = parse_args(argv)
    except UsageError as exc:
        _error("UsageError", str(exc))
        return 2
    return execute(cmd)


if __name__ == "__main__":
    sys.exit(main())
