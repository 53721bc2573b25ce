"""End-to-end acceptance checks, one test per numbered criterion.

Each test records a PASS/FAIL line; ``conftest.py`` prints them in the
terminal summary.  The training criteria (5-8) share a cache of runs so
each (seed, alpha, sample rate) triple is trained once.
"""

import json
import random
import time
import warnings
from pathlib import Path

import numpy as np
import pytest

from structaware.alignment import align, expand_distance_matrix, subtokenize
from structaware.autodiff import no_grad
from structaware.cli import main
from structaware.exact_ot import exact_ot_oracle
from structaware.metrics import exact_match, smoothed_bleu4
from structaware.model import ModelConfig, NanoTransformer, task_loss
from structaware.sinkhorn import SinkhornConfig, sinkhorn_divergence, squared_diameter
from structaware.structure_loss import (StructureEncoder, per_head_structure_loss,
                                        slice_code_positions, structure_loss)
from structaware.syntax import (SourceUnit, bfs_distance_oracle, distance_matrix,
                                extract_leaves, token_distance_matrix)
from structaware.training import RunConfig, train

from conftest import RENDER_BODY_RB, random_tree

RESULTS = {}
DEFAULT = RunConfig()  # 200 examples, 500 steps, alpha = 0.1
_RUNS = {}


def report(number, ok, detail, soft=False):
    status = "PASS" if ok else ("FLAGGED" if soft else "FAIL")
    RESULTS[number] = f"criterion {number:>2}: {status}  {detail}"
    return ok


def run(seed, alpha, rate=1.0):
    key = (seed, alpha, rate)
    if key not in _RUNS:
        _RUNS[key] = train(DEFAULT.replace(seed=seed, alpha=alpha, sample_rate=rate))
    return _RUNS[key]


def test_c01_distance_values():
    t0 = time.perf_counter()
    _, leaves, d = distance_matrix(SourceUnit(RENDER_BODY_RB, "ruby"))
    texts = leaves.texts
    tok = d.matrix[texts.index("def"), texts.index("(")]
    subs = subtokenize(leaves)
    e = expand_distance_matrix(d, align(subs, leaves), subs)
    sub = e.matrix[e.tokens.index("render"), e.tokens.index(":")]
    elapsed = time.perf_counter() - t0
    ok = tok == 3 and sub == 5 and elapsed < 1
    assert report(1, ok, f'd(def,"(")={tok}, d(render,":")={sub}, {elapsed:.3f}s')


def test_c02_tree_distance_oracle():
    t0 = time.perf_counter()
    rng = random.Random(2024)
    mismatched = 0
    for _ in range(1000):
        tree = random_tree(rng, 50)
        lca = token_distance_matrix(extract_leaves(tree), tree).matrix
        mismatched += not np.array_equal(lca, bfs_distance_oracle(tree).matrix)
    elapsed = time.perf_counter() - t0
    ok = mismatched == 0 and elapsed < 10
    assert report(2, ok, f"1000 trees, {mismatched} mismatches, {elapsed:.1f}s")


def test_c03_sinkhorn_correctness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    worst_self = worst_sym = 0.0
    for _ in range(200):
        n, m, dim = rng.integers(1, 12, size=3)
        x, y = rng.normal(size=(n, dim)), rng.normal(size=(m, dim)) * 2 + 0.5
        worst_self = max(worst_self, sinkhorn_divergence(x, x).value)
        worst_sym = max(worst_sym, abs(sinkhorn_divergence(x, y).value
                                       - sinkhorn_divergence(y, x).value))
    part_a = worst_self <= 1e-6 and worst_sym <= 1e-6

    monotone, worst_final = True, 0.0
    for _ in range(40):
        n = int(rng.integers(2, 5))
        x, y = rng.normal(size=(n, 2)), rng.normal(size=(n, 2))
        exact, d2 = exact_ot_oracle(x, y), squared_diameter(x, y)
        gaps = [abs(sinkhorn_divergence(x, y, SinkhornConfig(epsilon=e * d2, max_iters=5000,
                                                             tol=1e-12)).value - exact)
                for e in (1e-1, 1e-2, 1e-3)]
        monotone &= gaps[0] > gaps[1] > gaps[2]
        worst_final = max(worst_final, gaps[2] / d2)
    part_b = monotone and worst_final <= 1e-3
    elapsed = time.perf_counter() - t0
    ok = part_a and part_b and elapsed < 30
    assert report(3, ok, f"max S(x,x)={worst_self:.1e}, max asym={worst_sym:.1e}, "
                         f"gaps strictly decreasing={monotone}, "
                         f"worst final gap={worst_final:.1e}*diam^2, {elapsed:.1f}s")


def test_c04_gradient_fidelity():
    t0 = time.perf_counter()
    model = NanoTransformer(ModelConfig(vocab_size=12, d_model=16, n_heads=2, n_layers=2,
                                        d_ff=32, seed=3))
    enc = StructureEncoder(0.8, 0.3)
    rng = np.random.default_rng(0)
    ids, targets = rng.integers(0, 12, 10), rng.integers(0, 12, 10)
    dist = np.triu(rng.integers(2, 9, (8, 8)), 1)
    dist = dist + dist.T
    positions, alpha = np.arange(1, 9), 0.5
    sk = SinkhornConfig(tol=0.0, max_iters=20)

    def objective():
        logits, attn = model(ids, tap=True)
        a = slice_code_positions(attn.layers[0], positions)
        s = structure_loss(per_head_structure_loss(a, dist, enc, sk))
        return task_loss(logits, targets) + alpha * s

    objective().backward()
    worst, count = 0.0, 0
    for p in list(model.params.values()) + list(enc.params.values()):
        flat, grad = p.data.reshape(-1), np.asarray(p.grad).reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            h = 1e-4 * max(1.0, abs(old))
            with no_grad():
                flat[i] = old + h
                up = objective().item()
                flat[i] = old - h
                down = objective().item()
            flat[i] = old
            num = (up - down) / (2 * h)
            worst = max(worst, abs(num - grad[i]) / max(abs(num), abs(grad[i]), 1e-6))
            count += 1
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-3 and elapsed < 60
    assert report(4, ok, f"{count} parameters incl. (w, b), max rel error {worst:.1e}, "
                         f"{elapsed:.1f}s")


def test_c05_loss_identity():
    bad = 0
    for seed in range(3):
        sat = run(seed, 0.1)
        bad += sum(r.total_loss != r.task_loss + 0.1 * r.structure_loss for r in sat.records)
        base = run(seed, 0.0)
        bad += sum(np.float64(r.total_loss).tobytes() != np.float64(r.task_loss).tobytes()
                   for r in base.records)
    assert report(5, bad == 0, f"{bad} violating records over 3 SAT and 3 alpha=0 runs")


def test_c06_structure_loss_decreases():
    ratios = []
    for seed in range(3):
        s = [r.structure_loss for r in run(seed, 0.1).records]
        k = len(s) // 10
        ratios.append(np.mean(s[-k:]) / np.mean(s[:k]))
    ok = all(r <= 0.5 for r in ratios) and DEFAULT.steps >= 500 and DEFAULT.corpus_size >= 200
    assert report(6, ok, "final/initial 10% ratio per seed: "
                         + ", ".join(f"{r:.3f}" for r in ratios))


def test_c07_cat_score_direction():
    pairs = [(run(s, 0.1).final_metrics["cat_score"], run(s, 0.0).final_metrics["cat_score"])
             for s in range(5)]
    wins = sum(sat >= base for sat, base in pairs)
    detail = ", ".join(f"seed {s}: {sat:.4f} vs {base:.4f}" for s, (sat, base) in enumerate(pairs))
    assert report(7, wins >= 4, f"SAT >= baseline in {wins}/5 seeds ({detail})")


def test_c08_low_resource_direction():
    deltas = {}
    for rate in (0.2, 0.8):
        deltas[rate] = float(np.mean([run(s, 0.1, rate).final_metrics["bleu"]
                                      - run(s, 0.0, rate).final_metrics["bleu"]
                                      for s in range(5)]))
    ok = deltas[0.2] >= deltas[0.8]
    report(8, ok, f"mean BLEU delta (SAT - baseline) at 20%: {deltas[0.2]:+.2f}, "
                  f"at 80%: {deltas[0.8]:+.2f}", soft=True)
    if not ok:
        warnings.warn("low-resource direction not reproduced; see the acceptance report")


def test_c09_smoothed_bleu():
    hand = smoothed_bleu4("a b c d e".split(), "a b c d f".split())
    rng = np.random.default_rng(9)
    identical = all(smoothed_bleu4(s, s) == 100.0
                    for s in (rng.integers(0, 5, rng.integers(1, 20)).tolist()
                              for _ in range(50)))
    em_implies = True
    for _ in range(200):
        ref = rng.integers(0, 3, rng.integers(1, 8)).tolist()
        hyp = rng.integers(0, 3, len(ref)).tolist()
        if exact_match(hyp, ref):
            em_implies &= smoothed_bleu4(hyp, ref) == 100.0
    ok = abs(hand - 66.87) <= 0.01 and identical and em_implies
    assert report(9, ok, f"hand example {hand:.3f} (expected 66.87), identical -> 100: "
                         f"{identical}, EM=1 -> 100: {em_implies}")


def _cli_outputs(tmp, tag, capsys, monkeypatch):
    # relative paths only, so artifacts that echo their inputs compare equal
    (tmp / tag).mkdir()
    monkeypatch.chdir(tmp / tag)
    tmp = Path(".")
    src = tmp / "render.rb"
    src.write_text(RENDER_BODY_RB)
    cfg = tmp / "run.json"
    cfg.write_text(json.dumps(DEFAULT.replace(steps=8, corpus_size=30).to_dict()))
    (tmp / "a.json").write_text(json.dumps([[0.0, 1.0], [2.0, 0.5], [1.0, 1.0]]))
    (tmp / "b.json").write_text(json.dumps([[1.0, 0.0], [0.0, 2.0]]))
    (tmp / "h.txt").write_text("a b c d e\nx y\n")
    (tmp / "r.txt").write_text("a b c d f\nx y\n")
    out = tmp / "out"
    out.mkdir()
    commands = [
        ["distances", "--lang", "ruby", "--in", str(src), "--out", str(out / "d.json")],
        ["align", "--lang", "ruby", "--in", str(src), "--out", str(out / "align.json")],
        ["sinkhorn", "--in", str(tmp / "a.json"), str(tmp / "b.json"),
         "--out", str(out / "s.json")],
        ["train", "--config", str(cfg), "--out", str(out / "train"), "--seed", "0", "1",
         "--alpha", "0", "0.1"],
        ["bleu", "--hyp", str(tmp / "h.txt"), "--ref", str(tmp / "r.txt"),
         "--out", str(out / "bleu.json")],
    ]
    for argv in commands:
        assert main(argv) == 0
    assert main(["probe", "--in", str(out / "train/seed0_alpha0_rate1/checkpoint.json"),
                 str(out / "train/seed0_alpha0.1_rate1/checkpoint.json"),
                 "--out", str(out / "probe.json")]) == 0
    capsys.readouterr()
    return {p.relative_to(out).as_posix(): p.read_bytes()
            for p in sorted(out.rglob("*")) if p.is_file()}


def test_c10_cli_determinism(tmp_path, capsys, monkeypatch):
    first = _cli_outputs(tmp_path, "first", capsys, monkeypatch)
    second = _cli_outputs(tmp_path, "second", capsys, monkeypatch)
    differing = [name for name in first if first[name] != second.get(name)]
    ok = first.keys() == second.keys() and not differing and len(first) >= 15
    assert report(10, ok, f"{len(first)} artifacts compared, {len(differing)} differ")
