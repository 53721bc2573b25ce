"""Synthetic corpus of small Python-like functions with per-subtoken role labels.

Each example is a generated function definition.  Its target is the
sequence of syntactic roles of its subtokens: every subtoken is labelled with
the node kind enclosing its leaf token (``parameters``, ``call``,
``comparison_operator``, ...).  Guessing a role from the token text alone is
ambiguous for identifiers and brackets, so context has to be read.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

import numpy as np

from .alignment import Vocab, align, expand_distance_matrix, subtokenize
from .syntax import SourceUnit, distance_matrix

WORDS = ("item", "value", "count", "total", "index", "result", "data", "node", "key",
         "name", "size", "scale", "offset", "buffer", "user", "path", "line", "text",
         "token", "score", "limit", "width", "queue", "state", "row", "col")
VERBS = ("parse", "compute", "update", "render", "load", "store", "find", "build",
         "check", "merge", "split", "apply")
ACRONYMS = ("HTTP", "JSON", "URL", "ID")


@dataclass
class Example:
    source: str
    subtokens: tuple  # texts including <s> and </s>
    labels: tuple  # one role per subtoken; specials get their own text
    code_positions: tuple
    distances: np.ndarray  # subtoken-level, code positions only
    ids: np.ndarray = field(default=None, repr=False)
    label_ids: np.ndarray = field(default=None, repr=False)

    @property
    def code_labels(self) -> list:
        return [self.labels[p] for p in self.code_positions]


@dataclass
class Corpus:
    examples: list
    split: dict  # "train" / "valid" / "test" -> list of example indices
    vocab: Vocab
    labels: Vocab

    def part(self, name: str) -> list:
        return [self.examples[i] for i in self.split[name]]


class _Generator:
    def __init__(self, rng: random.Random):
        self.rng = rng

    def ident(self) -> str:
        r = self.rng
        words = [r.choice(WORDS) for _ in range(r.choice((1, 1, 2)))]
        style = r.random()
        if len(words) == 1:
            return words[0]
        if style < 0.6:
            return "_".join(words)
        return words[0] + "".join(w.capitalize() for w in words[1:])

    def func_name(self) -> str:
        r = self.rng
        verb, noun = r.choice(VERBS), r.choice(WORDS)
        if r.random() < 0.2:
            return verb + r.choice(ACRONYMS) + noun.capitalize()
        return f"{verb}_{noun}" if r.random() < 0.6 else verb + noun.capitalize()

    def atom(self, names) -> str:
        r = self.rng
        roll = r.random()
        if roll < 0.55:
            return r.choice(names)
        if roll < 0.8:
            return str(r.randint(0, 9))
        if roll < 0.9:
            return f"{r.choice(names)}.{r.choice(WORDS)}"
        return f"{r.choice(names)}[{r.choice(names + ['0', '1'])}]"

    def expr(self, names, depth: int = 0) -> str:
        r = self.rng
        roll = r.random()
        if depth >= 2 or roll < 0.4:
            return self.atom(names)
        if roll < 0.75:
            op = r.choice(("+", "-", "*", "//", "%"))
            return f"{self.expr(names, depth + 1)} {op} {self.atom(names)}"
        args = ", ".join(self.atom(names) for _ in range(r.randint(1, 2)))
        return f"{self.func_name()}({args})"

    def cond(self, names) -> str:
        op = self.rng.choice(("<", ">", "==", "!=", "<=", ">="))
        return f"{self.atom(names)} {op} {self.atom(names)}"

    def block(self, names, indent: int, depth: int, budget: int) -> list[str]:
        r = self.rng
        pad = "    " * indent
        lines = []
        for _ in range(r.randint(1, budget)):
            roll = r.random()
            if depth < 2 and roll < 0.2:
                lines.append(f"{pad}if {self.cond(names)}:")
                lines += self.block(names, indent + 1, depth + 1, 2)
                if r.random() < 0.5:
                    lines.append(f"{pad}else:")
                    lines += self.block(names, indent + 1, depth + 1, 1)
            elif depth < 2 and roll < 0.35:
                var = r.choice(WORDS)
                lines.append(f"{pad}for {var} in {r.choice(names)}:")
                lines += self.block(names + [var], indent + 1, depth + 1, 2)
            elif roll < 0.55:
                lines.append(f"{pad}{r.choice(names)} += {self.expr(names)}")
            elif roll < 0.7:
                args = ", ".join(self.atom(names) for _ in range(r.randint(1, 2)))
                lines.append(f"{pad}{self.func_name()}({args})")
            else:
                var = self.ident()
                lines.append(f"{pad}{var} = {self.expr(names)}")
                names = names + [var]
        return lines

    def function(self) -> str:
        r = self.rng
        params = list(dict.fromkeys(self.ident() for _ in range(r.randint(1, 3))))
        lines = [f"def {self.func_name()}({', '.join(params)}):"]
        lines += self.block(params, 1, 0, 3)
        lines.append(f"    return {self.expr(params)}")
        return "\n".join(lines) + "\n"


def _role_labels(tree, leaves, subtokens) -> tuple:
    roles = []
    for text, owner in zip(subtokens.texts, subtokens.owners):
        if owner is None:
            roles.append(text)
        else:
            parent = tree.parents[leaves[owner].node]
            roles.append(tree.kinds[parent])
    return tuple(roles)


def make_example(source: str, language: str = "python") -> Example:
    """Parse strictly, subtokenise, align and expand distances for one snippet."""
    tree, leaves, dist = distance_matrix(SourceUnit(source, language), strict=True)
    subtokens = subtokenize(leaves)
    mapping = align(subtokens, leaves)
    expanded = expand_distance_matrix(dist, mapping, subtokens)
    return Example(source, subtokens.texts, _role_labels(tree, leaves, subtokens),
                   mapping.code_positions, expanded.matrix)


def _split_sizes(n: int) -> tuple[int, int]:
    n_train = round(0.8 * n)
    n_valid = round(0.1 * n)
    return n_train, n_valid


def build_toy_corpus(n: int, seed: int = 0, max_subtokens: int = 48) -> Corpus:
    """``n`` distinct generated functions, split 80/10/10 after a seeded shuffle."""
    if n < 10:
        raise ValueError("a corpus needs at least 10 examples")
    rng = random.Random(seed)
    gen = _Generator(rng)
    examples, seen = [], set()
    while len(examples) < n:
        source = gen.function()
        if source in seen:
            continue
        ex = make_example(source)  # strict parse; a generator bug surfaces here
        if len(ex.subtokens) > max_subtokens + 2:
            continue
        seen.add(source)
        examples.append(ex)
    vocab = Vocab.build(ex.subtokens for ex in examples)
    labels = Vocab.build(ex.labels for ex in examples)
    for ex in examples:
        ex.ids = np.array(vocab.encode(ex.subtokens), dtype=np.int64)
        ex.label_ids = np.array(labels.encode(ex.labels), dtype=np.int64)
    order = list(range(n))
    rng.shuffle(order)
    n_train, n_valid = _split_sizes(n)
    split = {"train": sorted(order[:n_train]),
             "valid": sorted(order[n_train:n_train + n_valid]),
             "test": sorted(order[n_train + n_valid:])}
    return Corpus(examples, split, vocab, labels)


def subsample(corpus: Corpus, rate: float, seed: int = 0) -> Corpus:
    """Uniform subset of the training split; valid and test are untouched.

    The subset is a prefix of one seeded shuffle, so for a fixed seed a
    smaller rate always selects a subset of a larger one.
    """
    if not 0 < rate <= 1:
        raise ValueError("rate must lie in (0, 1]")
    train = list(corpus.split["train"])
    order = np.random.default_rng(seed).permutation(len(train))
    k = round(rate * len(train))
    kept = sorted(train[i] for i in order[:k])
    split = dict(corpus.split, train=kept)
    return Corpus(corpus.examples, split, corpus.vocab, corpus.labels)
