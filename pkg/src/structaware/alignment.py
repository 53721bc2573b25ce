"""Subtokenisation of leaf tokens and subtoken-level distance matrices.

A subtoken sequence always starts with ``<s>`` and ends with ``</s>``; these
special markers own no token and receive no distance, so the expanded
distance matrix covers only the code positions (``code_positions``).
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import AlignmentError
from .syntax.distance import DistanceMatrix
from .syntax.tree import LeafTokenSequence

BOS, EOS = "<s>", "</s>"

# runs of whitespace, underscores, acronyms, capitalised / lower-case words,
# digits and punctuation; together they cover every character
_PIECE = re.compile(r"\s+|_+|[A-Z]+(?![^\W\d_A-Z])|[A-Z]?[^\W\d_A-Z]+|\d+|[^\w\s]+")


def split_identifier(text: str) -> list[str]:
    """Split at underscores, case transitions and word/punctuation boundaries.

    Whitespace never forms a subtoken of its own; it is glued to the piece
    that follows it (or the one before, at the end of a token).
    """
    pieces = _PIECE.findall(text)
    out: list[str] = []
    pending = ""
    for piece in pieces:
        if piece.isspace():
            pending += piece
            continue
        out.append(pending + piece)
        pending = ""
    if pending:
        if out:
            out[-1] += pending
        else:
            out.append(pending)
    return out


SCHEMES: dict[str, Callable[[str], list[str]]] = {
    "identifier": split_identifier,
    "whole": lambda text: [text],
    "char": lambda text: list(text),
}


@dataclass(frozen=True)
class SubtokenSequence:
    texts: tuple
    owners: tuple  # owning leaf index, None for specials

    @property
    def specials(self) -> tuple:
        return tuple(i for i, o in enumerate(self.owners) if o is None)

    @property
    def code_positions(self) -> tuple:
        return tuple(i for i, o in enumerate(self.owners) if o is not None)

    def __len__(self):
        return len(self.texts)


@dataclass(frozen=True)
class AlignmentMap:
    owner: tuple  # per subtoken: token index or None

    @property
    def code_positions(self) -> tuple:
        return tuple(i for i, o in enumerate(self.owner) if o is not None)

    def to_dict(self, subtokens: SubtokenSequence) -> dict:
        return {"subtokens": list(subtokens.texts), "owner": list(self.owner)}

    def to_json(self, subtokens: SubtokenSequence) -> str:
        return json.dumps(self.to_dict(subtokens))

    @staticmethod
    def from_dict(obj: dict) -> tuple[SubtokenSequence, "AlignmentMap"]:
        owner = tuple(obj["owner"])
        return SubtokenSequence(tuple(obj["subtokens"]), owner), AlignmentMap(owner)


def subtokenize(leaves: LeafTokenSequence, scheme: str = "identifier") -> SubtokenSequence:
    try:
        split = SCHEMES[scheme]
    except KeyError:
        raise ValueError(f"unknown subtokenizer scheme {scheme!r}") from None
    texts, owners = [BOS], [None]
    for idx, tok in enumerate(leaves):
        for piece in split(tok.text):
            texts.append(piece)
            owners.append(idx)
    texts.append(EOS)
    owners.append(None)
    return SubtokenSequence(tuple(texts), tuple(owners))


def align(subtokens: SubtokenSequence, leaves: LeafTokenSequence) -> AlignmentMap:
    """Two-cursor sweep assigning each subtoken to the token that contains it.

    Only the subtoken texts are consulted, so this also aligns sequences from
    foreign tokenizers. A subtoken that runs past its token's text (straddles
    two tokens) or disagrees with it raises AlignmentError. A truncated
    sequence may stop part-way through its last token.
    """
    specials = set(subtokens.specials)
    owner: list = []
    tok_idx, consumed = 0, ""
    for pos, text in enumerate(subtokens.texts):
        if pos in specials:
            owner.append(None)
            continue
        if tok_idx >= len(leaves):
            raise AlignmentError(f"subtoken {text!r} at {pos} has no remaining token")
        target = leaves[tok_idx].text
        consumed += text
        if not target.startswith(consumed):
            raise AlignmentError(
                f"subtoken {text!r} at {pos} diverges from token {target!r} (index {tok_idx})")
        owner.append(tok_idx)
        if consumed == target:
            tok_idx, consumed = tok_idx + 1, ""
    return AlignmentMap(tuple(owner))


def expand_distance_matrix(d: DistanceMatrix, mapping: AlignmentMap,
                           subtokens: SubtokenSequence | None = None) -> DistanceMatrix:
    """Lift a token-level matrix to the code subtokens of ``mapping``.

    Entry ``(p, q)`` is the token distance between the owners of code
    subtokens ``p`` and ``q``; specials are dropped.
    """
    if d.granularity != "token":
        raise ValueError("expected a token-level distance matrix")
    positions = mapping.code_positions
    owners = np.array([mapping.owner[p] for p in positions], dtype=np.int64)
    if owners.size and owners.max() >= d.size:
        raise AlignmentError("alignment refers to tokens outside the distance matrix")
    matrix = d.matrix[np.ix_(owners, owners)] if owners.size else np.zeros((0, 0), np.int64)
    if subtokens is not None:
        names = tuple(subtokens.texts[p] for p in positions)
    else:
        names = tuple(d.tokens[o] for o in owners)
    return DistanceMatrix(names, matrix, "subtoken")


def truncate(subtokens: SubtokenSequence, mapping: AlignmentMap,
             max_len: int) -> tuple[SubtokenSequence, AlignmentMap]:
    """Keep the first ``max_len`` code subtokens plus every special marker."""
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    keep, seen = [], 0
    for pos, o in enumerate(mapping.owner):
        if o is None:
            keep.append(pos)
        elif seen < max_len:
            keep.append(pos)
            seen += 1
    texts = tuple(subtokens.texts[p] for p in keep)
    owner = tuple(mapping.owner[p] for p in keep)
    return SubtokenSequence(texts, owner), AlignmentMap(owner)


class Vocab:
    """Subtoken string <-> integer id table with reserved pad/mask/unk/specials."""

    PAD, MASK, UNK = "<pad>", "<mask>", "<unk>"
    RESERVED = (PAD, MASK, UNK, BOS, EOS)

    def __init__(self, words=()):
        self.itos: list[str] = list(self.RESERVED)
        self.stoi = {w: i for i, w in enumerate(self.itos)}
        for w in words:
            self.add(w)

    def add(self, word: str) -> int:
        if word not in self.stoi:
            self.stoi[word] = len(self.itos)
            self.itos.append(word)
        return self.stoi[word]

    @classmethod
    def build(cls, sequences) -> "Vocab":
        words = sorted({w for seq in sequences for w in seq} - set(cls.RESERVED))
        return cls(words)

    def encode(self, texts) -> list[int]:
        unk = self.stoi[self.UNK]
        return [self.stoi.get(t, unk) for t in texts]

    def decode(self, ids) -> list[str]:
        return [self.itos[i] for i in ids]

    @property
    def pad_id(self) -> int:
        return self.stoi[self.PAD]

    @property
    def mask_id(self) -> int:
        return self.stoi[self.MASK]

    def __len__(self):
        return len(self.itos)

    def to_list(self) -> list[str]:
        return list(self.itos)

    @classmethod
    def from_list(cls, itos) -> "Vocab":
        if tuple(itos[:len(cls.RESERVED)]) != cls.RESERVED:
            raise ValueError("vocabulary does not start with the reserved symbols")
        return cls(itos[len(cls.RESERVED):])
