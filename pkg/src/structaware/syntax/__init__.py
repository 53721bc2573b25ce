"""Parsing source code into syntax trees and leaf distance matrices."""

from __future__ import annotations

from ..errors import ParseError, UnsupportedLanguage
from .distance import (DistanceMatrix, bfs_distance_oracle, lca, token_distance_matrix,
                       tree_distance)
from .python_like import PythonGrammar
from .ruby_like import RubyGrammar
from .toy import ToyGrammar
from .tree import LeafToken, LeafTokenSequence, RawNode, SourceUnit, SyntaxTree, extract_leaves
from . import treesitter

_GRAMMARS = {}


def register_grammar(grammar) -> None:
    """Register any object with a ``name`` and ``parse(bytes) -> SyntaxTree``."""
    _GRAMMARS[grammar.name] = grammar


def registered_languages() -> list[str]:
    return sorted(set(_GRAMMARS) | set(treesitter.available()))


def get_grammar(language: str):
    if language not in _GRAMMARS:
        if language.startswith("ts-"):
            register_grammar(treesitter.TreeSitterGrammar(language))
        else:
            raise UnsupportedLanguage(f"no grammar registered for {language!r}")
    return _GRAMMARS[language]


def parse(source: SourceUnit, strict: bool = True) -> SyntaxTree:
    tree = get_grammar(source.language).parse(source.text.encode("utf-8"))
    if strict and tree.has_error():
        bad = next(i for i, e in enumerate(tree.errors) if e)
        raise ParseError(f"syntax error node {tree.kinds[bad]!r}", tree.starts[bad])
    return tree


def distance_matrix(source: SourceUnit, strict: bool = True):
    """Parse and return ``(tree, leaves, token-level DistanceMatrix)``."""
    tree = parse(source, strict=strict)
    leaves = extract_leaves(tree)
    return tree, leaves, token_distance_matrix(leaves, tree)


for _g in (ToyGrammar(), PythonGrammar(), RubyGrammar()):
    register_grammar(_g)

__all__ = [
    "DistanceMatrix", "LeafToken", "LeafTokenSequence", "ParseError", "RawNode", "SourceUnit",
    "SyntaxTree", "UnsupportedLanguage", "bfs_distance_oracle", "distance_matrix",
    "extract_leaves", "get_grammar", "lca", "parse", "register_grammar",
    "registered_languages", "token_distance_matrix", "tree_distance",
]
