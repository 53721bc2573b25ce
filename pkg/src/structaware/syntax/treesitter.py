"""Optional tree-sitter backends (``pip install tree-sitter tree-sitter-python tree-sitter-ruby``).

Any tree-sitter node without children becomes a leaf; ``ERROR`` and missing
nodes are flagged so strict parsing can reject them.
"""

from __future__ import annotations

import importlib

from ..errors import UnsupportedLanguage
from .tree import RawNode, SyntaxTree

_MODULES = {"ts-python": "tree_sitter_python", "ts-ruby": "tree_sitter_ruby"}


def available() -> list[str]:
    names = []
    for name, module in _MODULES.items():
        try:
            importlib.import_module("tree_sitter")
            importlib.import_module(module)
        except ImportError:
            continue
        names.append(name)
    return names


class TreeSitterGrammar:
    def __init__(self, name: str):
        if name not in _MODULES:
            raise UnsupportedLanguage(name)
        try:
            import tree_sitter
            binding = importlib.import_module(_MODULES[name])
        except ImportError as exc:
            raise UnsupportedLanguage(f"{name} requires the tree-sitter bindings: {exc}") from None
        self.name = name
        self._parser = tree_sitter.Parser(tree_sitter.Language(binding.language()))

    def parse(self, source: bytes) -> SyntaxTree:
        ts_tree = self._parser.parse(source)

        def convert(node) -> RawNode:
            raw = RawNode(node.type, start=node.start_byte, end=node.end_byte,
                          named=node.is_named, error=node.is_error or node.is_missing)
            return raw

        # iterative conversion keeps deep trees off the Python stack
        root = convert(ts_tree.root_node)
        stack = [(ts_tree.root_node, root)]
        while stack:
            ts_node, raw = stack.pop()
            for child in ts_node.children:
                raw_child = convert(child)
                raw.children.append(raw_child)
                stack.append((child, raw_child))
        return SyntaxTree.from_raw(root, source)
