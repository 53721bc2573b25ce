"""Core tree types: source units, arena-backed syntax trees, leaf sequences."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

from ..errors import ParseError


@dataclass(frozen=True)
class SourceUnit:
    text: str
    language: str

    def __post_init__(self):
        if not self.text.strip():
            raise ParseError("source text is empty")


@dataclass
class RawNode:
    """Mutable node used while a grammar builds its tree.

    Leaves carry their own byte span; internal spans are derived from the
    children when the tree is frozen.
    """

    kind: str
    children: list = field(default_factory=list)
    start: int = -1
    end: int = -1
    named: bool = True
    error: bool = False

    def add(self, *nodes):
        self.children.extend(n for n in nodes if n is not None)
        return self


class SyntaxTree:
    """Immutable arena of nodes.

    Node ``i`` has ``kinds[i]``, ``parents[i]`` (``-1`` for the root),
    ``children[i]`` and the half-open byte span ``starts[i]:ends[i]``.
    Nodes are stored in pre-order, so the root is node 0 and leaves appear in
    source order.
    """

    __slots__ = ("source", "kinds", "parents", "children", "starts", "ends",
                 "named", "errors", "depths", "root")

    def __init__(self, source: bytes, kinds, parents, children, starts, ends,
                 named=None, errors=None):
        n = len(kinds)
        self.source = source
        self.kinds = tuple(kinds)
        self.parents = tuple(parents)
        self.children = tuple(tuple(c) for c in children)
        self.starts = tuple(starts)
        self.ends = tuple(ends)
        self.named = tuple(named) if named is not None else (True,) * n
        self.errors = tuple(errors) if errors is not None else (False,) * n
        self.root = 0
        depths = [0] * n
        for i in range(1, n):
            depths[i] = depths[self.parents[i]] + 1
        self.depths = tuple(depths)
        self._validate()

    def _validate(self):
        n = len(self.kinds)
        if n == 0 or self.parents[0] != -1:
            raise ValueError("tree must have a root at index 0")
        for i in range(1, n):
            p = self.parents[i]
            if not 0 <= p < i:
                raise ValueError(f"node {i} has invalid parent {p}")
            if i not in self.children[p]:
                raise ValueError(f"node {i} missing from children of {p}")
            if self.starts[i] < self.starts[p] or self.ends[i] > self.ends[p]:
                raise ValueError(f"span of node {i} escapes its parent")

    @classmethod
    def from_raw(cls, root: RawNode, source: bytes) -> "SyntaxTree":
        kinds, parents, children, starts, ends, named, errors = [], [], [], [], [], [], []
        # explicit stack: generated trees can be deeper than the recursion limit
        stack = [(root, -1)]
        while stack:
            node, parent = stack.pop()
            idx = len(kinds)
            kinds.append(node.kind)
            parents.append(parent)
            children.append([])
            starts.append(node.start)
            ends.append(node.end)
            named.append(node.named)
            errors.append(node.error)
            if parent >= 0:
                children[parent].append(idx)
            for child in reversed(node.children):
                stack.append((child, idx))
        # derive internal spans bottom-up (children always follow parents)
        for i in range(len(kinds) - 1, -1, -1):
            if children[i]:
                starts[i] = min(starts[c] for c in children[i])
                ends[i] = max(ends[c] for c in children[i])
        return cls(source, kinds, parents, children, starts, ends, named, errors)

    def __len__(self):
        return len(self.kinds)

    def is_leaf(self, i: int) -> bool:
        return not self.children[i]

    def text(self, i: int) -> str:
        return self.source[self.starts[i]:self.ends[i]].decode("utf-8")

    def has_error(self) -> bool:
        return any(self.errors)

    def edges(self):
        return [(self.parents[i], i) for i in range(1, len(self.kinds))]

    def sexp(self, i: int = 0) -> str:
        """Debug rendering in a tree-sitter-like s-expression form."""
        if self.is_leaf(i):
            return repr(self.text(i)) if not self.named[i] else f"({self.kinds[i]} {self.text(i)!r})"
        inner = " ".join(self.sexp(c) for c in self.children[i])
        return f"({self.kinds[i]} {inner})"


class LeafToken(NamedTuple):
    text: str
    start: int
    end: int
    node: int
    depth: int


class LeafTokenSequence(tuple):
    """Ordered leaf tokens of one tree; behaves like a tuple of LeafToken."""

    def __new__(cls, tokens: Sequence[LeafToken] = ()):
        return super().__new__(cls, tuple(tokens))

    @property
    def texts(self) -> list[str]:
        return [t.text for t in self]


def extract_leaves(tree: SyntaxTree) -> LeafTokenSequence:
    """In-order leaf traversal; pre-order node storage makes this a scan."""
    return LeafTokenSequence(
        LeafToken(tree.text(i), tree.starts[i], tree.ends[i], i, tree.depths[i])
        for i in range(len(tree))
        if tree.is_leaf(i)
    )
