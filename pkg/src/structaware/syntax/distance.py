"""Leaf-to-leaf shortest-path distances over a syntax tree."""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass

import numpy as np

from .tree import LeafTokenSequence, SyntaxTree, extract_leaves

GRANULARITIES = ("token", "subtoken")


@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    tokens: tuple
    matrix: np.ndarray
    granularity: str = "token"

    def __post_init__(self):
        m = np.array(self.matrix, dtype=np.int64)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] != len(self.tokens):
            raise ValueError(f"matrix shape {m.shape} does not match {len(self.tokens)} tokens")
        if self.granularity not in GRANULARITIES:
            raise ValueError(f"unknown granularity {self.granularity!r}")
        if not np.array_equal(m, m.T) or m.diagonal().any() or (m < 0).any():
            raise ValueError("distances must be symmetric, non-negative, with a zero diagonal")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "tokens", tuple(self.tokens))

    @property
    def size(self) -> int:
        return len(self.tokens)

    def __eq__(self, other):
        if not isinstance(other, DistanceMatrix):
            return NotImplemented
        return (self.tokens == other.tokens and self.granularity == other.granularity
                and np.array_equal(self.matrix, other.matrix))

    def to_dict(self) -> dict:
        return {"tokens": list(self.tokens),
                "matrix": self.matrix.tolist(),
                "granularity": self.granularity}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, obj: dict) -> "DistanceMatrix":
        return cls(tuple(obj["tokens"]), np.asarray(obj["matrix"]), obj.get("granularity", "token"))

    @classmethod
    def from_json(cls, text: str) -> "DistanceMatrix":
        return cls.from_dict(json.loads(text))


def lca(tree: SyntaxTree, u: int, v: int) -> int:
    """Lowest common ancestor by equalising depths, then walking both chains."""
    depth, parent = tree.depths, tree.parents
    while depth[u] > depth[v]:
        u = parent[u]
    while depth[v] > depth[u]:
        v = parent[v]
    while u != v:
        u, v = parent[u], parent[v]
    return u


def tree_distance(tree: SyntaxTree, u: int, v: int) -> int:
    return tree.depths[u] + tree.depths[v] - 2 * tree.depths[lca(tree, u, v)]


def token_distance_matrix(leaves: LeafTokenSequence, tree: SyntaxTree) -> DistanceMatrix:
    n = len(leaves)
    out = np.zeros((n, n), dtype=np.int64)
    nodes = [t.node for t in leaves]
    for i in range(n):
        for j in range(i + 1, n):
            out[i, j] = out[j, i] = tree_distance(tree, nodes[i], nodes[j])
    return DistanceMatrix(tuple(t.text for t in leaves), out, "token")


def bfs_distance_oracle(tree: SyntaxTree) -> DistanceMatrix:
    """All-pairs leaf distances by breadth-first search on the undirected edges.

    Deliberately shares nothing with the LCA path: adjacency is rebuilt from
    the edge list and depths are never consulted.
    """
    adjacency = [[] for _ in range(len(tree))]
    for a, b in tree.edges():
        adjacency[a].append(b)
        adjacency[b].append(a)
    leaf_nodes = [i for i in range(len(tree)) if not tree.children[i]]
    n = len(leaf_nodes)
    out = np.zeros((n, n), dtype=np.int64)
    for row, src in enumerate(leaf_nodes):
        dist = [-1] * len(tree)
        dist[src] = 0
        queue = deque([src])
        while queue:
            x = queue.popleft()
            for y in adjacency[x]:
                if dist[y] < 0:
                    dist[y] = dist[x] + 1
                    queue.append(y)
        out[row] = [dist[j] for j in leaf_nodes]
    tokens = tuple(tree.text(i) for i in leaf_nodes)
    return DistanceMatrix(tokens, out, "token")


def distances_for_tree(tree: SyntaxTree) -> tuple[LeafTokenSequence, DistanceMatrix]:
    leaves = extract_leaves(tree)
    return leaves, token_distance_matrix(leaves, tree)
