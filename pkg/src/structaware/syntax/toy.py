"""Bracketed toy language (S-expressions).

    program := item*
    item    := list | atom
    list    := "(" item* ")"

Atoms are leaves of kind ``number``, ``keyword`` (``:name``), ``string`` or
``symbol``; ``;`` starts a comment that runs to the end of the line.
"""

from __future__ import annotations

import re

from ..errors import ParseError
from .tree import RawNode, SyntaxTree
from ._text import ByteOffsets

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>;[^\n]*)
  | (?P<open>\()
  | (?P<close>\))
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<badstring>")
  | (?P<atom>[^\s()";]+)
    """,
    re.VERBOSE,
)
_NUMBER = re.compile(r"[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")


def _atom_kind(text: str) -> str:
    if _NUMBER.match(text):
        return "number"
    if text.startswith(":") and len(text) > 1:
        return "keyword"
    return "symbol"


class ToyGrammar:
    name = "toy"

    def parse(self, source: bytes) -> SyntaxTree:
        text = source.decode("utf-8")
        offsets = ByteOffsets(text)
        program = RawNode("program")
        stack = [program]
        for m in _TOKEN.finditer(text):
            kind = m.lastgroup
            start, end = offsets[m.start()], offsets[m.end()]
            if kind == "ws":
                continue
            if kind == "badstring":
                raise ParseError("unterminated string", start)
            if kind == "open":
                node = RawNode("list")
                node.add(RawNode("(", start=start, end=end, named=False))
                stack[-1].add(node)
                stack.append(node)
            elif kind == "close":
                if len(stack) == 1:
                    raise ParseError("unbalanced ')'", start)
                stack.pop().add(RawNode(")", start=start, end=end, named=False))
            elif kind == "comment":
                stack[-1].add(RawNode("comment", start=start, end=end))
            elif kind == "string":
                stack[-1].add(RawNode("string", start=start, end=end))
            else:
                stack[-1].add(RawNode(_atom_kind(m.group()), start=start, end=end))
        if len(stack) > 1:
            raise ParseError("unclosed '('", len(source))
        if not program.children:
            raise ParseError("empty program")
        return SyntaxTree.from_raw(program, source)
