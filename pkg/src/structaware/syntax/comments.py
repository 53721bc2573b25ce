"""Re-insert comment leaves that the parsers strip before parsing."""

from __future__ import annotations

from .tree import RawNode


def _span(node: RawNode, cache: dict) -> tuple[int, int]:
    key = id(node)
    if key not in cache:
        if node.children:
            spans = [_span(c, cache) for c in node.children]
            cache[key] = (min(s for s, _ in spans), max(e for _, e in spans))
        else:
            cache[key] = (node.start, node.end)
    return cache[key]


def _column(source: bytes, offset: int) -> int:
    return offset - (source.rfind(b"\n", 0, offset) + 1)


def attach_comments(root: RawNode, comments: list[RawNode], containers: tuple[str, ...],
                    source: bytes):
    """Attach each comment roughly where tree-sitter would.

    The comment goes to the innermost node whose span encloses it, or to the
    deepest statement container (a block, a ``then`` clause, ...) ending the
    sibling just before it, provided the comment sits on that sibling's last
    line or is indented at least as far as the container's contents.
    Children stay ordered by start offset.
    """
    for comment in comments:
        cache: dict = {}
        target = root
        descended = True
        while descended:
            descended = False
            for child in target.children:
                if child.children:
                    start, end = _span(child, cache)
                    if start <= comment.start < end:
                        target = child
                        descended = True
                        break
        # follow the rightmost path of the preceding sibling into open containers
        before = [c for c in target.children if _span(c, cache)[1] <= comment.start]
        node = before[-1] if before else None
        same_line = node is not None and b"\n" not in source[_span(node, cache)[1]:comment.start]
        col = _column(source, comment.start)
        while node is not None and node.children:
            if node.kind in containers and (
                    same_line or col >= _column(source, _span(node.children[0], cache)[0])):
                target = node
            node = node.children[-1]
        target.children.append(comment)
        cache.clear()
        target.children.sort(key=lambda c: _span(c, cache)[0])
