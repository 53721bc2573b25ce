import random

import pytest

from structaware.syntax import RawNode, SyntaxTree

# a small Rails-style method; its tokens include render_body, def, ( and :partial
RENDER_BODY_RB = """\
def render_body(context, options)
  if options[:partial]
    render_partial(context, options)
  else
    render_template(context, options)
  end
end
"""


def random_tree(rng: random.Random, max_leaves: int = 50) -> SyntaxTree:
    """Random ordered tree with unary chains and wide fan-outs; leaves are words."""
    n_leaves = rng.randint(1, max_leaves)
    words = [f"t{i}" for i in range(n_leaves)]
    source = " ".join(words).encode()
    offsets, pos = [], 0
    for w in words:
        offsets.append((pos, pos + len(w)))
        pos += len(w) + 1
    nodes = [RawNode("leaf", start=s, end=e) for s, e in offsets]
    # repeatedly group runs of adjacent nodes under fresh parents
    while len(nodes) > 1:
        i = rng.randrange(len(nodes))
        j = min(len(nodes), i + rng.randint(1, 4))
        parent = RawNode(f"n{rng.randrange(5)}", children=nodes[i:j])
        nodes[i:j] = [parent]
    root = nodes[0]
    for _ in range(rng.randint(0, 3)):  # optional unary chain above the root
        root = RawNode("wrap", children=[root])
    if not root.children:  # a bare leaf still needs a root above it
        root = RawNode("root", children=[root])
    return SyntaxTree.from_raw(root, source)


@pytest.fixture
def render_body_source():
    return RENDER_BODY_RB


def pytest_terminal_summary(terminalreporter):
    import sys
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for number in sorted(results):
            terminalreporter.write_line(results[number])
