"""Hand-written parser for a Python subset.

Node kinds and nesting follow the tree-sitter Python grammar, so leaf
distances agree with what tree-sitter would produce for the same snippet.
Supported: function definitions (plain and default parameters), if / elif /
else, for, while, return, pass, break, continue, assignment (plain, chained,
augmented, tuple targets), boolean / comparison / arithmetic / bitwise
operators, unary operators, calls with keyword arguments, attributes,
subscripts, lists, tuples, dictionaries, conditional expressions, strings,
numbers, True / False / None and comments.  Anything else is a ParseError.
"""

from __future__ import annotations

import re

from ..errors import ParseError
from ._text import ByteOffsets, Tok, TokenStream
from .comments import attach_comments
from .tree import RawNode, SyntaxTree

KEYWORDS = {
    "def", "return", "if", "elif", "else", "for", "in", "while", "pass", "break",
    "continue", "and", "or", "not", "is", "None", "True", "False",
    # recognised so that they fail loudly instead of parsing as names
    "class", "import", "from", "lambda", "try", "except", "finally", "with",
    "yield", "global", "nonlocal", "assert", "del", "raise", "async", "await", "as",
}
OPS = sorted("""
    **= //= >>= <<= -> ** // << >> <= >= == != += -= *= /= %= &= |= ^= @= :=
    + - * / % @ & | ^ ~ < > ( ) [ ] { } , : . ; =
""".split(), key=len, reverse=True)
AUGMENTED = {"+=", "-=", "*=", "/=", "//=", "%=", "**=", ">>=", "<<=", "&=", "|=", "^=", "@="}
COMPARISON = {"<", ">", "==", ">=", "<=", "!=", "in", "is"}
# binary operator precedence, loosest first
BINARY_LEVELS = [("|",), ("^",), ("&",), ("<<", ">>"), ("+", "-"), ("*", "/", "//", "%", "@")]

_SCAN = re.compile(
    r"""
    (?P<space>[ \t\f]+|\\\r?\n)
  | (?P<newline>\r?\n)
  | (?P<comment>\#[^\r\n]*)
  | (?P<string>(?:[rRbBuU]|[rR][bB]|[bB][rR])?(?:\"\"\"[\s\S]*?\"\"\"|'''[\s\S]*?'''|"(?:[^"\\\n]|\\.)*"|'(?:[^'\\\n]|\\.)*'))
  | (?P<number>0[xXoObB][0-9a-fA-F_]+|(?:\d[\d_]*\.?[\d_]*|\.\d[\d_]*)(?:[eE][+-]?\d+)?[jJ]?)
  | (?P<name>[^\W\d]\w*)
  | (?P<op>"""
    + "|".join(re.escape(o) for o in OPS)
    + r""")
    """,
    re.VERBOSE,
)
_INDENT = re.compile(r"[ \t]*")


def tokenize(text: str) -> list[Tok]:
    offsets = ByteOffsets(text)
    toks: list[Tok] = []
    indents = [0]
    depth = 0
    pos, n = 0, len(text)
    at_line_start = True
    spaced = True

    def emit(type_, start, end, inner=None):
        nonlocal spaced
        toks.append(Tok(type_, text[start:end], offsets[start], offsets[end], inner, spaced))
        spaced = False

    while pos < n:
        if at_line_start and depth == 0:
            m = _INDENT.match(text, pos)
            p = m.end()
            if p >= n:
                break
            if text[p] in "\r\n":
                pos = p + (2 if text.startswith("\r\n", p) else 1)
                continue
            if text[p] == "#":
                end = text.find("\n", p)
                end = n if end < 0 else end
                emit("COMMENT", p, end)
                pos = end
                continue
            width = len(m.group().expandtabs(8))
            if width > indents[-1]:
                indents.append(width)
                emit("INDENT", p, p)
            while width < indents[-1]:
                indents.pop()
                emit("DEDENT", p, p)
            if width != indents[-1]:
                raise ParseError("unindent does not match any outer indentation level", offsets[p])
            at_line_start = False
            spaced = True
            pos = p
            continue
        m = _SCAN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", offsets[pos])
        kind = m.lastgroup
        if kind == "space":
            spaced = True
        elif kind == "newline":
            if depth == 0:
                emit("NEWLINE", m.start(), m.start())
                at_line_start = True
            spaced = True
        elif kind == "comment":
            emit("COMMENT", m.start(), m.end())
        elif kind == "string":
            s = m.group()
            prefix = len(s) - len(s.lstrip("rRbBuU"))
            q = 3 if s[prefix:prefix + 3] in ('"""', "'''") else 1
            a, b = m.start() + prefix + q, m.end() - q
            emit("STRING", m.start(), m.end(), (offsets[a], offsets[b]))
        elif kind == "number":
            emit("NUMBER", m.start(), m.end())
        elif kind == "name":
            emit("KEYWORD" if m.group() in KEYWORDS else "NAME", m.start(), m.end())
        else:
            op = m.group()
            if op in "([{":
                depth += 1
            elif op in ")]}":
                depth = max(depth - 1, 0)
            emit("OP", m.start(), m.end())
        pos = m.end()
    if depth:
        raise ParseError("unclosed bracket", offsets[n])
    code = [t for t in toks if t.type != "COMMENT"]
    if code and code[-1].type not in ("NEWLINE", "DEDENT"):
        emit("NEWLINE", n, n)
    while len(indents) > 1:
        indents.pop()
        emit("DEDENT", n, n)
    emit("EOF", n, n)
    return toks


def _leaf(tok: Tok, kind: str | None = None) -> RawNode:
    if kind is None:
        return RawNode(tok.text, start=tok.start, end=tok.end, named=False)
    return RawNode(kind, start=tok.start, end=tok.end)


class _Parser:
    def __init__(self, toks: list[Tok]):
        self.ts = TokenStream(toks)

    # -- statements -----------------------------------------------------
    def module(self) -> RawNode:
        mod = RawNode("module")
        ts = self.ts
        while ts.cur.type != "EOF":
            if ts.cur.type == "NEWLINE":
                ts.next()
                continue
            if ts.cur.type == "INDENT":
                raise ParseError("unexpected indent", ts.cur.start)
            mod.add(*self.statement())
        return mod

    def statement(self) -> list[RawNode]:
        ts = self.ts
        if ts.at("def"):
            return [self.function_definition()]
        if ts.at("if"):
            return [self.if_statement()]
        if ts.at("for"):
            return [self.for_statement()]
        if ts.at("while"):
            return [self.while_statement()]
        nodes = [self.simple_statement()]
        while ts.at(";"):
            nodes.append(_leaf(ts.next()))
            if ts.cur.type in ("NEWLINE", "EOF", "DEDENT"):
                break
            nodes.append(self.simple_statement())
        if ts.cur.type == "NEWLINE":
            ts.next()
        elif ts.cur.type not in ("EOF", "DEDENT"):
            raise ParseError(f"unexpected {ts.cur.text!r}", ts.cur.start)
        return nodes

    def simple_statement(self) -> RawNode:
        ts = self.ts
        tok = ts.cur
        if tok.type == "KEYWORD" and tok.text in ("pass", "break", "continue"):
            return RawNode(f"{tok.text}_statement").add(_leaf(ts.next()))
        if ts.at("return"):
            node = RawNode("return_statement").add(_leaf(ts.next()))
            if ts.cur.type not in ("NEWLINE", "EOF", "DEDENT"):
                node.add(self.expression_list())
            return node
        if tok.type == "KEYWORD" and tok.text not in ("not", "None", "True", "False"):
            raise ParseError(f"unsupported statement {tok.text!r}", tok.start)
        return RawNode("expression_statement").add(self.assignment_or_expression())

    def assignment_or_expression(self) -> RawNode:
        ts = self.ts
        lhs = self.expression_list()
        if ts.at("="):
            if lhs.kind == "expression_list":
                lhs.kind = "pattern_list"
            node = RawNode("assignment").add(lhs, _leaf(ts.next()))
            node.add(self.assignment_or_expression_rhs())
            return node
        if ts.cur.type == "OP" and ts.cur.text in AUGMENTED:
            node = RawNode("augmented_assignment").add(lhs, _leaf(ts.next()))
            return node.add(self.expression_list())
        return lhs

    def assignment_or_expression_rhs(self) -> RawNode:
        rhs = self.expression_list()
        if self.ts.at("="):
            if rhs.kind == "expression_list":
                rhs.kind = "pattern_list"
            node = RawNode("assignment").add(rhs, _leaf(self.ts.next()))
            return node.add(self.assignment_or_expression_rhs())
        return rhs

    def block(self) -> RawNode:
        ts = self.ts
        node = RawNode("block")
        if ts.cur.type == "NEWLINE":
            ts.next()
            ts.expect(type="INDENT")
            while ts.cur.type not in ("DEDENT", "EOF"):
                if ts.cur.type == "NEWLINE":
                    ts.next()
                    continue
                node.add(*self.statement())
            if ts.cur.type == "DEDENT":
                ts.next()
        else:
            node.add(*self.statement())
        if not node.children:
            raise ParseError("expected an indented block", ts.cur.start)
        return node

    def function_definition(self) -> RawNode:
        ts = self.ts
        node = RawNode("function_definition").add(_leaf(ts.next()))
        node.add(_leaf(ts.expect(type="NAME"), "identifier"))
        params = RawNode("parameters").add(_leaf(ts.expect("(")))
        while not ts.at(")"):
            name = _leaf(ts.expect(type="NAME"), "identifier")
            if ts.at("="):
                eq = _leaf(ts.next())
                params.add(RawNode("default_parameter").add(name, eq, self.expression()))
            else:
                params.add(name)
            if not ts.at(")"):
                params.add(_leaf(ts.expect(",")))
        params.add(_leaf(ts.expect(")")))
        node.add(params, _leaf(ts.expect(":")))
        return node.add(self.block())

    def if_statement(self) -> RawNode:
        ts = self.ts
        node = RawNode("if_statement").add(_leaf(ts.next()), self.expression(), _leaf(ts.expect(":")), self.block())
        while ts.at("elif"):
            clause = RawNode("elif_clause").add(_leaf(ts.next()), self.expression(), _leaf(ts.expect(":")), self.block())
            node.add(clause)
        if ts.at("else"):
            node.add(RawNode("else_clause").add(_leaf(ts.next()), _leaf(ts.expect(":")), self.block()))
        return node

    def for_statement(self) -> RawNode:
        ts = self.ts
        node = RawNode("for_statement").add(_leaf(ts.next()))
        targets = [self.binary(0)]
        commas = []
        while ts.at(","):
            commas.append(_leaf(ts.next()))
            targets.append(self.binary(0))
        if commas:
            pattern = RawNode("pattern_list")
            for i, t in enumerate(targets):
                pattern.add(t)
                if i < len(commas):
                    pattern.add(commas[i])
            node.add(pattern)
        else:
            node.add(targets[0])
        node.add(_leaf(ts.expect("in")), self.expression_list(), _leaf(ts.expect(":")))
        return node.add(self.block())

    def while_statement(self) -> RawNode:
        ts = self.ts
        return RawNode("while_statement").add(
            _leaf(ts.next()), self.expression(), _leaf(ts.expect(":")), self.block())

    # -- expressions ----------------------------------------------------
    def expression_list(self) -> RawNode:
        ts = self.ts
        first = self.expression()
        if not ts.at(","):
            return first
        node = RawNode("expression_list").add(first)
        while ts.at(","):
            node.add(_leaf(ts.next()))
            if ts.cur.type in ("NEWLINE", "EOF") or ts.at("=", ")", ":"):
                break
            node.add(self.expression())
        return node

    def expression(self) -> RawNode:
        ts = self.ts
        body = self.or_test()
        if ts.at("if"):
            node = RawNode("conditional_expression").add(body, _leaf(ts.next()), self.or_test())
            node.add(_leaf(ts.expect("else")), self.expression())
            return node
        return body

    def or_test(self) -> RawNode:
        left = self.and_test()
        while self.ts.at("or"):
            left = RawNode("boolean_operator").add(left, _leaf(self.ts.next()), self.and_test())
        return left

    def and_test(self) -> RawNode:
        left = self.not_test()
        while self.ts.at("and"):
            left = RawNode("boolean_operator").add(left, _leaf(self.ts.next()), self.not_test())
        return left

    def not_test(self) -> RawNode:
        if self.ts.at("not"):
            return RawNode("not_operator").add(_leaf(self.ts.next()), self.not_test())
        return self.comparison()

    def _comparison_op(self) -> list[RawNode] | None:
        ts = self.ts
        tok = ts.cur
        if tok.type == "OP" and tok.text in COMPARISON:
            return [_leaf(ts.next())]
        if tok.type == "KEYWORD" and tok.text == "in":
            return [_leaf(ts.next())]
        if tok.type == "KEYWORD" and tok.text == "not" and ts.peek().text == "in":
            a, b = ts.next(), ts.next()
            return [RawNode("not in", named=False).add(_leaf(a), _leaf(b))]
        if tok.type == "KEYWORD" and tok.text == "is":
            a = ts.next()
            if ts.at("not"):
                b = ts.next()
                return [RawNode("is not", named=False).add(_leaf(a), _leaf(b))]
            return [_leaf(a)]
        return None

    def comparison(self) -> RawNode:
        left = self.binary(0)
        op = self._comparison_op()
        if op is None:
            return left
        node = RawNode("comparison_operator").add(left)
        while op is not None:
            node.add(*op)
            node.add(self.binary(0))
            op = self._comparison_op()
        return node

    def binary(self, level: int) -> RawNode:
        if level == len(BINARY_LEVELS):
            return self.unary()
        ops = BINARY_LEVELS[level]
        left = self.binary(level + 1)
        while self.ts.cur.type == "OP" and self.ts.cur.text in ops:
            op = _leaf(self.ts.next())
            left = RawNode("binary_operator").add(left, op, self.binary(level + 1))
        return left

    def unary(self) -> RawNode:
        ts = self.ts
        if ts.cur.type == "OP" and ts.cur.text in ("-", "+", "~"):
            return RawNode("unary_operator").add(_leaf(ts.next()), self.unary())
        return self.power()

    def power(self) -> RawNode:
        base = self.primary()
        if self.ts.at("**"):
            return RawNode("binary_operator").add(base, _leaf(self.ts.next()), self.unary())
        return base

    def primary(self) -> RawNode:
        ts = self.ts
        node = self.atom()
        while True:
            if ts.at("("):
                node = RawNode("call").add(node, self.argument_list())
            elif ts.at("."):
                dot = _leaf(ts.next())
                node = RawNode("attribute").add(node, dot, _leaf(ts.expect(type="NAME"), "identifier"))
            elif ts.at("["):
                sub = RawNode("subscript").add(node, _leaf(ts.next()), self.expression())
                node = sub.add(_leaf(ts.expect("]")))
            else:
                return node

    def argument_list(self) -> RawNode:
        ts = self.ts
        node = RawNode("argument_list").add(_leaf(ts.expect("(")))
        while not ts.at(")"):
            if ts.cur.type == "NAME" and ts.peek().text == "=" and ts.peek().type == "OP":
                name = _leaf(ts.next(), "identifier")
                node.add(RawNode("keyword_argument").add(name, _leaf(ts.next()), self.expression()))
            else:
                node.add(self.expression())
            if not ts.at(")"):
                node.add(_leaf(ts.expect(",")))
        return node.add(_leaf(ts.expect(")")))

    def _sequence(self, close: str, node: RawNode) -> RawNode:
        ts = self.ts
        while not ts.at(close):
            node.add(self.expression())
            if not ts.at(close):
                node.add(_leaf(ts.expect(",")))
        return node.add(_leaf(ts.expect(close)))

    def atom(self) -> RawNode:
        ts = self.ts
        tok = ts.cur
        if tok.type == "NAME":
            return _leaf(ts.next(), "identifier")
        if tok.type == "KEYWORD" and tok.text in ("None", "True", "False"):
            return _leaf(ts.next(), {"None": "none", "True": "true", "False": "false"}[tok.text])
        if tok.type == "NUMBER":
            t = ts.next()
            is_float = not t.text[:2].lower() in ("0x", "0o", "0b") and any(c in t.text for c in ".eE")
            return _leaf(t, "float" if is_float else "integer")
        if tok.type == "STRING":
            t = ts.next()
            a, b = t.inner
            node = RawNode("string").add(RawNode("string_start", start=t.start, end=a))
            if b > a:
                node.add(RawNode("string_content", start=a, end=b))
            return node.add(RawNode("string_end", start=b, end=t.end))
        if ts.at("("):
            open_ = _leaf(ts.next())
            if ts.at(")"):
                return RawNode("tuple").add(open_, _leaf(ts.next()))
            first = self.expression()
            if ts.at(","):
                node = RawNode("tuple").add(open_, first)
                while ts.at(","):
                    node.add(_leaf(ts.next()))
                    if ts.at(")"):
                        break
                    node.add(self.expression())
                return node.add(_leaf(ts.expect(")")))
            return RawNode("parenthesized_expression").add(open_, first, _leaf(ts.expect(")")))
        if ts.at("["):
            return self._sequence("]", RawNode("list").add(_leaf(ts.next())))
        if ts.at("{"):
            node = RawNode("dictionary").add(_leaf(ts.next()))
            while not ts.at("}"):
                key = self.expression()
                colon = _leaf(ts.expect(":"))
                node.add(RawNode("pair").add(key, colon, self.expression()))
                if not ts.at("}"):
                    node.add(_leaf(ts.expect(",")))
            return node.add(_leaf(ts.expect("}")))
        shown = tok.text if tok.type not in ("NEWLINE", "EOF", "INDENT", "DEDENT") else tok.type
        raise ParseError(f"unexpected {shown!r}", tok.start)


class PythonGrammar:
    name = "python"

    def parse(self, source: bytes) -> SyntaxTree:
        text = source.decode("utf-8")
        toks = tokenize(text)
        comments = [t for t in toks if t.type == "COMMENT"]
        code = [t for t in toks if t.type != "COMMENT"]
        root = _Parser(code).module()
        attach_comments(root, [RawNode("comment", start=c.start, end=c.end) for c in comments],
                        containers=("module", "block"), source=source)
        if not root.children:
            raise ParseError("empty module")
        return SyntaxTree.from_raw(root, source)
