"""Hand-written parser for a Ruby subset.

Node kinds and nesting follow the tree-sitter Ruby grammar (method bodies
wrapped in ``body_statement``, ``nil`` as an internal node over its keyword,
``while`` bodies in a ``do`` node that owns the closing ``end``).  Supported:
method definitions with plain and optional parameters, if / elsif / else,
unless, while, return, assignment and operator assignment, binary and unary
operators (including ``and`` / ``or`` / ``not``), calls with and without
parentheses, attribute calls, element references, arrays, strings without
interpolation, symbols, numbers, constants (with ``::``), instance variables,
nil / true / false / self, parenthesised expressions and comments.
"""

from __future__ import annotations

import re

from ..errors import ParseError
from ._text import ByteOffsets, Tok, TokenStream
from .comments import attach_comments
from .tree import RawNode, SyntaxTree

KEYWORDS = {
    "def", "end", "if", "elsif", "else", "unless", "while", "until", "return", "nil",
    "true", "false", "self", "and", "or", "not", "then", "do",
    "class", "module", "begin", "rescue", "ensure", "yield", "case", "when",
}
OPS = sorted("""
    **= ||= &&= <=> === == != >= <= && || << >> += -= *= /= %= ** :: => !
    ~ + - * / % < > = . , ( ) [ ] { } | & ^ ;
""".split(), key=len, reverse=True)
ASSIGN_OPS = {"+=", "-=", "*=", "/=", "%=", "**=", "||=", "&&="}
# (operators, right associative), loosest first
BINARY_LEVELS = [
    (("||",), False), (("&&",), False), (("<=>", "==", "===", "!="), False),
    (("<", "<=", ">", ">="), False), (("|", "^"), False), (("&",), False),
    (("<<", ">>"), False), (("+", "-"), False), (("*", "/", "%"), False),
]

_SCAN = re.compile(
    r"""
    (?P<space>[ \t\f]+|\\\r?\n)
  | (?P<newline>\r?\n)
  | (?P<comment>\#[^\r\n]*)
  | (?P<string>"(?:[^"\\]|\\.)*"|'(?:[^'\\]|\\.)*')
  | (?P<symbol>:[^\W\d]\w*[?!=]?)
  | (?P<ivar>@[^\W\d]\w*)
  | (?P<number>\d[\d_]*(?:\.\d[\d_]*)?(?:[eE][+-]?\d+)?)
  | (?P<const>[A-Z]\w*)
  | (?P<name>[^\W\d]\w*[?!]?)
  | (?P<op>"""
    + "|".join(re.escape(o) for o in OPS)
    + r""")
    """,
    re.VERBOSE,
)
# tokens after which a newline cannot end a statement
_CONTINUES = set(OPS) - {")", "]", "}", "!", "~"} | {"and", "or", "not"}


def tokenize(text: str) -> list[Tok]:
    offsets = ByteOffsets(text)
    toks: list[Tok] = []
    depth = 0
    pos, n = 0, len(text)
    spaced = True
    while pos < n:
        m = _SCAN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", offsets[pos])
        kind, s, e = m.lastgroup, m.start(), m.end()
        if kind == "space":
            spaced = True
        elif kind == "newline":
            prev = toks[-1] if toks else None
            if depth == 0 and prev is not None and prev.type != "NEWLINE" and not (
                    prev.type in ("OP", "KEYWORD") and prev.text in _CONTINUES):
                toks.append(Tok("NEWLINE", "", offsets[s], offsets[s]))
            spaced = True
        elif kind == "comment":
            toks.append(Tok("COMMENT", m.group(), offsets[s], offsets[e]))
        else:
            if kind == "string":
                if m.group().startswith('"') and "#{" in m.group():
                    raise ParseError("string interpolation is not supported", offsets[s])
                inner = (offsets[s + 1], offsets[e - 1])
                tok = Tok("STRING", m.group(), offsets[s], offsets[e], inner, spaced)
            else:
                type_ = {"symbol": "SYMBOL", "ivar": "IVAR", "number": "NUMBER", "const": "CONST"}.get(kind)
                if kind == "name":
                    type_ = "KEYWORD" if m.group() in KEYWORDS else "NAME"
                elif kind == "op":
                    type_ = "OP"
                    if m.group() in "([{":
                        depth += 1
                    elif m.group() in ")]}":
                        depth = max(depth - 1, 0)
                tok = Tok(type_, m.group(), offsets[s], offsets[e], None, spaced)
            toks.append(tok)
            spaced = False
        pos = e
    if depth:
        raise ParseError("unclosed bracket", offsets[n])
    toks.append(Tok("NEWLINE", "", offsets[n], offsets[n]))
    toks.append(Tok("EOF", "", offsets[n], offsets[n]))
    return toks


def _leaf(tok: Tok, kind: str | None = None) -> RawNode:
    if kind is None:
        return RawNode(tok.text, start=tok.start, end=tok.end, named=False)
    return RawNode(kind, start=tok.start, end=tok.end)


_ARG_START = {"NAME", "CONST", "NUMBER", "STRING", "SYMBOL", "IVAR"}
_ARG_KEYWORDS = {"nil", "true", "false", "self", "not"}
_ASSIGNABLE = {"identifier", "instance_variable", "constant", "element_reference", "call"}


class _Parser:
    def __init__(self, toks: list[Tok]):
        self.ts = TokenStream(toks)

    def skip_newlines(self):
        while self.ts.cur.type == "NEWLINE" or self.ts.at(";"):
            self.ts.next()

    def statements(self, *terminators: str) -> list[RawNode]:
        ts = self.ts
        out = []
        self.skip_newlines()
        while not (ts.cur.type == "EOF" or (ts.cur.type == "KEYWORD" and ts.cur.text in terminators)):
            out.append(self.statement())
            if ts.cur.type == "NEWLINE" or ts.at(";"):
                self.skip_newlines()
            elif not (ts.cur.type == "EOF" or (ts.cur.type == "KEYWORD" and ts.cur.text in terminators)):
                raise ParseError(f"unexpected {ts.cur.text!r}", ts.cur.start)
        return out

    def program(self) -> RawNode:
        node = RawNode("program").add(*self.statements())
        if self.ts.cur.type != "EOF":
            raise ParseError(f"unexpected {self.ts.cur.text!r}", self.ts.cur.start)
        return node

    def statement(self) -> RawNode:
        ts = self.ts
        if ts.at("return"):
            node = RawNode("return").add(_leaf(ts.next()))
            if ts.cur.type not in ("NEWLINE", "EOF") and not ts.at(";", "end"):
                args = RawNode("argument_list").add(self.expression())
                while ts.at(","):
                    args.add(_leaf(ts.next()))
                    self.skip_newlines()
                    args.add(self.expression())
                node.add(args)
            return node
        return self.expression()

    # -- expressions ----------------------------------------------------
    def expression(self) -> RawNode:
        left = self.not_expression()
        while self.ts.at("and", "or"):
            op = _leaf(self.ts.next())
            self.skip_newlines()
            left = RawNode("binary").add(left, op, self.not_expression())
        return left

    def not_expression(self) -> RawNode:
        if self.ts.at("not"):
            return RawNode("unary").add(_leaf(self.ts.next()), self.not_expression())
        return self.assignment()

    def assignment(self) -> RawNode:
        ts = self.ts
        lhs = self.binary(0)
        if ts.at("=") and lhs.kind in _ASSIGNABLE:
            eq = _leaf(ts.next())
            self.skip_newlines()
            return RawNode("assignment").add(lhs, eq, self.not_expression())
        if ts.cur.type == "OP" and ts.cur.text in ASSIGN_OPS and lhs.kind in _ASSIGNABLE:
            op = _leaf(ts.next())
            self.skip_newlines()
            return RawNode("operator_assignment").add(lhs, op, self.not_expression())
        return lhs

    def binary(self, level: int) -> RawNode:
        if level == len(BINARY_LEVELS):
            return self.unary_minus()
        ops, _ = BINARY_LEVELS[level]
        left = self.binary(level + 1)
        while self.ts.cur.type == "OP" and self.ts.cur.text in ops:
            op = _leaf(self.ts.next())
            self.skip_newlines()
            left = RawNode("binary").add(left, op, self.binary(level + 1))
        return left

    def unary_minus(self) -> RawNode:
        if self.ts.at("-"):
            return RawNode("unary").add(_leaf(self.ts.next()), self.unary_minus())
        return self.power()

    def power(self) -> RawNode:
        base = self.bang()
        if self.ts.at("**"):
            op = _leaf(self.ts.next())
            return RawNode("binary").add(base, op, self.unary_minus())
        return base

    def bang(self) -> RawNode:
        if self.ts.at("!", "~", "+"):
            return RawNode("unary").add(_leaf(self.ts.next()), self.bang())
        return self.postfix()

    def postfix(self) -> RawNode:
        ts = self.ts
        node = self.primary()
        while True:
            if ts.at("."):
                dot = _leaf(ts.next())
                name = ts.cur
                if name.type not in ("NAME", "CONST", "KEYWORD"):
                    raise ParseError("expected method name", name.start)
                ts.next()
                node = RawNode("call").add(node, dot, _leaf(name, "constant" if name.type == "CONST" else "identifier"))
                if ts.at("(") and not ts.cur.space_before:
                    node.add(self.paren_arguments())
            elif ts.at("[") and not ts.cur.space_before:
                ref = RawNode("element_reference").add(node, _leaf(ts.next()))
                while not ts.at("]"):
                    ref.add(self.expression())
                    if not ts.at("]"):
                        ref.add(_leaf(ts.expect(",")))
                node = ref.add(_leaf(ts.expect("]")))
            elif ts.at("::"):
                sep = _leaf(ts.next())
                node = RawNode("scope_resolution").add(node, sep, _leaf(ts.expect(type="CONST"), "constant"))
            else:
                return node

    def paren_arguments(self) -> RawNode:
        ts = self.ts
        node = RawNode("argument_list").add(_leaf(ts.expect("(")))
        self.skip_newlines()
        while not ts.at(")"):
            node.add(self.expression())
            self.skip_newlines()
            if not ts.at(")"):
                node.add(_leaf(ts.expect(",")))
                self.skip_newlines()
        return node.add(_leaf(ts.expect(")")))

    def _starts_command_argument(self) -> bool:
        tok = self.ts.cur
        if not tok.space_before:
            return False
        if tok.type in _ARG_START:
            return True
        if tok.type == "KEYWORD" and tok.text in _ARG_KEYWORDS:
            return True
        return tok.type == "OP" and tok.text in ("[", "!", ":")

    def primary(self) -> RawNode:
        ts = self.ts
        tok = ts.cur
        if tok.type == "NAME":
            ident = _leaf(ts.next(), "identifier")
            if ts.at("(") and not ts.cur.space_before:
                return RawNode("call").add(ident, self.paren_arguments())
            if self._starts_command_argument():
                args = RawNode("argument_list").add(self.expression())
                while ts.at(","):
                    args.add(_leaf(ts.next()))
                    self.skip_newlines()
                    args.add(self.expression())
                return RawNode("call").add(ident, args)
            return ident
        if tok.type == "CONST":
            return _leaf(ts.next(), "constant")
        if tok.type == "IVAR":
            return _leaf(ts.next(), "instance_variable")
        if tok.type == "NUMBER":
            t = ts.next()
            return _leaf(t, "float" if "." in t.text or "e" in t.text.lower() else "integer")
        if tok.type == "SYMBOL":
            return _leaf(ts.next(), "simple_symbol")
        if tok.type == "STRING":
            t = ts.next()
            a, b = t.inner
            node = RawNode("string").add(RawNode(t.text[0], start=t.start, end=a, named=False))
            if b > a:
                node.add(RawNode("string_content", start=a, end=b))
            return node.add(RawNode(t.text[0], start=b, end=t.end, named=False))
        if tok.type == "KEYWORD":
            if tok.text == "nil":
                return RawNode("nil").add(_leaf(ts.next()))
            if tok.text in ("true", "false", "self"):
                return _leaf(ts.next(), tok.text)
            if tok.text == "def":
                return self.method()
            if tok.text in ("if", "unless"):
                return self.conditional()
            if tok.text in ("while", "until"):
                return self.loop()
        if ts.at("("):
            node = RawNode("parenthesized_statements").add(_leaf(ts.next()))
            self.skip_newlines()
            node.add(self.statement())
            self.skip_newlines()
            return node.add(_leaf(ts.expect(")")))
        if ts.at("["):
            node = RawNode("array").add(_leaf(ts.next()))
            self.skip_newlines()
            while not ts.at("]"):
                node.add(self.expression())
                self.skip_newlines()
                if not ts.at("]"):
                    node.add(_leaf(ts.expect(",")))
                    self.skip_newlines()
            return node.add(_leaf(ts.expect("]")))
        shown = tok.text if tok.type not in ("NEWLINE", "EOF") else tok.type
        raise ParseError(f"unexpected {shown!r}", tok.start)

    def method(self) -> RawNode:
        ts = self.ts
        node = RawNode("method").add(_leaf(ts.next()))
        name = ts.cur
        if name.type not in ("NAME", "CONST"):
            raise ParseError("expected method name", name.start)
        node.add(_leaf(ts.next(), "identifier" if name.type == "NAME" else "constant"))
        if ts.at("("):
            params = RawNode("method_parameters").add(_leaf(ts.next()))
            while not ts.at(")"):
                ident = _leaf(ts.expect(type="NAME"), "identifier")
                if ts.at("="):
                    eq = _leaf(ts.next())
                    params.add(RawNode("optional_parameter").add(ident, eq, self.expression()))
                else:
                    params.add(ident)
                if not ts.at(")"):
                    params.add(_leaf(ts.expect(",")))
            params.add(_leaf(ts.expect(")")))
            node.add(params)
        body = self.statements("end")
        if body:
            node.add(RawNode("body_statement").add(*body))
        return node.add(_leaf(ts.expect("end")))

    def _then(self, *terminators: str) -> RawNode | None:
        ts = self.ts
        keyword = _leaf(ts.next()) if ts.at("then") else None
        body = self.statements(*terminators)
        if keyword is None and not body:
            return None
        return RawNode("then").add(keyword, *body)

    def conditional(self) -> RawNode:
        ts = self.ts
        kw = ts.next()
        node = RawNode(kw.text).add(_leaf(kw), self.expression())
        node.add(self._then("elsif", "else", "end"))
        tail = node
        while kw.text == "if" and ts.at("elsif"):
            clause = RawNode("elsif").add(_leaf(ts.next()), self.expression())
            clause.add(self._then("elsif", "else", "end"))
            tail.add(clause)
            tail = clause
        if ts.at("else"):
            tail.add(RawNode("else").add(_leaf(ts.next()), *self.statements("end")))
        return node.add(_leaf(ts.expect("end")))

    def loop(self) -> RawNode:
        ts = self.ts
        kw = ts.next()
        node = RawNode(kw.text).add(_leaf(kw), self.expression())
        body = RawNode("do")
        if ts.at("do"):
            body.add(_leaf(ts.next()))
        body.add(*self.statements("end"))
        return node.add(body.add(_leaf(ts.expect("end"))))


class RubyGrammar:
    name = "ruby"

    def parse(self, source: bytes) -> SyntaxTree:
        toks = tokenize(source.decode("utf-8"))
        comments = [t for t in toks if t.type == "COMMENT"]
        code = [t for t in toks if t.type != "COMMENT"]
        root = _Parser(code).program()
        attach_comments(root, [RawNode("comment", start=c.start, end=c.end) for c in comments],
                        containers=("program", "body_statement", "then", "else", "do"), source=source)
        if not root.children:
            raise ParseError("empty program")
        return SyntaxTree.from_raw(root, source)
