"""Small lexing helpers shared by the hand-written grammars."""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import ParseError


class ByteOffsets:
    """Maps character indices of a str to UTF-8 byte offsets."""

    def __init__(self, text: str):
        if text.isascii():
            self._table = None
        else:
            table = [0]
            for ch in text:
                table.append(table[-1] + len(ch.encode("utf-8")))
            self._table = table

    def __getitem__(self, i: int) -> int:
        return i if self._table is None else self._table[i]


@dataclass
class Tok:
    type: str     # NAME, NUMBER, STRING, OP, KEYWORD, NEWLINE, INDENT, DEDENT, COMMENT, SYMBOL, IVAR, CONST, EOF
    text: str
    start: int    # byte offsets
    end: int
    # string pieces: (open_quote_end, close_quote_start) as byte offsets
    inner: tuple | None = None
    space_before: bool = False


class TokenStream:
    """Cursor over a token list with the usual peek/expect helpers."""

    def __init__(self, tokens: list[Tok]):
        self.toks = tokens
        self.pos = 0

    @property
    def cur(self) -> Tok:
        return self.toks[self.pos]

    def peek(self, k: int = 1) -> Tok:
        return self.toks[min(self.pos + k, len(self.toks) - 1)]

    def at(self, *texts, type=None) -> bool:
        tok = self.cur
        if type is not None and tok.type != type:
            return False
        return not texts or (tok.text in texts and tok.type in ("OP", "KEYWORD"))

    def next(self) -> Tok:
        tok = self.cur
        if tok.type != "EOF":
            self.pos += 1
        return tok

    def expect(self, text=None, type=None) -> Tok:
        tok = self.cur
        if (text is not None and (tok.text != text or tok.type not in ("OP", "KEYWORD"))) or (
                type is not None and tok.type != type):
            want = text if text is not None else type
            got = tok.text if tok.type not in ("NEWLINE", "EOF", "INDENT", "DEDENT") else tok.type
            raise ParseError(f"expected {want!r}, found {got!r}", tok.start)
        return self.next()
