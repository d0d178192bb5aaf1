"""Tokenizer shared by the protocol parser and the formula parser."""

import re

from .errors import DmcSyntaxError

_TOKEN_RE = re.compile(
    r"""
    (?P<WS>\s+)
  | (?P<LINECOMMENT>//[^\n]*)
  | (?P<BLOCKCOMMENT>/\*.*?\*/)
  | (?P<NUMBER>\d+(\.\d+)?([eE][-+]?\d+)?)
  | (?P<IDENT>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<ARROW>->)
  | (?P<EQEQ>==)
  | (?P<PUNCT>[{}()\[\],;=!*/.:\-])
    """,
    re.VERBOSE | re.DOTALL,
)


class Token:
    __slots__ = ("kind", "text", "line", "col")

    def __init__(self, kind, text, line, col):
        self.kind = kind
        self.text = text
        self.line = line
        self.col = col

    def __repr__(self):
        return f"Token({self.kind}, {self.text!r}, {self.line}:{self.col})"


def tokenize(source):
    """Turn source text into a token list, stripping comments.

    Raises DmcSyntaxError on any character no rule matches.
    """
    tokens = []
    line, col = 1, 1
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise DmcSyntaxError(f"unexpected character {source[pos]!r}", line, col)
        text = m.group(0)
        kind = m.lastgroup
        if kind == "PUNCT":
            kind = text
        elif kind == "ARROW" or kind == "EQEQ":
            kind = text
        if kind not in ("WS", "LINECOMMENT", "BLOCKCOMMENT"):
            tokens.append(Token(kind, text, line, col))
        nl = text.count("\n")
        if nl:
            line += nl
            col = len(text) - text.rfind("\n")
        else:
            col += len(text)
        pos = m.end()
    tokens.append(Token("EOF", "", line, col))
    return tokens


class TokenStream:
    """Cursor over a token list with the usual expect/accept helpers."""

    def __init__(self, tokens):
        self.tokens = tokens
        self.pos = 0

    @property
    def current(self):
        return self.tokens[self.pos]

    def peek(self, ahead=0):
        i = min(self.pos + ahead, len(self.tokens) - 1)
        return self.tokens[i]

    def advance(self):
        tok = self.tokens[self.pos]
        if tok.kind != "EOF":
            self.pos += 1
        return tok

    def accept(self, kind, text=None):
        tok = self.current
        if tok.kind == kind and (text is None or tok.text == text):
            return self.advance()
        return None

    def accept_keyword(self, word):
        return self.accept("IDENT", word)

    def expect(self, kind, text=None):
        tok = self.accept(kind, text)
        if tok is None:
            got = self.current
            want = text if text is not None else kind
            raise DmcSyntaxError(
                f"unexpected token {got.text!r}" if got.text else "unexpected end of input",
                got.line,
                got.col,
                expected={want},
            )
        return tok

    def expect_keyword(self, word):
        return self.expect("IDENT", word)

    def at_keyword(self, word):
        return self.current.kind == "IDENT" and self.current.text == word
