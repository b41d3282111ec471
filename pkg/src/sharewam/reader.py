"""Tokenizer and operator-precedence parser for the supported Prolog subset.

Parsed terms use the Python description of :mod:`sharewam.terms`: ``str``
atoms, ``int`` integers, :class:`~sharewam.terms.Var` variables and tuples
``(name, arg, ...)`` for compounds.  Lists are ``('.', Head, Tail)`` chains
ending in ``'[]'``.
"""

from __future__ import annotations

from dataclasses import dataclass

from .terms import Var

SYMBOL_CHARS = set("+-*/\\^<>=~:.?@#&$")
SOLO = set("!;")
PUNCT = set("()[]{},|")

# name -> (priority, type)
INFIX = {
    ":-": (1200, "xfx"), "-->": (1200, "xfx"),
    ";": (1100, "xfy"), "|": (1100, "xfy"),
    "->": (1050, "xfy"),
    ",": (1000, "xfy"),
    "=": (700, "xfx"), "\\=": (700, "xfx"), "==": (700, "xfx"), "\\==": (700, "xfx"),
    "@<": (700, "xfx"), "@>": (700, "xfx"), "@=<": (700, "xfx"), "@>=": (700, "xfx"),
    "is": (700, "xfx"), "=:=": (700, "xfx"), "=\\=": (700, "xfx"),
    "<": (700, "xfx"), ">": (700, "xfx"), "=<": (700, "xfx"), ">=": (700, "xfx"),
    "=..": (700, "xfx"),
    "+": (500, "yfx"), "-": (500, "yfx"), "/\\": (500, "yfx"), "\\/": (500, "yfx"),
    "*": (400, "yfx"), "/": (400, "yfx"), "//": (400, "yfx"), "mod": (400, "yfx"),
    "rem": (400, "yfx"), "<<": (400, "yfx"), ">>": (400, "yfx"),
    "^": (200, "xfy"),
}
PREFIX = {
    ":-": (1200, "fx"), "?-": (1200, "fx"),
    "mutable": (1150, "fx"),
    "\\+": (900, "fy"),
    "-": (200, "fy"), "+": (200, "fy"), "\\": (200, "fy"),
}

MAX_ARITY = 255


class ParseError(Exception):
    """Syntax error with a character offset and 1-based line/column."""

    def __init__(self, message: str, text: str, offset: int) -> None:
        self.offset = offset
        self.line = text.count("\n", 0, offset) + 1
        self.col = offset - (text.rfind("\n", 0, offset) + 1) + 1
        self.message = message
        super().__init__(f"{message} at line {self.line}, column {self.col} (offset {offset})")


@dataclass
class Token:
    kind: str  # atom, qatom, var, int, punct, end, eof
    value: object
    offset: int
    layout_before: bool


def tokenize(text: str) -> list[Token]:
    toks: list[Token] = []
    i = 0
    n = len(text)
    layout = True
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            layout = True
            continue
        if ch == "%":
            j = text.find("\n", i)
            i = n if j < 0 else j
            layout = True
            continue
        if ch == "/" and text.startswith("/*", i):
            j = text.find("*/", i + 2)
            if j < 0:
                raise ParseError("unterminated block comment", text, i)
            i = j + 2
            layout = True
            continue
        start = i
        if ch.isdigit():
            while i < n and text[i].isdigit():
                i += 1
            if text.startswith("0'", start) and i == start + 1 and start + 2 < n:
                toks.append(Token("int", ord(text[start + 2]), start, layout))
                i = start + 3
            else:
                toks.append(Token("int", int(text[start:i]), start, layout))
        elif ch == "_" or ch.isupper():
            while i < n and (text[i].isalnum() or text[i] == "_"):
                i += 1
            toks.append(Token("var", text[start:i], start, layout))
        elif ch.isalpha():
            while i < n and (text[i].isalnum() or text[i] == "_"):
                i += 1
            toks.append(Token("atom", text[start:i], start, layout))
        elif ch == "'":
            i += 1
            buf = []
            while True:
                if i >= n:
                    raise ParseError("unterminated quoted atom", text, start)
                c = text[i]
                if c == "'":
                    if i + 1 < n and text[i + 1] == "'":
                        buf.append("'")
                        i += 2
                        continue
                    i += 1
                    break
                if c == "\\" and i + 1 < n:
                    esc = text[i + 1]
                    buf.append({"n": "\n", "t": "\t", "\\": "\\", "'": "'"}.get(esc, esc))
                    i += 2
                    continue
                buf.append(c)
                i += 1
            toks.append(Token("qatom", "".join(buf), start, layout))
        elif ch == "." and (i + 1 >= n or text[i + 1].isspace() or text[i + 1] == "%"):
            toks.append(Token("end", ".", start, layout))
            i += 1
        elif ch in SYMBOL_CHARS:
            while i < n and text[i] in SYMBOL_CHARS:
                i += 1
            toks.append(Token("atom", text[start:i], start, layout))
        elif ch in SOLO:
            i += 1
            toks.append(Token("atom", ch, start, layout))
        elif ch in PUNCT:
            i += 1
            toks.append(Token("punct", ch, start, layout))
        else:
            raise ParseError(f"unexpected character {ch!r}", text, i)
        layout = False
    toks.append(Token("eof", None, n, True))
    return toks


class Parser:
    def __init__(self, text: str) -> None:
        self.text = text
        self.toks = tokenize(text)
        self.pos = 0
        self.var_names: dict[str, Var] = {}
        self._anon = 0

    def error(self, message: str, tok: Token | None = None):
        tok = tok or self.toks[self.pos]
        raise ParseError(message, self.text, tok.offset)

    def peek(self) -> Token:
        return self.toks[self.pos]

    def next(self) -> Token:
        tok = self.toks[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str, value=None) -> Token:
        tok = self.next()
        if tok.kind != kind or (value is not None and tok.value != value):
            want = value if value is not None else kind
            what = "end of input" if tok.kind == "eof" else repr(tok.value)
            self.error(f"expected {want!r}, found {what}", tok)
        return tok

    # -- clauses ------------------------------------------------------------

    def read_term(self):
        """Read one clause/term terminated by '.'; None at end of input."""
        if self.peek().kind == "eof":
            return None
        self.var_names = {}
        t = self.parse(1200)
        self.expect("end")
        return t

    def read_all(self) -> list:
        out = []
        while True:
            t = self.read_term()
            if t is None:
                return out
            out.append(t)

    # -- terms --------------------------------------------------------------

    def _make_var(self, name: str) -> Var:
        if name == "_":
            self._anon += 1
            return Var(f"_#{self._anon}")
        v = self.var_names.get(name)
        if v is None:
            v = self.var_names[name] = Var(name)
        return v

    def _starts_term(self, tok: Token) -> bool:
        if tok.kind in ("eof", "end"):
            return False
        if tok.kind == "punct":
            return tok.value in "([{"
        if tok.kind == "atom" and tok.value in INFIX and tok.value not in PREFIX:
            return False
        return True

    def parse(self, maxp: int):
        left, leftp = self.parse_primary(maxp)
        return self.parse_infix(left, leftp, maxp)

    def parse_arglist(self) -> list:
        args = [self.parse(999)]
        while self.peek().kind == "punct" and self.peek().value == ",":
            self.next()
            args.append(self.parse(999))
        self.expect("punct", ")")
        return args

    def parse_primary(self, maxp: int):
        tok = self.next()
        kind = tok.kind
        if kind == "int":
            return tok.value, 0
        if kind == "var":
            return self._make_var(tok.value), 0
        if kind == "punct":
            v = tok.value
            if v == "(":
                t = self.parse(1200)
                self.expect("punct", ")")
                return t, 0
            if v == "[":
                if self.peek().kind == "punct" and self.peek().value == "]":
                    self.next()
                    return self._after_name("[]", tok)
                items = [self.parse(999)]
                while self.peek().kind == "punct" and self.peek().value == ",":
                    self.next()
                    items.append(self.parse(999))
                tail = "[]"
                if self.peek().kind == "punct" and self.peek().value == "|":
                    self.next()
                    tail = self.parse(999)
                self.expect("punct", "]")
                for item in reversed(items):
                    tail = (".", item, tail)
                return tail, 0
            if v == "{":
                if self.peek().kind == "punct" and self.peek().value == "}":
                    self.next()
                    return self._after_name("{}", tok)
                t = self.parse(1200)
                self.expect("punct", "}")
                return ("{}", t), 0
            self.error(f"unexpected {v!r}", tok)
        if kind in ("atom", "qatom"):
            return self._after_name(tok.value, tok, quoted=(kind == "qatom"), maxp=maxp)
        if kind == "end":
            self.error("unexpected end of clause", tok)
        self.error("unexpected end of input", tok)

    def _after_name(self, name: str, tok: Token, quoted: bool = False, maxp: int = 1200):
        nxt = self.peek()
        if nxt.kind == "punct" and nxt.value == "(" and not nxt.layout_before:
            self.next()
            args = self.parse_arglist()
            if len(args) > MAX_ARITY:
                self.error(f"arity {len(args)} exceeds the maximum of {MAX_ARITY}", tok)
            return (name, *args), 0
        if name == "-" and not quoted and nxt.kind == "int" and not nxt.layout_before:
            self.next()
            return -nxt.value, 0
        if not quoted and name in PREFIX and self._starts_term(nxt):
            p, typ = PREFIX[name]
            if p > maxp:
                p = 999
            argmax = p - 1 if typ == "fx" else p
            arg = self.parse(argmax)
            return (name, arg), p
        p = 0
        if not quoted and (name in INFIX or name in PREFIX):
            p = max(INFIX.get(name, (0,))[0], PREFIX.get(name, (0,))[0])
            if p > maxp:
                p = 0
        return name, p

    def parse_infix(self, left, leftp: int, maxp: int):
        while True:
            tok = self.peek()
            if tok.kind == "atom" or (tok.kind == "punct" and tok.value in (",", "|")):
                name = tok.value
            else:
                return left
            op = INFIX.get(name)
            if op is None:
                return left
            p, typ = op
            if p > maxp:
                return left
            la = p if typ == "yfx" else p - 1
            ra = p if typ == "xfy" else p - 1
            if leftp > la:
                return left
            self.next()
            right = self.parse(ra)
            if name == "|":
                name = ";"
            left = (name, left, right)
            leftp = p


def parse_terms(text: str) -> list:
    """All '.'-terminated terms of ``text``."""
    return Parser(text).read_all()


def parse_term(text: str):
    """Exactly one term; the final '.' is optional."""
    src = text.strip()
    if not src.endswith("."):
        src += " ."
    parser = Parser(src)
    t = parser.read_term()
    if t is None:
        raise ParseError("empty input", src, 0)
    if parser.peek().kind != "eof":
        parser.error("unexpected text after term")
    return t
