"""
Hand-written parser for the line-oriented circuit language.

    mode LABEL ROLE
    input LABEL {LABEL}
    bs LABEL LABEL [inverse]
    phase LABEL NUMBER
    sagnac (NUMBER | phi)
    route LABEL LABEL LABEL
    preset (core4 | full12)

``#`` starts a comment. A ``bs`` label may name a single mode or a path
prefix: ``bs a b`` acts on every polarization pair (a.X, b.X).
"""

from __future__ import annotations

import re

from sagnacbell.errors import SagnacBellError
from sagnacbell.fock import ROLES
from sagnacbell.lang.ast import (
    CircuitAst,
    ElementDecl,
    InputDecl,
    ModeDecl,
    PresetDecl,
    SourceSpan,
)

LABEL_RE = re.compile(r"[A-Za-z][A-Za-z0-9._-]*\Z")
NUMBER_RE = re.compile(r"[+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?\Z")
TOKEN_RE = re.compile(r"\S+")

KEYWORDS = ("mode", "input", "bs", "phase", "sagnac", "route", "preset")
PRESET_NAMES = ("core4", "full12")


class ParseError(SagnacBellError):
    def __init__(self, message: str, span: SourceSpan):
        super().__init__(message)
        self.message = message
        self.span = span

    def __str__(self):
        return f"{self.span}: {self.message}"


class _Token:
    __slots__ = ("text", "span")

    def __init__(self, text, line, col):
        self.text = text
        self.span = SourceSpan(line, col, len(text))


class _LineParser:
    """Consumes the tokens of one statement line."""

    def __init__(self, tokens: list[_Token], declared: dict[str, str]):
        self.tokens = tokens
        self.pos = 1
        self.declared = declared
        self.head = tokens[0]

    def _next(self, what: str) -> _Token:
        if self.pos >= len(self.tokens):
            last = self.tokens[-1]
            raise ParseError(f"'{self.head.text}': missing {what} after '{last.text}'",
                             last.span)
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def at_end(self) -> bool:
        return self.pos >= len(self.tokens)

    def finish(self):
        if not self.at_end():
            tok = self.tokens[self.pos]
            raise ParseError(f"unexpected token '{tok.text}' after complete "
                             f"'{self.head.text}' statement", tok.span)

    def label(self, what: str) -> _Token:
        tok = self._next(what)
        if not LABEL_RE.match(tok.text):
            raise ParseError(f"expected {what}, found '{tok.text}'", tok.span)
        return tok

    def mode_ref(self, what: str, allow_path: bool = False) -> str:
        tok = self.label(what)
        if tok.text in self.declared:
            return tok.text
        if allow_path and any(lb.startswith(tok.text + ".") for lb in self.declared):
            return tok.text
        raise ParseError(f"undeclared mode label '{tok.text}'", tok.span)

    def number(self, what: str, allow_phi: bool = False):
        tok = self._next(what)
        if allow_phi and tok.text == "phi":
            return "phi"
        if not NUMBER_RE.match(tok.text):
            expected = "NUMBER or 'phi'" if allow_phi else "NUMBER"
            raise ParseError(f"expected {expected} for {what}, found '{tok.text}'", tok.span)
        return float(tok.text)


def _tokenize(source: str):
    for lineno, raw in enumerate(source.splitlines(), start=1):
        text = raw.split("#", 1)[0]
        tokens = [_Token(m.group(), lineno, m.start() + 1) for m in TOKEN_RE.finditer(text)]
        if tokens:
            yield tokens


def parse(source: str) -> CircuitAst:
    """Parse circuit source text into a :class:`CircuitAst`."""
    statements = []
    declared: dict[str, str] = {}
    for tokens in _tokenize(source):
        p = _LineParser(tokens, declared)
        head = p.head
        kw = head.text
        if kw == "mode":
            label = p.label("mode label")
            if label.text in declared:
                raise ParseError(f"duplicate mode label '{label.text}'", label.span)
            role = p._next("ROLE")
            if role.text not in ROLES:
                raise ParseError(f"expected ROLE (one of {', '.join(ROLES)}), "
                                 f"found '{role.text}'", role.span)
            p.finish()
            declared[label.text] = role.text
            statements.append(ModeDecl(label.text, role.text, head.span))
        elif kw == "input":
            labels = [p.mode_ref("input mode label")]
            while not p.at_end():
                labels.append(p.mode_ref("input mode label"))
            statements.append(InputDecl(tuple(labels), head.span))
        elif kw == "bs":
            m1 = p.mode_ref("first mode label", allow_path=True)
            m2 = p.mode_ref("second mode label", allow_path=True)
            args = (m1, m2)
            if not p.at_end():
                flag = p._next("'inverse'")
                if flag.text != "inverse":
                    raise ParseError(f"expected 'inverse' or end of line, found '{flag.text}'",
                                     flag.span)
                args += ("inverse",)
            p.finish()
            statements.append(ElementDecl("bs", args, head.span))
        elif kw == "phase":
            m = p.mode_ref("mode label")
            theta = p.number("phase angle")
            p.finish()
            statements.append(ElementDecl("phase", (m, theta), head.span))
        elif kw == "sagnac":
            phi = p.number("Sagnac phase", allow_phi=True)
            p.finish()
            statements.append(ElementDecl("sagnac", (phi,), head.span))
        elif kw == "route":
            args = (p.mode_ref("input mode label"), p.mode_ref("through mode label"),
                    p.mode_ref("discard mode label"))
            p.finish()
            statements.append(ElementDecl("route", args, head.span))
        elif kw == "preset":
            name = p._next("preset name")
            if name.text not in PRESET_NAMES:
                raise ParseError(f"expected preset name (one of {', '.join(PRESET_NAMES)}), "
                                 f"found '{name.text}'", name.span)
            p.finish()
            statements.append(PresetDecl(name.text, head.span))
        else:
            raise ParseError(f"unknown statement '{kw}'; expected one of "
                             f"{', '.join(KEYWORDS)}", head.span)
    return CircuitAst(tuple(statements))
