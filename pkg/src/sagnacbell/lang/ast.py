"""Syntax tree for interferometer circuit files (``.icl``)."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union


@dataclass(frozen=True)
class SourceSpan:
    line: int
    column: int
    length: int = 1

    def __post_init__(self):
        if self.line < 1 or self.column < 1 or self.length < 1:
            raise ValueError(f"invalid source span {self}")

    def within(self, source: str) -> bool:
        lines = source.splitlines()
        if self.line > len(lines):
            return False
        return self.column + self.length - 1 <= len(lines[self.line - 1])

    def __str__(self):
        return f"{self.line}:{self.column}"


# spans are excluded from equality so pretty-printed programs reparse to equal trees

@dataclass(frozen=True)
class ModeDecl:
    label: str
    role: str
    span: SourceSpan | None = field(default=None, compare=False)


@dataclass(frozen=True)
class InputDecl:
    labels: tuple[str, ...]
    span: SourceSpan | None = field(default=None, compare=False)


@dataclass(frozen=True)
class ElementDecl:
    """``kind`` is one of bs, phase, sagnac, route.

    args: bs -> (m1, m2[, "inverse"]); phase -> (mode, theta);
    sagnac -> (phi,) with phi a float or the string "phi"; route -> (in, through, discard).
    """

    kind: str
    args: tuple
    span: SourceSpan | None = field(default=None, compare=False)


@dataclass(frozen=True)
class PresetDecl:
    name: str
    span: SourceSpan | None = field(default=None, compare=False)


Statement = Union[ModeDecl, InputDecl, ElementDecl, PresetDecl]


@dataclass(frozen=True)
class CircuitAst:
    statements: tuple[Statement, ...]

    def __len__(self):
        return len(self.statements)

    def to_json(self) -> list[dict]:
        out = []
        for st in self.statements:
            span = [st.span.line, st.span.column, st.span.length] if st.span else None
            if isinstance(st, ModeDecl):
                out.append({"type": "mode", "label": st.label, "role": st.role, "span": span})
            elif isinstance(st, InputDecl):
                out.append({"type": "input", "labels": list(st.labels), "span": span})
            elif isinstance(st, ElementDecl):
                out.append({"type": "element", "kind": st.kind, "args": list(st.args),
                            "span": span})
            else:
                out.append({"type": "preset", "name": st.name, "span": span})
        return out


def _fmt_arg(arg) -> str:
    return repr(arg) if isinstance(arg, float) else str(arg)


def pretty_print(ast: CircuitAst) -> str:
    lines = []
    for st in ast.statements:
        if isinstance(st, ModeDecl):
            lines.append(f"mode {st.label} {st.role}")
        elif isinstance(st, InputDecl):
            lines.append("input " + " ".join(st.labels))
        elif isinstance(st, ElementDecl):
            lines.append(" ".join([st.kind, *map(_fmt_arg, st.args)]))
        else:
            lines.append(f"preset {st.name}")
    return "\n".join(lines) + "\n"
