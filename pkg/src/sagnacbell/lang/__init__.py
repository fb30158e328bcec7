"""Text format for interferometer layouts: parsing, pretty-printing and compilation."""

from sagnacbell.lang.ast import (
    CircuitAst,
    ElementDecl,
    InputDecl,
    ModeDecl,
    PresetDecl,
    SourceSpan,
    pretty_print,
)
from sagnacbell.lang.compiler import (
    CompileError,
    bundled_names,
    bundled_source,
    compile_ast,
    compile_source,
)
from sagnacbell.lang.parser import ParseError, parse

__all__ = [
    "CircuitAst", "CompileError", "ElementDecl", "InputDecl", "ModeDecl", "ParseError",
    "PresetDecl", "SourceSpan", "bundled_names", "bundled_source", "compile_ast",
    "compile_source", "parse", "pretty_print",
]
