"""Compile a parsed circuit program into a mode registry and element pipeline."""

from __future__ import annotations

from importlib import resources

from sagnacbell.errors import RegistryError, SagnacBellError
from sagnacbell.fock import ModeRegistry, polarization
from sagnacbell.lang.ast import CircuitAst, ElementDecl, InputDecl, ModeDecl, PresetDecl, SourceSpan
from sagnacbell.lang.parser import parse
from sagnacbell.optics import (
    BeamSplitter,
    Circuit,
    PhaseShift,
    Route,
    SagnacPhase,
    preset_circuit,
)


class CompileError(SagnacBellError):
    def __init__(self, message: str, span: SourceSpan | None):
        super().__init__(message)
        self.message = message
        self.span = span

    def __str__(self):
        return f"{self.span}: {self.message}" if self.span else self.message


def _bs_pairs(registry: ModeRegistry, g1: str, g2: str, span):
    if g1 in registry and g2 in registry:
        return ((g1, g2),)
    if g1 in registry or g2 in registry:
        raise CompileError(f"bs mixes a single mode with a path group: '{g1}', '{g2}'", span)
    by_pol = []
    for g in (g1, g2):
        modes = [m.label for m in registry if m.label.startswith(g + ".")]
        pols = {polarization(lb): lb for lb in modes}
        if not modes or None in pols:
            raise CompileError(f"path group '{g}' must consist of .H/.V modes", span)
        by_pol.append(pols)
    if set(by_pol[0]) != set(by_pol[1]):
        raise CompileError(f"path groups '{g1}' and '{g2}' have different polarizations", span)
    return tuple((lb, by_pol[1][pol]) for pol, lb in by_pol[0].items())


def compile_ast(ast: CircuitAst) -> tuple[ModeRegistry, Circuit]:
    """Build the registry (declaration order) and circuit (statement order).

    A ``sagnac phi`` element stays unbound; bind it with :meth:`Circuit.bind`.
    """
    statements = ast.statements
    if not statements:
        raise CompileError("empty program: declare modes, an input and elements, "
                           "or use a preset", None)
    presets = [s for s in statements if isinstance(s, PresetDecl)]
    if presets:
        if len(statements) > 1:
            raise CompileError("a preset must be the only statement in a program", presets[0].span)
        circuit = preset_circuit(presets[0].name)
        return circuit.registry, circuit

    decls: list[tuple[str, str]] = []
    seen: set[str] = set()
    for st in statements:
        if isinstance(st, ModeDecl):
            if st.label in seen:
                raise CompileError(f"duplicate mode label '{st.label}'", st.span)
            seen.add(st.label)
            decls.append((st.label, st.role))
    registry = ModeRegistry(decls)

    declared: set[str] = set()
    inputs = None
    elements = []
    for st in statements:
        if isinstance(st, ModeDecl):
            declared.add(st.label)
            continue
        used = st.labels if isinstance(st, InputDecl) else _labels_of(st)
        for label in used:
            if label not in declared and not any(d.startswith(label + ".") for d in declared):
                raise CompileError(f"mode '{label}' used before its declaration", st.span)
        if isinstance(st, InputDecl):
            if inputs is not None:
                raise CompileError("more than one input declaration", st.span)
            inputs = st.labels
            continue
        elements.append(_element(registry, st))
    if inputs is None:
        raise CompileError("program has no input declaration", statements[-1].span)
    try:
        circuit = Circuit(registry, tuple(inputs), tuple(elements))
    except RegistryError as exc:
        raise CompileError(str(exc), None) from None
    return registry, circuit


def _labels_of(st: ElementDecl) -> list[str]:
    if st.kind == "sagnac":
        return []
    if st.kind == "phase":
        return [st.args[0]]
    return [a for a in st.args if a != "inverse"]


def _element(registry: ModeRegistry, st: ElementDecl):
    if st.kind == "bs":
        pairs = _bs_pairs(registry, st.args[0], st.args[1], st.span)
        return BeamSplitter(pairs, inverse=len(st.args) == 3)
    if st.kind == "phase":
        return PhaseShift(st.args[0], float(st.args[1]))
    if st.kind == "sagnac":
        co = tuple(m.label for m in registry.with_role("loop-co"))
        counter = tuple(m.label for m in registry.with_role("loop-counter"))
        if not co or not counter:
            raise CompileError("sagnac needs modes with roles loop-co and loop-counter", st.span)
        phi = st.args[0]
        return SagnacPhase(co, counter, None if phi == "phi" else float(phi))
    if st.kind == "route":
        in_mode, through, discard = st.args
        if len({in_mode, through, discard}) != 3:
            raise CompileError("route needs three distinct modes", st.span)
        if registry.role(discard) != "discard":
            raise CompileError(f"route discard port '{discard}' has role "
                               f"'{registry.role(discard)}', expected 'discard'", st.span)
        return Route(in_mode, through, discard)
    raise CompileError(f"unknown element kind '{st.kind}'", st.span)


def compile_source(source: str) -> tuple[ModeRegistry, Circuit]:
    return compile_ast(parse(source))


def bundled_source(name: str) -> str:
    """Text of a bundled program by name, with or without the ``.icl`` suffix."""
    if not name.endswith(".icl"):
        name += ".icl"
    return resources.files("sagnacbell.lang").joinpath("data", name).read_text(encoding="utf-8")


def bundled_names() -> list[str]:
    data = resources.files("sagnacbell.lang").joinpath("data")
    return sorted(p.name[:-4] for p in data.iterdir() if p.name.endswith(".icl"))
