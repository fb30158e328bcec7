"""
Sparse few-photon Fock states over a fixed register of named optical modes.

A state is a map from occupation vectors (one photon count per registered
mode) to complex amplitudes. Linear-optical elements act on creation
operators,

    a_j^dag  ->  sum_i u[j, i] a_i^dag ,

and the result is re-expanded into occupation terms with the bosonic
sqrt(n!) factors. Photon numbers here are tiny (2 in the protocol, at most
about 4 in tests), so every term is expanded explicitly.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

from sagnacbell.errors import PreconditionError, RegistryError

#: Amplitudes with modulus below this are dropped after every operation.
PRUNE_THRESHOLD = 1e-15

#: Tolerance for the unitarity check on mode transforms.
UNITARY_TOL = 1e-12

ROLES = ("loop-co", "loop-counter", "alice", "bob", "discard", "source")


@dataclass(frozen=True)
class ModeId:
    index: int
    label: str

    def __str__(self):
        return self.label


class ModeRegistry:
    """Ordered set of labelled modes, each tagged with exactly one role.

    Labels of the form ``<path>.<pol>`` with ``pol`` in {H, V} carry a
    polarization; the detection analysis relies on that suffix.
    """

    def __init__(self, modes: Iterable[tuple[str, str]]):
        entries = list(modes)
        labels = [label for label, _ in entries]
        if len(set(labels)) != len(labels):
            dupes = sorted({lb for lb in labels if labels.count(lb) > 1})
            raise RegistryError(f"duplicate mode labels: {', '.join(dupes)}")
        for label, role in entries:
            if role not in ROLES:
                raise RegistryError(f"mode {label!r}: unknown role {role!r}")
        self._modes = tuple(ModeId(i, label) for i, label in enumerate(labels))
        self._by_label = {m.label: m for m in self._modes}
        self._roles = {m: role for m, (_, role) in zip(self._modes, entries)}

    @property
    def modes(self) -> tuple[ModeId, ...]:
        return self._modes

    @property
    def roles(self) -> Mapping[ModeId, str]:
        return MappingProxyType(self._roles)

    @property
    def labels(self) -> list[str]:
        return [m.label for m in self._modes]

    def __len__(self):
        return len(self._modes)

    def __iter__(self):
        return iter(self._modes)

    def __contains__(self, item):
        if isinstance(item, ModeId):
            return self._by_label.get(item.label) == item
        return item in self._by_label

    def __eq__(self, other):
        if not isinstance(other, ModeRegistry):
            return NotImplemented
        return self.items() == other.items()

    def __hash__(self):
        return hash(tuple(self.items()))

    def __repr__(self):
        body = ", ".join(f"{label}:{role}" for label, role in self.items())
        return f"ModeRegistry([{body}])"

    def items(self) -> list[tuple[str, str]]:
        return [(m.label, self._roles[m]) for m in self._modes]

    def resolve(self, mode: ModeId | str) -> ModeId:
        label = mode.label if isinstance(mode, ModeId) else mode
        found = self._by_label.get(label)
        if found is None or (isinstance(mode, ModeId) and found != mode):
            raise RegistryError(f"mode {label!r} is not part of this registry")
        return found

    def role(self, mode: ModeId | str) -> str:
        return self._roles[self.resolve(mode)]

    def with_role(self, role: str) -> list[ModeId]:
        if role not in ROLES:
            raise RegistryError(f"unknown role {role!r}")
        return [m for m in self._modes if self._roles[m] == role]

    def has_role(self, role: str) -> bool:
        return bool(self.with_role(role))


def polarization(mode: ModeId | str) -> str | None:
    """Return 'H' or 'V' from a ``path.pol`` label, else None."""
    label = mode.label if isinstance(mode, ModeId) else mode
    _, sep, pol = label.rpartition(".")
    return pol if sep and pol in ("H", "V") else None


class FockState:
    """Immutable sparse superposition of occupation-number kets.

    ``null`` marks the empty result of a zero-probability projection; it is
    the only state allowed to have no terms.
    """

    __slots__ = ("_registry", "_terms", "_null")

    def __init__(self, registry: ModeRegistry, terms: Mapping[Sequence[int], complex],
                 *, prune: float = PRUNE_THRESHOLD, null: bool = False):
        n = len(registry)
        kept = {}
        photons = None
        for occ, amp in terms.items():
            occ = tuple(int(c) for c in occ)
            if len(occ) != n:
                raise RegistryError(
                    f"occupation vector of length {len(occ)} for a {n}-mode registry")
            if any(c < 0 for c in occ):
                raise PreconditionError(f"negative occupation in {occ}")
            amp = complex(amp)
            if abs(amp) < prune:
                continue
            total = sum(occ)
            if photons is None:
                photons = total
            elif total != photons:
                raise PreconditionError("terms with different total photon numbers")
            kept[occ] = kept.get(occ, 0j) + amp
        if not kept and not null:
            raise PreconditionError("state has no terms above the pruning threshold")
        self._registry = registry
        self._terms = MappingProxyType(kept)
        self._null = null and not kept

    @property
    def registry(self) -> ModeRegistry:
        return self._registry

    @property
    def terms(self) -> Mapping[tuple[int, ...], complex]:
        return self._terms

    @property
    def null(self) -> bool:
        return self._null

    @property
    def photon_number(self) -> int:
        return sum(next(iter(self._terms))) if self._terms else 0

    def norm_squared(self) -> float:
        return math.fsum(abs(a) ** 2 for a in self._terms.values())

    def norm(self) -> float:
        return math.sqrt(self.norm_squared())

    def amplitude(self, occ: Sequence[int]) -> complex:
        return self._terms.get(tuple(occ), 0j)

    def amplitude_of(self, *labels: str) -> complex:
        """Amplitude of the ket created by the listed mode labels (with repeats)."""
        occ = [0] * len(self._registry)
        for label in labels:
            occ[self._registry.resolve(label).index] += 1
        return self.amplitude(occ)

    def normalized(self) -> "FockState":
        nrm = self.norm()
        return FockState(self._registry, {k: v / nrm for k, v in self._terms.items()})

    def __len__(self):
        return len(self._terms)

    def __iter__(self):
        return iter(self._terms.items())

    def __add__(self, other: "FockState") -> "FockState":
        _check_same_registry(self, other)
        merged = dict(self._terms)
        for occ, amp in other._terms.items():
            merged[occ] = merged.get(occ, 0j) + amp
        return FockState(self._registry, merged, null=True)

    def __mul__(self, scalar: complex) -> "FockState":
        return FockState(self._registry, {k: v * scalar for k, v in self._terms.items()},
                         null=True)

    __rmul__ = __mul__

    def __repr__(self):
        parts = []
        labels = self._registry.labels
        for occ, amp in sorted(self._terms.items(), reverse=True):
            ket = " ".join(f"{labels[i]}^{c}" if c > 1 else labels[i]
                           for i, c in enumerate(occ) if c)
            parts.append(f"({amp.real:+.6g}{amp.imag:+.6g}j)|{ket}>")
        return "FockState(" + (" ".join(parts) if parts else "null") + ")"


def _check_same_registry(s1: FockState, s2: FockState):
    if s1.registry is not s2.registry and s1.registry != s2.registry:
        raise RegistryError("states belong to different mode registries")


def make_state(registry: ModeRegistry, creation_list: Sequence[ModeId | str]) -> FockState:
    """Apply the listed creation operators to vacuum and normalize."""
    if not creation_list:
        raise PreconditionError("creation list must name at least one mode")
    occ = [0] * len(registry)
    for mode in creation_list:
        occ[registry.resolve(mode).index] += 1
    # (a^dag)^n |0> = sqrt(n!) |n>, so the normalized ket is the basis vector itself
    return FockState(registry, {tuple(occ): 1.0})


def _check_unitary(u: np.ndarray):
    k = u.shape[0]
    if u.shape != (k, k):
        raise PreconditionError(f"transform must be square, got shape {u.shape}")
    err = np.max(np.abs(u.conj().T @ u - np.eye(k)))
    if err > UNITARY_TOL:
        raise PreconditionError(f"transform is not unitary (max deviation {err:.3g})")


def apply_linear_transform(state: FockState, u, modes: Sequence[ModeId | str]) -> FockState:
    """Substitute a_{modes[j]}^dag -> sum_i u[j, i] a_{modes[i]}^dag in every term."""
    u = np.asarray(u, dtype=complex)
    _check_unitary(u)
    reg = state.registry
    idx = [reg.resolve(m).index for m in modes]
    if len(set(idx)) != len(idx):
        raise PreconditionError("transform modes must be distinct")
    if len(idx) != u.shape[0]:
        raise PreconditionError(f"{len(idx)} modes given for a {u.shape[0]}x{u.shape[0]} transform")

    k = len(idx)
    out: dict[tuple[int, ...], complex] = {}
    for occ, amp in state.terms.items():
        counts_in = [occ[i] for i in idx]
        photons = [j for j, n in enumerate(counts_in) for _ in range(n)]
        base = list(occ)
        for i in idx:
            base[i] = 0
        denom = math.prod(math.factorial(n) for n in counts_in)
        partial: dict[tuple[int, ...], complex] = {}
        for targets in itertools.product(range(k), repeat=len(photons)):
            coeff = 1 + 0j
            for src, dst in zip(photons, targets):
                coeff *= u[src, dst]
            if coeff == 0:
                continue
            counts_out = [0] * k
            for dst in targets:
                counts_out[dst] += 1
            key = tuple(counts_out)
            partial[key] = partial.get(key, 0j) + coeff
        for counts_out, coeff in partial.items():
            numer = math.prod(math.factorial(n) for n in counts_out)
            new = base[:]
            for i, c in zip(idx, counts_out):
                new[i] = c
            key = tuple(new)
            out[key] = out.get(key, 0j) + amp * coeff * math.sqrt(numer / denom)
    return FockState(reg, out, null=state.null)


def apply_mode_transform(state: FockState, u, m1: ModeId | str, m2: ModeId | str) -> FockState:
    """Two-mode linear transform: a^dag -> u11 a^dag + u12 b^dag, b^dag -> u21 a^dag + u22 b^dag."""
    u = np.asarray(u, dtype=complex)
    if u.shape != (2, 2):
        raise PreconditionError(f"expected a 2x2 transform, got shape {u.shape}")
    if state.registry.resolve(m1) == state.registry.resolve(m2):
        raise PreconditionError("a two-mode transform needs two different modes")
    return apply_linear_transform(state, u, (m1, m2))


def apply_phase(state: FockState, m: ModeId | str, theta: float) -> FockState:
    """Multiply each term by exp(i * theta * n_m)."""
    i = state.registry.resolve(m).index
    return apply_phases(state, {i: theta})


def apply_phases(state: FockState, phases: Mapping[int, float]) -> FockState:
    """Several single-mode phases at once, keyed by mode index."""
    out = {}
    for occ, amp in state.terms.items():
        total = sum(theta * occ[i] for i, theta in phases.items())
        out[occ] = amp * complex(math.cos(total), math.sin(total))
    return FockState(state.registry, out, null=state.null)


def count_in_role(state: FockState, occ: Sequence[int], role: str) -> int:
    return sum(occ[m.index] for m in state.registry.with_role(role))


def project_onto_counts(state: FockState, constraint: Mapping[str, int]) -> tuple[FockState, float]:
    """Keep terms whose photon count per role matches ``constraint``.

    Returns the renormalized kept state and its probability mass. A zero-mass
    projection returns a null state and probability 0.0.
    """
    reg = state.registry
    groups = {role: [m.index for m in reg.with_role(role)] for role in constraint}
    kept = {}
    for occ, amp in state.terms.items():
        if all(sum(occ[i] for i in groups[role]) == n for role, n in constraint.items()):
            kept[occ] = amp
    prob = math.fsum(abs(a) ** 2 for a in kept.values())
    if prob == 0.0:
        return FockState(reg, {}, null=True), 0.0
    scale = 1.0 / math.sqrt(prob)
    return FockState(reg, {k: v * scale for k, v in kept.items()}), prob


def inner_product(s1: FockState, s2: FockState) -> complex:
    """<s1|s2>, conjugating s1."""
    _check_same_registry(s1, s2)
    small, large = (s1, s2) if len(s1) <= len(s2) else (s2, s1)
    acc = 0j
    for occ in small.terms:
        if occ in large.terms:
            acc += s1.terms[occ].conjugate() * s2.terms[occ]
    return acc


def state_to_json(state: FockState) -> dict:
    terms = sorted(state.terms.items(), reverse=True)
    return {
        "modes": state.registry.labels,
        "terms": [{"occ": list(occ), "re": amp.real, "im": amp.imag} for occ, amp in terms],
    }


def state_from_json(data: Mapping, registry: ModeRegistry) -> FockState:
    if list(data["modes"]) != registry.labels:
        raise RegistryError("mode labels in the dump do not match the registry")
    terms = {tuple(t["occ"]): complex(t["re"], t["im"]) for t in data["terms"]}
    return FockState(registry, terms, null=not terms)
