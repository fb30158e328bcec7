"""
Optical elements of the rotating Sagnac interferometer and the two circuit presets.

Mode naming: ``a`` is the co-rotating loop path, ``b`` the counter-rotating
one, each split into ``.H`` and ``.V`` polarization modes. The full layout
adds the source ports, Alice's and Bob's detection ports and two discard
ports for the routing beam splitters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence, Union

import numpy as np

from sagnacbell.errors import ConfigurationError, PreconditionError, RegistryError
from sagnacbell.fock import (
    FockState,
    ModeRegistry,
    apply_linear_transform,
    apply_phases,
    make_state,
)

#: Speed of light in vacuum (m/s). Fixed; the Sagnac phase never uses a medium's index.
C_LIGHT = 299_792_458.0

_SQRT_HALF = 1.0 / math.sqrt(2.0)

#: Symmetric 50:50 splitter, rows are images of (a^dag, b^dag).
SYMMETRIC_BS = _SQRT_HALF * np.array([[1, 1j], [1j, 1]], dtype=complex)

BS_CONVENTIONS = ("symmetric", "port-exchange")


@dataclass(frozen=True)
class SagnacConfig:
    """Loop area, photon wavelength and platform angular velocity (rad/s, signed)."""

    area_m2: float
    wavelength_m: float
    omega_rot: float = 0.0

    def __post_init__(self):
        if not self.area_m2 > 0:
            raise PreconditionError(f"area must be positive, got {self.area_m2}")
        if not self.wavelength_m > 0:
            raise PreconditionError(f"wavelength must be positive, got {self.wavelength_m}")

    c = C_LIGHT

    @property
    def optical_omega(self) -> float:
        """Photon angular frequency 2*pi*c/lambda (rad/s)."""
        return 2.0 * math.pi * C_LIGHT / self.wavelength_m

    @property
    def rotation_hz(self) -> float:
        return self.omega_rot / (2.0 * math.pi)

    def with_omega(self, omega_rot: float) -> "SagnacConfig":
        return replace(self, omega_rot=float(omega_rot))

    def with_rotation_hz(self, f_hz: float) -> "SagnacConfig":
        return replace(self, omega_rot=2.0 * math.pi * float(f_hz))

    @classmethod
    def from_loops(cls, loops: int, radius_m: float, wavelength_m: float,
                   omega_rot: float = 0.0) -> "SagnacConfig":
        """Area of ``loops`` circular fibre turns of radius ``radius_m``."""
        if loops < 1 or not radius_m > 0:
            raise PreconditionError("need at least one loop and a positive radius")
        return cls(loops * math.pi * radius_m**2, wavelength_m, omega_rot)

    @classmethod
    def from_json(cls, data: Mapping) -> "SagnacConfig":
        has_omega = "omega_rot_rad_s" in data
        has_hz = "rotation_hz" in data
        if has_omega == has_hz:
            raise ConfigurationError(
                "exactly one of 'omega_rot_rad_s' and 'rotation_hz' must be given")
        omega = (float(data["omega_rot_rad_s"]) if has_omega
                 else 2.0 * math.pi * float(data["rotation_hz"]))
        return cls(float(data["area_m2"]), float(data["wavelength_m"]), omega)

    def to_json(self) -> dict:
        return {"area_m2": self.area_m2, "wavelength_m": self.wavelength_m,
                "omega_rot_rad_s": self.omega_rot}


#: Parameters of the reference setup: 10 fibre loops of 0.5 m radius, 1 um photons.
REFERENCE_CONFIG = SagnacConfig.from_loops(10, 0.5, 1e-6)


def sagnac_phase(cfg: SagnacConfig) -> float:
    """phi = 4 A omega Omega / c^2, unwrapped; sign follows the sense of rotation."""
    if not (cfg.area_m2 > 0 and cfg.wavelength_m > 0):
        raise PreconditionError("area and wavelength must be positive")
    return 4.0 * cfg.area_m2 * cfg.optical_omega * cfg.omega_rot / C_LIGHT**2


# -- elements ---------------------------------------------------------------


@dataclass(frozen=True)
class BeamSplitter:
    """50:50 splitter applied to each (m1, m2) pair in ``pairs``.

    The forward transform is always :data:`SYMMETRIC_BS`. The inverse is its
    conjugate transpose under the ``symmetric`` convention; under
    ``port-exchange`` the inverse is followed by swapping the two output
    ports, which amounts to the matrix ``-1j * SYMMETRIC_BS``.
    """

    pairs: tuple[tuple[str, str], ...]
    convention: str = "symmetric"
    inverse: bool = False

    def __post_init__(self):
        if self.convention not in BS_CONVENTIONS:
            raise PreconditionError(f"unknown beam-splitter convention {self.convention!r}")
        for m1, m2 in self.pairs:
            if m1 == m2:
                raise PreconditionError(f"beam splitter on a single mode {m1!r}")

    def matrix(self) -> np.ndarray:
        if not self.inverse:
            return SYMMETRIC_BS
        if self.convention == "symmetric":
            return SYMMETRIC_BS.conj().T
        return -1j * SYMMETRIC_BS


@dataclass(frozen=True)
class SagnacPhase:
    """exp(+i phi/2) per photon in co-rotating modes, exp(-i phi/2) in counter-rotating ones.

    ``phi=None`` leaves the phase unbound until :meth:`Circuit.bind`.
    """

    co_modes: tuple[str, ...]
    counter_modes: tuple[str, ...]
    phi: float | None = None


@dataclass(frozen=True)
class PhaseShift:
    mode: str
    theta: float


ROUTE_MATRIX = np.array(
    [[0, _SQRT_HALF, 1j * _SQRT_HALF],
     [0, 1j * _SQRT_HALF, _SQRT_HALF],
     [1, 0, 0]],
    dtype=complex,
)


@dataclass(frozen=True)
class Route:
    """Routing 50:50 splitter: moves ``in_mode`` to ``through_mode`` or ``discard_mode``.

    Acts on (in, through, discard) as ``ROUTE_MATRIX``: the incoming photon
    goes to (through + i*discard)/sqrt(2). Whatever the discard port already
    held is parked in the vacated input mode, so repeated use of one discard
    port never feeds a lost photon back into the circuit.
    """

    in_mode: str
    through_mode: str
    discard_mode: str

    def __post_init__(self):
        if len({self.in_mode, self.through_mode, self.discard_mode}) != 3:
            raise PreconditionError("route needs three distinct modes")


OpticalElement = Union[BeamSplitter, SagnacPhase, PhaseShift, Route]


def element_modes(element: OpticalElement) -> list[str]:
    if isinstance(element, BeamSplitter):
        return [m for pair in element.pairs for m in pair]
    if isinstance(element, SagnacPhase):
        return [*element.co_modes, *element.counter_modes]
    if isinstance(element, PhaseShift):
        return [element.mode]
    return [element.in_mode, element.through_mode, element.discard_mode]


def apply_element(state: FockState, element: OpticalElement) -> FockState:
    reg = state.registry
    if isinstance(element, BeamSplitter):
        u = element.matrix()
        for m1, m2 in element.pairs:
            state = apply_linear_transform(state, u, (m1, m2))
        return state
    if isinstance(element, SagnacPhase):
        if element.phi is None:
            raise ConfigurationError("Sagnac phase is unbound; call Circuit.bind(phi) first")
        half = 0.5 * element.phi
        phases = {reg.resolve(m).index: half for m in element.co_modes}
        for m in element.counter_modes:
            i = reg.resolve(m).index
            phases[i] = phases.get(i, 0.0) - half
        return apply_phases(state, phases)
    if isinstance(element, PhaseShift):
        return apply_phases(state, {reg.resolve(element.mode).index: element.theta})
    if isinstance(element, Route):
        if reg.role(element.discard_mode) != "discard":
            raise ConfigurationError(
                f"route discard port {element.discard_mode!r} does not have role 'discard'")
        return apply_linear_transform(
            state, ROUTE_MATRIX, (element.in_mode, element.through_mode, element.discard_mode))
    raise TypeError(f"not an optical element: {element!r}")


def entry_beamsplitter() -> BeamSplitter:
    return BeamSplitter((("a.H", "b.H"), ("a.V", "b.V")))


def exit_beamsplitter(convention: str = "symmetric") -> BeamSplitter:
    return BeamSplitter((("a.H", "b.H"), ("a.V", "b.V")), convention=convention, inverse=True)


def sagnac_loop_element(phi: float | None, registry: ModeRegistry) -> SagnacPhase:
    co = registry.with_role("loop-co")
    counter = registry.with_role("loop-counter")
    if not co or not counter:
        raise RegistryError("registry needs both 'loop-co' and 'loop-counter' modes")
    return SagnacPhase(tuple(m.label for m in co), tuple(m.label for m in counter),
                       None if phi is None else float(phi))


# -- circuits ---------------------------------------------------------------


@dataclass(frozen=True)
class Circuit:
    """Ordered element pipeline together with its registry and input photons."""

    registry: ModeRegistry
    inputs: tuple[str, ...]
    elements: tuple[OpticalElement, ...] = field(default=())

    def __post_init__(self):
        for label in self.inputs:
            self.registry.resolve(label)
        for element in self.elements:
            for label in element_modes(element):
                self.registry.resolve(label)

    @property
    def is_symbolic(self) -> bool:
        return any(isinstance(e, SagnacPhase) and e.phi is None for e in self.elements)

    def bind(self, phi: float) -> "Circuit":
        """Return a copy with every unbound Sagnac phase set to ``phi``."""
        elements = tuple(
            replace(e, phi=float(phi)) if isinstance(e, SagnacPhase) and e.phi is None else e
            for e in self.elements)
        return replace(self, elements=elements)

    def input_state(self) -> FockState:
        return make_state(self.registry, self.inputs)

    def run(self, phi: float | None = None, state: FockState | None = None) -> FockState:
        circuit = self.bind(phi) if phi is not None else self
        if state is None:
            state = circuit.input_state()
        for element in circuit.elements:
            state = apply_element(state, element)
        return state

    def with_elements(self, elements: Sequence[OpticalElement]) -> "Circuit":
        return replace(self, elements=tuple(elements))


def core4_registry() -> ModeRegistry:
    return ModeRegistry([
        ("a.H", "loop-co"), ("a.V", "loop-co"),
        ("b.H", "loop-counter"), ("b.V", "loop-counter"),
    ])


def full12_registry() -> ModeRegistry:
    return ModeRegistry([
        ("src1.H", "source"), ("src2.V", "source"),
        ("a.H", "loop-co"), ("a.V", "loop-co"),
        ("b.H", "loop-counter"), ("b.V", "loop-counter"),
        ("alice.H", "alice"), ("alice.V", "alice"),
        ("bob.H", "bob"), ("bob.V", "bob"),
        ("discard.1", "discard"), ("discard.2", "discard"),
    ])


def build_core_circuit(registry: ModeRegistry | None = None, phi: float | None = None,
                       exit_convention: str = "symmetric") -> Circuit:
    """|H V> into the loop beam splitter, Sagnac phase, inverse beam splitter."""
    registry = core4_registry() if registry is None else registry
    _require_labels(registry, ("a.H", "a.V", "b.H", "b.V"))
    return Circuit(registry, ("a.H", "b.V"), (
        entry_beamsplitter(),
        sagnac_loop_element(phi, registry),
        exit_beamsplitter(exit_convention),
    ))


def build_full_circuit(registry: ModeRegistry | None = None, phi: float | None = None) -> Circuit:
    """Core loop wrapped in inbound and outbound routing splitters (BS1 on path a, BS2 on b)."""
    registry = full12_registry() if registry is None else registry
    shape = {role: len(registry.with_role(role))
             for role in ("source", "loop-co", "loop-counter", "alice", "bob", "discard")}
    expected = {"source": 2, "loop-co": 2, "loop-counter": 2, "alice": 2, "bob": 2}
    if any(shape[r] != n for r, n in expected.items()) or shape["discard"] < 2:
        raise ConfigurationError(f"full layout needs 2 source, 4 loop, 2 alice, 2 bob and "
                                 f">=2 discard modes; got {shape}")
    try:
        _require_labels(registry, ("src1.H", "src2.V", "a.H", "a.V", "b.H", "b.V",
                                   "alice.H", "alice.V", "bob.H", "bob.V"))
    except RegistryError as exc:
        raise ConfigurationError(str(exc)) from None
    d1, d2 = (m.label for m in registry.with_role("discard")[:2])
    return Circuit(registry, ("src1.H", "src2.V"), (
        Route("src1.H", "a.H", d1),
        Route("src2.V", "b.V", d2),
        entry_beamsplitter(),
        sagnac_loop_element(phi, registry),
        exit_beamsplitter(),
        Route("a.H", "alice.H", d1),
        Route("a.V", "alice.V", d2),
        Route("b.H", "bob.H", d1),
        Route("b.V", "bob.V", d2),
    ))


PRESETS = {"core4": build_core_circuit, "full12": build_full_circuit}


def preset_circuit(name: str, phi: float | None = None) -> Circuit:
    try:
        builder = PRESETS[name]
    except KeyError:
        raise ConfigurationError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return builder(None, phi)


def _require_labels(registry: ModeRegistry, labels: Sequence[str]):
    missing = [lb for lb in labels if lb not in registry]
    if missing:
        raise RegistryError(f"registry is missing modes: {', '.join(missing)}")
