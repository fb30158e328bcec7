"""
Post-selected polarization qubits, CHSH correlators and the rotation sweep.

Qubit convention: H is basis state 0 for both Alice and Bob, and the
two-qubit basis is ordered |HH>, |HV>, |VH>, |VV> (Alice first). With this
convention the default settings give a *negative* CHSH value,

    S(phi) = -4 sqrt(2) sin^2(phi) / (3 + cos 2 phi),

so the public quantities (``S_abs``, violation flags) are stated on |S|.
"""

from __future__ import annotations

import csv
import math
from dataclasses import astuple, dataclass
from typing import Iterable, Sequence, TextIO

import numpy as np

from sagnacbell.errors import ConsistencyError, PreconditionError, RegistryError
from sagnacbell.fock import FockState, polarization, project_onto_counts
from sagnacbell.optics import Circuit, SagnacConfig, C_LIGHT, preset_circuit, sagnac_phase

TSIRELSON = 2.0 * math.sqrt(2.0)
NORM_TOL = 1e-12
AGREEMENT_TOL = 1e-10

PAULI = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


@dataclass(frozen=True)
class TwoQubitState:
    amp_HH: complex = 0j
    amp_HV: complex = 0j
    amp_VH: complex = 0j
    amp_VV: complex = 0j

    def __post_init__(self):
        for name in ("amp_HH", "amp_HV", "amp_VH", "amp_VV"):
            object.__setattr__(self, name, complex(getattr(self, name)))
        err = abs(float(np.sum(np.abs(self.vector()) ** 2)) - 1.0)
        if err > NORM_TOL:
            raise PreconditionError(f"two-qubit state is not normalized (|norm^2 - 1| = {err:.3g})")

    def vector(self) -> np.ndarray:
        return np.array([self.amp_HH, self.amp_HV, self.amp_VH, self.amp_VV], dtype=complex)

    @classmethod
    def from_vector(cls, vec: Sequence[complex]) -> "TwoQubitState":
        return cls(*vec)

    def concurrence(self) -> float:
        return 2.0 * abs(self.amp_HH * self.amp_VV - self.amp_HV * self.amp_VH)

    def to_json(self) -> dict:
        return {name: {"re": v.real, "im": v.imag}
                for name, v in zip(("amp_HH", "amp_HV", "amp_VH", "amp_VV"), self.vector())}


SINGLET = TwoQubitState(amp_HV=1 / math.sqrt(2), amp_VH=-1 / math.sqrt(2))


def _unit(v, name="vector") -> tuple[float, float, float]:
    v = tuple(float(x) for x in v)
    if len(v) != 3:
        raise PreconditionError(f"{name} must have 3 components")
    if abs(math.sqrt(sum(x * x for x in v)) - 1.0) > NORM_TOL:
        raise PreconditionError(f"{name} {v} is not a unit vector")
    return v


@dataclass(frozen=True)
class MeasurementSetting:
    """Bloch directions a, a' (Alice) and b, b' (Bob)."""

    a: tuple[float, float, float]
    a_prime: tuple[float, float, float]
    b: tuple[float, float, float]
    b_prime: tuple[float, float, float]

    def __post_init__(self):
        for name in ("a", "a_prime", "b", "b_prime"):
            object.__setattr__(self, name, _unit(getattr(self, name), name))

    def pairs(self):
        """The four (alice, bob) direction pairs and their sign in S."""
        return (
            ("ab", self.a, self.b, +1),
            ("ab'", self.a, self.b_prime, -1),
            ("a'b", self.a_prime, self.b, +1),
            ("a'b'", self.a_prime, self.b_prime, +1),
        )


_R2 = 1 / math.sqrt(2)
DEFAULT_SETTINGS = MeasurementSetting(
    a=(1.0, 0.0, 0.0), a_prime=(0.0, 1.0, 0.0),
    b=(_R2, _R2, 0.0), b_prime=(-_R2, _R2, 0.0),
)


def bloch_observable(n) -> np.ndarray:
    return n[0] * PAULI[0] + n[1] * PAULI[1] + n[2] * PAULI[2]


def correlator(state: TwoQubitState, u, v) -> float:
    """<psi| (u.sigma) x (v.sigma) |psi>.

    With psi reshaped to the 2x2 amplitude matrix M (rows Alice, columns Bob)
    the operator acts as M -> A M B^T, which avoids forming the 4x4 product.
    """
    u = _unit(u, "u")
    v = _unit(v, "v")
    m = state.vector().reshape(2, 2)
    acc = complex(np.vdot(m, bloch_observable(u) @ m @ bloch_observable(v).T))
    if abs(acc.imag) > 1e-12:
        raise ConsistencyError(f"correlator has imaginary residue {acc.imag:.3g}")
    return float(acc.real)


def chsh_S(state: TwoQubitState, settings: MeasurementSetting = DEFAULT_SETTINGS) -> float:
    return sum(sign * correlator(state, u, v) for _, u, v, sign in settings.pairs())


def closed_form_S(phi: float) -> float:
    """Magnitude of the CHSH value for the default settings."""
    return 4.0 * math.sqrt(2.0) * math.sin(phi) ** 2 / (3.0 + math.cos(2.0 * phi))


def closed_form_P(phi: float) -> float:
    """Coincidence probability of the full layout, routing losses included."""
    return (1.0 + math.cos(phi) ** 2) / 32.0


def postselected_state(phi: float) -> TwoQubitState:
    c = math.cos(phi)
    norm = math.sqrt(2.0 * (c * c + 1.0))
    return TwoQubitState(amp_HV=(c + 1.0) / norm, amp_VH=(c - 1.0) / norm)


def fidelity(s1: TwoQubitState, s2: TwoQubitState) -> float:
    return abs(np.vdot(s1.vector(), s2.vector())) ** 2


def omega_bell(cfg: SagnacConfig, k: int) -> tuple[float, float]:
    """Rotation rate giving phi = (2k+1) pi/2, as (rad/s, Hz)."""
    omega = (2 * k + 1) * math.pi * C_LIGHT**2 / (8.0 * cfg.area_m2 * cfg.optical_omega)
    return omega, omega / (2.0 * math.pi)


# -- simulation path ---------------------------------------------------------


def detection_roles(circuit_or_registry) -> tuple[str, str]:
    """Roles read out by Alice and Bob.

    The four-mode core model has no separate detector ports; there Alice
    reads the co-rotating port and Bob the counter-rotating one.
    """
    reg = getattr(circuit_or_registry, "registry", circuit_or_registry)
    if reg.has_role("alice") and reg.has_role("bob"):
        return "alice", "bob"
    if reg.has_role("loop-co") and reg.has_role("loop-counter"):
        return "loop-co", "loop-counter"
    raise RegistryError("registry has neither alice/bob nor loop detection roles")


def coincidence_constraint(circuit_or_registry) -> dict[str, int]:
    alice, bob = detection_roles(circuit_or_registry)
    return {alice: 1, bob: 1}


def to_two_qubit(state: FockState) -> TwoQubitState:
    """Read a coincidence-projected Fock state as Alice/Bob polarization qubits."""
    reg = state.registry
    alice_role, bob_role = detection_roles(reg)
    alice = {m.index: polarization(m) for m in reg.with_role(alice_role)}
    bob = {m.index: polarization(m) for m in reg.with_role(bob_role)}
    amps = {"HH": 0j, "HV": 0j, "VH": 0j, "VV": 0j}
    for occ, amp in state.terms.items():
        a = [alice[i] for i in alice if occ[i] == 1]
        b = [bob[i] for i in bob if occ[i] == 1]
        if len(a) != 1 or len(b) != 1 or None in a + b:
            raise PreconditionError("state is not a single-photon coincidence on polarized ports")
        amps[a[0] + b[0]] += amp
    return TwoQubitState(amps["HH"], amps["HV"], amps["VH"], amps["VV"])


@dataclass(frozen=True)
class PostSelection:
    output: FockState
    projected: FockState
    probability: float
    qubits: TwoQubitState | None


def simulate_postselected(circuit: Circuit | str, phi: float | None = None) -> PostSelection:
    """Run a circuit (or preset name), project on coincidences, read out the qubits."""
    if isinstance(circuit, str):
        circuit = preset_circuit(circuit)
    out = circuit.run(phi)
    projected, prob = project_onto_counts(out, coincidence_constraint(circuit))
    qubits = None if projected.null else to_two_qubit(projected)
    return PostSelection(out, projected, prob, qubits)


def routing_factor(circuit: Circuit) -> float:
    """Survival factor of the routing splitters: 1/16 with detector ports, else 1."""
    return 1.0 / 16.0 if detection_roles(circuit) == ("alice", "bob") else 1.0


@dataclass(frozen=True)
class SweepRow:
    f_hz: float
    omega_rad_s: float
    phi_rad: float
    S_abs: float
    S_signed: float
    P_coincidence: float
    violation: bool


SWEEP_COLUMNS = tuple(SweepRow.__dataclass_fields__)


def sweep(cfg: SagnacConfig, f_min: float, f_max: float, n_points: int,
          settings: MeasurementSetting = DEFAULT_SETTINGS,
          circuit: Circuit | None = None, check: bool = True) -> list[SweepRow]:
    """CHSH value and coincidence probability on a uniform rotation-frequency grid.

    Every row goes through the circuit simulation. With ``check`` (default)
    and the default settings, each row is compared with the closed forms and
    :class:`ConsistencyError` is raised on disagreement beyond 1e-10.
    """
    if not f_min < f_max:
        raise PreconditionError(f"need f_min < f_max, got [{f_min}, {f_max}]")
    if n_points < 2:
        raise PreconditionError("need at least two grid points")
    circuit = preset_circuit("full12") if circuit is None else circuit
    scale = routing_factor(circuit)
    rows = []
    for f in np.linspace(f_min, f_max, n_points):
        row_cfg = cfg.with_rotation_hz(f)
        phi = sagnac_phase(row_cfg)
        post = simulate_postselected(circuit, phi)
        s = chsh_S(post.qubits, settings)
        p = post.probability
        if check:
            expected_p = closed_form_P(phi) * 16.0 * scale
            if abs(p - expected_p) > AGREEMENT_TOL:
                raise ConsistencyError(f"f={f}: coincidence probability {p} vs closed form {expected_p}")
            if settings == DEFAULT_SETTINGS and abs(abs(s) - closed_form_S(phi)) > AGREEMENT_TOL:
                raise ConsistencyError(f"f={f}: |S|={abs(s)} vs closed form {closed_form_S(phi)}")
        s = float(s)
        rows.append(SweepRow(float(f), row_cfg.omega_rot, phi, abs(s), s, float(p), abs(s) > 2.0))
    return rows


def write_sweep_csv(rows: Iterable[SweepRow], fh: TextIO):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    for row in rows:
        writer.writerow([repr(x) if isinstance(x, float) else str(x).lower() if isinstance(x, bool)
                         else x for x in astuple(row)])


def read_sweep_csv(fh: TextIO) -> list[SweepRow]:
    reader = csv.DictReader(fh)
    if tuple(reader.fieldnames or ()) != SWEEP_COLUMNS:
        raise PreconditionError(f"unexpected sweep header {reader.fieldnames}")
    return [SweepRow(float(r["f_hz"]), float(r["omega_rad_s"]), float(r["phi_rad"]),
                     float(r["S_abs"]), float(r["S_signed"]), float(r["P_coincidence"]),
                     r["violation"] == "true")
            for r in reader]


def peak_frequencies(rows: Sequence[SweepRow]) -> list[float]:
    """Frequencies of the interior local maxima of |S| on the sweep grid."""
    peaks = []
    for prev, row, nxt in zip(rows, rows[1:], rows[2:]):
        if row.S_abs >= prev.S_abs and row.S_abs > nxt.S_abs:
            peaks.append(row.f_hz)
    return peaks
