"""
Seeded Monte Carlo of individual Bell-test runs.

Each shot sends one photon pair through the circuit. The detector-port
photon pattern is drawn from the simulated circuit output. Coincident pairs
are then measured along a randomly scheduled setting pair with the exact
Born distribution of the post-selected state, and each side is finally
dropped with probability ``1 - efficiency``.

Randomness comes from numpy's counter-based Philox generator. Shots are
grouped in fixed-size batches and batch ``j`` draws from an independent
stream keyed by ``(seed, j)``. Any batch can therefore be regenerated on its
own, and the record stream does not depend on how batches are scheduled.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterator, TextIO

import numpy as np

from sagnacbell.bell import (
    DEFAULT_SETTINGS,
    MeasurementSetting,
    TwoQubitState,
    _unit,
    bloch_observable,
    postselected_state,
    simulate_postselected,
)
from sagnacbell.errors import PreconditionError
from sagnacbell.optics import Circuit, preset_circuit

BATCH_SIZE = 1 << 16

SETTING_NAMES = ("ab", "ab'", "a'b", "a'b'")
OUTCOMES = ((+1, +1), (+1, -1), (-1, +1), (-1, -1))
NO_CLICK = 0


@dataclass(frozen=True)
class DetectorModel:
    """Per-detector efficiency, RNG seed and number of pair shots.

    Dark counts are not modelled.
    """

    efficiency: float = 1.0
    seed: int = 0
    shots: int = 1

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise PreconditionError(f"efficiency must lie in [0, 1], got {self.efficiency}")
        if self.shots < 1:
            raise PreconditionError("need at least one shot")
        if not 0 <= self.seed < 2**64:
            raise PreconditionError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class ShotRecord:
    shot_index: int
    setting_pair: str
    alice_outcome: int | None
    bob_outcome: int | None
    coincidence: bool

    def to_json(self) -> dict:
        return {"shot": self.shot_index, "setting": self.setting_pair,
                "alice": self.alice_outcome, "bob": self.bob_outcome,
                "coincidence": self.coincidence}


class ShotRecords:
    """Columnar record stream; iterating yields :class:`ShotRecord` objects.

    ``alice``/``bob`` hold +1, -1 or 0 for no click.
    """

    def __init__(self, setting: np.ndarray, alice: np.ndarray, bob: np.ndarray):
        self.setting = setting
        self.alice = alice
        self.bob = bob

    @property
    def coincidence(self) -> np.ndarray:
        return (self.alice != NO_CLICK) & (self.bob != NO_CLICK)

    def __len__(self):
        return len(self.setting)

    def __getitem__(self, i: int) -> ShotRecord:
        a, b = int(self.alice[i]), int(self.bob[i])
        return ShotRecord(int(i) if i >= 0 else len(self) + i, SETTING_NAMES[self.setting[i]],
                          a or None, b or None, bool(a and b))

    def __iter__(self) -> Iterator[ShotRecord]:
        for i in range(len(self)):
            yield self[i]

    def write_ndjson(self, fh: TextIO):
        names = [json.dumps(s) for s in SETTING_NAMES]
        out = {1: "1", -1: "-1", 0: "null"}
        for i, (s, a, b) in enumerate(zip(self.setting.tolist(), self.alice.tolist(),
                                          self.bob.tolist())):
            fh.write(f'{{"shot": {i}, "setting": {names[s]}, "alice": {out[a]}, '
                     f'"bob": {out[b]}, "coincidence": {"true" if a and b else "false"}}}\n')


@dataclass(frozen=True)
class Estimate:
    """CHSH estimate from coincidences; ``S_hat``/``stderr`` are None when undefined."""

    S_hat: float | None
    stderr: float | None
    coincidence_rate: float
    shots: int
    seed: int
    correlators: dict
    counts: dict

    @property
    def defined(self) -> bool:
        return self.S_hat is not None

    def to_json(self) -> dict:
        return {"S_hat": self.S_hat, "stderr": self.stderr,
                "coincidence_rate": self.coincidence_rate, "shots": self.shots, "seed": self.seed}


def born_probabilities(state: TwoQubitState, u, v) -> np.ndarray:
    """p(s, t) for outcomes ordered (+,+), (+,-), (-,+), (-,-)."""
    u = _unit(u, "u")
    v = _unit(v, "v")
    eye = np.eye(2)
    proj_u = {s: (eye + s * bloch_observable(u)) / 2 for s in (+1, -1)}
    proj_v = {t: (eye + t * bloch_observable(v)) / 2 for t in (+1, -1)}
    psi = state.vector()
    probs = np.array([np.vdot(psi, np.kron(proj_u[s], proj_v[t]) @ psi).real
                      for s, t in OUTCOMES])
    if abs(probs.sum() - 1.0) > 1e-12:
        raise PreconditionError("Born probabilities do not sum to one")
    return np.clip(probs, 0.0, None)


def born_sample(state: TwoQubitState, u, v, rand: float) -> tuple[int, int]:
    """Inverse-CDF draw of the joint (+1/-1, +1/-1) outcome from a uniform ``rand`` in [0, 1)."""
    if not 0.0 <= rand < 1.0:
        raise PreconditionError("rand must lie in [0, 1)")
    cdf = np.cumsum(born_probabilities(state, u, v))
    k = int(np.searchsorted(cdf, rand, side="right"))
    return OUTCOMES[min(k, 3)]


def batch_generator(seed: int, batch_index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, batch_index])))


def _sample_batch(rng: np.random.Generator, n: int, p_coinc: float, cdfs: np.ndarray,
                  efficiency: float):
    setting = rng.integers(0, 4, size=n, dtype=np.int8)
    coinc = rng.random(n) < p_coinc
    k = np.empty(n, dtype=np.int64)
    r = rng.random(n)
    for j in range(4):
        sel = setting == j
        k[sel] = np.searchsorted(cdfs[j], r[sel], side="right")
    np.minimum(k, 3, out=k)
    outcomes = np.array(OUTCOMES, dtype=np.int8)
    alice = np.where(coinc, outcomes[k, 0], 0).astype(np.int8)
    bob = np.where(coinc, outcomes[k, 1], 0).astype(np.int8)
    alice[rng.random(n) >= efficiency] = 0
    bob[rng.random(n) >= efficiency] = 0
    return setting, alice, bob


def run_experiment(phi: float, settings: MeasurementSetting = DEFAULT_SETTINGS,
                   det: DetectorModel = DetectorModel(),
                   circuit: Circuit | str = "full12") -> tuple[ShotRecords, Estimate]:
    """Simulate ``det.shots`` pair emissions and estimate S from the coincidences."""
    if isinstance(circuit, str):
        circuit = preset_circuit(circuit)
    post = simulate_postselected(circuit, phi)
    state = post.qubits if post.qubits is not None else postselected_state(phi)
    cdfs = np.array([np.cumsum(born_probabilities(state, u, v))
                     for _, u, v, _ in settings.pairs()])

    parts = []
    n_batches = math.ceil(det.shots / BATCH_SIZE)
    for j in range(n_batches):
        n = min(BATCH_SIZE, det.shots - j * BATCH_SIZE)
        parts.append(_sample_batch(batch_generator(det.seed, j), n, post.probability, cdfs,
                                   det.efficiency))
    records = ShotRecords(*(np.concatenate(col) for col in zip(*parts)))
    return records, estimate_chsh(records, settings, det.seed)


def estimate_chsh(records: ShotRecords, settings: MeasurementSetting = DEFAULT_SETTINGS,
                  seed: int = 0) -> Estimate:
    """S_hat with stderr from binomial propagation over the four correlators."""
    coinc = records.coincidence
    product = records.alice.astype(np.int64) * records.bob.astype(np.int64)
    signs = [sign for *_, sign in settings.pairs()]
    correlators, counts = {}, {}
    s_hat, var = 0.0, 0.0
    undefined = False
    for j, name in enumerate(SETTING_NAMES):
        sel = coinc & (records.setting == j)
        n = int(sel.sum())
        counts[name] = n
        if n == 0:
            undefined = True
            correlators[name] = None
            continue
        # integer sums are exact, so batch merging cannot change the estimate
        e = int(product[sel].sum()) / n
        correlators[name] = e
        s_hat += signs[j] * e
        var += max(1.0 - e * e, 0.0) / n
    rate = float(coinc.sum()) / len(records)
    if undefined:
        return Estimate(None, None, rate, len(records), seed, correlators, counts)
    return Estimate(s_hat, math.sqrt(var), rate, len(records), seed, correlators, counts)
