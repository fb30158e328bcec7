"""End-to-end acceptance checks, one test class per numbered criterion.

The summary section "acceptance criteria" (see conftest.py) prints one
PASS/FAIL line per criterion.
"""

import csv
import math
import time
from pathlib import Path

import numpy as np
import pytest

from oracles import circuit_unitary, polynomial_amplitudes, random_unitary, embed
from sagnacbell.bell import (
    SINGLET,
    TSIRELSON,
    MeasurementSetting,
    chsh_S,
    closed_form_P,
    closed_form_S,
    fidelity,
    omega_bell,
    peak_frequencies,
    simulate_postselected,
    sweep,
)
from sagnacbell.cli import main
from sagnacbell.fock import ModeRegistry, apply_linear_transform, make_state
from sagnacbell.lang import CompileError, ParseError, bundled_source, compile_source
from sagnacbell.optics import (
    BeamSplitter,
    Circuit,
    PhaseShift,
    Route,
    SagnacConfig,
    SagnacPhase,
    build_core_circuit,
    build_full_circuit,
    sagnac_phase,
)
from sagnacbell.sampler import DetectorModel, run_experiment

MALFORMED = sorted((Path(__file__).parent / "data" / "malformed").glob("*.icl"))

# ten loops of radius 0.5 m, 1 micron light
REFERENCE_AREA = 7.853981
REFERENCE_WAVELENGTH = 1e-6

RANDOM_PHIS = np.random.default_rng(20240601).uniform(-2 * np.pi, 2 * np.pi, 1000)


def criterion(number, title):
    return pytest.mark.criterion(number, title)


def s_of_circuit(circuit, phi, settings=None):
    qubits = simulate_postselected(circuit, phi).qubits
    return chsh_S(qubits, settings) if settings else chsh_S(qubits)


def random_settings(rng):
    v = rng.normal(size=(4, 3))
    return MeasurementSetting(*(tuple(x / np.linalg.norm(x)) for x in v))


@criterion(1, "Bell state at the quarter-wave phase")
class TestBellStateGeneration:
    def test_fidelity_to_singlet(self):
        t0 = time.perf_counter()
        post = simulate_postselected(build_core_circuit(), math.pi / 2)
        elapsed = time.perf_counter() - t0
        assert fidelity(post.qubits, SINGLET) >= 1 - 1e-12
        assert elapsed < 1.0


@criterion(2, "closed-form CHSH curve at 1000 random phases")
class TestClosedFormCurve:
    def test_matches_closed_form(self):
        t0 = time.perf_counter()
        core = build_core_circuit()
        worst = max(abs(abs(s_of_circuit(core, phi)) - closed_form_S(phi)) for phi in RANDOM_PHIS)
        elapsed = time.perf_counter() - t0
        assert worst <= 1e-10
        assert elapsed < 10.0


@criterion(3, "Tsirelson saturation and bound")
class TestTsirelson:
    def test_maximum_on_grid(self):
        core = build_core_circuit()
        # step pi/1000 puts every pi/2 + k pi on the grid
        grid = np.arange(-2000, 2001) * (np.pi / 1000)
        s_abs = np.array([abs(s_of_circuit(core, phi)) for phi in grid])
        assert abs(s_abs.max() - TSIRELSON) <= 1e-9
        peaks = grid[s_abs >= TSIRELSON - 1e-9]
        expected = np.array([-3, -1, 1, 3]) * np.pi / 2
        assert len(peaks) == 4
        assert np.max(np.abs(peaks - expected)) < 1e-12
        assert np.all(s_abs <= TSIRELSON + 1e-9)

    def test_random_settings_never_exceed(self):
        rng = np.random.default_rng(3)
        core = build_core_circuit()
        worst = 0.0
        for phi in rng.uniform(-2 * np.pi, 2 * np.pi, 100):
            qubits = simulate_postselected(core, phi).qubits
            for _ in range(1000):
                worst = max(worst, abs(chsh_S(qubits, random_settings(rng))))
        assert worst <= TSIRELSON + 1e-9


@criterion(4, "full-layout coincidence probability")
class TestDetectionProbability:
    def test_matches_closed_form(self):
        full = build_full_circuit()
        worst = max(abs(simulate_postselected(full, phi).probability - closed_form_P(phi))
                    for phi in RANDOM_PHIS)
        assert worst <= 1e-10

    def test_extremes(self):
        full = build_full_circuit()
        assert simulate_postselected(full, 0.0).probability == pytest.approx(1 / 16, abs=1e-10)
        assert simulate_postselected(full, math.pi / 2).probability == pytest.approx(1 / 32,
                                                                                    abs=1e-10)


@criterion(5, "Bell rotation rate")
class TestBellRate:
    def test_first_branch(self):
        cfg = SagnacConfig(REFERENCE_AREA, REFERENCE_WAVELENGTH)
        omega, f = omega_bell(cfg, 0)
        assert abs(f - 0.379) <= 0.02 * 0.379
        assert sagnac_phase(cfg.with_omega(omega)) == pytest.approx(math.pi / 2, rel=1e-9)

    def test_loops_geometry_agrees(self):
        cfg = SagnacConfig.from_loops(10, 0.5, REFERENCE_WAVELENGTH)
        assert cfg.area_m2 == pytest.approx(REFERENCE_AREA, rel=1e-6)


@criterion(6, "rotation sweep reproduces the violation figure")
class TestSweepFigure:
    def test_sweep(self, tmp_path, capsys):
        csv_path, svg_path = tmp_path / "sweep.csv", tmp_path / "sweep.svg"
        t0 = time.perf_counter()
        code = main(["sweep", "--area-m2", str(REFERENCE_AREA), "--wavelength-m", "1e-6",
                     "--f-min", "0", "--f-max", "2", "--n", "401", "-o", str(csv_path),
                     "--svg", str(svg_path), "-q"])
        elapsed = time.perf_counter() - t0
        capsys.readouterr()
        assert code == 0
        assert elapsed < 5.0

        rows = list(csv.DictReader(csv_path.open()))
        assert len(rows) == 401
        s_abs = np.array([float(r["S_abs"]) for r in rows])
        p = np.array([float(r["P_coincidence"]) for r in rows])
        viol = [r["violation"] == "true" for r in rows]
        assert viol == list(s_abs > 2)

        lib_rows = sweep(SagnacConfig(REFERENCE_AREA, REFERENCE_WAVELENGTH), 0.0, 2.0, 401)
        peaks = peak_frequencies(lib_rows)
        assert len(peaks) == 3
        for got, want in zip(peaks, (0.379, 1.138, 1.896)):
            assert abs(got - want) <= 0.02 * want

        assert p.max() == pytest.approx(1 / 16, abs=1e-12)
        assert p.min() == pytest.approx(1 / 32, abs=1e-5)
        assert np.all((p >= 1 / 32 - 1e-12) & (p <= 1 / 16 + 1e-12))

        svg = svg_path.read_text()
        assert svg.count('class="bound"') == 2
        assert 'id="S"' in svg and 'id="P"' in svg


def _random_circuit(rng, n_modes):
    roles = ["loop-co", "loop-counter"] + ["source"] * (n_modes - 3) + ["discard"]
    labels = [f"m{i}" for i in range(n_modes)]
    reg = ModeRegistry(list(zip(labels, roles)))
    inputs = tuple(rng.choice(labels[:-1], size=2, replace=True))
    elements = []
    for _ in range(int(rng.integers(6, 12))):
        kind = rng.integers(0, 4)
        if kind == 0:
            i, j = rng.choice(n_modes, size=2, replace=False)
            elements.append(BeamSplitter(((labels[i], labels[j]),),
                                         str(rng.choice(["symmetric", "port-exchange"])),
                                         bool(rng.integers(0, 2))))
        elif kind == 1:
            elements.append(PhaseShift(labels[rng.integers(0, n_modes)],
                                       float(rng.uniform(-np.pi, np.pi))))
        elif kind == 2:
            elements.append(SagnacPhase((labels[0],), (labels[1],), float(rng.uniform(-7, 7))))
        elif n_modes >= 4:
            i, j = rng.choice(n_modes - 1, size=2, replace=False)
            elements.append(Route(labels[i], labels[j], labels[-1]))
    return Circuit(reg, inputs, tuple(elements))


def _max_deviation(state, oracle):
    keys = set(oracle) | set(state.terms)
    return max(abs(state.amplitude(k) - oracle.get(k, 0)) for k in keys)


@criterion(7, "sparse simulation against the symbolic oracle")
class TestOracleEquivalence:
    @pytest.mark.parametrize("index", range(24))
    def test_random_element_circuit(self, index):
        rng = np.random.default_rng(7000 + index)
        n = 3 + index % 10
        circuit = _random_circuit(rng, n)
        u = circuit_unitary(circuit)
        idx = [circuit.registry.resolve(m).index for m in circuit.inputs]
        assert _max_deviation(circuit.run(), polynomial_amplitudes(n, idx, u)) <= 1e-12

    @pytest.mark.parametrize("index", range(8))
    def test_random_unitary_blocks(self, index):
        rng = np.random.default_rng(8000 + index)
        n = 12
        reg = ModeRegistry([(f"m{i}", "source") for i in range(n)])
        photons = [int(x) for x in rng.integers(0, n, size=2)]
        state = make_state(reg, [f"m{i}" for i in photons])
        total = np.eye(n, dtype=complex)
        for _ in range(5):
            k = int(rng.integers(2, 5))
            idx = [int(x) for x in rng.choice(n, size=k, replace=False)]
            u = random_unitary(k, rng)
            state = apply_linear_transform(state, u, [f"m{i}" for i in idx])
            total = total @ embed(u, idx, n)
        assert _max_deviation(state, polynomial_amplitudes(n, photons, total)) <= 1e-12

    @pytest.mark.parametrize("phi", [0.3, math.pi / 2, 2.0, -1.1])
    def test_bunching_terms(self, phi):
        # the literal printed splitter product, evaluated by the oracle alone
        circuit = build_core_circuit(phi=phi, exit_convention="port-exchange")
        oracle = polynomial_amplitudes(4, [0, 3], circuit_unitary(circuit))
        half_sin = math.sin(phi) / 2
        assert abs(oracle[(1, 1, 0, 0)] - half_sin) <= 1e-12
        assert abs(oracle[(0, 0, 1, 1)] + half_sin) <= 1e-12
        assert (2, 0, 0, 0) not in oracle and (0, 0, 0, 2) not in oracle
        assert _max_deviation(circuit.run(), oracle) <= 1e-12


def _with_phases(circuit, phases):
    elements = list(circuit.elements)
    at = next(i for i, e in enumerate(elements) if isinstance(e, SagnacPhase)) + 1
    elements[at:at] = [PhaseShift(m, th) for m, th in phases.items()]
    return circuit.with_elements(elements)


@criterion(8, "common phases factor out of the post-selected state")
class TestRobustness:
    @pytest.mark.parametrize("preset", ["core4", "full12"])
    def test_common_phases(self, preset):
        rng = np.random.default_rng(88)
        base_circuit = build_core_circuit() if preset == "core4" else build_full_circuit()
        for phi in rng.uniform(-2 * np.pi, 2 * np.pi, 50):
            base = simulate_postselected(base_circuit, phi).qubits
            th_h, th_v, th = rng.uniform(-np.pi, np.pi, 3)
            polarized = _with_phases(base_circuit, {"a.H": th_h, "b.H": th_h,
                                                    "a.V": th_v, "b.V": th_v})
            common = _with_phases(base_circuit, {m: th for m in ("a.H", "a.V", "b.H", "b.V")})
            for c in (polarized, common):
                assert abs(fidelity(base, simulate_postselected(c, phi).qubits) - 1) < 1e-12


@criterion(9, "finite-shot CHSH estimation")
class TestStatisticalEstimation:
    def test_bell_point(self):
        t0 = time.perf_counter()
        _, est = run_experiment(math.pi / 2, det=DetectorModel(1.0, seed=42, shots=10**6))
        elapsed = time.perf_counter() - t0
        assert abs(abs(est.S_hat) - 2.828) <= 3 * est.stderr
        assert elapsed < 30.0

    def test_stderr_scaling(self):
        errs = {n: run_experiment(math.pi / 2, det=DetectorModel(1.0, seed=42, shots=n))[1].stderr
                for n in (10**4, 10**5, 10**6)}
        for small, large in ((10**4, 10**5), (10**5, 10**6), (10**4, 10**6)):
            ratio = (errs[small] / errs[large]) / math.sqrt(large / small)
            assert 0.8 <= ratio <= 1.25

    def test_rate_without_rotation(self):
        n = 10**6
        _, est = run_experiment(0.0, det=DetectorModel(1.0, seed=42, shots=n))
        sigma = math.sqrt((1 / 16) * (15 / 16) / n)
        assert abs(est.coincidence_rate - 1 / 16) <= 3 * sigma


@criterion(10, "circuit language contract")
class TestParserContract:
    def test_bundled_core4(self):
        _, circuit = compile_source(bundled_source("core4"))
        post = simulate_postselected(circuit, math.pi / 2)
        assert fidelity(post.qubits, SINGLET) >= 1 - 1e-12

    def test_bundled_full12(self):
        _, circuit = compile_source(bundled_source("full12"))
        worst = max(abs(simulate_postselected(circuit, phi).probability - closed_form_P(phi))
                    for phi in RANDOM_PHIS)
        assert worst <= 1e-10

    def test_malformed_corpus(self, capsys):
        assert len(MALFORMED) >= 20
        for path in MALFORMED:
            source = path.read_text()
            with pytest.raises((ParseError, CompileError)) as info:
                compile_source(source)
            assert info.value.span is not None and info.value.span.within(source), path.name
            assert main(["parse-check", str(path)]) == 2, path.name
            err = capsys.readouterr().err
            span = info.value.span
            assert f"{path}:{span.line}:{span.column}: error:" in err
