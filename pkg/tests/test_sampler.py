import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sagnacbell.bell import (
    DEFAULT_SETTINGS,
    SINGLET,
    TwoQubitState,
    closed_form_S,
    correlator,
    postselected_state,
)
from sagnacbell.errors import PreconditionError
from sagnacbell.sampler import (
    BATCH_SIZE,
    OUTCOMES,
    DetectorModel,
    ShotRecords,
    _sample_batch,
    batch_generator,
    born_probabilities,
    born_sample,
    estimate_chsh,
    run_experiment,
)

R2 = 1 / math.sqrt(2)
HV = TwoQubitState(amp_HV=1)
Z = (0, 0, 1)


def _bell_point_cdfs():
    s = postselected_state(math.pi / 2)
    return np.array([np.cumsum(born_probabilities(s, u, v)) for _, u, v, _ in
                     DEFAULT_SETTINGS.pairs()])


class TestBorn:
    def test_singlet_same_axis(self):
        p = born_probabilities(SINGLET, (1, 0, 0), (1, 0, 0))
        assert p == pytest.approx([0, 0.5, 0.5, 0], abs=1e-15)

    def test_eigenstate_is_deterministic(self):
        assert born_probabilities(HV, Z, Z).tolist() == [0, 1, 0, 0]
        for r in (0.0, 0.3, 0.999999):
            assert born_sample(HV, Z, Z, r) == (+1, -1)

    def test_tilted_singlet(self):
        p = born_probabilities(SINGLET, (1, 0, 0), (R2, R2, 0))
        expected = (1 - R2) / 4
        assert p[0] == pytest.approx(expected, abs=1e-15)
        assert p[3] == pytest.approx(expected, abs=1e-15)
        assert expected == pytest.approx(0.07322, abs=1e-5)

    def test_monte_carlo_frequencies(self):
        u, v = (1, 0, 0), (R2, R2, 0)
        p = born_probabilities(SINGLET, u, v)
        rng = np.random.default_rng(7)
        cdf = np.cumsum(p)
        k = np.minimum(np.searchsorted(cdf, rng.random(10**6), side="right"), 3)
        freq = np.bincount(k, minlength=4) / 1e6
        sigma = np.sqrt(p * (1 - p) / 1e6)
        assert np.all(np.abs(freq - p) < 4 * sigma + 1e-12)

    def test_scalar_sampler_agrees_with_cdf(self):
        p = born_probabilities(SINGLET, (1, 0, 0), (R2, R2, 0))
        edges = np.cumsum(p)
        assert born_sample(SINGLET, (1, 0, 0), (R2, R2, 0), 0.0) == OUTCOMES[0]
        assert born_sample(SINGLET, (1, 0, 0), (R2, R2, 0), edges[0]) == OUTCOMES[1]
        assert born_sample(SINGLET, (1, 0, 0), (R2, R2, 0), edges[2]) == OUTCOMES[3]

    @pytest.mark.parametrize("rand", [-0.1, 1.0, 2.0])
    def test_rand_range(self, rand):
        with pytest.raises(PreconditionError):
            born_sample(SINGLET, Z, Z, rand)

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_expectation_is_correlator(self, seed):
        rng = np.random.default_rng(seed)
        z = rng.normal(size=4) + 1j * rng.normal(size=4)
        s = TwoQubitState.from_vector(z / np.linalg.norm(z))
        u, v = (x / np.linalg.norm(x) for x in rng.normal(size=(2, 3)))
        p = born_probabilities(s, u, v)
        assert p.sum() == pytest.approx(1, abs=1e-12)
        mean = sum(pk * a * b for pk, (a, b) in zip(p, OUTCOMES))
        assert mean == pytest.approx(correlator(s, u, v), abs=1e-12)


class TestDetectorModel:
    @pytest.mark.parametrize("kw", [{"efficiency": -0.1}, {"efficiency": 1.5}, {"shots": 0},
                                    {"seed": -1}])
    def test_rejects(self, kw):
        with pytest.raises(PreconditionError):
            DetectorModel(**kw)


class TestRunExperiment:
    def test_reproducible(self):
        det = DetectorModel(1.0, seed=11, shots=20_000)
        a, _ = run_experiment(math.pi / 2, det=det)
        b, _ = run_experiment(math.pi / 2, det=det)
        fa, fb = io.StringIO(), io.StringIO()
        a.write_ndjson(fa)
        b.write_ndjson(fb)
        assert fa.getvalue() == fb.getvalue()

    def test_seed_changes_stream(self):
        a, _ = run_experiment(1.0, det=DetectorModel(1.0, seed=1, shots=1000))
        b, _ = run_experiment(1.0, det=DetectorModel(1.0, seed=2, shots=1000))
        assert not np.array_equal(a.setting, b.setting)

    def test_batches_regenerate_independently(self):
        shots = BATCH_SIZE + 500
        recs, _ = run_experiment(math.pi / 2, det=DetectorModel(0.9, seed=5, shots=shots))
        setting, alice, bob = _sample_batch(batch_generator(5, 1), 500, 1 / 32,
                                            _bell_point_cdfs(), 0.9)
        assert np.array_equal(recs.setting[BATCH_SIZE:], setting)
        assert np.array_equal(recs.alice[BATCH_SIZE:], alice)
        assert np.array_equal(recs.bob[BATCH_SIZE:], bob)

    def test_zero_efficiency_is_undefined(self):
        recs, est = run_experiment(math.pi / 2, det=DetectorModel(0.0, seed=3, shots=5000))
        assert not est.defined and est.S_hat is None and est.stderr is None
        assert est.coincidence_rate == 0 and not recs.coincidence.any()

    def test_records_keep_non_coincidences(self):
        recs, est = run_experiment(0.0, det=DetectorModel(1.0, seed=4, shots=100_000))
        assert len(recs) == 100_000
        n = 100_000
        sigma = math.sqrt((1 / 16) * (15 / 16) / n)
        assert abs(est.coincidence_rate - 1 / 16) < 3 * sigma
        assert abs(est.S_hat) < 3 * est.stderr
        for r in list(recs)[:200]:
            assert r.coincidence == (r.alice_outcome is not None and r.bob_outcome is not None)

    def test_core_model_has_larger_rate(self):
        _, est = run_experiment(math.pi / 2, det=DetectorModel(1.0, seed=9, shots=20_000),
                                circuit="core4")
        assert est.coincidence_rate == pytest.approx(0.5, abs=0.02)

    def test_efficiency_does_not_bias(self):
        _, full = run_experiment(math.pi / 2, det=DetectorModel(1.0, seed=21, shots=400_000))
        _, half = run_experiment(math.pi / 2, det=DetectorModel(0.5, seed=22, shots=400_000))
        assert half.coincidence_rate == pytest.approx(full.coincidence_rate / 4, rel=0.05)
        assert abs(full.S_hat - half.S_hat) < 4 * math.hypot(full.stderr, half.stderr)

    def test_estimator_consistency(self):
        target = -closed_form_S(math.pi / 2)
        errs = {}
        for n in (10**4, 10**5, 10**6):
            _, est = run_experiment(math.pi / 2, det=DetectorModel(1.0, seed=42, shots=n))
            assert abs(est.S_hat - target) <= 4 * est.stderr
            errs[n] = est.stderr
        assert errs[10**4] > errs[10**5] > errs[10**6]
        assert 8 <= errs[10**4] / errs[10**6] <= 12.5


class TestEstimator:
    def test_hand_counted(self):
        # two coincidences per setting; correlators +1, 0, -1, +1
        setting = np.array([0, 0, 1, 1, 2, 2, 3, 3, 0], dtype=np.int8)
        alice = np.array([1, -1, 1, 1, 1, -1, -1, 1, 1], dtype=np.int8)
        bob = np.array([1, -1, 1, -1, -1, 1, -1, 1, 0], dtype=np.int8)
        est = estimate_chsh(ShotRecords(setting, alice, bob))
        assert est.correlators == {"ab": 1.0, "ab'": 0.0, "a'b": -1.0, "a'b'": 1.0}
        assert est.S_hat == 1 - 0 - 1 + 1
        assert est.stderr == pytest.approx(math.sqrt(1 / 2))
        assert est.coincidence_rate == 8 / 9

    def test_merge_order_independent(self):
        recs, est = run_experiment(1.2, det=DetectorModel(0.8, seed=8, shots=50_000))
        perm = np.random.default_rng(0).permutation(len(recs))
        shuffled = ShotRecords(recs.setting[perm], recs.alice[perm], recs.bob[perm])
        other = estimate_chsh(shuffled, seed=8)
        assert other.S_hat == est.S_hat and other.stderr == est.stderr


class TestNdjson:
    def test_schema(self):
        recs, _ = run_experiment(math.pi / 2, det=DetectorModel(0.7, seed=1, shots=3000))
        buf = io.StringIO()
        recs.write_ndjson(buf)
        lines = buf.getvalue().splitlines()
        assert len(lines) == 3000
        for i, line in enumerate(lines):
            obj = json.loads(line)
            assert list(obj) == ["shot", "setting", "alice", "bob", "coincidence"]
            assert obj["shot"] == i
            assert obj["setting"] in ("ab", "ab'", "a'b", "a'b'")
            assert obj["alice"] in (1, -1, None) and obj["bob"] in (1, -1, None)
            assert obj["coincidence"] == (obj["alice"] is not None and obj["bob"] is not None)
            assert obj == recs[i].to_json()
