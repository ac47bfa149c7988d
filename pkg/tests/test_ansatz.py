"""Coherent-state algebra and observables against analytic values and the
independent Fock-expansion oracle."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import fock_oracle
from davydov_nh import (
    AnsatzState,
    NormUnderflow,
    NumericalInconsistency,
    ShapeError,
    all_mode_occupations,
    mode_occupation,
    norm,
    normalized,
    overlap,
    record_observables,
    sigma_z,
    system_populations,
)
from davydov_nh import ansatz


def make_state(amps, disps):
    return AnsatzState(np.asarray(amps, dtype=complex), np.asarray(disps, dtype=complex))


def random_state(rng, m, ns, nb, scale=2.0):
    amps = rng.standard_normal((m, ns)) + 1j * rng.standard_normal((m, ns))
    disps = scale * (rng.standard_normal((m, nb)) + 1j * rng.standard_normal((m, nb)))
    return make_state(amps, disps)


class TestOverlap:
    def test_identical_displacements_give_unity(self):
        st_ = make_state([[1.0], [0.5]], [[0.3 + 0.4j], [0.3 + 0.4j]])
        s = overlap(st_)
        assert s[0, 1] == pytest.approx(1.0)

    def test_unit_vs_vacuum(self):
        st_ = make_state([[1.0], [0.0]], [[1.0], [0.0]])
        s = overlap(st_)
        assert s[0, 1] == pytest.approx(np.exp(-0.5))
        assert abs(s[0, 1] - 0.606531) < 1e-6

    def test_imaginary_vs_real_displacement(self):
        st_ = make_state([[1.0], [0.0]], [[1.0j], [1.0]])
        s = overlap(st_)
        assert s[0, 1] == pytest.approx(np.exp(-1.0 - 1.0j))
        assert abs(s[0, 1]) == pytest.approx(np.exp(-1.0))

    def test_gram_invariants_bulk(self):
        # unit diagonal and hermiticity exact, PSD up to numerical floor
        rng = np.random.default_rng(11)
        for _ in range(1000):
            m = int(rng.integers(1, 7))
            nb = int(rng.integers(0, 5))
            disps = rng.uniform(-5, 5, (m, nb)) + 1j * rng.uniform(-5, 5, (m, nb))
            s = overlap(make_state(np.ones((m, 1)), disps))
            assert np.array_equal(np.diag(s), np.ones(m))
            assert np.array_equal(s, s.conj().T)
            assert np.linalg.eigvalsh(s).min() > -1e-10

    @given(
        st.integers(1, 4), st.integers(1, 3),
        st.lists(st.floats(-5, 5), min_size=24, max_size=24),
    )
    @settings(max_examples=60, deadline=None)
    def test_gram_hermitian_property(self, m, nb, raw):
        vals = np.array(raw[: 2 * m * nb]).reshape(m, nb, 2)
        disps = vals[..., 0] + 1j * vals[..., 1]
        s = overlap(make_state(np.ones((m, 1)), disps))
        assert np.array_equal(s, s.conj().T)
        assert np.all(np.abs(s) <= 1.0 + 1e-12)


class TestNorm:
    def test_single_configuration_unit(self):
        st_ = make_state([[1.0, 0.0]], [[0.7 - 0.2j, 0.1]])
        assert norm(st_) == pytest.approx(1.0, abs=1e-14)

    def test_two_identical_configurations(self):
        st_ = make_state([[0.5], [0.5]], [[0.3], [0.3]])
        assert norm(st_) == pytest.approx(1.0, abs=1e-14)

    def test_two_configuration_interference(self):
        st_ = make_state([[0.5], [0.5]], [[0.0], [1.0]])
        expected = 0.5 + 0.5 * np.exp(-0.5)
        assert norm(st_) == pytest.approx(expected, abs=1e-12)
        assert norm(st_) == pytest.approx(0.803265, abs=1e-6)
        assert norm(st_) == pytest.approx(fock_oracle.norm(st_), abs=1e-9)

    def test_inconsistency_detected(self, monkeypatch):
        st_ = make_state([[1.0], [0.5]], [[0.0], [1.0]])
        bad = np.array([[1.0, 0.5j], [0.0, 1.0]])  # not hermitian
        monkeypatch.setattr(ansatz.kernels, "overlap_matrix", lambda a: bad)
        with pytest.raises(NumericalInconsistency):
            norm(st_)


class TestPopulations:
    def test_initial_up_vacuum(self):
        st_ = make_state([[1.0, 0.0]], [[0.0, 0.0, 0.0]])
        assert np.allclose(system_populations(st_), [1.0, 0.0])

    def test_sum_equals_norm(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            st_ = random_state(rng, 3, 3, 2)
            assert system_populations(st_).sum() == pytest.approx(norm(st_), abs=1e-9)

    def test_against_oracle(self):
        st_ = make_state([[0.5], [0.5]], [[0.0], [1.0]])
        assert system_populations(st_)[0] == pytest.approx(0.803265, abs=1e-6)
        assert np.allclose(system_populations(st_), fock_oracle.populations(st_), atol=1e-9)


class TestSigmaZ:
    def test_up(self):
        assert sigma_z(make_state([[1.0, 0.0]], [[0.0]])) == pytest.approx(1.0)

    def test_down(self):
        assert sigma_z(make_state([[0.0, 1.0]], [[0.0]])) == pytest.approx(-1.0)

    def test_balanced(self):
        amp = 1 / np.sqrt(2)
        assert sigma_z(make_state([[amp, amp]], [[0.0]])) == pytest.approx(0.0, abs=1e-14)

    def test_population_identity(self):
        rng = np.random.default_rng(17)
        for _ in range(50):
            st_ = random_state(rng, 2, 2, 2)
            pops = system_populations(st_)
            assert sigma_z(st_) == pops[0] - pops[1]

    def test_requires_two_levels(self):
        with pytest.raises(ShapeError):
            sigma_z(make_state([[1.0, 0.0, 0.0]], [[0.0]]))


class TestModeOccupation:
    def test_vacuum_zero(self):
        st_ = make_state([[1.0]], [[0.0, 0.0]])
        assert mode_occupation(st_, 0) == pytest.approx(0.0, abs=1e-14)
        assert mode_occupation(st_, 1) == pytest.approx(0.0, abs=1e-14)

    def test_single_coherent(self):
        st_ = make_state([[1.0]], [[2.0]])
        assert mode_occupation(st_, 0) == pytest.approx(4.0, abs=1e-12)

    def test_superposition_against_oracle(self):
        st_ = make_state([[0.5], [0.5]], [[0.0], [1.0]])
        assert mode_occupation(st_, 0) == pytest.approx(0.25, abs=1e-12)
        assert mode_occupation(st_, 0) == pytest.approx(
            fock_oracle.mode_occupations(st_)[0], abs=1e-9)

    def test_index_range(self):
        with pytest.raises(ShapeError):
            mode_occupation(make_state([[1.0]], [[0.0]]), 1)


class TestOracleEquivalence:
    """All observables vs the truncated-basis expansion, M <= 4, Nb <= 3."""

    def test_random_states(self):
        rng = np.random.default_rng(23)
        for _ in range(60):
            m = int(rng.integers(1, 5))
            ns = int(rng.integers(1, 4))
            nb = int(rng.integers(1, 4))
            st_ = random_state(rng, m, ns, nb, scale=1.0)
            assert norm(st_) == pytest.approx(fock_oracle.norm(st_), abs=1e-9)
            assert np.allclose(system_populations(st_), fock_oracle.populations(st_),
                               atol=1e-9)
            assert np.allclose(all_mode_occupations(st_),
                               fock_oracle.mode_occupations(st_), atol=1e-9)

    @given(st.data())
    @settings(max_examples=40, deadline=None)
    def test_norm_property(self, data):
        m = data.draw(st.integers(1, 4))
        nb = data.draw(st.integers(1, 3))
        flat = data.draw(st.lists(
            st.floats(-1.5, 1.5, allow_nan=False), min_size=2 * m * (1 + nb),
            max_size=2 * m * (1 + nb)))
        vals = np.array(flat).reshape(m, 1 + nb, 2)
        amps = vals[:, :1, 0] + 1j * vals[:, :1, 1]
        disps = vals[:, 1:, 0] + 1j * vals[:, 1:, 1]
        st_ = make_state(amps, disps)
        assert norm(st_) == pytest.approx(fock_oracle.norm(st_), abs=1e-9)


class TestNormalized:
    def test_unit_norm(self):
        st_ = make_state([[1.0, 0.0]], [[0.0]])
        assert normalized(1.0, st_) == pytest.approx(1.0)

    def test_quarter_norm(self):
        st_ = make_state([[0.5]], [[0.0]])
        assert norm(st_) == pytest.approx(0.25)
        assert normalized(0.5, st_) == pytest.approx(2.0)

    def test_underflow(self):
        st_ = make_state([[0.0]], [[0.0]])
        with pytest.raises(NormUnderflow):
            normalized(1.0, st_)


class TestState:
    def test_flatten_roundtrip(self):
        rng = np.random.default_rng(3)
        st_ = random_state(rng, 3, 2, 4)
        again = AnsatzState.from_flat(st_.flatten(), 3, 2, 4)
        assert np.array_equal(again.amplitudes, st_.amplitudes)
        assert np.array_equal(again.displacements, st_.displacements)

    def test_arrays_readonly(self):
        st_ = make_state([[1.0]], [[0.0]])
        with pytest.raises(ValueError):
            st_.amplitudes[0, 0] = 2.0

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            AnsatzState(np.ones((2, 2)), np.ones((3, 1)))

    def test_record_observables(self):
        st_ = make_state([[1.0, 0.0]], [[0.5, 0.0]])
        rec = record_observables(st_, 1.5)
        assert rec.time == 1.5
        assert rec.norm == pytest.approx(1.0)
        assert rec.sigma_z == pytest.approx(1.0)
        assert rec.total_bosons == pytest.approx(0.25)
        assert rec.populations.sum() == pytest.approx(rec.norm, abs=1e-9)
