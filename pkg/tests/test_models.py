"""Model Hamiltonians: bath discretization, dispersion, matrix elements."""

import numpy as np
import pytest

from davydov_nh import (
    AnsatzState,
    BathModeTable,
    HtcModel,
    JcModel,
    NlzModel,
    ShapeError,
    discretize_ohmic_bath,
    h_matrix_element,
    htc_phonon_modes,
    nlz_system_matrix,
)
from davydov_nh.models import HBAR_EV_FS, ohmic_spectral_density


def make_jc(nb=0, gamma=0.0, kappa=0.0, coupling=0.0, freqs=None, w0=1.0):
    if freqs is None:
        freqs = np.linspace(1.0, 1.3, nb) if nb else np.zeros(0)
    return JcModel(
        omega_qubit=w0, gamma=gamma,
        mode_frequencies=np.asarray(freqs, dtype=float),
        mode_decays=np.full(len(freqs), kappa),
        couplings=np.full(len(freqs), coupling),
    )


def make_htc(kappa=0.0, lam=0.1, n=10, bw=0.5):
    return HtcModel(omega_cavity=1.0, omega_qubit=1.0, omega_rabi=0.1,
                    n_qubits=n, qubit_phonon_coupling=lam,
                    phonon_center=0.1, phonon_bandwidth=bw, kappa=kappa)


class TestOhmicBath:
    def test_sum_rule_matches_integral(self):
        # 60 modes on (0, 4 w_c]: quadrature within 2% of the analytic integral
        alpha, wc = 0.002, 10.0
        table = discretize_ohmic_bath(alpha, wc, 60)
        x = 4.0
        analytic = 2 * alpha * wc**2 * (1.0 - np.exp(-x) * (1.0 + x))
        assert (table.couplings**2).sum() == pytest.approx(analytic, rel=0.02)

    def test_single_mode(self):
        table = discretize_ohmic_bath(0.1, 1.0, 1, omega_max=4.0)
        assert table.frequencies[0] == pytest.approx(2.0)
        assert table.couplings[0] ** 2 == pytest.approx(
            ohmic_spectral_density(2.0, 0.1, 1.0) * 4.0)

    def test_zero_coupling(self):
        table = discretize_ohmic_bath(0.0, 1.0, 8)
        assert np.all(table.couplings == 0.0)

    def test_frequencies_sorted_positive(self):
        table = discretize_ohmic_bath(0.01, 5.0, 40)
        assert table.frequencies[0] > 0
        assert np.all(np.diff(table.frequencies) > 0)

    def test_invalid_args(self):
        with pytest.raises(ValueError):
            discretize_ohmic_bath(0.1, -1.0, 5)
        with pytest.raises(ValueError):
            discretize_ohmic_bath(0.1, 1.0, 0)


class TestBathModeTable:
    def test_rejects_nonpositive_frequency(self):
        with pytest.raises(ValueError):
            BathModeTable(np.array([0.0, 1.0]), np.array([0.1, 0.1]))

    def test_rejects_unsorted(self):
        with pytest.raises(ValueError):
            BathModeTable(np.array([2.0, 1.0]), np.array([0.1, 0.1]))

    def test_rejects_length_mismatch(self):
        with pytest.raises(ShapeError):
            BathModeTable(np.array([1.0]), np.array([0.1, 0.2]))


class TestHtcPhonons:
    def test_band_edges(self):
        m = make_htc()
        table = htc_phonon_modes(m)
        w0, bw = m.phonon_center, m.phonon_bandwidth
        assert table.frequencies.min() == pytest.approx(w0 * (1 - bw))  # k = 0
        assert table.frequencies.max() == pytest.approx(w0 * (1 + bw))  # k = pi
        assert table.n_modes == m.n_qubits

    def test_flat_band(self):
        table = htc_phonon_modes(make_htc(bw=0.0))
        assert np.allclose(table.frequencies, 0.1)

    def test_phases_unimodular(self):
        table = htc_phonon_modes(make_htc())
        assert np.allclose(np.abs(table.phases), 1.0)

    def test_zero_frequency_rejected(self):
        with pytest.raises(ValueError):
            htc_phonon_modes(make_htc(bw=1.0))  # k=0 mode would sit at zero


class TestNlzMatrix:
    def test_real_spectrum_below_threshold(self):
        m = NlzModel(sweep_velocity=1.0, tunneling=0.5, g=0.5)
        vals = np.linalg.eigvals(nlz_system_matrix(m, 0.0))
        assert np.allclose(sorted(vals.real), [-0.35355, 0.35355], atol=1e-5)
        assert np.allclose(vals.imag, 0.0, atol=1e-12)

    def test_imaginary_spectrum_above_threshold(self):
        m = NlzModel(sweep_velocity=1.0, tunneling=0.5, g=2.0)
        vals = np.linalg.eigvals(nlz_system_matrix(m, 0.0))
        assert np.allclose(sorted(vals.imag), [-0.5, 0.5], atol=1e-12)
        assert np.allclose(vals.real, 0.0, atol=1e-12)

    def test_degenerate_at_threshold(self):
        m = NlzModel(sweep_velocity=1.0, tunneling=0.5, g=1.0)
        vals = np.linalg.eigvals(nlz_system_matrix(m, 0.0))
        assert np.allclose(vals, 0.0, atol=1e-12)

    def test_sweep_diagonal(self):
        m = NlzModel(sweep_velocity=0.5, tunneling=0.2, g=0.0)
        h = nlz_system_matrix(m, 4.0)
        assert h[0, 0] == pytest.approx(1.0)
        assert h[1, 1] == pytest.approx(-1.0)


class TestMatrixElements:
    def test_jc_bare_qubit(self):
        m = make_jc(nb=2)
        st = AnsatzState(np.array([[1.0, 0.0]]), np.zeros((1, 2), complex))
        val = h_matrix_element(m, st, 0, 0, 0, 0)
        assert val == pytest.approx(0.5 * m.omega_qubit)

    def test_nlz_offdiagonal_scales_with_overlap(self):
        m = NlzModel(sweep_velocity=1.0, tunneling=0.4, g=0.3)
        st = AnsatzState(np.ones((2, 2)), np.zeros((2, 0), complex))
        val = h_matrix_element(m, st, 0, 1, 1, 0)  # <down| H |up>
        assert val == pytest.approx(0.4 * (1 - 0.3))
        # with one mode, the coherent overlap multiplies in
        bath = BathModeTable(np.array([1.0]), np.array([0.0]))
        m2 = NlzModel(sweep_velocity=1.0, tunneling=0.4, g=0.3, bath=bath)
        st2 = AnsatzState(np.ones((2, 2)), np.array([[0.0], [1.0]], dtype=complex))
        val2 = h_matrix_element(m2, st2, 0, 1, 1, 0)
        assert val2 == pytest.approx(0.4 * 0.7 * np.exp(-0.5))

    def test_htc_photon_diagonal_loss(self):
        m = make_htc(kappa=0.002)
        ph = m.photon_index
        st = AnsatzState(
            np.eye(m.n_system, dtype=complex)[:1].repeat(1, axis=0) * 0 + (
                np.zeros((1, m.n_system), complex)), np.zeros((1, m.n_modes), complex))
        amps = np.zeros((1, m.n_system), complex)
        amps[0, ph] = 1.0
        st = AnsatzState(amps, np.zeros((1, m.n_modes), complex))
        val = h_matrix_element(m, st, 0, ph, 0, ph)
        assert val.real == pytest.approx(m.omega_cavity)
        assert val.imag == pytest.approx(-0.002)

    def test_index_validation(self):
        m = make_jc(nb=1, coupling=0.1)
        st = AnsatzState(np.array([[1.0, 0.0]]), np.zeros((1, 1), complex))
        with pytest.raises(ShapeError):
            h_matrix_element(m, st, 1, 0, 0, 0)
        with pytest.raises(ShapeError):
            h_matrix_element(m, st, 0, 2, 0, 0)

    @pytest.mark.parametrize("model", [
        NlzModel(sweep_velocity=0.7, tunneling=0.3, g=0.0,
                 bath=BathModeTable(np.array([0.5, 2.0]), np.array([0.1, 0.3]))),
        make_jc(nb=2, gamma=0.0, kappa=0.0, coupling=0.25),
        make_htc(kappa=0.0, n=4),
    ])
    def test_lossless_tables_hermitian(self, model):
        rng = np.random.default_rng(31)
        mm = 3
        st = AnsatzState(
            rng.standard_normal((mm, model.n_system))
            + 1j * rng.standard_normal((mm, model.n_system)),
            0.5 * (rng.standard_normal((mm, model.n_modes))
                   + 1j * rng.standard_normal((mm, model.n_modes))),
        )
        t = 0.37
        for m in range(mm):
            for n in range(mm):
                for s in range(model.n_system):
                    for sp in range(model.n_system):
                        a = h_matrix_element(model, st, m, s, n, sp, t)
                        b = h_matrix_element(model, st, n, sp, m, s, t)
                        assert a == pytest.approx(np.conj(b), abs=1e-12)

    def test_nonhermitian_when_lossy(self):
        model = make_jc(nb=1, gamma=0.1, coupling=0.2)
        st = AnsatzState(np.array([[1.0, 0.5]]), np.array([[0.2 + 0.1j]]))
        a = h_matrix_element(model, st, 0, 0, 0, 0)
        assert a.imag == pytest.approx(-0.05)


class TestModelValidation:
    def test_nlz_negative_g(self):
        with pytest.raises(ValueError):
            NlzModel(sweep_velocity=1.0, tunneling=0.1, g=-0.5)

    def test_jc_negative_decay(self):
        with pytest.raises(ValueError):
            make_jc(nb=1, gamma=-0.1)

    def test_htc_odd_qubit_count(self):
        with pytest.raises(ValueError):
            make_htc(n=9)

    def test_htc_bandwidth_range(self):
        with pytest.raises(ValueError):
            HtcModel(omega_cavity=1.0, omega_qubit=1.0, omega_rabi=0.1,
                     n_qubits=10, qubit_phonon_coupling=0.1,
                     phonon_center=0.1, phonon_bandwidth=1.5)

    def test_htc_units(self):
        m = make_htc()
        assert m.hbar == HBAR_EV_FS
        assert m.photon_index == m.n_qubits
