"""Model Hamiltonians: swept two-level system, lossy multimode cavity QED,
and a qubit-ensemble/cavity/phonon system with photon loss.

Every model reduces to one normal-ordered generic form consumed by the
variational engine and the Fock-space reference solver:

    H = Hsys(t) (x) 1 + sum_k omega_k b_k^dag b_k
        + sum_k ( Cdag_k (x) b_k^dag + Cb_k (x) b_k ),

where ``Hsys`` is a (possibly non-Hermitian, possibly time-dependent)
Ns x Ns matrix, ``omega_k`` may carry a negative imaginary part (mode
loss), and ``Cdag_k``/``Cb_k`` are Ns x Ns coupling matrices per mode.

Units: the two-level models use hbar = 1 with energies in the reference
frequency unit; the ensemble-cavity model uses energies in eV and time in
fs with hbar = 0.6582119 eV fs.
"""

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .ansatz import AnsatzState
from .errors import ShapeError

HBAR_EV_FS = 0.6582119  # eV fs


def _readonly_f(arr):
    out = np.array(arr, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class BathModeTable:
    """Discretized bosonic environment: frequencies, couplings, optional
    per-site phase factors (used by models with site-resolved coupling).

    frequencies: strictly positive, ascending.  couplings: same length.
    phases: complex (Nb, N_sites) or None.
    """

    frequencies: np.ndarray
    couplings: np.ndarray
    phases: np.ndarray | None = None

    def __post_init__(self):
        freqs = _readonly_f(self.frequencies)
        coups = _readonly_f(self.couplings)
        if freqs.ndim != 1 or coups.shape != freqs.shape:
            raise ShapeError("frequencies and couplings must be equal-length 1-D arrays")
        if freqs.size and freqs.min() <= 0:
            raise ValueError("bath frequencies must be strictly positive")
        if np.any(np.diff(freqs) < 0):
            raise ValueError("bath frequencies must be sorted ascending")
        object.__setattr__(self, "frequencies", freqs)
        object.__setattr__(self, "couplings", coups)
        if self.phases is not None:
            ph = np.array(self.phases, dtype=np.complex128)
            if ph.shape[0] != freqs.size:
                raise ShapeError("phase table must have one row per mode")
            ph.setflags(write=False)
            object.__setattr__(self, "phases", ph)

    @property
    def n_modes(self):
        return self.frequencies.size

    @classmethod
    def empty(cls):
        return cls(np.zeros(0), np.zeros(0))


def ohmic_spectral_density(omega, alpha, omega_c):
    """J(w) = 2 alpha w exp(-w/w_c)."""
    omega = np.asarray(omega, dtype=float)
    return 2.0 * alpha * omega * np.exp(-omega / omega_c)


def discretize_ohmic_bath(alpha, omega_c, n_modes, omega_max=None) -> BathModeTable:
    """Discretize J(w) = 2 alpha w exp(-w/w_c) on a linear midpoint grid.

    Modes sit at w_k = (k - 1/2) dw with dw = omega_max / n_modes and carry
    couplings lambda_k = sqrt(J(w_k) dw), so that sum lambda_k^2
    approximates the integral of J up to omega_max (default 4 w_c).
    """
    if alpha < 0:
        raise ValueError("coupling strength alpha must be >= 0")
    if omega_c <= 0:
        raise ValueError("cutoff frequency must be positive")
    if n_modes < 1:
        raise ValueError("need at least one bath mode")
    if omega_max is None:
        omega_max = 4.0 * omega_c
    if omega_max <= 0:
        raise ValueError("omega_max must be positive")
    dw = omega_max / n_modes
    freqs = (np.arange(1, n_modes + 1) - 0.5) * dw
    coups = np.sqrt(ohmic_spectral_density(freqs, alpha, omega_c) * dw)
    return BathModeTable(freqs, coups)


@dataclass(frozen=True)
class NlzModel:
    """Two-level avoided crossing swept at velocity v with asymmetric
    (non-Hermitian) level coupling of strength g, optionally coupled to a
    bosonic bath through the same asymmetric matrix.

    System part:  [[v t / 2, delta], [delta (1 - g), -v t / 2]].
    Bath part:    sum_k w_k b_k^dag b_k
                  + [[0, 1], [1 - g, 0]] sum_k (lambda_k / 2)(b_k^dag + b_k).

    g = 0 recovers the Hermitian problem; g = 1 is the exceptional point.
    """

    sweep_velocity: float
    tunneling: float
    g: float = 0.0
    bath: BathModeTable = None

    def __post_init__(self):
        if self.g < 0:
            raise ValueError("non-Hermiticity strength g must be >= 0")
        if self.bath is None:
            object.__setattr__(self, "bath", BathModeTable.empty())

    n_system = 2
    hbar = 1.0

    @property
    def n_modes(self):
        return self.bath.n_modes

    @cached_property
    def coupling_matrix(self):
        m = np.array([[0.0, 1.0], [1.0 - self.g, 0.0]], dtype=np.complex128)
        m.setflags(write=False)
        return m

    def system_matrix(self, t: float) -> np.ndarray:
        d = self.tunneling
        return np.array(
            [
                [0.5 * self.sweep_velocity * t, d],
                [d * (1.0 - self.g), -0.5 * self.sweep_velocity * t],
            ],
            dtype=np.complex128,
        )

    @cached_property
    def mode_frequencies_c(self):
        return self.bath.frequencies.astype(np.complex128)

    @cached_property
    def coupling_dag(self):
        return 0.5 * self.bath.couplings[:, None, None] * self.coupling_matrix[None, :, :]

    @cached_property
    def coupling_b(self):
        # b and b^dag couple through the same matrix
        return self.coupling_dag

    def initial_amplitudes(self):
        return np.array([1.0, 0.0], dtype=np.complex128)

    def frequency_scale(self, t_abs: float = 0.0) -> float:
        scales = [abs(self.tunneling), abs(0.5 * self.sweep_velocity * t_abs)]
        if self.n_modes:
            scales.append(float(self.bath.frequencies.max()))
        return max(scales + [1e-30])


def nlz_system_matrix(model: NlzModel, t: float) -> np.ndarray:
    """System-only 2x2 matrix [[vt/2, d],[d(1-g), -vt/2]] at time t."""
    return model.system_matrix(t)


@dataclass(frozen=True)
class JcModel:
    """Two-level emitter exchanging one excitation with lossy cavity modes
    under the rotating-wave approximation.

    H = (w0/2) sigma_z - i (gamma/2) |e><e|
        + sum_k (w_k - i kappa_k / 2) a_k^dag a_k
        + sum_k (g_k / 2)(sigma_- a_k^dag + sigma_+ a_k).
    """

    omega_qubit: float
    gamma: float
    mode_frequencies: np.ndarray
    mode_decays: np.ndarray
    couplings: np.ndarray

    def __post_init__(self):
        freqs = _readonly_f(self.mode_frequencies)
        decays = _readonly_f(self.mode_decays)
        coups = _readonly_f(self.couplings)
        if not (freqs.shape == decays.shape == coups.shape) or freqs.ndim != 1:
            raise ShapeError("mode tables must be equal-length 1-D arrays")
        if self.gamma < 0 or (decays.size and decays.min() < 0):
            raise ValueError("decay rates must be non-negative (loss only)")
        object.__setattr__(self, "mode_frequencies", freqs)
        object.__setattr__(self, "mode_decays", decays)
        object.__setattr__(self, "couplings", coups)

    n_system = 2
    hbar = 1.0

    @property
    def n_modes(self):
        return self.mode_frequencies.size

    @cached_property
    def _hsys(self):
        w0, g = self.omega_qubit, self.gamma
        return np.array(
            [[0.5 * w0 - 0.5j * g, 0.0], [0.0, -0.5 * w0]], dtype=np.complex128
        )

    def system_matrix(self, t: float) -> np.ndarray:
        return self._hsys.copy()

    @cached_property
    def mode_frequencies_c(self):
        return self.mode_frequencies - 0.5j * self.mode_decays

    @cached_property
    def coupling_dag(self):
        # sigma_- on the b^dag side: |g><e|
        lower = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=np.complex128)
        return 0.5 * self.couplings[:, None, None] * lower[None, :, :]

    @cached_property
    def coupling_b(self):
        raise_ = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=np.complex128)
        return 0.5 * self.couplings[:, None, None] * raise_[None, :, :]

    def initial_amplitudes(self):
        return np.array([1.0, 0.0], dtype=np.complex128)

    def frequency_scale(self, t_abs: float = 0.0) -> float:
        scales = [abs(self.omega_qubit)]
        if self.n_modes:
            scales.append(float(np.abs(self.mode_frequencies).max()))
        return max(scales + [1e-30])

    def loss_expectation(self, populations, mode_occupations) -> float:
        """2 <Gamma> assembled from the declared decay rates (unnormalized)."""
        return float(
            self.gamma * populations[0] + np.dot(self.mode_decays, mode_occupations)
        )


@dataclass(frozen=True)
class HtcModel:
    """N two-level emitters collectively coupled to one cavity photon and
    site-diagonally to a dispersive phonon band, with phenomenological
    photon loss, restricted to the single-excitation manifold.

    System basis (Ns = N + 1): states 0..N-1 carry the excitation on
    emitter n+1; state N is the one-photon state.  The photon state
    acquires the loss term -i kappa |ph><ph|.  Energies in eV, time in fs.
    """

    omega_cavity: float
    omega_qubit: float
    omega_rabi: float
    n_qubits: int
    qubit_phonon_coupling: float
    phonon_center: float
    phonon_bandwidth: float
    kappa: float = 0.0

    def __post_init__(self):
        if self.n_qubits < 2 or self.n_qubits % 2:
            raise ValueError("qubit count must be a positive even integer")
        if not 0.0 <= self.phonon_bandwidth <= 1.0:
            raise ValueError("phonon bandwidth must lie in [0, 1]")
        if self.kappa < 0:
            raise ValueError("cavity loss must be non-negative")

    hbar = HBAR_EV_FS

    @property
    def n_system(self):
        return self.n_qubits + 1

    @property
    def n_modes(self):
        return self.n_qubits

    @property
    def photon_index(self):
        return self.n_qubits

    @cached_property
    def phonons(self) -> BathModeTable:
        return htc_phonon_modes(self)

    @cached_property
    def _hsys(self):
        n = self.n_qubits
        h = np.zeros((n + 1, n + 1), dtype=np.complex128)
        for i in range(n):
            h[i, i] = self.omega_qubit
        h[n, n] = self.omega_cavity - 1j * self.kappa
        gc = self.omega_rabi / math.sqrt(n)
        h[:n, n] = gc
        h[n, :n] = gc
        return h

    def system_matrix(self, t: float) -> np.ndarray:
        return self._hsys.copy()

    @cached_property
    def mode_frequencies_c(self):
        return self.phonons.frequencies.astype(np.complex128)

    @cached_property
    def coupling_dag(self):
        n, ns = self.n_qubits, self.n_system
        tab = self.phonons
        out = np.zeros((tab.n_modes, ns, ns), dtype=np.complex128)
        pref = -self.qubit_phonon_coupling / math.sqrt(n)
        for k in range(tab.n_modes):
            for i in range(n):
                out[k, i, i] = pref * tab.frequencies[k] * tab.phases[k, i]
        out.setflags(write=False)
        return out

    @cached_property
    def coupling_b(self):
        out = np.conj(self.coupling_dag)
        out.setflags(write=False)
        return out

    def initial_amplitudes(self):
        a = np.zeros(self.n_system, dtype=np.complex128)
        a[self.photon_index] = 1.0
        return a

    def frequency_scale(self, t_abs: float = 0.0) -> float:
        scales = [abs(self.omega_cavity), abs(self.omega_qubit)]
        if self.phonons.n_modes:
            scales.append(float(self.phonons.frequencies.max()))
        return max(scales) / self.hbar  # rad/fs

    def loss_expectation(self, populations, mode_occupations) -> float:
        """2 <Gamma>/hbar from the declared photon loss rate, in 1/fs."""
        return float(2.0 * self.kappa * populations[self.photon_index] / self.hbar)


def htc_phonon_modes(model: HtcModel) -> BathModeTable:
    """Phonon band with linear dispersion in |momentum|.

    Momenta k_l = 2 pi l / N for l = -N/2+1 .. N/2; frequencies
    w = w0 [1 + bw (2|k|/pi - 1)]; per-site phases exp(-i k n) for sites
    n = 1..N attach the b^dag coupling of each mode to each emitter.
    Modes are returned sorted by frequency (phases stay aligned).
    """
    n = model.n_qubits
    ls = np.arange(-n // 2 + 1, n // 2 + 1)
    k = 2.0 * np.pi * ls / n
    freqs = model.phonon_center * (1.0 + model.phonon_bandwidth * (2.0 * np.abs(k) / np.pi - 1.0))
    if freqs.min() <= 0:
        raise ValueError(
            "phonon dispersion reaches a non-positive frequency; "
            "reduce the bandwidth or raise the band center"
        )
    sites = np.arange(1, n + 1)
    phases = np.exp(-1j * k[:, None] * sites[None, :])
    order = np.argsort(freqs, kind="stable")
    return BathModeTable(freqs[order], np.ones(n), phases[order])


def h_matrix_element(
    model, state: AnsatzState, m: int, s: int, n: int, s_p: int, t: float = 0.0
) -> complex:
    """Exact matrix element <config m, s| H(t) |config n, s'>.

    Uses the closed-form coherent-state identities; returned in the model's
    raw energy units.  Non-Hermitian couplings act on the ket side.
    """
    if state.n_modes != model.n_modes or state.n_system != model.n_system:
        raise ShapeError(
            f"state ({state.n_system} states, {state.n_modes} modes) does not match "
            f"model ({model.n_system} states, {model.n_modes} modes)"
        )
    mm = state.multiplicity
    if not (0 <= m < mm and 0 <= n < mm):
        raise ShapeError(f"configuration index out of range [0, {mm})")
    ns = model.n_system
    if not (0 <= s < ns and 0 <= s_p < ns):
        raise ShapeError(f"system index out of range [0, {ns})")

    am = state.displacements[m]
    an = state.displacements[n]
    smn = np.exp(
        np.sum(np.conj(am) * an) - 0.5 * (np.sum(np.abs(am) ** 2) + np.sum(np.abs(an) ** 2))
    )
    val = model.system_matrix(t)[s, s_p]
    if model.n_modes:
        if s == s_p:
            val = val + np.sum(model.mode_frequencies_c * np.conj(am) * an)
        val = val + np.sum(model.coupling_dag[:, s, s_p] * np.conj(am))
        val = val + np.sum(model.coupling_b[:, s, s_p] * an)
    return complex(val * smn)
