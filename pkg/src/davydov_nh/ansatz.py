"""Variational state built from superpositions of displaced oscillator states.

The wavefunction is a sum of M configurations, each a product of a system
amplitude vector and a multimode coherent state:

    |Psi> = sum_{n=1}^{M} sum_s A[n,s] |s> (x) |alpha_n>,
    |alpha_n> = exp( sum_k alpha[n,k] b_k^dag - h.c. ) |vac>.

All observables reduce to the coherent-state identities

    <a|b_k|b> = b_k <a|b>,   <a|b_k^dag|b> = a_k^* <a|b>,
    <a|b_k^dag b_k|b> = a_k^* b_k <a|b>,

so everything below is quadratic forms in the amplitudes weighted by the
overlap matrix.  Operations are pure functions of an immutable snapshot.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import NormUnderflow, NumericalInconsistency, ShapeError

# imaginary residue allowed on physically real quantities
EPS_NUM = 1e-10
# norm threshold below which normalized observables are refused
EPS_DIV = 1e-14


def _readonly(arr):
    out = np.array(arr, dtype=np.complex128, order="C")
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class AnsatzState:
    """Immutable snapshot of the variational parameters.

    amplitudes: (M, Ns) complex, dimensionless.
    displacements: (M, Nb) complex, dimensionless.
    """

    amplitudes: np.ndarray
    displacements: np.ndarray

    def __post_init__(self):
        amps = _readonly(self.amplitudes)
        disps = _readonly(self.displacements)
        if amps.ndim != 2 or disps.ndim != 2:
            raise ShapeError("amplitudes and displacements must be 2-D")
        if amps.shape[0] != disps.shape[0]:
            raise ShapeError(
                f"multiplicity mismatch: {amps.shape[0]} amplitude rows vs "
                f"{disps.shape[0]} displacement rows"
            )
        if amps.shape[0] < 1 or amps.shape[1] < 1:
            raise ShapeError("need at least one configuration and one system state")
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "displacements", disps)

    @property
    def multiplicity(self):
        return self.amplitudes.shape[0]

    @property
    def n_system(self):
        return self.amplitudes.shape[1]

    @property
    def n_modes(self):
        return self.displacements.shape[1]

    @property
    def n_params(self):
        return self.multiplicity * (self.n_system + self.n_modes)

    def is_finite(self) -> bool:
        return bool(
            np.all(np.isfinite(self.amplitudes.view(np.float64)))
            and np.all(np.isfinite(self.displacements.view(np.float64)))
        )

    def flatten(self) -> np.ndarray:
        """Parameter vector u = [A.ravel(), alpha.ravel()]."""
        return np.concatenate([self.amplitudes.ravel(), self.displacements.ravel()])

    @classmethod
    def from_flat(cls, u, multiplicity, n_system, n_modes):
        na = multiplicity * n_system
        amps = u[:na].reshape(multiplicity, n_system)
        disps = u[na:].reshape(multiplicity, n_modes)
        return cls(amps, disps)


def overlap(state: AnsatzState) -> np.ndarray:
    """Coherent-state Gram matrix S with S[m,n] = <alpha_m|alpha_n>.

    Hermitian with unit diagonal; positive semi-definite.
    """
    return kernels.overlap_matrix(state.displacements)


def _real_checked(value: complex, what: str) -> float:
    scale = max(1.0, abs(value.real))
    if abs(value.imag) > EPS_NUM * scale:
        raise NumericalInconsistency(
            f"{what} has imaginary residue {value.imag:.3e} (tolerance {EPS_NUM:.0e}); "
            "state is likely corrupted"
        )
    return value.real


def norm(state: AnsatzState, smat=None) -> float:
    """Squared norm <Psi|Psi> = sum_{m,n,s} A_ms^* A_ns S_mn.

    Under non-Hermitian evolution this is the non-unitary normalization
    factor; it is not conserved.
    """
    if smat is None:
        smat = overlap(state)
    a = state.amplitudes
    val = complex(np.einsum("ms,ns,mn->", np.conj(a), a, smat))
    return _real_checked(val, "norm")


def system_populations(state: AnsatzState, smat=None) -> np.ndarray:
    """Unnormalized populations of each system state (length Ns)."""
    if smat is None:
        smat = overlap(state)
    a = state.amplitudes
    vals = np.einsum("ms,ns,mn->s", np.conj(a), a, smat)
    resid = float(np.max(np.abs(vals.imag)))
    if resid > EPS_NUM * max(1.0, float(np.max(np.abs(vals.real)))):
        raise NumericalInconsistency(
            f"populations have imaginary residue {resid:.3e}"
        )
    return vals.real.copy()


def sigma_z(state: AnsatzState, smat=None) -> float:
    """Unnormalized <sigma_z> = pop(up) - pop(down); two-state systems only."""
    if state.n_system != 2:
        raise ShapeError(f"sigma_z requires a two-state system, got Ns={state.n_system}")
    pops = system_populations(state, smat)
    return float(pops[0] - pops[1])


def mode_occupation(state: AnsatzState, k: int, smat=None) -> float:
    """Unnormalized occupation <b_k^dag b_k> of mode k (0-based)."""
    if not 0 <= k < state.n_modes:
        raise ShapeError(f"mode index {k} out of range [0, {state.n_modes})")
    if smat is None:
        smat = overlap(state)
    a = state.amplitudes
    al = state.displacements
    weight = (np.conj(a) @ a.T) * smat
    val = complex(np.einsum("mn,m,n->", weight, np.conj(al[:, k]), al[:, k]))
    return _real_checked(val, f"occupation of mode {k}")


def all_mode_occupations(state: AnsatzState, smat=None) -> np.ndarray:
    """Vector of <b_k^dag b_k> for every mode; one Gram evaluation."""
    if smat is None:
        smat = overlap(state)
    a = state.amplitudes
    al = state.displacements
    weight = (np.conj(a) @ a.T) * smat
    vals = np.einsum("mn,mk,nk->k", weight, np.conj(al), al)
    resid = float(np.max(np.abs(vals.imag))) if vals.size else 0.0
    if resid > EPS_NUM * max(1.0, float(np.max(np.abs(vals.real))) if vals.size else 1.0):
        raise NumericalInconsistency(
            f"mode occupations have imaginary residue {resid:.3e}"
        )
    return vals.real.copy()


def normalized(value: float, state: AnsatzState, smat=None) -> float:
    """Divide an unnormalized expectation value by the current norm.

    Raises NormUnderflow once the state has decayed below EPS_DIV; callers
    should stop recording normalized quantities at that point.
    """
    nf = norm(state, smat)
    if nf <= EPS_DIV:
        raise NormUnderflow(f"norm {nf:.3e} <= {EPS_DIV:.0e}; state has fully decayed")
    return value / nf


@dataclass(frozen=True)
class ObservableRecord:
    """Snapshot of all recorded observables at one instant (model time units).

    Populations and occupations are unnormalized (norm-weighted); divide by
    ``norm`` for the normalized versions.
    """

    time: float
    norm: float
    populations: np.ndarray
    mode_occupations: np.ndarray
    total_bosons: float
    sigma_z: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "populations", np.asarray(self.populations, dtype=float))
        object.__setattr__(
            self, "mode_occupations", np.asarray(self.mode_occupations, dtype=float)
        )


def record_observables(state: AnsatzState, t: float) -> ObservableRecord:
    """Evaluate the standard observable set with a single Gram evaluation."""
    smat = overlap(state)
    nf = norm(state, smat)
    pops = system_populations(state, smat)
    occ = all_mode_occupations(state, smat)
    sz = float(pops[0] - pops[1]) if state.n_system == 2 else None
    return ObservableRecord(
        time=t,
        norm=nf,
        populations=pops,
        mode_occupations=occ,
        total_bosons=float(occ.sum()),
        sigma_z=sz,
    )
