"""Brute-force oracle: expand every coherent state in a truncated number
basis and evaluate observables by explicit vector arithmetic.

Deliberately independent of the package's coherent-state algebra; only the
raw parameter arrays of a state are read.  Truncation is chosen per mode
from the largest displacement so the discarded tail mass stays below
1e-12.
"""

import numpy as np
from scipy.special import gammaln


def mode_truncation(abs_alpha_max: float) -> int:
    a2 = abs_alpha_max**2
    return int(np.ceil(a2 + 10.0 * np.sqrt(a2 + 1.0)))


def coherent_vector(alpha: complex, n_max: int) -> np.ndarray:
    n = np.arange(n_max + 1)
    log_norm = -0.5 * abs(alpha) ** 2
    if alpha == 0:
        vec = np.zeros(n_max + 1, dtype=np.complex128)
        vec[0] = 1.0
        return vec
    return np.exp(log_norm - 0.5 * gammaln(n + 1)) * np.asarray(alpha, dtype=np.complex128) ** n


def state_vector(state) -> tuple[np.ndarray, list]:
    """Dense (Ns, prod(n_max+1)) expansion of the superposition state."""
    amps = np.asarray(state.amplitudes)
    disps = np.asarray(state.displacements)
    m, ns = amps.shape
    nb = disps.shape[1]
    n_maxes = [mode_truncation(float(np.abs(disps[:, k]).max())) for k in range(nb)]
    dim_b = int(np.prod([n + 1 for n in n_maxes])) if nb else 1
    psi = np.zeros((ns, dim_b), dtype=np.complex128)
    for i in range(m):
        boson = np.ones(1, dtype=np.complex128)
        for k in range(nb):
            boson = np.kron(boson, coherent_vector(disps[i, k], n_maxes[k]))
        psi += amps[i][:, None] * boson[None, :]
    return psi, n_maxes


def norm(state) -> float:
    psi, _ = state_vector(state)
    return float(np.sum(np.abs(psi) ** 2))


def populations(state) -> np.ndarray:
    psi, _ = state_vector(state)
    return np.sum(np.abs(psi) ** 2, axis=1)


def mode_occupations(state) -> np.ndarray:
    psi, n_maxes = state_vector(state)
    nb = len(n_maxes)
    dens = np.abs(psi) ** 2
    grid = dens.reshape((psi.shape[0],) + tuple(n + 1 for n in n_maxes))
    out = np.zeros(nb)
    for k in range(nb):
        axes = tuple(i for i in range(grid.ndim) if i != 1 + k)
        levels = np.arange(n_maxes[k] + 1, dtype=float)
        out[k] = float(grid.sum(axis=axes) @ levels)
    return out
