"""Brute-force reference solvers, independent of the variational engine.

Two routes: dense integration of the Schroedinger equation in a truncated
number-state basis (with a truncation convergence gate), and the closed
single-excitation equations of the lossy cavity model.  A dense eigenvalue
scan over (time, non-Hermiticity) grids classifies real/complex spectral
phases.
"""

from dataclasses import dataclass, replace

import numpy as np

from .ansatz import ObservableRecord
from .errors import NormUnderflow, ShapeError, TruncationError
from .tdvp import IntegratorConfig, Trajectory

FOCK_GATE_TOL = 1e-8


@dataclass(frozen=True)
class FockSpaceVector:
    """State vector on system (x) truncated number basis.

    coefficients has length Ns * (n_max+1)^Nb, reshaped internally to
    (Ns, n_max+1, ..., n_max+1).
    """

    n_system: int
    n_modes: int
    n_max: int
    coefficients: np.ndarray

    def __post_init__(self):
        coeff = np.array(self.coefficients, dtype=np.complex128).ravel()
        expected = self.n_system * (self.n_max + 1) ** self.n_modes
        if coeff.size != expected:
            raise ShapeError(
                f"coefficient count {coeff.size} != Ns*(n_max+1)^Nb = {expected}"
            )
        coeff.setflags(write=False)
        object.__setattr__(self, "coefficients", coeff)

    def grid(self):
        return self.coefficients.reshape(
            (self.n_system,) + (self.n_max + 1,) * self.n_modes
        )

    def embedded(self, n_max: int) -> "FockSpaceVector":
        """Zero-padded copy on a larger truncation."""
        if n_max < self.n_max:
            raise ShapeError("can only embed into a larger truncation")
        g = self.grid()
        pad = [(0, 0)] + [(0, n_max - self.n_max)] * self.n_modes
        return FockSpaceVector(self.n_system, self.n_modes, n_max, np.pad(g, pad).ravel())


def fock_initial_state(model, n_max: int, amplitudes=None) -> FockSpaceVector:
    """System amplitudes (x) bosonic vacuum on the truncated basis."""
    ns, nb = model.n_system, model.n_modes
    a0 = model.initial_amplitudes() if amplitudes is None else np.asarray(amplitudes)
    grid = np.zeros((ns,) + (n_max + 1,) * nb, dtype=np.complex128)
    grid[(slice(None),) + (0,) * nb] = a0
    return FockSpaceVector(ns, nb, n_max, grid.ravel())


def _mode_operators(n_max):
    n = n_max + 1
    lower = np.diag(np.sqrt(np.arange(1, n)), 1)  # annihilation
    return lower, lower.T.copy(), np.diag(np.arange(n, dtype=float))


def _kron_chain(ops):
    out = ops[0]
    for op in ops[1:]:
        out = np.kron(out, op)
    return out


def build_fock_hamiltonian(model, t: float, n_max: int) -> np.ndarray:
    """Dense H(t) on system (x) truncated number basis, in units of the
    model's hbar per time unit (ready for i d/dt psi = H psi)."""
    ns, nb = model.n_system, model.n_modes
    dim_b = (n_max + 1) ** nb
    eye_b = np.eye(dim_b)
    h = np.kron(model.system_matrix(t), eye_b).astype(np.complex128)
    if nb:
        low, raise_, num = _mode_operators(n_max)
        eye_m = np.eye(n_max + 1)
        for k in range(nb):
            ops_n = [eye_m] * nb
            ops_n[k] = num
            h += np.kron(np.eye(ns) * model.mode_frequencies_c[k], _kron_chain(ops_n))
            ops_r = [eye_m] * nb
            ops_r[k] = raise_
            h += np.kron(model.coupling_dag[k], _kron_chain(ops_r))
            ops_l = [eye_m] * nb
            ops_l[k] = low
            h += np.kron(model.coupling_b[k], _kron_chain(ops_l))
    return h / model.hbar


def _fock_record(psi, model, n_max, t) -> ObservableRecord:
    ns, nb = model.n_system, model.n_modes
    g = psi.reshape((ns,) + (n_max + 1,) * nb)
    dens = (g.real**2 + g.imag**2)
    pops = dens.reshape(ns, -1).sum(axis=1)
    occ = np.zeros(nb)
    levels = np.arange(n_max + 1, dtype=float)
    for k in range(nb):
        axes = tuple(i for i in range(1 + nb) if i != 1 + k)
        occ[k] = float(np.tensordot(dens.sum(axis=axes), levels, axes=1))
    nf = float(pops.sum())
    return ObservableRecord(
        time=t,
        norm=nf,
        populations=pops,
        mode_occupations=occ,
        total_bosons=float(occ.sum()),
        sigma_z=float(pops[0] - pops[1]) if ns == 2 else None,
    )


def _rk4_dense(model, psi0, n_max, cfg: IntegratorConfig) -> Trajectory:
    # H(t) is affine in t for every model here: split once, avoid rebuilds
    h0 = build_fock_hamiltonian(model, 0.0, n_max)
    h1 = build_fock_hamiltonian(model, 1.0, n_max) - h0

    def rhs(psi, t):
        return -1j * (h0 @ psi + t * (h1 @ psi))

    span = cfg.t_end - cfg.t_start
    n_steps = max(0, int(round(span / cfg.dt)))
    traj = Trajectory(meta={"n_max": n_max, "dt": cfg.dt, "solver": "fock-rk4"})
    psi = psi0.astype(np.complex128).copy()
    traj.append(_fock_record(psi, model, n_max, cfg.t_start))
    t = cfg.t_start
    for i in range(1, n_steps + 1):
        k1 = rhs(psi, t)
        k2 = rhs(psi + 0.5 * cfg.dt * k1, t + 0.5 * cfg.dt)
        k3 = rhs(psi + 0.5 * cfg.dt * k2, t + 0.5 * cfg.dt)
        k4 = rhs(psi + cfg.dt * k3, t + cfg.dt)
        psi += (cfg.dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = cfg.t_start + i * cfg.dt
        if i % cfg.sample_stride == 0 or i == n_steps:
            traj.append(_fock_record(psi, model, n_max, t))
    traj.meta["final_psi"] = psi
    return traj


def fock_propagate(model, initial: FockSpaceVector, cfg: IntegratorConfig,
                   gate_tol: float = FOCK_GATE_TOL, max_doublings: int = 4) -> Trajectory:
    """Integrate i d/dt psi = H(t) psi on the truncated basis.

    The truncation is validated by rerunning at doubled n_max: the final
    norm must move by less than ``gate_tol`` (relative to its magnitude).
    The truncation auto-doubles until the gate passes; TruncationError
    after ``max_doublings`` failures.  The returned trajectory is the one
    at the first truncation that passed the gate.
    """
    if initial.n_system != model.n_system or initial.n_modes != model.n_modes:
        raise ShapeError("initial vector does not match the model dimensions")
    n_max = initial.n_max
    current = _rk4_dense(model, initial.coefficients, n_max, cfg)
    for _ in range(max_doublings):
        doubled = initial.embedded(2 * n_max)
        check = _rk4_dense(model, doubled.coefficients, 2 * n_max, cfg)
        ref = max(1.0, abs(current.norms[-1]))
        if abs(check.norms[-1] - current.norms[-1]) < gate_tol * ref:
            current.meta["gate_n_max"] = 2 * n_max
            return current
        n_max *= 2
        current = check
    raise TruncationError(
        f"final norm still moving at n_max={n_max}; truncated basis not converged"
    )


@dataclass(frozen=True)
class SpectrumGrid:
    """Dense eigenvalues over a (time, non-Hermiticity) grid.

    eigenvalues[i, j] holds the spectrum at (g_grid[i], t_grid[j]), sorted
    by real part (ties by imaginary part); max_imag[i, j] is the largest
    imaginary part at that point.
    """

    t_grid: np.ndarray
    g_grid: np.ndarray
    eigenvalues: np.ndarray
    max_imag: np.ndarray

    def threshold_g(self, tol: float = 1e-6) -> float | None:
        """Smallest g whose spectrum goes complex anywhere in the window."""
        hit = np.nonzero(self.max_imag.max(axis=1) > tol)[0]
        return float(self.g_grid[hit[0]]) if hit.size else None


def spectrum_scan(model, t_grid, g_grid, n_max: int) -> SpectrumGrid:
    """Eigenvalues of the full (system + modes) Hamiltonian on the grid."""
    t_grid = np.asarray(t_grid, dtype=float)
    g_grid = np.asarray(g_grid, dtype=float)
    if t_grid.size == 0 or g_grid.size == 0:
        raise ShapeError("time and g grids must be non-empty")
    dim = model.n_system * (n_max + 1) ** model.n_modes
    eigs = np.empty((g_grid.size, t_grid.size, dim), dtype=np.complex128)
    mimag = np.empty((g_grid.size, t_grid.size))
    for i, g in enumerate(g_grid):
        mod = replace(model, g=float(g))
        h0 = build_fock_hamiltonian(mod, 0.0, n_max)
        h1 = build_fock_hamiltonian(mod, 1.0, n_max) - h0
        real_ok = not (np.any(h0.imag) or np.any(h1.imag))
        for j, t in enumerate(t_grid):
            h = h0 + t * h1
            vals = np.linalg.eigvals(h.real if real_ok else h)
            order = np.lexsort((vals.imag, vals.real))
            eigs[i, j] = vals[order]
            mimag[i, j] = vals.imag.max()
    return SpectrumGrid(t_grid, g_grid, eigs, mimag)


def jc_single_excitation_solve(model, t_end: float, dt: float, sample_stride: int = 1):
    """Closed equations of the lossy-cavity model in the single-excitation
    sector, starting from the bare excited emitter:

        i d/dt c_e  = (w0 - i gamma)/2 c_e + sum_k (g_k/2) c_gk,
        i d/dt c_gk = (w_k - w0/2 - i kappa_k/2) c_gk + (g_k/2) c_e.

    Returns (times, c_e, c_gk) sampled every ``sample_stride`` steps.
    """
    nb = model.n_modes
    diag_e = -0.5j * (model.omega_qubit - 1j * model.gamma)
    diag_k = -1j * (model.mode_frequencies - 0.5 * model.omega_qubit
                    - 0.5j * model.mode_decays)
    half_g = 0.5 * model.couplings

    def rhs(y):
        ce, cg = y[0], y[1:]
        out = np.empty_like(y)
        out[0] = diag_e * ce - 1j * np.dot(half_g, cg)
        out[1:] = diag_k * cg - 1j * half_g * ce
        return out

    n_steps = max(0, int(round(t_end / dt)))
    y = np.zeros(nb + 1, dtype=np.complex128)
    y[0] = 1.0
    times, ce_out, cg_out = [0.0], [y[0]], [y[1:].copy()]
    for i in range(1, n_steps + 1):
        k1 = rhs(y)
        k2 = rhs(y + 0.5 * dt * k1)
        k3 = rhs(y + 0.5 * dt * k2)
        k4 = rhs(y + dt * k3)
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if i % sample_stride == 0 or i == n_steps:
            times.append(i * dt)
            ce_out.append(y[0])
            cg_out.append(y[1:].copy())
    return np.array(times), np.array(ce_out), np.array(cg_out)


def jc_population(c_e, c_gk) -> np.ndarray:
    """Normalized excited-state population |c_e|^2 / (|c_e|^2 + sum |c_gk|^2)."""
    c_e = np.asarray(c_e)
    c_gk = np.asarray(c_gk)
    denom = np.abs(c_e) ** 2 + np.sum(np.abs(c_gk) ** 2, axis=-1)
    if np.any(denom < 1e-14):
        raise NormUnderflow("total single-excitation weight below 1e-14")
    return np.abs(c_e) ** 2 / denom
