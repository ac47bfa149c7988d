"""Time-dependent variational propagation of the coherent-state wavefunction.

The flow follows from projecting the Schroedinger residual onto the tangent
space of the parametrized manifold (Dirac-Frenkel condition):

    <d_j D | (i d/dt - H) | D> = 0   =>   T v = -i h,

with T[j,l] = <d_j D|d_l D> and h[j] = <d_j D|H|D>.  The derivative chart
matters: the normalized coherent parameters (A, alpha) are not holomorphic
coordinates (the state depends on alpha^* through the normalization), so
the equations are assembled in the equivalent holomorphic gauge, where the
statement above is exact, and the solved velocities are mapped back to
d/dt(A, alpha) by the chain rule (see ``assemble_eom``).

H enters as-is; for non-Hermitian H only the ket is evolved, so the norm
of the state is not conserved.  The coherent basis is overcomplete, making
T generically near-singular; the linear systems are solved through a
spectrally truncated pseudo-inverse.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

from . import kernels
from .ansatz import AnsatzState, ObservableRecord, record_observables
from .errors import ShapeError, SingularMetric, StepRejected

DEFAULT_SVD_CUTOFF = 1e-8
# minimum size at which the certified Cholesky path beats plain eigh
_FAST_PATH_MIN_DIM = 48
# conditioning headroom required before trusting the Cholesky route
_FAST_PATH_MARGIN = 25.0


@dataclass
class GramSystem:
    """Variational linear system at one instant: metric, projection vector,
    and (after solving) the condition estimate and retained rank.

    The equations of motion read ``metric @ udot = -1j * rhs``.  When the
    assembler knows the coherent-state structure behind the metric it
    attaches it (``structure``), enabling an exact block-spectral solve for
    many-mode problems.
    """

    metric: np.ndarray
    rhs: np.ndarray
    condition: float | None = None
    rank: int | None = None
    structure: dict | None = None


@dataclass(frozen=True)
class IntegratorConfig:
    """Propagation window and integrator knobs.

    dt and the window are in the model's time unit.  ``svd_cutoff`` is the
    relative spectral cutoff of the metric pseudo-inverse.  ``seed`` feeds
    the de-degeneracy noise of the initial state only.
    """

    dt: float
    t_start: float
    t_end: float
    svd_cutoff: float = DEFAULT_SVD_CUTOFF
    sample_stride: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.t_end < self.t_start:
            raise ValueError("t_end must be >= t_start")
        if not 0.0 < self.svd_cutoff < 1.0:
            raise ValueError("svd_cutoff must lie in (0, 1)")
        if self.sample_stride < 1:
            raise ValueError("sample stride must be a positive integer")


@dataclass
class Trajectory:
    """Time series of observable records plus run metadata.

    ``error`` is None for a completed run, otherwise the tag of the
    numerical failure that aborted it (partial data retained).
    """

    records: list = field(default_factory=list)
    error: str | None = None
    meta: dict = field(default_factory=dict)

    def append(self, rec: ObservableRecord):
        self.records.append(rec)

    def __len__(self):
        return len(self.records)

    @property
    def times(self):
        return np.array([r.time for r in self.records])

    @property
    def norms(self):
        return np.array([r.norm for r in self.records])

    @property
    def populations(self):
        return np.array([r.populations for r in self.records])

    @property
    def mode_occupations(self):
        return np.array([r.mode_occupations for r in self.records])

    @property
    def total_bosons(self):
        return np.array([r.total_bosons for r in self.records])

    @property
    def sigma_z(self):
        if self.records and self.records[0].sigma_z is None:
            return None
        return np.array([r.sigma_z for r in self.records])


def default_dt(model, t_abs_max: float = 0.0) -> float:
    """Conservative default step: 1e-3 of the fastest model period."""
    return 1e-3 * 2.0 * math.pi / model.frequency_scale(t_abs_max)


def initial_state(model, multiplicity: int, seed: int = 0, amplitudes=None) -> AnsatzState:
    """Physical initial state in the first configuration; the remaining
    configurations start with zero amplitude and displacements drawn
    uniformly from a disk of radius 1e-3 (seeded) to lift the exact
    degeneracy of the metric.
    """
    if multiplicity < 1:
        raise ShapeError("multiplicity must be >= 1")
    ns, nb = model.n_system, model.n_modes
    a0 = model.initial_amplitudes() if amplitudes is None else np.asarray(amplitudes)
    if a0.shape != (ns,):
        raise ShapeError(f"initial amplitudes must have length {ns}")
    amps = np.zeros((multiplicity, ns), dtype=np.complex128)
    amps[0] = a0
    disps = np.zeros((multiplicity, nb), dtype=np.complex128)
    if multiplicity > 1 and nb:
        rng = np.random.default_rng(seed)
        r = 1e-3 * np.sqrt(rng.uniform(size=(multiplicity - 1, nb)))
        phi = rng.uniform(0.0, 2.0 * math.pi, size=(multiplicity - 1, nb))
        disps[1:] = r * np.exp(1j * phi)
    return AnsatzState(amps, disps)


def assemble_eom(state: AnsatzState, model, t: float) -> GramSystem:
    """Metric T and projection vector h of the variational flow at time t.

    T and h are tangent-space overlaps/projections in the (scaled)
    holomorphic gauge, in which the flow is exactly ``T v = -1j h``.  The
    solved vector v holds the displacement velocities directly; the
    amplitude rows hold scaled velocities, converted back to d/dt A by
    ``parameter_velocities``.  Energies are divided by the model's hbar so
    that time is directly the model's time unit.
    """
    if state.n_system != model.n_system or state.n_modes != model.n_modes:
        raise ShapeError(
            f"state ({state.n_system}, {state.n_modes}) does not match model "
            f"({model.n_system}, {model.n_modes})"
        )
    hb = model.hbar
    smat = kernels.overlap_matrix(state.displacements)
    hsys = np.ascontiguousarray(model.system_matrix(t) / hb)
    omega = np.ascontiguousarray(model.mode_frequencies_c / hb)
    cdag = np.ascontiguousarray(model.coupling_dag / hb)
    cb = np.ascontiguousarray(model.coupling_b / hb)
    t_mat, h_vec = kernels.assemble_system(
        state.amplitudes, state.displacements, smat, hsys, omega, cdag, cb
    )
    structure = {"amps": state.amplitudes, "alpha": state.displacements, "smat": smat}
    return GramSystem(metric=t_mat, rhs=h_vec, structure=structure)


def _solve_eigh(t_mat, rhs, cutoff, system):
    w, v = sla.eigh(t_mat, driver="evd", check_finite=False)
    wmax = float(w[-1])
    if wmax <= 0.0:
        raise SingularMetric("metric has no positive eigenvalues")
    keep = w > cutoff * wmax
    if not np.any(keep):
        raise SingularMetric("all metric eigenvalues fall below the cutoff")
    coeff = v[:, keep].conj().T @ rhs
    udot = v[:, keep] @ (coeff / w[keep])
    system.condition = wmax / float(w[keep].min())
    system.rank = int(np.count_nonzero(keep))
    return udot


def _solve_structured(system, cutoff):
    """Exact truncated pseudo-inverse exploiting the coherent-state metric
    structure.

    The only tangent directions coupled by the metric beyond a block-scalar
    action live in W = (amplitude block) + span{e_m (x) alpha_n}.  W is an
    exact invariant subspace of T; on its orthogonal complement T acts as
    (W_dens o S) (x) I, whose spectrum comes from an M x M matrix.  The
    truncated pseudo-inverse therefore splits into a small dense spectral
    solve (dimension <= M Ns + M^2) plus a closed-form block solve, both
    sharing the global sigma_max cutoff.
    """
    st = system.structure
    amps, alpha, smat = st["amps"], st["alpha"], st["smat"]
    m, ns = amps.shape
    nb = alpha.shape[1]
    na = m * ns
    h = system.rhs

    # orthonormal basis of the displacement profiles (shared by every block)
    q_full, r, _ = sla.qr(alpha.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r)) if r.size else np.zeros(0)
    if diag.size and diag[0] > 0.0:
        q_rank = int(np.count_nonzero(diag > 1e-13 * diag[0]))
    else:
        q_rank = 0
    qa = q_full[:, :q_rank]                                # (nb, q)

    cmat = (np.conj(amps) @ amps.T) * smat                 # (W o S), Hermitian PSD
    cval, cvec = sla.eigh(cmat, check_finite=False)

    # small invariant-subspace matrix in the basis [A-block; I_M (x) qa]
    p = np.conj(alpha) @ qa                                # (m, q): <alpha_m | qa_b>
    rq = qa.conj().T @ alpha.T                             # (q, m): <qa_b | alpha_n>
    dim_w = na + m * q_rank
    tw = np.empty((dim_w, dim_w), dtype=np.complex128)
    t_aa = smat[:, None, :, None] * np.eye(ns)[None, :, None, :]
    tw[:na, :na] = t_aa.reshape(na, na)
    if q_rank:
        b_ab = np.einsum("mn,ns,mb->msnb", smat, amps, p)
        tw[:na, na:] = b_ab.reshape(na, m * q_rank)
        tw[na:, :na] = tw[:na, na:].conj().T
        k_bb = np.einsum("mn,bn,mc->mbnc", cmat, rq, p)
        k_bb += cmat[:, None, :, None] * np.eye(q_rank)[None, :, None, :]
        tw[na:, na:] = k_bb.reshape(m * q_rank, m * q_rank)

    wv, vv = sla.eigh(tw, driver="evd", check_finite=False)
    sigma_max = float(max(wv[-1] if wv.size else 0.0,
                          cval[-1] if cval.size else 0.0, 0.0))
    if sigma_max <= 0.0:
        raise SingularMetric("metric has no positive eigenvalues")
    thr = cutoff * sigma_max

    # subspace part
    keep_w = wv > thr
    h_w = np.empty(dim_w, dtype=np.complex128)
    h_w[:na] = h[:na]
    h_al = h[na:].reshape(m, nb)
    if q_rank:
        coeff = h_al @ np.conj(qa)                         # (m, q)
        h_w[na:] = coeff.reshape(m * q_rank)
        h_perp = h_al - coeff @ qa.T
    else:
        h_perp = h_al
    u_w = vv[:, keep_w] @ ((vv[:, keep_w].conj().T @ h_w) / wv[keep_w])

    # block-scalar complement part
    mult = nb - q_rank
    keep_c = cval > thr
    u_alpha = np.zeros((m, nb), dtype=np.complex128)
    if mult > 0 and np.any(keep_c):
        cpinv = (cvec[:, keep_c] / cval[keep_c]) @ cvec[:, keep_c].conj().T
        u_alpha += cpinv @ h_perp
    if not np.any(keep_w) and not (mult > 0 and np.any(keep_c)):
        raise SingularMetric("all metric eigenvalues fall below the cutoff")

    u_alpha += (u_w[na:].reshape(m, q_rank) @ qa.T) if q_rank else 0.0
    udot = np.concatenate([u_w[:na], u_alpha.ravel()])

    kept = [wv[keep_w]] if np.any(keep_w) else []
    if mult > 0 and np.any(keep_c):
        kept.append(cval[keep_c])
    smallest = min(float(k.min()) for k in kept)
    system.condition = sigma_max / smallest
    system.rank = int(np.count_nonzero(keep_w)) + (
        mult * int(np.count_nonzero(keep_c)) if mult > 0 else 0
    )
    return udot


def _structured_applicable(system) -> bool:
    st = system.structure
    if not st:
        return False
    m, ns = st["amps"].shape
    nb = st["alpha"].shape[1]
    p = m * (ns + nb)
    dim_w = m * ns + m * min(m, nb)
    return nb > 0 and p >= 64 and 2 * dim_w <= p


def _try_cholesky(t_mat, rhs, cutoff, system):
    """Solve via Cholesky when the metric is certifiably full rank above the
    cutoff; the truncated pseudo-inverse then equals the plain inverse.
    Returns None when the certificate fails.
    """
    n = t_mat.shape[0]
    c, info = lapack.zpotrf(t_mat, lower=1, clean=0, overwrite_a=0)
    if info != 0:
        return None
    anorm = float(np.linalg.norm(t_mat, 1))
    rcond, info = lapack.zpocon(c, anorm, uplo="L")
    if info != 0 or not np.isfinite(rcond) or rcond <= _FAST_PATH_MARGIN * cutoff:
        return None
    x, info = lapack.zpotrs(c, rhs[:, None], lower=1)
    if info != 0:
        return None
    system.condition = 1.0 / float(rcond)
    system.rank = n
    return x[:, 0]


def regularized_solve(system: GramSystem, cutoff: float = DEFAULT_SVD_CUTOFF) -> np.ndarray:
    """Parameter velocities udot = pinv(T) (-i h) with singular values below
    ``cutoff * sigma_max`` discarded; records the condition estimate (and
    retained rank) on the system.

    T is Hermitian positive semi-definite, so its singular values coincide
    with its eigenvalues and the truncated pseudo-inverse is evaluated
    spectrally.  Route selection (all routes return the same vector up to
    roundoff): an exact invariant-subspace split when the coherent-state
    structure is attached and the mode count dominates; a Cholesky fast
    path when a condition estimate certifies that nothing falls below the
    cutoff; otherwise a dense eigendecomposition.
    """
    t_mat, rhs = system.metric, system.rhs
    if _structured_applicable(system):
        return -1j * _solve_structured(system, cutoff)
    if t_mat.shape[0] >= _FAST_PATH_MIN_DIM:
        fast = _try_cholesky(t_mat, rhs, cutoff, system)
        if fast is not None:
            return -1j * fast
    return -1j * _solve_eigh(t_mat, rhs, cutoff, system)


def parameter_velocities(state: AnsatzState, v: np.ndarray) -> np.ndarray:
    """Map solved tangent velocities to d/dt of the (A, alpha) parameters.

    Displacement velocities pass through; amplitude velocities pick up the
    normalization drift A * sum_k Re(alpha^* alphadot) of their
    configuration (chain rule between the holomorphic and normalized
    charts).
    """
    m, ns, nb = state.multiplicity, state.n_system, state.n_modes
    na = m * ns
    adot = v[:na].reshape(m, ns).copy()
    if nb:
        aldot = v[na:].reshape(m, nb)
        drift = np.sum(
            np.real(np.conj(state.displacements) * aldot), axis=1
        )
        adot += state.amplitudes * drift[:, None]
    return np.concatenate([adot.ravel(), v[na:]])


def _flow(state: AnsatzState, model, t: float, cutoff: float) -> np.ndarray:
    v = regularized_solve(assemble_eom(state, model, t), cutoff)
    return parameter_velocities(state, v)


def rk4_step(state: AnsatzState, model, t: float, dt: float,
             cutoff: float = DEFAULT_SVD_CUTOFF) -> AnsatzState:
    """One classical Runge-Kutta step of the variational flow; all
    parameters advance simultaneously.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    m, ns, nb = state.multiplicity, state.n_system, state.n_modes
    u0 = state.flatten()

    k1 = _flow(state, model, t, cutoff)
    k2 = _flow(AnsatzState.from_flat(u0 + 0.5 * dt * k1, m, ns, nb), model, t + 0.5 * dt, cutoff)
    k3 = _flow(AnsatzState.from_flat(u0 + 0.5 * dt * k2, m, ns, nb), model, t + 0.5 * dt, cutoff)
    k4 = _flow(AnsatzState.from_flat(u0 + dt * k3, m, ns, nb), model, t + dt, cutoff)

    u1 = u0 + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(u1.view(np.float64))):
        raise StepRejected(f"non-finite parameters after step at t={t:.6g}")
    return AnsatzState.from_flat(u1, m, ns, nb)


def _advance(state, model, t, dt, cutoff, max_halvings=3):
    """Advance by dt, retrying with halved substeps on rejection."""
    try:
        return rk4_step(state, model, t, dt, cutoff)
    except StepRejected:
        if max_halvings <= 0:
            raise
    half = 0.5 * dt
    mid = _advance(state, model, t, half, cutoff, max_halvings - 1)
    return _advance(mid, model, t + half, half, cutoff, max_halvings - 1)


def propagate(state: AnsatzState, model, cfg: IntegratorConfig, recorder=None) -> Trajectory:
    """Integrate from t_start to t_end, recording every ``sample_stride``
    steps (plus the initial and final points).  Deterministic for a given
    (state, model, cfg).  On numerical failure the partial trajectory is
    returned with its ``error`` tag set.
    """
    if recorder is None:
        recorder = record_observables
    span = cfg.t_end - cfg.t_start
    n_steps = max(0, int(round(span / cfg.dt)))
    # cover a non-multiple window with one trailing short step
    t_last = cfg.t_start + n_steps * cfg.dt
    short = span - n_steps * cfg.dt
    if short > 1e-12 * max(1.0, abs(span)):
        trailing = short
    else:
        trailing = None

    traj = Trajectory(meta={
        "dt": cfg.dt, "t_start": cfg.t_start, "t_end": cfg.t_end,
        "svd_cutoff": cfg.svd_cutoff, "sample_stride": cfg.sample_stride,
        "seed": cfg.seed, "multiplicity": state.multiplicity,
        "backend": kernels.backend_name(),
    })
    traj.append(recorder(state, cfg.t_start))
    t = cfg.t_start
    try:
        for i in range(1, n_steps + 1):
            state = _advance(state, model, t, cfg.dt, cfg.svd_cutoff)
            t = cfg.t_start + i * cfg.dt
            if i % cfg.sample_stride == 0 or (i == n_steps and trailing is None):
                traj.append(recorder(state, t))
        if trailing is not None:
            state = _advance(state, model, t_last, trailing, cfg.svd_cutoff)
            traj.append(recorder(state, cfg.t_end))
    except (SingularMetric, StepRejected) as exc:
        traj.error = f"{type(exc).__name__}: {exc}"
    traj.meta["final_state"] = state
    return traj
