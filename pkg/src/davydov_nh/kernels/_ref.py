"""Pure-numpy reference implementations of the hot kernels.

Selected automatically when the compiled extension is unavailable (or when
``DAVYDOV_NH_PURE_PYTHON=1``).  Both backends implement the same contract;
the compiled one is checked against this module in the test suite.

Conventions
-----------
A multi-component coherent-state wavefunction is parametrized by complex
amplitudes ``A[n, s]`` (n = 1..M configurations, s = 1..Ns system states)
and complex displacements ``alpha[n, k]`` (k = 1..Nb bosonic modes).  The
flattened parameter vector is ``u = [A.ravel(), alpha.ravel()]`` of length
``P = M*(Ns + Nb)``.

The Hamiltonian is passed in the generic normal-ordered form

    H = Hsys(t) (x) 1  +  sum_k omega_k b_k^dag b_k
        + sum_k ( Cdag_k b_k^dag + Cb_k b_k ),

with ``Hsys`` an Ns x Ns complex matrix and ``Cdag``/``Cb`` complex
(Nb, Ns, Ns) coupling tensors.  Non-Hermitian entries are taken as-is;
only the ket is evolved.
"""

import numpy as np

BACKEND = "python"


def overlap_matrix(alpha):
    """Coherent-state overlap matrix S with S[m,n] = <alpha_m|alpha_n>.

    S[m,n] = exp( sum_k alpha_mk^* alpha_nk
                  - (|alpha_mk|^2 + |alpha_nk|^2)/2 ).

    The diagonal is exactly 1 and S[n,m] = conj(S[m,n]) by construction.
    """
    alpha = np.ascontiguousarray(alpha, dtype=np.complex128)
    m_count = alpha.shape[0]
    half_sq = 0.5 * np.sum((alpha.real**2 + alpha.imag**2), axis=1)
    cross = np.conj(alpha) @ alpha.T
    expo = cross - half_sq[:, None] - half_sq[None, :]
    s = np.exp(expo)
    # enforce the exact algebraic structure against rounding noise
    iu = np.triu_indices(m_count, k=1)
    s[(iu[1], iu[0])] = np.conj(s[iu])
    np.fill_diagonal(s, 1.0)
    return s


def assemble_system(amps, alpha, smat, hsys, omega, coup_dag, coup):
    """Assemble the variational metric T and projection vector h.

    The tangent frame is the holomorphic (unnormalized) gauge, scaled per
    configuration so every entry stays finite:

        f_As  = |s> (x) |alpha_n>,
        f_ank = sum_s A[n,s] |s> (x) b_k^dag |alpha_n>,

    with T[j,l] = <f_j|f_l> and h[j] = <f_j|H|D>.  In this gauge the
    projected flow is exactly ``T @ v = -1j * h`` where v holds the scaled
    amplitude velocities and the displacement velocities; the chain-rule
    correction back to d/dt A is applied by the caller.
    """
    amps = np.asarray(amps, dtype=np.complex128)
    alpha = np.asarray(alpha, dtype=np.complex128)
    m, ns = amps.shape
    nb = alpha.shape[1]
    na = m * ns
    p = m * (ns + nb)

    ac = np.conj(amps)
    alc = np.conj(alpha)

    w = ac @ amps.T                                        # spin-traced density
    b = (alc * omega[None, :]) @ alpha.T                   # bath energy sandwich

    # coupling sums: gd[m] = sum_k alpha_mk^* Cdag_k, gk[n] = sum_k alpha_nk Cb_k
    if nb:
        gd = np.tensordot(alc, coup_dag, axes=([1], [0]))  # (m, ns, ns)
        gk = np.tensordot(alpha, coup, axes=([1], [0]))    # (n, ns, ns)
    else:
        gd = np.zeros((m, ns, ns), dtype=np.complex128)
        gk = np.zeros((m, ns, ns), dtype=np.complex128)

    # e[m,n,s,s'] = <s, alpha_m| H |s', alpha_n> / S[m,n]
    e = hsys[None, None, :, :] + gd[:, None, :, :] + gk[None, :, :, :]
    e = e + b[:, :, None, None] * np.eye(ns)[None, None, :, :]

    ph = np.einsum("ma,mnab,nb->mn", ac, e, amps)          # H sandwich density
    if nb:
        q = np.einsum("ma,jab,nb->mnj", ac, coup_dag, amps)

    t = np.empty((p, p), dtype=np.complex128)

    t_aa = smat[:, None, :, None] * np.eye(ns)[None, :, None, :]
    t[:na, :na] = t_aa.reshape(na, na)

    if nb:
        t_ab = np.einsum("mn,ns,mk->msnk", smat, amps, alc)
        t[:na, na:] = t_ab.reshape(na, m * nb)
        t[na:, :na] = t[:na, na:].conj().T

        ws = w * smat
        t_bb = np.einsum("mn,nj,mk->mjnk", ws, alpha, alc)
        t_bb += ws[:, None, :, None] * np.eye(nb)[None, :, None, :]
        t[na:, na:] = t_bb.reshape(m * nb, m * nb)

    h = np.empty(p, dtype=np.complex128)
    h[:na] = np.einsum("mn,mnab,nb->ma", smat, e, amps).reshape(na)
    if nb:
        h_b = (smat * ph) @ alpha
        h_b += ((smat * w) @ alpha) * omega[None, :]
        h_b += np.einsum("mn,mnj->mj", smat, q)
        h[na:] = h_b.reshape(m * nb)

    return t, h
