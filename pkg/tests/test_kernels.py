"""Backend equivalence: the compiled kernels must reproduce the pure-numpy
reference bit-for-bit up to floating-point associativity."""

import numpy as np
import pytest

from davydov_nh.kernels import available_backends, backend_name

CASES = [(1, 2, 0), (1, 1, 1), (2, 1, 1), (3, 2, 3), (5, 2, 60), (4, 11, 10)]


def _random_inputs(rng, m, ns, nb):
    a = rng.standard_normal((m, ns)) + 1j * rng.standard_normal((m, ns))
    al = rng.standard_normal((m, nb)) + 1j * rng.standard_normal((m, nb))
    hs = rng.standard_normal((ns, ns)) + 1j * rng.standard_normal((ns, ns))
    om = rng.standard_normal(nb) + 1j * rng.standard_normal(nb)
    cd = rng.standard_normal((nb, ns, ns)) + 1j * rng.standard_normal((nb, ns, ns))
    cb = rng.standard_normal((nb, ns, ns)) + 1j * rng.standard_normal((nb, ns, ns))
    return a, al, hs, om, cd, cb


def test_compiled_backend_active():
    # the production install is expected to carry the extension
    assert backend_name() in ("compiled", "python")


@pytest.mark.parametrize("m,ns,nb", CASES)
def test_backends_agree(m, ns, nb):
    backends = available_backends()
    if "compiled" not in backends:
        pytest.skip("compiled extension not built")
    ref, core = backends["python"], backends["compiled"]
    rng = np.random.default_rng(100 + m)
    a, al, hs, om, cd, cb = _random_inputs(rng, m, ns, nb)
    s_ref = ref.overlap_matrix(al)
    s_core = core.overlap_matrix(al)
    assert np.allclose(s_ref, s_core, atol=1e-14, rtol=1e-12)
    t_ref, h_ref = ref.assemble_system(a, al, s_ref, hs, om, cd, cb)
    t_core, h_core = core.assemble_system(a, al, s_core, hs, om, cd, cb)
    scale_t = max(1.0, float(np.abs(t_ref).max()))
    scale_h = max(1.0, float(np.abs(h_ref).max()))
    assert np.abs(t_ref - t_core).max() < 1e-12 * scale_t
    assert np.abs(h_ref - h_core).max() < 1e-12 * scale_h


@pytest.mark.parametrize("m,ns,nb", CASES)
def test_metric_hermitian_psd(m, ns, nb):
    from davydov_nh import kernels
    rng = np.random.default_rng(7 + m)
    a, al, hs, om, cd, cb = _random_inputs(rng, m, ns, nb)
    s = kernels.overlap_matrix(al)
    t, _ = kernels.assemble_system(a, al, s, hs, om, cd, cb)
    assert np.abs(t - t.conj().T).max() < 1e-10
    w = np.linalg.eigvalsh(t)
    assert w.min() > -1e-10 * max(1.0, w.max())
