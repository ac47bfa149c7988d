"""Variational coherent-state dynamics for non-Hermitian open quantum systems.

Public surface:

- ``ansatz``: the variational state and its observables.
- ``models``: swept two-level, lossy multimode cavity, and ensemble-cavity
  Hamiltonians plus bath discretization.
- ``tdvp``: equation-of-motion assembly, regularized solves, propagation.
- ``exact``: independent brute-force reference solvers.
- ``cli``: configuration-driven experiment runner (``davydov-nh``).
"""

__version__ = "0.1.0"

from .ansatz import (
    AnsatzState,
    ObservableRecord,
    all_mode_occupations,
    mode_occupation,
    norm,
    normalized,
    overlap,
    record_observables,
    sigma_z,
    system_populations,
)
from .errors import (
    ConfigError,
    DavydovError,
    NormUnderflow,
    NumericalInconsistency,
    ShapeError,
    SingularMetric,
    StepRejected,
    TruncationError,
)
from .models import (
    BathModeTable,
    HtcModel,
    JcModel,
    NlzModel,
    discretize_ohmic_bath,
    h_matrix_element,
    htc_phonon_modes,
    nlz_system_matrix,
)
from .tdvp import (
    GramSystem,
    IntegratorConfig,
    Trajectory,
    assemble_eom,
    default_dt,
    initial_state,
    propagate,
    regularized_solve,
    rk4_step,
)
from .exact import (
    FockSpaceVector,
    SpectrumGrid,
    fock_initial_state,
    fock_propagate,
    jc_population,
    jc_single_excitation_solve,
    spectrum_scan,
)
