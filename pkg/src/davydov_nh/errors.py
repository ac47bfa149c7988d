"""Exception types shared across the package."""


class DavydovError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(DavydovError, ValueError):
    """Array dimensions or index ranges do not match the declared problem."""


class NumericalInconsistency(DavydovError):
    """A physically real quantity acquired an imaginary residue above tolerance.

    Usually indicates a corrupted state (integrator blow-up caught late).
    """


class NormUnderflow(DavydovError):
    """The wavefunction norm fell below the division threshold."""


class SingularMetric(DavydovError):
    """Every singular value of the variational metric underflowed the cutoff."""


class StepRejected(DavydovError):
    """An integrator step produced non-finite variational parameters."""


class TruncationError(DavydovError):
    """A Fock-space truncation failed its convergence gate."""


class ConfigError(DavydovError):
    """An experiment configuration is malformed; message names the key."""
