"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: input problems exit 2, conditioning
problems exit 3, internal numerical failures exit 4.
"""


class CvqgprError(Exception):
    """Base class for all package errors."""


class InputError(CvqgprError):
    """Invalid user-supplied data, parameters, or file contents."""


class EncodingError(InputError):
    """Amplitude encoding constraint violated (c(v) must exceed max |v_i|)."""


class ConditioningError(CvqgprError):
    """Covariance matrix is singular or its condition number exceeds the cap."""


class QuantizationOverflowError(CvqgprError):
    """zeta too small: quantized matrix entries exceed the configured cap."""


class DecompositionError(CvqgprError):
    """A supposed reflection term fails H^2 = I or symmetry."""


class GridResolutionError(CvqgprError):
    """Quadrature grid too coarse for the requested evolution."""


class DegenerateRunError(CvqgprError):
    """A pipeline run lost all usable signal (e.g. zero calibration norm)."""


class NumericalError(CvqgprError):
    """Internal numerical failure not attributable to user input."""
