"""Numerical laboratory for orbital measures of unitarily invariant infinite matrices."""

__version__ = "0.1.0"

from . import ensembles, haar, matrix_core, spectral, weak
from .ensembles import (
    build_ensemble,
    deterministic_diag,
    gaussian_complex,
    gaussian_hermitian,
    rank_one,
    scalar,
    zero,
)
from .haar import (
    Observable,
    haar_unitary,
    observable,
    orbital_average,
    orbital_sample_h,
    orbital_sample_z,
)
from .matrix_core import (
    CheckU,
    CornerMatrix,
    MatrixPrefix,
    as_prefix,
    conjugate_check_u,
    corner,
    frobenius_window,
    rule_prefix,
    tail,
)
from .spectral import (
    audit_frobenius_inequality_h,
    audit_tau_inequality_z,
    audit_trace_identity,
    boundedness_verdict,
    complex_profile,
    hermitian_profile,
    radial_profile,
)
from .weak import (
    EmpiricalMeasure,
    WindowMetric,
    default_test_family,
    levy_prohorov_estimate,
    precompactness_diagnostic,
    recurrence_estimate,
    w1_distance,
)
