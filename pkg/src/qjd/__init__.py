"""Joint probability distributions for tuples of Hermitian observables."""

from .errors import (
    DimensionMismatch,
    InvalidInput,
    NonnegativityViolation,
    NormalizationViolation,
    NotCommuting,
    NotHermitian,
    QjdError,
)
from .jointdist import (
    JointDistribution,
    OutcomeGrid,
    QjdConfig,
    born,
    margenau_hill_joint,
    marginal,
    qjd_joint,
    sequential_joint,
    standard_commuting_joint,
    total_variation,
    wasserstein1,
)
from .matrix import (
    DensityState,
    HermitianObservable,
    UnitaryMatrix,
    adjoint,
    commutator_norm,
    haar_unitary,
    random_density,
    random_hermitian,
)
from .spectral import SpectralMeasure, conjugate, eigendecompose, projector_for

__version__ = "0.1.0"
