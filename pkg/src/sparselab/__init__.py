"""Random sparse Jacobi matrices: mobility edges, local dimensions, and Kronecker sums."""

from .errors import ComputeError, InadmissibleParameters, SparseLabError, ValidationError
from .measure import AtomicMeasure
from .theory import ModelParams, SpectralWindow

__version__ = "0.1.0"

__all__ = [
    "AtomicMeasure",
    "ComputeError",
    "InadmissibleParameters",
    "ModelParams",
    "SparseLabError",
    "SpectralWindow",
    "ValidationError",
    "__version__",
]
