"""Instance-to-control operator learning on optimal control benchmarks.

The package pairs classical adjoint-based trajectory optimizers, which
produce ground-truth optimal controls, with neural operators that map a
problem instance directly to its optimal control function. Benchmarks
measure objective-gap accuracy and inference speedup.
"""

__version__ = "1.0.0"

from . import envs, operator, solvers
from .errors import (ConfigError, DataFormatError, DivergenceError,
                     DomainError, InfeasibleError, NcolabError,
                     NonFiniteError, NumericalError, SchemaError, ShapeError,
                     SingularityError)

__all__ = [
    "ConfigError", "DataFormatError", "DivergenceError", "DomainError",
    "InfeasibleError", "NcolabError", "NonFiniteError", "NumericalError",
    "SchemaError", "ShapeError", "SingularityError", "envs", "operator",
    "solvers", "__version__",
]
