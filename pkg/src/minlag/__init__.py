"""Minimal Lagrangian surfaces in CP^2 and their special Legendrian lifts.

Numerical pipeline: order-six twisted loop algebra utilities, Fuchsian
potentials, monodromy transport, SL(3) character variety classification,
a Gauss-Newton closing-condition solver, loop group Iwasawa factorization,
surface reconstruction on Fermat curves, geometric diagnostics, and
degenerate limit models.
"""

__version__ = "0.1.0"

from . import loopalg
from . import potential
from . import monodromy
from . import charvar
from . import solver
from . import iwasawa
from . import reconstruct
from . import geometry
from . import limits

__all__ = [
    "loopalg",
    "potential",
    "monodromy",
    "charvar",
    "solver",
    "iwasawa",
    "reconstruct",
    "geometry",
    "limits",
    "__version__",
]
