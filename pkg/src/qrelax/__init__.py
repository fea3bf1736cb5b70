"""qrelax: numerical simulators for thermodynamic relaxation of open
quantum systems.

Subpackages by representation:

  core              parameters, grids, quadrature, spectral primitives
  operator_space    density-matrix master-equation kernels and evolution
  phase_space       Wigner / Klein-Kramers grid solvers
  moments           closed-form coefficients and Gaussian closure ODEs
  coordinate_space  overdamped quantum diffusion and dispersion laws
  cli               scenario-driven command line front end
"""

from .core import CoordGrid, PhaseGrid, PhysParams
from .errors import AccuracyWarning, ConfigError, InstabilityError
from .moments import MomentState, RelaxationModel

__all__ = [
    "PhysParams",
    "CoordGrid",
    "PhaseGrid",
    "MomentState",
    "RelaxationModel",
    "InstabilityError",
    "ConfigError",
    "AccuracyWarning",
]

__version__ = "0.1.0"
