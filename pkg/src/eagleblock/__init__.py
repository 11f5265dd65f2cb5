"""Masked-block matrix completion solvers and benchmark harness.

Subpackages/modules:

* `matcore` - dense kernels (power iteration, symmetric eig, min-norm
  least squares, orthonormal bases)
* `problemgen` - seeded problem generators, noise, machine partitions,
  diversity index, binary fixtures
* `eagle` - the centralized conditioning/completion iteration, step-size
  policies, estimation variant, theory diagnostics
* `dist` - star-topology distributed runs with a communication ledger and
  the accelerated freeze variant
* `sketch` - per-iteration orthogonal column sketches
* `reference` - completion oracle, gradient descent, conjugate gradient
* `bench` - config-driven experiment runner, CSV traces, invariant suite
"""

from . import dist, eagle, matcore, problemgen, reference, sketch
from .eagle import SolverConfig, run_centralized, run_estimation
from .problemgen import BlockProblem, GenSpec, generate
from .reference import nystrom_solve

__all__ = [
    "BlockProblem",
    "GenSpec",
    "SolverConfig",
    "dist",
    "eagle",
    "generate",
    "matcore",
    "nystrom_solve",
    "problemgen",
    "reference",
    "run_centralized",
    "run_estimation",
    "sketch",
]

__version__ = "0.1.0"
