"""Bohmian mechanics on configuration-space grids.

Thin Python layer over the C++ core: grids and wave functions, split-step
evolution, guiding-equation velocities and trajectories, equilibrium
sampling, conditional wave functions, and the scenario runner.
"""

from ._core import *  # noqa: F401,F403
from ._core import (  # noqa: F401
    BohmError,
    DomainError,
    NodeError,
    NumericalError,
    ValidationError,
)

__version__ = "0.1.0"
