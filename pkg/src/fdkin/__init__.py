"""fdkin: deterministic kinetic solver for fermionic (Pauli-blocked) gases.

A velocity-lattice discretization of the spatially homogeneous quantum
Boltzmann dynamics with hard-potential cutoff kernels, plus the diagnostic
machinery needed to check its quantitative structure at desk scale:
conservation, entropy monotonicity and the entropy identity, equilibrium
fitting, saturation thresholds, comparison inequalities against the classical
operator, distance-versus-entropy bounds, and algebraic relaxation envelopes.
"""

__version__ = "0.1.0"

from .grid import (  # noqa: F401
    DistributionField,
    Moments,
    VelocityGrid,
    build_grid,
    l1k_log_norm,
    lebesgue_norm,
    moments,
    post_collision,
)
from .kernels import (  # noqa: F401
    ConstantKernel,
    InversePowerKernel,
    KernelSpec,
    TableKernel,
    angular_mass,
    eval_angular,
    eval_kernel,
    young_constant,
)
