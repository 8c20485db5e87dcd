"""Kac walks with a general convex particle energy.

Saddle-point equilibrium (``z0``, ``C exp(-z0 phi)``), the N-particle walk on
``sum phi(v_i) = N``, a mean-field particle solver, chaos diagnostics and a
planar momentum-conserving sampler.
"""

from .energy import (EnergyFunction, classical, from_callable, from_table, get_energy, phi,
                     phi_inverse, relativistic, validate_conditions, weight_f)
from .equilibrium import (SaddleSolution, equilibrium_cdf, equilibrium_law, equilibrium_pdf,
                          sample_equilibrium_1d, solve_z0, z_asymptotic, z_bruteforce,
                          z_exact_classical)
from .errors import (ContractError, DomainError, KacError, NumericError, StatisticalTestFailure,
                     ValidationError)
from .kacwalk import (MasterVector, collide, init_from_velocities, init_microcanonical,
                      run_collisions, simulate, step)
from .meanfield import MeanFieldEnsemble, mf_solve, mf_step
from .chaos import (Budget, DistanceReport, EmpiricalMarginal, chaoticity_test, extract_marginal,
                    ks_distance, propagation_test, wasserstein1)
from .numerics import (LogValue, QuadratureSpec, find_root_increasing, integrate_even_line,
                       saddle_asymptotic_1d, saddle_asymptotic_nd)
from .planar import (PlanarEnergy, PlanarSaddle, PlanarState, planar_collide, sample_planar,
                     solve_z0_2d, z_asymptotic_2d)
from .streams import make_stream

__version__ = "0.1.0"
