"""Driven tight-binding chain under stochastic resetting.

Modules
-------
specfun    integer-order Bessel functions
drive      the field integral ``w(t)``
analytic   closed-form probabilities and moments (infinite chain)
lattice    finite-ring propagation and reset Monte Carlo
lindblad   reset master equation and renewal cross-checks
cli        command line runs and figure data
"""

__version__ = "0.1.0"

from .analytic import (
    ModelParams,
    mean_no_reset,
    mean_reset,
    msd_no_reset,
    msd_plateau,
    msd_reset,
    p_site_no_reset,
    p_site_reset,
    p_site_reset_curve,
)
from .drive import DriveField, eval_w, effective_tunnelling, w_values
from .lattice import Lattice, ensemble_average, evolve_unitary, run_trajectory, sample_reset_times
from .lindblad import lindblad_evolve, renewal_check
from .specfun import bessel_j, bessel_j_array, bessel_j_table, j0_zero

__all__ = [
    "DriveField",
    "Lattice",
    "ModelParams",
    "bessel_j",
    "bessel_j_array",
    "bessel_j_table",
    "effective_tunnelling",
    "ensemble_average",
    "eval_w",
    "evolve_unitary",
    "j0_zero",
    "lindblad_evolve",
    "mean_no_reset",
    "mean_reset",
    "msd_no_reset",
    "msd_plateau",
    "msd_reset",
    "p_site_no_reset",
    "p_site_reset",
    "p_site_reset_curve",
    "renewal_check",
    "run_trajectory",
    "sample_reset_times",
    "w_values",
]
