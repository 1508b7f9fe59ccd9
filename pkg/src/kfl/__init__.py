"""Numerical laboratory for the d1 geometry of torus-invariant Kahler metrics."""
from .errors import *  # noqa: F401,F403
from .functionals import (
    EnergyReport, RicciPotential, am, ding, ding_tian_residual, e_beta, energy_report, entropy, j_energy,
    k_energy, modified_ding, psi_x, ricci_potential, ricci_potential_of, soliton_field, soliton_functionals,
)
from .legendre import BoxFunction, KahlerData, convex_envelope, kahler_data, legendre_transform
from .metric import DistanceReport, curve_length, d1, mixed_l1
from .model import AffineFunction, SymplecticPotential, ToricModel, load_potential, save_potential
from .polytope import Polytope, build_polytope, named
from .principle import TOYS, ToricVariationalModel, check_hypotheses, existence_properness_test, geodesic_descent_check
from .quotient import PropernessReport, QuotientResult, d1_quotient, j_quotient, properness_fit
from .toric_model import geodesic, initial_tangent, rooftop_envelope, torus_act

__version__ = "0.1.0"
