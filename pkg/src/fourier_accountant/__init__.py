"""Fourier accountant: certified (eps, delta) bounds for compositions of
privacy mechanisms, computed by FFT convolution of privacy loss distributions."""

from .accountant import (
    CompositionPlan,
    DeltaBound,
    FourierAccountant,
    compose,
    delta_estimate,
    delta_lower,
    delta_upper,
    epsilon_for_delta,
    sweep_compositions,
)
from .comparators import (
    RdpCurve,
    gaussian_analytic_delta,
    gdp_mu_clt,
    gdp_to_dp,
    rdp_gaussian,
    rdp_randomized_response,
    rdp_to_dp,
)
from .error_bounds import ErrorBudget, LambdaCandidates, select_parameters
from .errors import AccountantError
from .grid_pld import DiscretePld, Direction, Grid, RawPld, Side, discretize, pld_from_distributions
from .mechanisms import (
    Binomial,
    Gaussian,
    GenericDiscrete,
    MechanismSpec,
    RandomizedResponse,
    SubsampledGaussian,
)

__version__ = "0.1.0"
