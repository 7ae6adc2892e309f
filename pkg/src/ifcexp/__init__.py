"""Exact random-coding error exponents for the two-user interference channel."""

__version__ = "0.1.0"

from .channels import (Dmc2User, HkMaps, MarginalChannel, VirtualChannel, make_hk_virtual_channel,
                       make_marginal_channel, make_two_user_dmc, make_z_channel, marginal_channel,
                       swap_roles)
from .errors import ComputeGuardError, IfcError, InfeasibleMarginals, ValidationError
from .hk import HkExponent, HkRates, exponent_hk, region_hk
from .infomeasures import (JointDist, conditional_mutual_information, entropy, kl_divergence,
                           mutual_information)
from .ordinary import OrdinaryExponent, RatePair, exponent_ordinary, region_ordinary
from .simplexopt import GridSpec
