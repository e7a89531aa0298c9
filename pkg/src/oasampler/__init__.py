"""Ordered allocation sampler for Bayesian mixtures with species sampling priors."""

from .baseline_samplers import MarginalSampler, SliceSampler
from .components import (BivariateGaussian, ComponentParams, NIGHyper, NIWHyper,
                         UnivariateGaussian, family_for, log_evidence, log_kernel,
                         log_marginal_likelihood, posterior_hyper, sample_params)
from .errors import (ConfigError, IngestionError, ParameterDomainError, ResourceLimitError,
                     StateInvariantError, TruncationOverflowError, UnsupportedPriorError)
from .oas_sampler import OrderedAllocationSampler, OrderedState, admissible_moves
from .species_sampling import (INF, ConstantGamma, FiniteDirichlet, GnedinMFM, PitmanYor,
                               ThetaOverM)

__version__ = "0.1.0"
