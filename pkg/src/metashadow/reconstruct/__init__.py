"""State reconstruction: SLST, SGQT and maximum likelihood."""

from .cost import ShadowCost, exact_cost, nf_cost
from .mle import MleResult, check_informationally_complete, mle, mle_fit
from .sgqt import ExactSampler, ProjectiveSampler, sgqt
from .slst import DEFAULT_PARAM_SCALE, init_tau0, rescale_params, slst
from .spsa import PRESETS, CountedObjective, SpsaConfig, preset, spsa_gradient, spsa_perturbation
from .trace import ReconstructionTrace, read_state_matrix, write_state_matrix
