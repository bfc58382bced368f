"""Scrip economies: simulation, steady-state wealth distributions, best replies and equilibria."""

from .best_reply import (
    BestReplyReport,
    ChoiceProbabilities,
    best_reply_threshold,
    choice_probabilities,
    discounted_ruin_factor,
    ruin_factors,
    value_iteration_policy,
)
from .equilibrium import EquilibriumResult, best_reply_vector, greatest_equilibrium
from .errors import CapacityError, NumericalError, ReducibleChainError, SpecError, StateSpaceOverflow
from .model import AgentType, GameSpec, build_game_spec, check_thresholds, per_round_discount
from .wealth_entropy import (
    LambdaSolution,
    MoneyDistribution,
    base_distribution,
    min_relent_distribution,
    nearest_realizable,
    potential_v,
    relative_entropy,
    solve_lambda,
)

__version__ = "0.1.0"
