"""Scrip economy Markov chain: simulation and exact small-instance oracles."""

from .exact import ExactStationary, exact_stationary, enumerate_states, transition_matrix
from .sampling import AliasTable, UniformStream, make_rng, replica_rng
from .simulation import (
    RoundOutcome,
    SimulationResult,
    WealthState,
    empirical_distribution,
    initial_state,
    simulate,
    state_from_counts,
    step,
)
