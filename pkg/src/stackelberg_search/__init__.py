"""Strong Stackelberg equilibria of extensive-form games, with safe re-solving.

Compute leader commitment strategies for two-player general-sum games in
extensive form, and refine a blueprint inside subgames without ever making
the leader worse off than the blueprint itself.
"""

from stackelberg_search.efg import (
    CHANCE,
    FOLLOWER,
    LEADER,
    BehavioralStrategy,
    GameError,
    GameNode,
    GameTree,
    InfoSet,
    RealizationPlan,
    Treeplex,
    behavioral_to_realization,
    build_treeplex,
    expected_payoffs,
    realization_to_behavioral,
    uniform_plan,
    validate_game,
)

__all__ = [
    "CHANCE",
    "FOLLOWER",
    "LEADER",
    "BehavioralStrategy",
    "GameError",
    "GameNode",
    "GameTree",
    "InfoSet",
    "RealizationPlan",
    "Treeplex",
    "behavioral_to_realization",
    "build_treeplex",
    "expected_payoffs",
    "realization_to_behavioral",
    "uniform_plan",
    "validate_game",
]

__version__ = "0.1.0"
