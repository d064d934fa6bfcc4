"""Safe opponent exploitation in generalized Kuhn poker.

The agent plays a static strategy with a known worst-case value and deviates
towards a best response to an opponent model only as far as the gifts the
opponent has already handed over allow.
"""

from .game import FOUR_BET, KUHN, SIX_CARD, GameSpec, GameTree, HandRecord, build_game
from .strategy import BehavioralStrategy, read_strategy, uniform_strategy, write_strategy

__version__ = "0.1.0"

__all__ = [
    "FOUR_BET", "KUHN", "SIX_CARD", "GameSpec", "GameTree", "HandRecord", "build_game",
    "BehavioralStrategy", "read_strategy", "uniform_strategy", "write_strategy",
]
