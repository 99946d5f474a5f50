"""Enumerated options shared by the optimizers, evaluation and CLI."""

from enum import Enum


class Optimizer(str, Enum):
    """Search strategy used to fit a skeleton to a cloud.

    Attributes:
        EVOLVE: Population-based evolutionary search
        HILL_CLIMB: Single-candidate hill climbing with random restarts
    """

    EVOLVE = "evolve"
    HILL_CLIMB = "hill-climb"


class AccuracyMode(str, Enum):
    """How estimated links are matched to ground-truth links.

    Attributes:
        STRICT: Link i of the estimate is compared with link i of the truth
        BEST_PERMUTATION: Interchangeable chains declared in the skeleton's
            symmetry groups are matched to maximize the number of correct links
    """

    STRICT = "strict"
    BEST_PERMUTATION = "best-permutation"
