"""Result types for optimizer runs."""

import typing as _t

from . import objective as _objective
from . import skeleton as _skeleton
from . import stats as _stats


class Individual(_t.NamedTuple):
    """A member of the population with the objective of its pose.

    Attributes:
        pose: Candidate pose
        fitness: Result of evaluating pose, never recomputed
    """

    pose: _skeleton.PoseParams
    fitness: _objective.ObjectiveValue

    @property
    def value(self) -> float:
        return self.fitness.value


class OptimizationResult(_t.NamedTuple):
    """Outcome of evolve or hill_climb.

    Attributes:
        best: Best pose ever evaluated
        stats: Convergence record of the run
    """

    best: _skeleton.PoseParams
    stats: _stats.RunStats
