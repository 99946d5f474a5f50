"""Convergence records of optimizer runs."""

import json
import typing
from dataclasses import asdict, dataclass, field

import numpy as np


@dataclass(frozen=True)
class GenerationRecord:
    """One row of a run's convergence log.

    Attributes:
        generation: 0 for the initial population
        best: Best objective value seen so far
        mean: Mean objective value of the individuals evaluated in this generation
        evaluations: Cumulative objective evaluations after this generation
    """

    generation: int
    best: float
    mean: float
    evaluations: int


@dataclass
class RunStats:
    """Statistics about one optimizer run.

    Attributes:
        optimizer: Name of the optimizer that produced the run
        generations: Per-generation records in order
        best_value: Objective value of the best pose found
        evaluations: Objective evaluations used
        point_queries: Point-to-model distance queries used (points x evaluations)
        restarts: Random restarts performed (hill climbing only)
        wall_time: Seconds spent in the run
        stopped_early: Whether the run ended before exhausting its budget
        best_theta: Pose vector of the best pose found, None before the first evaluation
    """

    optimizer: str
    generations: list[GenerationRecord] = field(default_factory=list)
    best_value: float = float("inf")
    evaluations: int = 0
    point_queries: int = 0
    restarts: int = 0
    wall_time: float = 0.0
    stopped_early: bool = False
    best_theta: list[float] | None = None

    def record(self, generation: int, best: float, mean: float) -> GenerationRecord:
        """Append a record using the current evaluation count."""
        row = GenerationRecord(generation, best, mean, self.evaluations)
        self.generations.append(row)
        return row

    @property
    def best_curve(self) -> list[float]:
        return [row.best for row in self.generations]

    def elitism_violations(self) -> int:
        """Number of generations whose best is worse than the previous one."""
        curve = self.best_curve
        return sum(1 for prev, cur in zip(curve, curve[1:]) if cur > prev)

    def to_dict(self) -> dict[str, typing.Any]:
        return asdict(self)

    def to_json(self, indent: int | None = None) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    def __repr__(self) -> str:
        return (
            f"RunStats(optimizer={self.optimizer!r}, "
            f"generations={len(self.generations)}, best={self.best_value:.6g}, "
            f"evaluations={self.evaluations})"
        )


@dataclass(frozen=True)
class PairedComparison:
    """Paired outcome of two optimizers run on the same problems and seeds.

    Attributes:
        pairs: Number of paired runs
        wins: Pairs where the first optimizer reached a strictly lower objective
        ties: Pairs with equal objectives
        median_first: Median final objective of the first optimizer
        median_second: Median final objective of the second optimizer
    """

    pairs: int
    wins: int
    ties: int
    median_first: float
    median_second: float

    @property
    def losses(self) -> int:
        return self.pairs - self.wins - self.ties


def compare_runs(
    first: typing.Sequence[float], second: typing.Sequence[float]
) -> PairedComparison:
    """Compare final objective values of paired runs (lower is better).

    Raises:
        ValueError: If the sequences differ in length or are empty
    """
    if len(first) != len(second) or not first:
        raise ValueError("paired comparison needs two equally long, non-empty sequences")
    a = np.asarray(first, dtype=np.float64)
    b = np.asarray(second, dtype=np.float64)
    return PairedComparison(
        pairs=len(a),
        wins=int(np.sum(a < b)),
        ties=int(np.sum(a == b)),
        median_first=float(np.median(a)),
        median_second=float(np.median(b)),
    )
