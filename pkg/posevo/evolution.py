"""Evolutionary pose search and the hill-climbing baseline.

Both optimizers draw every random number from one generator seeded by
``EAConfig.seed`` and spend the same evaluation budget, so a configuration
fully determines a run. Selection and variation are sequential; only
fitness evaluation may be spread over threads, and it is order-fixed.
"""

import logging
import time
import typing as _t

import numpy as np

from . import config as _config
from . import errors as _errors
from . import hooks as _hooks
from . import objective as _objective
from . import options as _options
from . import result as _result
from . import skeleton as _skeleton
from . import stats as _stats

logger = logging.getLogger(__name__)


def mutation_scales(
    skeleton: _skeleton.Skeleton, scale: float, box: _skeleton.SceneBox
) -> np.ndarray:
    """Per-parameter standard deviation of the Gaussian mutation noise.

    Bounded entries use scale x (limit width), the root position uses
    scale x (box width) and the quaternion components use scale itself.
    """
    layout = skeleton.layout
    widths = np.empty(layout.dof)
    widths[_skeleton.ROOT_POSITION] = box.width
    widths[_skeleton.ROOT_QUATERNION] = 1.0
    widths[layout.bounded] = layout.upper[layout.bounded] - layout.lower[layout.bounded]
    return scale * widths


def mutate(
    pose: _skeleton.PoseParams,
    skeleton: _skeleton.Skeleton,
    cfg: _config.EAConfig,
    rng: np.random.Generator,
    *,
    box: _skeleton.SceneBox | None = None,
) -> _skeleton.PoseParams:
    """Perturb each parameter with probability mutation_rate, then clamp.

    Args:
        pose: Parent pose (left unmodified)
        skeleton: Skeleton the pose belongs to
        cfg: Supplies mutation_rate and mutation_scale
        rng: Random generator
        box: Root-position region (unit cube around the origin if None)

    Returns:
        Feasible mutated pose; the input itself when no parameter was drawn
    """
    box = box or _skeleton.SceneBox.cube()
    dof = skeleton.layout.dof
    rate = cfg.resolved_mutation_rate(dof)
    mask = rng.random(dof) < rate
    noise = rng.standard_normal(dof) * mutation_scales(skeleton, cfg.mutation_scale, box)
    if not mask.any():
        return pose
    theta = pose.theta.copy()
    theta[mask] += noise[mask]
    return _skeleton.clamp_pose(skeleton, _skeleton.PoseParams(theta), box)


def _check_parents(
    skeleton: _skeleton.Skeleton, *poses: _skeleton.PoseParams
) -> None:
    for pose in poses:
        if len(pose) != skeleton.layout.dof:
            raise _errors.ModelMismatchError(
                f"parent has {len(pose)} parameters, skeleton {skeleton.name!r} "
                f"needs {skeleton.layout.dof}"
            )


def swap_subtree(
    parent_a: _skeleton.PoseParams,
    parent_b: _skeleton.PoseParams,
    skeleton: _skeleton.Skeleton,
    link_id: int,
) -> _skeleton.PoseParams:
    """Copy of parent_a with the parameters of link_id's subtree taken from parent_b."""
    _check_parents(skeleton, parent_a, parent_b)
    block = skeleton.layout.subtree_blocks[skeleton.layout.index_of(link_id)]
    theta = parent_a.theta.copy()
    theta[block] = parent_b.theta[block]
    return _skeleton.PoseParams(theta)


def crossover(
    parent_a: _skeleton.PoseParams,
    parent_b: _skeleton.PoseParams,
    skeleton: _skeleton.Skeleton,
    rng: np.random.Generator,
) -> _skeleton.PoseParams:
    """Subtree crossover: swap the branch below a random non-root link.

    The root transform always comes from parent_a. A single-link skeleton
    has no branch to swap and yields a copy of parent_a.

    Raises:
        ModelMismatchError: If either parent does not fit the skeleton
    """
    _check_parents(skeleton, parent_a, parent_b)
    if len(skeleton.links) == 1:
        return _skeleton.PoseParams(parent_a.theta)
    position = int(rng.integers(1, len(skeleton.links)))
    return swap_subtree(parent_a, parent_b, skeleton, skeleton.layout.link_ids[position])


def tournament_select(
    values: np.ndarray, tournament_size: int, rng: np.random.Generator
) -> int:
    """Index of the lowest value among distinct random contestants.

    Ties go to the lower index.
    """
    size = min(tournament_size, len(values))
    contestants = np.sort(rng.choice(len(values), size=size, replace=False))
    return int(contestants[np.argmin(values[contestants])])


def _check_budget(cfg: _config.EAConfig) -> None:
    if cfg.eval_budget < cfg.population_size:
        raise _errors.ConfigError(
            {
                "eval_budget": f"{cfg.eval_budget} is smaller than "
                f"population_size {cfg.population_size}"
            }
        )


class _Evaluator:
    """Evaluates poses and keeps the run's counters and best-ever pose."""

    def __init__(
        self,
        skeleton: _skeleton.Skeleton,
        cloud: _objective.PointCloud,
        cfg: _config.EAConfig,
        stats: _stats.RunStats,
    ) -> None:
        self.skeleton = skeleton
        self.cloud = cloud
        self.workers = cfg.workers
        self.stats = stats
        self.best: _skeleton.PoseParams | None = None

    def __call__(
        self, poses: _t.Sequence[_skeleton.PoseParams]
    ) -> list[_result.Individual]:
        results = _objective.evaluate_batch(
            self.skeleton, poses, self.cloud, workers=self.workers
        )
        population = [_result.Individual(pose, r) for pose, r in zip(poses, results)]
        self.stats.evaluations += len(results)
        self.stats.point_queries += sum(r.evaluations for r in results)
        # min keeps the first of equal values
        leader = min(population, key=lambda individual: individual.value)
        if leader.value < self.stats.best_value:
            self.stats.best_value = leader.value
            self.stats.best_theta = leader.pose.theta.tolist()
            self.best = leader.pose
        return population


def _values(population: _t.Sequence[_result.Individual]) -> np.ndarray:
    return np.array([individual.value for individual in population])


def _starting_poses(
    skeleton: _skeleton.Skeleton,
    initial_poses: _t.Sequence[_skeleton.PoseParams],
    count: int,
    rng: np.random.Generator,
    box: _skeleton.SceneBox,
) -> list[_skeleton.PoseParams]:
    poses = [_skeleton.clamp_pose(skeleton, p, box) for p in list(initial_poses)[:count]]
    poses.extend(_skeleton.random_pose(skeleton, rng, box) for _ in range(count - len(poses)))
    return poses


def evolve(
    skeleton: _skeleton.Skeleton,
    cloud: _objective.PointCloud,
    cfg: _config.EAConfig,
    *,
    initial_poses: _t.Sequence[_skeleton.PoseParams] = (),
    hooks: _hooks.RunHooks | None = None,
) -> _result.OptimizationResult:
    """Fit a skeleton to a cloud with a generational evolutionary algorithm.

    Each generation keeps elite_count best individuals and fills the rest
    by tournament selection, subtree crossover (with probability
    crossover_probability) and mutation. The loop stops when another
    generation would exceed the budget, when the best value reaches
    cfg.target_value, or when a hook asks it to.

    Args:
        skeleton: Skeleton to fit
        cloud: Observed points
        cfg: Optimizer configuration
        initial_poses: Poses placed at the front of the initial population
        hooks: Optional progress callbacks

    Returns:
        OptimizationResult with the best pose ever evaluated and run statistics

    Raises:
        ConfigError: If eval_budget < population_size
    """
    _check_budget(cfg)
    hooks = hooks or _hooks.RunHooks()
    rng = np.random.default_rng(cfg.seed)
    box = cloud.bounding_box(cfg.box_padding)
    stats = _stats.RunStats(optimizer=_options.Optimizer.EVOLVE.value)
    evaluate = _Evaluator(skeleton, cloud, cfg, stats)
    started = time.perf_counter()
    logger.info(
        "evolve: %s (%d dof), %d points, population %d, budget %d, seed %d",
        skeleton.name, skeleton.layout.dof, len(cloud), cfg.population_size,
        cfg.eval_budget, cfg.seed,
    )

    population = evaluate(
        _starting_poses(skeleton, initial_poses, cfg.population_size, rng, box)
    )
    values = _values(population)
    row = stats.record(0, stats.best_value, float(np.mean(values)))
    hooks.call_on_generation(row)
    hooks.call_on_improvement(0, stats.best_value)

    generation = 0
    while stats.evaluations + cfg.offspring_count <= cfg.eval_budget:
        if stats.best_value <= cfg.target_value or not hooks.check_should_continue(row):
            stats.stopped_early = True
            break
        generation += 1
        ranking = np.lexsort((np.arange(len(values)), values))
        elite = [population[i] for i in ranking[: cfg.elite_count]]
        offspring = []
        for _ in range(cfg.offspring_count):
            child = population[tournament_select(values, cfg.tournament_size, rng)].pose
            if rng.random() < cfg.crossover_probability:
                other = population[tournament_select(values, cfg.tournament_size, rng)].pose
                child = crossover(child, other, skeleton, rng)
            offspring.append(mutate(child, skeleton, cfg, rng, box=box))

        previous_best = stats.best_value
        population = elite + evaluate(offspring)
        values = _values(population)
        row = stats.record(generation, stats.best_value, float(np.mean(values)))
        logger.debug(
            "generation %d: best %.6g mean %.6g evals %d",
            generation, row.best, row.mean, row.evaluations,
        )
        hooks.call_on_generation(row)
        if stats.best_value < previous_best:
            hooks.call_on_improvement(generation, stats.best_value)
    else:
        stats.stopped_early = stats.best_value <= cfg.target_value

    stats.wall_time = time.perf_counter() - started
    logger.info(
        "evolve finished: best %.6g after %d evaluations (%d generations, %.1fs)",
        stats.best_value, stats.evaluations, generation, stats.wall_time,
    )
    assert evaluate.best is not None
    return _result.OptimizationResult(evaluate.best, stats)


def hill_climb(
    skeleton: _skeleton.Skeleton,
    cloud: _objective.PointCloud,
    cfg: _config.EAConfig,
    *,
    initial_poses: _t.Sequence[_skeleton.PoseParams] = (),
    hooks: _hooks.RunHooks | None = None,
) -> _result.OptimizationResult:
    """Baseline: mutate a single candidate and keep strict improvements.

    After cfg.restart_after consecutive rejections the candidate is replaced
    by a fresh random pose. Every evaluation counts against the same budget
    as evolve; progress is logged once per population_size evaluations.

    Args:
        skeleton: Skeleton to fit
        cloud: Observed points
        cfg: Optimizer configuration (population fields only set the log period)
        initial_poses: The first entry, if any, replaces the random start
        hooks: Optional progress callbacks

    Returns:
        OptimizationResult with the best pose ever evaluated and run statistics

    Raises:
        ConfigError: If eval_budget < population_size
    """
    _check_budget(cfg)
    hooks = hooks or _hooks.RunHooks()
    rng = np.random.default_rng(cfg.seed)
    box = cloud.bounding_box(cfg.box_padding)
    stats = _stats.RunStats(optimizer=_options.Optimizer.HILL_CLIMB.value)
    evaluate = _Evaluator(skeleton, cloud, cfg, stats)
    started = time.perf_counter()
    logger.info(
        "hill_climb: %s (%d dof), %d points, budget %d, seed %d",
        skeleton.name, skeleton.layout.dof, len(cloud), cfg.eval_budget, cfg.seed,
    )

    current = evaluate(_starting_poses(skeleton, initial_poses[:1], 1, rng, box))[0]
    hooks.call_on_improvement(0, current.value)
    window = [current.value]
    generation = 0
    rejections = 0

    def flush() -> bool:
        nonlocal generation, window
        previous = stats.generations[-1].best if stats.generations else np.inf
        row = stats.record(generation, stats.best_value, float(np.mean(window)))
        hooks.call_on_generation(row)
        if row.best < previous and generation > 0:
            hooks.call_on_improvement(generation, row.best)
        generation += 1
        window = []
        return hooks.check_should_continue(row)

    keep_going = True
    while stats.evaluations < cfg.eval_budget:
        if len(window) == cfg.population_size:
            keep_going = flush()
        if stats.best_value <= cfg.target_value or not keep_going:
            stats.stopped_early = True
            break
        if rejections >= cfg.restart_after:
            current = evaluate([_skeleton.random_pose(skeleton, rng, box)])[0]
            stats.restarts += 1
            rejections = 0
            window.append(current.value)
            continue
        proposal = evaluate([mutate(current.pose, skeleton, cfg, rng, box=box)])[0]
        window.append(proposal.value)
        if proposal.value < current.value:
            current = proposal
            rejections = 0
        else:
            rejections += 1
    if window:
        flush()

    stats.wall_time = time.perf_counter() - started
    logger.info(
        "hill_climb finished: best %.6g after %d evaluations (%d restarts, %.1fs)",
        stats.best_value, stats.evaluations, stats.restarts, stats.wall_time,
    )
    assert evaluate.best is not None
    return _result.OptimizationResult(evaluate.best, stats)


def optimize(
    optimizer: _options.Optimizer,
    skeleton: _skeleton.Skeleton,
    cloud: _objective.PointCloud,
    cfg: _config.EAConfig,
    **kwargs: _t.Any,
) -> _result.OptimizationResult:
    """Dispatch to evolve or hill_climb."""
    if optimizer is _options.Optimizer.EVOLVE:
        return evolve(skeleton, cloud, cfg, **kwargs)
    return hill_climb(skeleton, cloud, cfg, **kwargs)
