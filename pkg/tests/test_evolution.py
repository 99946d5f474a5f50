"""Tests for the evolutionary search and the hill-climbing baseline."""

import numpy as np
import pytest

from posevo import evolution as evo
from posevo import objective as obj
from posevo import skeleton as sk
from posevo.config import EAConfig
from posevo.errors import ConfigError, ModelMismatchError
from posevo.hooks import RunHooks
from posevo.options import Optimizer
from posevo.stats import RunStats, compare_runs


@pytest.fixture
def small_config():
    return EAConfig(population_size=20, elite_count=2, eval_budget=400, seed=3)


def test_tournament_of_whole_population_returns_best(rng):
    values = np.array([3.0, 1.0, 2.0, 0.5, 4.0])
    assert evo.tournament_select(values, 5, rng) == 3


def test_tournament_ties_go_to_lower_index(rng):
    values = np.array([1.0, 0.0, 0.0])
    assert evo.tournament_select(values, 3, rng) == 1


def test_tournament_picks_from_contestants():
    values = np.arange(100, dtype=float)
    picks = {evo.tournament_select(values, 2, np.random.default_rng(s)) for s in range(30)}
    assert len(picks) > 1
    assert all(0 <= p < 99 for p in picks)


def test_zero_rate_mutation_returns_parent(spider, rng):
    pose = sk.random_pose(spider, rng)
    cfg = EAConfig(mutation_rate=0.0)
    assert evo.mutate(pose, spider, cfg, rng) is pose


def test_mutation_stays_feasible(humanoid, rng):
    box = sk.SceneBox.cube(0.5)
    cfg = EAConfig(mutation_rate=1.0, mutation_scale=0.8)
    pose = sk.random_pose(humanoid, rng, box)
    for _ in range(20):
        pose = evo.mutate(pose, humanoid, cfg, rng, box=box)
        assert sk.is_feasible(humanoid, pose, box)


def test_full_rate_mutation_changes_every_bounded_parameter(spider, rng):
    pose = sk.PoseParams.neutral(spider)
    cfg = EAConfig(mutation_rate=1.0, mutation_scale=0.01)
    child = evo.mutate(pose, spider, cfg, rng)
    bounded = spider.layout.bounded
    assert np.all(child.theta[bounded] != pose.theta[bounded])


def test_swap_subtree_copies_exactly_the_branch(spider, rng):
    """Test swapping at a hip moves the whole two-link leg and nothing else."""
    a = sk.random_pose(spider, rng)
    b = sk.random_pose(spider, rng)
    child = evo.swap_subtree(a, b, spider, 4)
    block = spider.layout.subtree_blocks[spider.layout.index_of(4)]
    assert block.tolist() == sorted(
        list(spider.layout.link_blocks[spider.layout.index_of(4)])
        + list(spider.layout.link_blocks[spider.layout.index_of(5)])
    )
    changed = np.flatnonzero(child.theta != a.theta)
    assert changed.tolist() == block.tolist()
    np.testing.assert_array_equal(child.theta[block], b.theta[block])


def test_crossover_keeps_root_transform_of_first_parent(spider, rng):
    a = sk.random_pose(spider, rng)
    b = sk.random_pose(spider, rng)
    for _ in range(20):
        child = evo.crossover(a, b, spider, rng)
        np.testing.assert_array_equal(child.theta[: sk.ROOT_DOF], a.theta[: sk.ROOT_DOF])
        from_b = np.flatnonzero(child.theta != a.theta)
        assert set(from_b.tolist()) <= set(range(sk.ROOT_DOF + 4, 39))


def test_crossover_of_single_link_copies_first_parent(rng):
    from conftest import chain_document
    import json

    single = sk.parse_skeleton(json.dumps(chain_document(1)))
    a = sk.random_pose(single, rng)
    b = sk.random_pose(single, rng)
    assert evo.crossover(a, b, single, rng) == a


def test_crossover_rejects_foreign_parent(spider, chain2, rng):
    with pytest.raises(ModelMismatchError):
        evo.crossover(sk.PoseParams.neutral(spider), sk.PoseParams.neutral(chain2), spider, rng)


def test_budget_smaller_than_population_rejected(planar4, planar4_cloud):
    cfg = EAConfig(population_size=50, eval_budget=10)
    with pytest.raises(ConfigError, match="eval_budget"):
        evo.evolve(planar4, planar4_cloud, cfg)
    with pytest.raises(ConfigError, match="eval_budget"):
        evo.hill_climb(planar4, planar4_cloud, cfg)


def test_evolve_is_deterministic(planar4, planar4_cloud, small_config):
    first = evo.evolve(planar4, planar4_cloud, small_config)
    second = evo.evolve(planar4, planar4_cloud, small_config)
    assert first.best == second.best
    assert first.stats.generations == second.stats.generations


def test_evolve_threads_do_not_change_results(planar4, planar4_cloud, small_config):
    serial = evo.evolve(planar4, planar4_cloud, small_config)
    threaded = evo.evolve(
        planar4, planar4_cloud, small_config.model_copy(update={"workers": 3})
    )
    assert serial.best == threaded.best
    assert serial.stats.best_curve == threaded.stats.best_curve


def test_evolve_respects_budget_and_elitism(planar4, planar4_cloud, small_config):
    result = evo.evolve(planar4, planar4_cloud, small_config)
    stats = result.stats
    assert stats.evaluations <= small_config.eval_budget
    assert stats.evaluations == 20 + 18 * (len(stats.generations) - 1)
    assert stats.elitism_violations() == 0
    assert stats.point_queries == stats.evaluations * len(planar4_cloud)
    assert obj.evaluate(planar4, result.best, planar4_cloud).value == stats.best_value


def test_evolve_improves_on_random_start(planar4, planar4_cloud):
    cfg = EAConfig(population_size=40, eval_budget=4000, seed=1)
    result = evo.evolve(planar4, planar4_cloud, cfg)
    assert result.stats.best_value < result.stats.generations[0].best
    assert result.stats.best_value < result.stats.generations[0].mean


def test_injected_pose_bounds_the_result(planar4, planar4_truth, planar4_cloud, small_config):
    result = evo.evolve(planar4, planar4_cloud, small_config, initial_poses=[planar4_truth])
    truth_value = obj.evaluate(planar4, planar4_truth, planar4_cloud).value
    assert result.stats.best_value <= truth_value


def test_target_value_stops_early(planar4, planar4_cloud, small_config):
    cfg = small_config.model_copy(update={"target_value": 100.0})
    result = evo.evolve(planar4, planar4_cloud, cfg)
    assert result.stats.stopped_early
    assert result.stats.evaluations == cfg.population_size


def test_hooks_observe_and_stop_the_run(planar4, planar4_cloud, small_config):
    seen = []
    improvements = []
    hooks = RunHooks(
        on_generation=seen.append,
        on_improvement=lambda generation, value: improvements.append(value),
        should_continue=lambda record: record.generation < 3,
    )
    result = evo.evolve(planar4, planar4_cloud, small_config, hooks=hooks)
    assert [row.generation for row in seen] == [0, 1, 2, 3]
    assert result.stats.stopped_early
    assert improvements == sorted(improvements, reverse=True)


def test_failing_hook_does_not_interrupt(planar4, planar4_cloud, small_config):
    def explode(record):
        raise RuntimeError("hook failure")

    result = evo.evolve(
        planar4, planar4_cloud, small_config, hooks=RunHooks(on_generation=explode)
    )
    assert result.stats.evaluations > small_config.population_size


def test_hill_climb_spends_whole_budget(planar4, planar4_cloud):
    cfg = EAConfig(population_size=20, eval_budget=100, seed=5)
    result = evo.hill_climb(planar4, planar4_cloud, cfg)
    stats = result.stats
    assert stats.optimizer == "hill-climb"
    assert stats.evaluations == 100
    assert [row.evaluations for row in stats.generations] == [20, 40, 60, 80, 100]
    assert stats.elitism_violations() == 0


def test_hill_climb_restarts_after_rejections(planar4, planar4_cloud):
    cfg = EAConfig(population_size=20, eval_budget=300, seed=5, restart_after=1)
    result = evo.hill_climb(planar4, planar4_cloud, cfg)
    assert result.stats.restarts > 0


def test_hill_climb_is_deterministic(spider, rng):
    cloud = obj.PointCloud(rng.uniform(-0.1, 0.1, (80, 3)))
    cfg = EAConfig(population_size=10, eval_budget=120, seed=8)
    first = evo.hill_climb(spider, cloud, cfg)
    second = evo.hill_climb(spider, cloud, cfg)
    assert first.best == second.best
    assert first.stats.generations == second.stats.generations


def test_optimize_dispatches(planar4, planar4_cloud, small_config):
    assert evo.optimize(Optimizer.EVOLVE, planar4, planar4_cloud, small_config).stats.optimizer == "evolve"
    assert (
        evo.optimize(Optimizer.HILL_CLIMB, planar4, planar4_cloud, small_config).stats.optimizer
        == "hill-climb"
    )


def test_budget_accounting_over_random_configs(planar4, planar4_cloud):
    """Test runs that miss the target spend between budget - population and budget."""
    rng = np.random.default_rng(21)
    for _ in range(8):
        population = int(rng.integers(4, 20))
        cfg = EAConfig(
            population_size=population,
            elite_count=int(rng.integers(0, population)),
            tournament_size=int(rng.integers(1, population + 1)),
            eval_budget=int(rng.integers(population, 6 * population)),
            seed=int(rng.integers(0, 1000)),
        )
        for optimizer in (evo.evolve, evo.hill_climb):
            stats = optimizer(planar4, planar4_cloud, cfg).stats
            assert cfg.eval_budget - population <= stats.evaluations <= cfg.eval_budget


def test_mutation_rate_sets_fraction_of_changed_parameters(spider):
    rng = np.random.default_rng(43)
    cfg = EAConfig(mutation_rate=0.1, mutation_scale=0.05)
    pose = sk.PoseParams.neutral(spider)
    bounded = spider.layout.bounded
    changed = [
        np.mean(evo.mutate(pose, spider, cfg, rng).theta[bounded] != pose.theta[bounded])
        for _ in range(2000)
    ]
    assert np.mean(changed) == pytest.approx(0.1, abs=0.01)


def test_population_fitness_matches_evaluate(planar4, planar4_cloud, small_config, rng):
    stats = RunStats(optimizer="evolve")
    evaluate = evo._Evaluator(planar4, planar4_cloud, small_config, stats)
    poses = [sk.random_pose(planar4, rng) for _ in range(6)]
    population = evaluate(poses)
    assert [individual.pose for individual in population] == poses
    for individual in population:
        assert individual.fitness == obj.evaluate(planar4, individual.pose, planar4_cloud)
    assert stats.best_value == min(individual.value for individual in population)
    assert stats.evaluations == 6


def test_stats_carry_the_best_pose(planar4, planar4_cloud, small_config):
    for optimizer in (evo.evolve, evo.hill_climb):
        result = optimizer(planar4, planar4_cloud, small_config)
        assert result.stats.best_theta == result.best.theta.tolist()
        assert result.stats.to_dict()["best_theta"] == result.best.theta.tolist()


def test_paired_runs_share_budget_and_seeds(humanoid):
    from conftest import surface_cloud

    truth = sk.random_pose(humanoid, np.random.default_rng(2), sk.SceneBox.cube(0.2))
    cloud = surface_cloud(sk.forward_kinematics(humanoid, truth), points_per_link=10)
    evolved, climbed = [], []
    for seed in range(3):
        cfg = EAConfig(population_size=10, elite_count=1, eval_budget=100, seed=seed)
        evolved.append(evo.evolve(humanoid, cloud, cfg).stats)
        climbed.append(evo.hill_climb(humanoid, cloud, cfg).stats)
    for first, second in zip(evolved, climbed):
        assert 90 <= first.evaluations <= 100
        assert second.evaluations == 100
    comparison = compare_runs(
        [s.best_value for s in evolved], [s.best_value for s in climbed]
    )
    assert comparison.pairs == 3
    assert comparison.wins + comparison.ties + comparison.losses == 3


@pytest.mark.slow
def test_planar_chain_is_recovered(planar4, planar4_truth, planar4_cloud):
    finals = [
        evo.evolve(planar4, planar4_cloud, EAConfig(eval_budget=100_000, seed=seed))
        .stats.best_value
        for seed in range(5)
    ]
    truth_value = obj.evaluate(planar4, planar4_truth, planar4_cloud).value
    assert np.median(finals) < 0.05
    assert np.median(finals) < truth_value + 0.01


@pytest.mark.slow
def test_evolve_beats_hill_climbing_on_humanoid(humanoid):
    from conftest import surface_cloud

    truth = sk.random_pose(humanoid, np.random.default_rng(2), sk.SceneBox.cube(0.2))
    cloud = surface_cloud(sk.forward_kinematics(humanoid, truth), points_per_link=20)
    evolved, climbed = [], []
    for seed in range(10):
        cfg = EAConfig(eval_budget=100_000, seed=seed)
        evolved.append(evo.evolve(humanoid, cloud, cfg).stats.best_value)
        climbed.append(evo.hill_climb(humanoid, cloud, cfg).stats.best_value)
    comparison = compare_runs(evolved, climbed)
    assert comparison.wins >= 8
    assert comparison.median_first < comparison.median_second
