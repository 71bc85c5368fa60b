import numpy as np
import pytest

from lgmdopt.optimizers import (
    Bounds,
    DeConfig,
    OptimizerError,
    crossover_bin,
    de_init,
    default_population_size,
    function_evaluator,
    load_run,
    mutate,
    optimize,
    run_de,
    save_run,
    select,
)

UNIT2 = Bounds(np.zeros(2), np.ones(2))


def sphere(x):
    return -float(np.sum(x * x))


def test_default_population_size_matches_rule():
    assert default_population_size(11) == 37
    assert default_population_size(5) == 17
    assert default_population_size(18) == 60


def test_de_init_uniform_within_bounds():
    rng = np.random.default_rng(0)
    pop = de_init(UNIT2, 10, rng)
    assert pop.shape == (10, 2)
    assert np.all(pop >= 0) and np.all(pop <= 1)


def test_de_init_deterministic_per_seed():
    a = de_init(UNIT2, 10, np.random.default_rng(4))
    b = de_init(UNIT2, 10, np.random.default_rng(4))
    assert np.array_equal(a, b)


def test_de_init_rejects_tiny_population():
    with pytest.raises(OptimizerError):
        de_init(UNIT2, 3, np.random.default_rng(0))


def test_mutate_rand1_arithmetic():
    # candidate 0 is excluded, so donors draw from rows {1, 2, 3}
    pop = np.array([[9.0, 9.0], [1.0, 1.0], [2.0, 2.0], [0.0, 0.0]])
    bounds = Bounds(np.full(2, -10.0), np.full(2, 10.0))
    rng = np.random.default_rng(1)
    seen = set()
    for _ in range(300):
        donor = mutate("rand1", pop, 1, 0, 0.5, bounds, rng)
        seen.add(tuple(np.round(donor, 6)))
    # x_r1 + 0.5 (x_r2 - x_r3) over permutations of rows {1, 2, 3}
    expected = set()
    import itertools
    for r1, r2, r3 in itertools.permutations([1, 2, 3], 3):
        expected.add(tuple(np.round(pop[r1] + 0.5 * (pop[r2] - pop[r3]), 6)))
    assert seen == expected
    assert (2.0, 2.0) in seen  # the worked example: (1,1) + .5((2,2)-(0,0))


def test_mutate_f_zero_returns_first_random_member():
    pop = np.array([[0.1, 0.2], [0.3, 0.4], [0.5, 0.6], [0.7, 0.8]])
    rng = np.random.default_rng(2)
    donor = mutate("rand1", pop, 0, 0, 0.0, UNIT2, rng)
    assert any(np.allclose(donor, row) for row in pop[1:])


def test_mutate_clips_to_bounds():
    pop = np.array([[0.99, 0.99], [0.9, 0.9], [0.0, 0.0], [0.5, 0.5]])
    rng = np.random.default_rng(3)
    for _ in range(50):
        donor = mutate("rand1", pop, 0, 2, 2.0, UNIT2, rng)
        assert np.all(donor <= 1.0) and np.all(donor >= 0.0)


def test_crossover_extremes():
    rng = np.random.default_rng(0)
    parent = np.zeros(8)
    donor = np.ones(8)
    assert np.array_equal(crossover_bin(parent, donor, 1.0, rng), donor)
    trial = crossover_bin(parent, donor, 0.0, rng)
    assert trial.sum() == 1.0  # exactly the forced index R


def test_crossover_forced_index_fraction():
    # donor-component fraction at CR=0.5, d=20 is 0.5 + 1/d * 0.5 = 0.525
    rng = np.random.default_rng(7)
    d = 20
    parent = np.zeros(d)
    donor = np.ones(d)
    total = 0
    trials = 100_000
    for _ in range(trials):
        total += int(crossover_bin(parent, donor, 0.5, rng).sum())
    frac = total / (trials * d)
    assert abs(frac - 0.525) < 0.01


def test_select_strict():
    assert select(1.0, 2.0) is True
    assert select(1.0, 1.0) is False
    assert select(2.0, 1.0) is False
    assert select(1.0, float("-inf")) is False


def test_run_de_improves_and_respects_bounds():
    bounds = Bounds(np.full(5, -5.12), np.full(5, 5.12))
    run = run_de(function_evaluator(sphere), bounds, budget=3000, seed=1,
                 config=DeConfig(patience=0))
    assert run.best.fitness > -1e-3
    for rec in run.evaluations:
        assert bounds.contains(rec.x)
    # elitist: per-generation best is monotone non-decreasing
    bests = [g.best_fitness for g in run.generations]
    assert all(b >= a for a, b in zip(bests, bests[1:]))


def test_run_de_nan_objective_survives():
    calls = {"n": 0}

    def flaky(x):
        calls["n"] += 1
        if calls["n"] % 7 == 0:
            return float("nan")
        return sphere(x)

    run = run_de(function_evaluator(flaky), UNIT2, budget=200, seed=2,
                 config=DeConfig(np_size=8, patience=0))
    failed = [r for r in run.evaluations if r.failed]
    assert failed and all(r.fitness == float("-inf") for r in failed)
    assert run.best.fitness > -2.0


def test_run_de_constant_objective_converges_at_patience():
    run = run_de(function_evaluator(lambda x: 1.0), UNIT2, budget=10_000,
                 seed=3, config=DeConfig(np_size=8, patience=24))
    assert run.converged
    # no improvement is possible after the first evaluation: the run stops
    # exactly `patience` evaluations past initialization
    assert run.evaluation_count == 8 + 24


def test_target_fitness_stops_early():
    run = run_de(function_evaluator(sphere), UNIT2, budget=100_000, seed=4,
                 config=DeConfig(np_size=8, patience=0), target_fitness=-0.5)
    assert run.best.fitness >= -0.5
    assert run.evaluation_count < 100_000


def test_run_record_roundtrip(tmp_path):
    run = run_de(function_evaluator(sphere), UNIT2, budget=60, seed=5,
                 config=DeConfig(np_size=8, patience=0))
    path = tmp_path / "run.txt"
    save_run(run, path)
    loaded = load_run(path)
    assert loaded.method == run.method
    assert loaded.seed == run.seed
    assert loaded.best_index == run.best_index
    assert loaded.evaluation_count == run.evaluation_count
    for a, b in zip(run.evaluations, loaded.evaluations):
        assert a.index == b.index and a.strategy == b.strategy
        assert np.array_equal(a.x, b.x)
        assert a.fitness == b.fitness
    # byte-stable across identical reruns
    run2 = run_de(function_evaluator(sphere), UNIT2, budget=60, seed=5,
                  config=DeConfig(np_size=8, patience=0))
    path2 = tmp_path / "run2.txt"
    save_run(run2, path2)
    assert path.read_bytes() == path2.read_bytes()


def test_optimize_dispatch_rejects_unknown():
    with pytest.raises(OptimizerError):
        optimize(function_evaluator(sphere), "sgd", UNIT2, 10, 0)
