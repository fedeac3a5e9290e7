"""Classical teacher optimizers and student-population alignment."""

import numpy as np
import pytest

from symbopt.problems import instance_from_seed
from symbopt.teachers import (align_student_population, init_teacher,
                              teacher_step)


class TestDe:
    def test_sphere_convergence(self):
        # rand/1/bin with F=0.5, CR=0.9 solves 10-D sphere within 50k FEs
        successes = 0
        for seed in range(5):
            inst = instance_from_seed("Sphere", 10, 100 + seed)
            rng = np.random.default_rng(seed)
            state = init_teacher("DE", inst, 100, rng)
            for _ in range(499):
                state = teacher_step(state, inst, rng)
            if state.best_val < 1e-3:
                successes += 1
        assert successes >= 4

    def test_greedy_selection_monotone(self):
        inst = instance_from_seed("Rastrigin", 5, 3)
        rng = np.random.default_rng(1)
        state = init_teacher("DE", inst, 20, rng)
        best = [state.best_val]
        for _ in range(50):
            state = teacher_step(state, inst, rng)
            best.append(state.best_val)
        assert all(a >= b for a, b in zip(best, best[1:]))

    def test_feasibility(self):
        inst = instance_from_seed("BentCigar", 4, 5)
        rng = np.random.default_rng(2)
        state = init_teacher("DE", inst, 15, rng)
        for _ in range(30):
            state = teacher_step(state, inst, rng)
            assert np.all((state.positions >= -100) & (state.positions <= 100))

    def test_reproducible(self):
        inst = instance_from_seed("Sphere", 3, 6)
        runs = []
        for _ in range(2):
            rng = np.random.default_rng(9)
            state = init_teacher("DE", inst, 10, rng)
            for _ in range(20):
                state = teacher_step(state, inst, rng)
            runs.append(state.positions.copy())
        assert np.array_equal(runs[0], runs[1])


class TestPso:
    def test_frozen_when_coefficients_zero(self):
        inst = instance_from_seed("Sphere", 3, 7)
        rng = np.random.default_rng(3)
        state = init_teacher("PSO", inst, 10, rng, w=0.0, c1=0.0, c2=0.0)
        before = state.positions.copy()
        for _ in range(5):
            state = teacher_step(state, inst, rng)
        assert np.array_equal(state.positions, before)

    def test_velocity_clamp(self):
        inst = instance_from_seed("Sphere", 4, 8)
        rng = np.random.default_rng(4)
        state = init_teacher("PSO", inst, 12, rng)
        for _ in range(30):
            state = teacher_step(state, inst, rng)
            assert np.all(np.abs(state.velocities) <= 100.0 + 1e-12)
            assert np.all((state.positions >= -100) & (state.positions <= 100))

    def test_global_best_monotone(self):
        inst = instance_from_seed("Rastrigin", 4, 9)
        rng = np.random.default_rng(5)
        state = init_teacher("PSO", inst, 20, rng)
        best = [state.best_val]
        for _ in range(50):
            state = teacher_step(state, inst, rng)
            best.append(state.best_val)
        assert all(a >= b for a, b in zip(best, best[1:]))

    def test_improves_sphere(self):
        inst = instance_from_seed("Sphere", 5, 10)
        rng = np.random.default_rng(6)
        state = init_teacher("PSO", inst, 30, rng)
        start = state.best_val
        for _ in range(100):
            state = teacher_step(state, inst, rng)
        assert state.best_val < start * 0.1


class TestAlignment:
    def test_size_down_equal_spacing(self):
        # four sorted members, target two -> best and worst picked
        pop = np.arange(8.0).reshape(4, 2)
        vals = np.array([3.0, 1.0, 0.5, 2.0])  # sorted order: 2, 1, 3, 0
        out = align_student_population(pop, vals, 2, (-100, 100),
                                       np.random.default_rng(0))
        assert np.array_equal(out[0], pop[2])   # best
        assert np.array_equal(out[1], pop[0])   # worst

    def test_size_down_includes_best(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            n = int(rng.integers(3, 12))
            target = int(rng.integers(1, n + 1))
            pop = rng.normal(size=(n, 3))
            vals = rng.normal(size=n)
            out = align_student_population(pop, vals, target, (-100, 100), rng)
            best_row = pop[int(np.argmin(vals))]
            assert any(np.array_equal(row, best_row) for row in out)

    def test_size_up_copy_and_fill(self):
        pop = np.array([[1.0, 2.0], [3.0, 4.0]])
        vals = np.array([0.5, 0.1])
        out = align_student_population(pop, vals, 4, (-100, 100),
                                       np.random.default_rng(2))
        assert np.array_equal(out[:2], pop)
        assert np.all((out[2:] >= -100) & (out[2:] <= 100))
        assert out.shape == (4, 2)

    def test_equal_size_identity(self):
        rng = np.random.default_rng(3)
        pop = rng.normal(size=(5, 2))
        vals = rng.normal(size=5)
        out = align_student_population(pop, vals, 5, (-100, 100), rng)
        assert sorted(map(tuple, out)) == sorted(map(tuple, pop))

    def test_target_validation(self):
        with pytest.raises(ValueError):
            align_student_population(np.zeros((3, 2)), np.zeros(3), 0,
                                     (-100, 100), np.random.default_rng(0))


def test_unknown_teacher_rejected():
    inst = instance_from_seed("Sphere", 2, 0)
    with pytest.raises(ValueError):
        init_teacher("CMA", inst, 10, np.random.default_rng(0))
