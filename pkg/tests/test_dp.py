import numpy as np
import pytest

from octopus.dp import best_cyclic_path, cyclic_totals_by_start, viterbi_chain

from .oracle import chain_dp_exhaustive, cyclic_dp_bruteforce


def test_chain_viterbi_matches_exhaustive_enumeration():
    rng = np.random.default_rng(11)
    for _ in range(25):
        score = rng.normal(size=(5, 5))
        path, total = viterbi_chain(score, jump=1)
        assert total == pytest.approx(chain_dp_exhaustive(score, 1), abs=1e-9)
        assert np.all(np.abs(np.diff(path)) <= 1)


def test_cyclic_path_matches_bruteforce_on_micro_instances():
    rng = np.random.default_rng(7)
    for trial in range(30):
        n_steps = int(rng.integers(4, 16))
        n_states = int(rng.integers(4, 24))
        jump = int(rng.integers(1, 4))
        score = rng.normal(size=(n_steps, n_states))
        path, total = best_cyclic_path(score, jump)
        assert abs(int(path[0]) - int(path[-1])) <= jump
        assert np.all(np.abs(np.diff(path)) <= jump)
        expected = cyclic_dp_bruteforce(score, jump)
        assert total == pytest.approx(expected, abs=1e-9)


def test_cyclic_totals_by_start_agree_with_bruteforce():
    rng = np.random.default_rng(23)
    score = rng.normal(size=(6, 8))
    totals = cyclic_totals_by_start(score, 2)
    assert totals.max() == pytest.approx(cyclic_dp_bruteforce(score, 2), abs=1e-9)


def test_circular_states_wrap():
    # a path that must cross the angular seam
    n_steps, n_states = 6, 12
    score = np.full((n_steps, n_states), -1.0)
    positions = [10, 11, 0, 1, 0, 11]
    for t, s in enumerate(positions):
        score[t, s] = 5.0
    path, _ = viterbi_chain(score, jump=2, circular_states=True)
    assert list(path) == positions


def test_fixed_start_and_end_near():
    rng = np.random.default_rng(4)
    score = rng.normal(size=(8, 10))
    path, _ = viterbi_chain(score, jump=2, start=4, end_near=4)
    assert path[0] == 4
    assert abs(int(path[-1]) - 4) <= 2
