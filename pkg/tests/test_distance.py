import math

import numpy as np
import pytest
from nibble_coloring.errors import PreconditionError, SizeLimitError
from nibble_coloring.lab.corpus import hamming_ball
from nibble_coloring.lab.distance import (
    a_hamming_distance,
    convex_distance,
    directional_distance,
    disagreement_vectors,
    event_probability,
    min_norm_point,
    set_distance,
    sup_direction_estimate,
    verify_talagrand,
)
from nibble_coloring.lab.space import ProductSpace


def test_convex_distance_examples():
    assert convex_distance([0, 0], [[1, 1]]) == pytest.approx(math.sqrt(2))
    assert convex_distance([0, 0], [[1, 0], [0, 1]]) == pytest.approx(1 / math.sqrt(2))
    assert convex_distance([0, 1, 0], [[0, 1, 0], [1, 1, 1]]) == 0


def test_min_norm_point():
    result = min_norm_point(np.array([[1.0, 0.0], [0.0, 1.0]]))
    assert result.point == pytest.approx([0.5, 0.5])
    assert result.weights == pytest.approx([0.5, 0.5])
    assert result.norm == pytest.approx(1 / math.sqrt(2))

    with pytest.raises(PreconditionError):
        min_norm_point(np.zeros((0, 2)))


def test_disagreement_vectors_are_minimal():
    chi = disagreement_vectors([0, 0, 0], [[1, 0, 0], [1, 1, 0], [1, 0, 0], [0, 0, 1]])
    assert sorted(map(tuple, chi.tolist())) == [(0.0, 0.0, 1.0), (1.0, 0.0, 0.0)]


def test_directional_distances():
    assert a_hamming_distance([0, 0, 1], [1, 0, 0], [1, 1, 1]) == pytest.approx(2 / math.sqrt(3))
    assert directional_distance([0, 0], [[1, 0], [0, 1]], [1, 1]) == pytest.approx(1 / math.sqrt(2))
    with pytest.raises(PreconditionError):
        directional_distance([0, 0], [[1, 0]], [0, 0])


@pytest.mark.parametrize("x, y", [([0, 0, 0, 0], [1, 0, 1, 1]), ([1, 0, 1], [0, 0, 0])])
def test_singleton_distance_is_symmetric(x, y):
    expected = math.sqrt(sum(a != b for a, b in zip(x, y)))
    assert set_distance([x], [y]) == pytest.approx(expected)
    assert set_distance([y], [x]) == pytest.approx(expected)


@pytest.mark.parametrize("seed", range(5))
def test_sup_direction_matches_convex_distance(seed: int):
    rng = np.random.default_rng(seed)
    m = 6
    x = rng.integers(0, 2, size=m)
    A = rng.integers(0, 2, size=(5, m))

    distance = convex_distance(x, A)
    estimate = sup_direction_estimate(x, A, samples=200, seed=seed)

    assert estimate.sampled <= distance + 1e-9, "Every direction bounds the distance from below."
    assert estimate.gap >= -1e-9
    assert estimate.dual == pytest.approx(distance, abs=1e-6)
    assert directional_distance(x, A, estimate.direction) == pytest.approx(estimate.sampled)


@pytest.mark.parametrize("m", range(2, 7))
def test_sampled_directions_reach_ball_distance(m: int):
    rng = np.random.default_rng(m)
    for _ in range(5):
        center = rng.integers(0, 2, size=m)
        radius = int(rng.integers(0, m // 2 + 1))
        A = hamming_ball(center, radius)
        for x in hamming_ball(rng.integers(0, 2, size=m), 1):
            estimate = sup_direction_estimate(x, A, samples=16, seed=0)
            k = int(np.sum(np.asarray(x) != center))
            # The uniform direction on the coordinates where x and the center differ is optimal.
            expected = (k - radius) / math.sqrt(k) if k > radius else 0.0
            assert estimate.sampled == pytest.approx(expected, abs=1e-9)
            assert abs(estimate.gap) <= 1e-6
            assert estimate.dual == pytest.approx(convex_distance(x, A), abs=1e-9)


def test_random_directions_alone_fall_short():
    # Only the coordinate vectors and random directions above the subset cap: the estimate stays a strict lower bound.
    m = 14
    x = [0] * m
    A = [[1] * 7 + [0] * 7, [0] * 7 + [1] * 7]
    estimate = sup_direction_estimate(x, A, samples=50, seed=1)
    assert estimate.dual == pytest.approx(convex_distance(x, A))
    assert 0 < estimate.sampled < estimate.dual


def test_distance_size_cap():
    with pytest.raises(SizeLimitError):
        convex_distance([0] * 30, [[1] * 30])


def test_talagrand_balls():
    m = 6
    space = ProductSpace.fair_coins(m)
    A = hamming_ball([0] * m, 1)
    B = hamming_ball([1] * m, 1)

    assert event_probability(space, A) == pytest.approx(7 / 64)
    report = verify_talagrand(space, A, B)
    assert report.distance == pytest.approx(set_distance(A, B))
    assert report.distance > 0
    assert report.holds


def test_talagrand_failure_is_reported():
    space = ProductSpace.fair_coins(2)
    cube = hamming_ball([0, 0], 2)
    report = verify_talagrand(space, cube, cube, distance=0.0)
    assert report.product == pytest.approx(1.0)
    assert not report.holds, "Holding requires a strict inequality."
