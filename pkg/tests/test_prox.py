import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from levelset.prox import BallSpec, Norm, Regularizer, ball_distance, ball_norm, is_feasible, project_ball, prox_l1

from oracles import best_sparse_residual, l1_projection_by_faces, scalar_prox_by_grid

finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False)


def vectors(min_size=1, max_size=20):
    return st.integers(min_size, max_size).flatmap(lambda n: arrays(float, n, elements=finite))


# -- soft thresholding -------------------------------------------------------


def test_prox_l1_examples():
    np.testing.assert_array_equal(prox_l1([3.0, -0.5, -2.0, 0.0], 1.0), [2.0, 0.0, -1.0, 0.0])
    with pytest.raises(ValueError):
        prox_l1([1.0], 0.0)


@settings(max_examples=40, deadline=None)
@given(st.floats(-5, 5), st.floats(0.01, 3))
def test_prox_l1_matches_grid_minimizer(y, step):
    got = prox_l1(np.array([y]), step)[0]
    ref = scalar_prox_by_grid(np.abs, y, step)
    assert abs(got - ref) <= 2e-4


def test_regularizer_prox_uses_weight():
    reg = Regularizer("l1", weight=2.0)
    np.testing.assert_allclose(reg.prox(np.array([5.0, -1.0]), 0.5), [4.0, 0.0])
    assert reg.value(np.array([1.0, -2.0])) == 6.0
    zero = Regularizer("zero")
    assert zero.value(np.ones(3)) == 0.0
    np.testing.assert_array_equal(zero.prox(np.array([1.5]), 3.0), [1.5])
    with pytest.raises(ValueError):
        Regularizer("l2")


# -- ball specs ---------------------------------------------------------------


def test_ballspec_validation():
    assert BallSpec("l1", 2.0).norm is Norm.L1
    with pytest.raises(ValueError):
        BallSpec("l1", -1.0)
    with pytest.raises(ValueError):
        BallSpec("l0", 2.5)
    with pytest.raises(ValueError):
        BallSpec("l3", 1.0)


def test_ball_norm_values():
    z = np.array([3.0, 0.0, -4.0])
    assert ball_norm(z, "l0") == 2
    assert ball_norm(z, "l1") == 7
    assert ball_norm(z, "l2") == 5
    assert ball_norm(z, "linf") == 4


# -- projections: worked examples ----------------------------------------------


def test_l2_examples():
    np.testing.assert_allclose(project_ball(np.array([3.0, 4.0]), BallSpec("l2", 1.0)), [0.6, 0.8])
    z = np.array([0.3, 0.4])
    np.testing.assert_array_equal(project_ball(z, BallSpec("l2", 1.0)), z)
    # exactly on the boundary stays put
    np.testing.assert_array_equal(project_ball(np.array([0.6, 0.8]), BallSpec("l2", 1.0)), [0.6, 0.8])


def test_linf_example():
    np.testing.assert_array_equal(project_ball(np.array([2.0, -0.5, -3.0]), BallSpec("linf", 1.0)), [1.0, -0.5, -1.0])


def test_l1_examples():
    np.testing.assert_allclose(project_ball(np.array([2.0, 0.0]), BallSpec("l1", 1.0)), [1.0, 0.0])
    np.testing.assert_allclose(project_ball(np.array([1.0, 1.0]), BallSpec("l1", 1.0)), [0.5, 0.5])
    np.testing.assert_allclose(project_ball(np.array([3.0, -1.0, 0.5]), BallSpec("l1", 2.0)), [2.0, 0.0, 0.0])


def test_l0_examples_and_ties():
    z = np.array([0.1, -5.0, 2.0, 3.0])
    np.testing.assert_array_equal(project_ball(z, BallSpec("l0", 2)), [0.0, -5.0, 0.0, 3.0])
    # equal magnitudes: lowest index wins
    np.testing.assert_array_equal(project_ball(np.array([1.0, -1.0, 1.0]), BallSpec("l0", 1)), [1.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        project_ball(np.ones(3), BallSpec("l0", 4))


@pytest.mark.parametrize("norm", ["l0", "l1", "l2", "linf"])
def test_zero_radius_gives_zero(norm):
    np.testing.assert_array_equal(project_ball(np.array([1.0, -2.0, 3.0]), BallSpec(norm, 0)), np.zeros(3))


def test_empty_vector():
    for norm in ("l1", "l2", "linf"):
        assert project_ball(np.zeros(0), BallSpec(norm, 1.0)).size == 0


def test_ball_distance_and_feasibility():
    ball = BallSpec("l2", 1.0)
    assert ball_distance(np.array([3.0, 4.0]), ball) == pytest.approx(4.0)
    assert is_feasible(np.array([0.6, 0.8]), ball)
    assert not is_feasible(np.array([0.6, 0.81]), ball)
    assert is_feasible(np.array([1.0, 0.0, 0.0]), BallSpec("l0", 1))


# -- projections: oracles -------------------------------------------------------


def test_l1_projection_matches_face_enumeration():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(1, 7))
        z = rng.standard_normal(n) * rng.choice([0.1, 1.0, 10.0])
        r = float(rng.uniform(0.0, 1.5) * np.sum(np.abs(z)))
        got = project_ball(z, BallSpec("l1", r))
        worst = max(worst, float(np.max(np.abs(got - l1_projection_by_faces(z, r)))))
    assert worst <= 1e-8


def test_l0_projection_beats_every_support():
    rng = np.random.default_rng(7)
    for _ in range(200):
        n = int(rng.integers(1, 13))
        tau = int(rng.integers(0, n + 1))
        z = rng.standard_normal(n)
        got = project_ball(z, BallSpec("l0", tau))
        assert float(np.sum((z - got) ** 2)) <= best_sparse_residual(z, tau) + 1e-12


@pytest.mark.parametrize("norm", ["l0", "l1", "l2", "linf"])
def test_idempotent_and_feasible_bulk(norm):
    rng = np.random.default_rng(11)
    for _ in range(10_000):
        n = int(rng.integers(1, 16))
        z = rng.standard_normal(n) * 3
        radius = float(rng.integers(0, n + 1)) if norm == "l0" else float(rng.exponential(2.0))
        ball = BallSpec(norm, radius)
        p = project_ball(z, ball)
        assert is_feasible(p, ball)
        np.testing.assert_allclose(project_ball(p, ball), p, rtol=0, atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(vectors(), st.floats(0.0, 30.0), st.sampled_from(["l1", "l2", "linf"]))
def test_convex_projection_variational_inequality(z, radius, norm):
    # <z - P z, y - P z> <= 0 for y in the ball; probe with scaled corners
    ball = BallSpec(norm, radius)
    p = project_ball(z, ball)
    rng = np.random.default_rng(0)
    for _ in range(5):
        y = project_ball(rng.standard_normal(z.size) * 10, ball)
        assert float((z - p) @ (y - p)) <= 1e-7 * (1 + np.linalg.norm(z) ** 2)


@settings(max_examples=100, deadline=None)
@given(vectors(), st.floats(0.0, 30.0), st.sampled_from(["l1", "l2", "linf"]))
def test_convex_projection_is_nonexpansive_toward_feasible_points(z, radius, norm):
    ball = BallSpec(norm, radius)
    y = project_ball(z * 0.5, ball)
    assert np.linalg.norm(project_ball(z, ball) - y) <= np.linalg.norm(z - y) + 1e-9
