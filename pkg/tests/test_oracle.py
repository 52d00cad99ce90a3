import numpy as np
import pytest

from scmkit.monotone import Affine, ClosestPoint, Identity
from scmkit.operators import (
    BallProjection,
    BoxProjection,
    HalfspaceProjection,
    HyperplaneProjection,
    OperatorStack,
    SoftThreshold,
)
from scmkit.oracle import (
    Ball,
    BudgetExceeded,
    Infeasible,
    Polyhedron,
    UnsupportedSet,
    exact_projector,
    feasible_set_from_stack,
    project_polyhedron_exact,
    sample_feasible,
    solve_vip_reference,
    vip_residual,
    vip_result,
)
from scmkit.testing import random_polyhedron

NEG_ORTHANT = Polyhedron.from_halfspaces([((1, 0), 0), ((0, 1), 0)])
C_SET = Polyhedron.from_halfspaces([((-1, -1), -1), ((-1, 0), 0)])
C_STACK = OperatorStack((HalfspaceProjection([-1.0, -1.0], -1.0), HalfspaceProjection([-1.0, 0.0], 0.0)))
UNIT_2_M1 = np.array([0.8944271909999158785636694674925104941762,
                      -0.4472135954999579392818347337462552470881])


class TestProjectPolyhedron:
    def test_clip_both(self):
        r = project_polyhedron_exact(NEG_ORTHANT, [1.0, 1.0])
        np.testing.assert_array_equal(r.x, [0, 0])
        assert r.active == (0, 1)

    def test_clip_one(self):
        r = project_polyhedron_exact(NEG_ORTHANT, [-1.0, 2.0])
        np.testing.assert_array_equal(r.x, [-1, 0])
        assert r.active == (1,)
        np.testing.assert_allclose(r.multipliers, [2.0])

    def test_line(self):
        P = Polyhedron.from_halfspaces([((1, 1), 1)])
        np.testing.assert_allclose(project_polyhedron_exact(P, [3.0, 4.0]).x, [0.0, 1.0], atol=1e-15)

    def test_min_norm_point(self):
        # grid search over C confirms (0.5, 0.5)
        np.testing.assert_allclose(project_polyhedron_exact(C_SET, [0.0, 0.0]).x, [0.5, 0.5], atol=1e-15)

    def test_interior_point_unchanged(self):
        r = project_polyhedron_exact(NEG_ORTHANT, [-1.0, -2.0])
        assert r.active == () and r.distance_sq == 0.0

    def test_infeasible(self):
        P = Polyhedron.from_halfspaces([((1,), -1), ((-1,), -1)])
        with pytest.raises(Infeasible):
            project_polyhedron_exact(P, [0.0])

    def test_budget(self):
        P = Polyhedron(np.eye(13), np.ones(13))
        with pytest.raises(BudgetExceeded):
            project_polyhedron_exact(P, np.zeros(13))

    def test_ball_only(self):
        r = project_polyhedron_exact(Polyhedron(np.zeros((0, 2)), np.zeros(0)), [3.0, 4.0], Ball(np.zeros(2), 1.0))
        np.testing.assert_allclose(r.x, [0.6, 0.8])
        assert r.ball_active and r.ball_multiplier == pytest.approx(4.0)

    def test_ball_and_halfspace(self):
        # x2 <= 0 cut with the unit ball; (2, 1) lands on (1, 0) with both active
        P = Polyhedron.from_halfspaces([((0, 1), 0)])
        r = project_polyhedron_exact(P, [2.0, 1.0], Ball(np.zeros(2), 1.0))
        np.testing.assert_allclose(r.x, [1.0, 0.0], atol=1e-15)
        assert r.active == (0,) and r.ball_active
        np.testing.assert_allclose([r.multipliers[0], r.ball_multiplier], [1.0, 1.0], atol=1e-12)

    def test_ball_halfspace_disjoint(self):
        P = Polyhedron.from_halfspaces([((1, 0), -2)])
        with pytest.raises(Infeasible):
            project_polyhedron_exact(P, [0.0, 0.0], Ball(np.zeros(2), 1.0))

    def test_degenerate_vertex(self):
        # three lines through the origin in R^2
        P = Polyhedron.from_halfspaces([((1, 0), 0), ((0, 1), 0), ((1, 1), 0)])
        np.testing.assert_allclose(project_polyhedron_exact(P, [1.0, 2.0]).x, [0.0, 0.0], atol=1e-15)

    def test_optimality_against_samples(self, rng):
        for _ in range(10):
            P, stack, z0 = random_polyhedron(rng, 4, 5)
            y = 5 * rng.standard_normal(4)
            x = project_polyhedron_exact(P, y).x
            V = sample_feasible(stack, 100, seed=int(rng.integers(1 << 31)), center=z0, radius=3.0)
            assert np.max((V - x) @ (y - x)) <= 1e-9


class TestFeasibleSet:
    def test_conversions(self):
        stack = OperatorStack((
            HyperplaneProjection([1.0, 0.0], 1.0),
            BoxProjection([-1.0, -np.inf], [1.0, 2.0]),
            BallProjection([0.0, 0.0], 5.0),
        ))
        P, ball = feasible_set_from_stack(stack)
        assert len(P) == 2 + 3 and ball is not None

    def test_unsupported(self):
        with pytest.raises(UnsupportedSet):
            feasible_set_from_stack(OperatorStack((SoftThreshold(1.0, size=2),)))
        two_balls = OperatorStack((BallProjection([0, 0], 1.0), BallProjection([1, 0], 1.0)))
        with pytest.raises(UnsupportedSet):
            feasible_set_from_stack(two_balls)

    def test_exact_projector_ball(self):
        proj = exact_projector(OperatorStack((BallProjection([0.0, 0.0], 1.0),)))
        np.testing.assert_allclose(proj(np.array([3.0, 4.0])), [0.6, 0.8])


class TestReferenceVip:
    def test_min_norm(self):
        x = solve_vip_reference(Identity(), exact_projector(C_STACK), [3.0, -2.0])
        np.testing.assert_allclose(x, [0.5, 0.5], atol=1e-11)

    def test_closest_point_feasible(self):
        a = np.array([1.0, 3.0])
        np.testing.assert_allclose(solve_vip_reference(ClosestPoint(a), exact_projector(C_STACK), [0, 0]), a, atol=1e-11)

    def test_affine_over_ball(self):
        proj = exact_projector(OperatorStack((BallProjection([0.0, 0.0], 1.0),)))
        x = solve_vip_reference(Affine(np.eye(2), [-2.0, 1.0]), proj, [0.0, 0.0])
        np.testing.assert_allclose(x, UNIT_2_M1, atol=1e-12)

    def test_vip_result_multipliers(self):
        x, active, mult, on_ball, _ = vip_result(Identity(), C_STACK)
        np.testing.assert_allclose(x, [0.5, 0.5], atol=1e-11)
        assert active == (0,) and not on_ball
        # F(x) + nu a = 0 with a = (-1, -1)
        np.testing.assert_allclose(mult, [0.5], atol=1e-10)


class TestVipResidual:
    def test_solution(self):
        V = np.array([[0.0, 1.0], [1.0, 0.0], [3.0, 7.0], [0.2, 5.0]])
        assert vip_residual(Identity(), [0.5, 0.5], V) <= 1e-9

    def test_arithmetic(self):
        assert vip_residual(Identity(), [1.0, 1.0], [[0.5, 0.5]]) == pytest.approx(1.0)

    def test_requires_samples(self):
        with pytest.raises(ValueError):
            vip_residual(Identity(), [1.0, 1.0], [])


def test_sample_feasible_points_are_feasible(rng):
    P, stack, z0 = random_polyhedron(rng, 3, 4)
    V = sample_feasible(stack, 50, seed=1, center=z0, radius=2.0)
    assert V.shape == (50, 3)
    assert np.all(V @ P.A.T <= P.b + 1e-12)
