import numpy as np
import pytest

from scmkit.diagnostics import (
    CheckReport,
    check_composition_bound,
    check_composition_fix,
    check_contraction,
    check_convex_combination,
    check_fejer_trace,
    check_fne,
    check_lipschitz,
    check_oracle_agreement,
    check_strong_monotonicity,
    run_full_suite,
)
from scmkit.io import Problem
from scmkit.monotone import Affine, Identity, ParameterError
from scmkit.operators import (
    BallProjection,
    BoxProjection,
    FoldFixture,
    HalfspaceProjection,
    OperatorStack,
    ScaleFixture,
)
from scmkit.solver import ScmConfig, solve

X1_LE_0 = HalfspaceProjection([1.0, 0.0], 0.0)
ORTHANT = OperatorStack((X1_LE_0, HalfspaceProjection([0.0, 1.0], 0.0)))
C_STACK = OperatorStack((HalfspaceProjection([-1.0, -1.0], -1.0), HalfspaceProjection([-1.0, 0.0], 0.0)))


def test_report_pass_invariant():
    r = CheckReport("x", 3, 2e-10, 1e-10)
    assert not r.passed and r.to_dict()["pass"] is False
    assert CheckReport("x", 3, 1e-10, 1e-10).passed


class TestFne:
    def test_halfspace(self):
        r = check_fne(HalfspaceProjection([1.0, 2.0, -1.0], 0.5), 3, samples=1000)
        assert r.passed and r.samples == 1000

    def test_box_acting_as_identity(self):
        op = BoxProjection(-1e6 * np.ones(3), 1e6 * np.ones(3))
        assert check_fne(op, 3, samples=500).worst_violation == 0.0

    def test_scale_map_fails(self):
        assert not check_fne(ScaleFixture(2.0, size=2), 2, samples=10).passed

    def test_reproducible(self):
        op = BallProjection([1.0, 0.0], 0.5)
        assert check_fne(op, 2, seed=5) == check_fne(op, 2, seed=5)


class TestContraction:
    def test_zero_map(self):
        assert check_contraction(Identity(), 1.0, 1.0, 3).worst_violation == 0.0

    def test_exact_half(self):
        assert check_contraction(Identity(), 0.5, 1.0, 3).passed

    def test_affine_diag(self):
        F = Affine(np.diag([1.0, 2.0]))
        assert check_contraction(F, 0.25, 0.7, 2, samples=1000).passed

    def test_parameter_error(self):
        with pytest.raises(ParameterError):
            check_contraction(Identity(), 2.5, 1.0, 2)

    def test_map_certificates(self):
        F = Affine(np.array([[2.0, 1.0], [-1.0, 3.0]]), [1.0, 1.0])
        assert check_strong_monotonicity(F, 2).passed and check_lipschitz(F, 2).passed

    def test_false_constant_detected(self):
        # kappa override too large is allowed; a too small Lipschitz claim is caught
        F = Affine(np.diag([1.0, 2.0]))
        object.__setattr__(F, "kappa", 1.5)
        assert not check_lipschitz(F, 2).passed


class TestCompositionBound:
    def test_x_equals_z(self):
        assert check_composition_bound(ORTHANT, [0.0, 0.0], [0.0, 0.0]).worst_violation == 0.0

    def test_single(self):
        stack = OperatorStack((X1_LE_0,))
        assert check_composition_bound(stack, [5.0, 1.0], [-1.0, 0.0]).passed

    def test_orthant(self):
        assert check_composition_bound(ORTHANT, [3.0, 4.0], [0.0, 0.0]).passed

    def test_requires_common_fixed_point(self):
        with pytest.raises(ValueError, match="common fixed point"):
            check_composition_bound(ORTHANT, [3.0, 4.0], [1.0, 0.0])

    def test_composition_fix(self, rng):
        pts = [np.zeros(2), [-1.0, -3.0]] + list(5 * rng.standard_normal((200, 2)))
        assert check_composition_fix(ORTHANT, pts).passed


class TestFejer:
    def test_phi0_at_z(self):
        r = check_fejer_trace([[np.zeros(2), np.zeros(2)]], [0.5], OperatorStack((X1_LE_0,)), [0.0, 0.0])
        assert r.worst_violation == 0.0

    def test_arithmetic_slack(self):
        # lhs 0.25, rhs 0.75
        r = check_fejer_trace([[np.array([1.0, 0.0])]], [0.5], OperatorStack((X1_LE_0,)), [0.0, 0.0])
        assert r.passed and r.worst_violation == 0.0

    def test_single_halfspace_run(self):
        stack = OperatorStack((HalfspaceProjection([1.0, 1.0], -1.0),))
        cfg = ScmConfig(max_iters=100, residual_tol=0.0)
        res = solve(stack, Identity(), [4.0, 2.0], cfg, keep_intermediates=True)
        lams = [r.lambda_n for r in res.trace]
        r = check_fejer_trace(res.intermediates, lams, stack, [-0.5, -0.5])
        assert r.passed and r.samples == 100

    def test_missing_intermediates(self):
        with pytest.raises(ValueError, match="intermediates"):
            check_fejer_trace(None, [], ORTHANT, [0.0, 0.0])


def test_convex_combination_identity():
    assert check_convex_combination(5, samples=2000).passed


def test_oracle_agreement():
    assert check_oracle_agreement(C_STACK).passed


class TestFullSuite:
    def test_all_pass(self):
        prob = Problem(2, C_STACK, Identity(), np.array([0.5, 0.5]))
        reports = run_full_suite(prob, ScmConfig(), samples=300)
        failed = [r.name for r in reports if not r.passed]
        assert failed == []
        names = {r.name for r in reports}
        assert {"composition_bound", "composition_fix", "fejer_step", "oracle_agreement",
                "convex_combination", "strong_monotonicity", "lipschitz"} <= names

    def test_fold_fixture_fails_exactly_fne(self):
        stack = OperatorStack((FoldFixture(1.0, size=2), HalfspaceProjection([1.0, 1.0], 3.0)))
        reports = run_full_suite(Problem(2, stack, Identity(), None), ScmConfig(), samples=500)
        failed = [r.name for r in reports if not r.passed]
        assert failed == ["fne[1:fixture_fold]"]

    def test_scale_fixture_fails_fne(self):
        stack = OperatorStack((ScaleFixture(2.0, size=2),))
        reports = run_full_suite(Problem(2, stack, Identity(), None), ScmConfig(), samples=100)
        failed = {r.name for r in reports if not r.passed}
        assert "fne[1:fixture_scale]" in failed

    def test_reproducible(self):
        prob = Problem(2, C_STACK, Identity(), None)
        a = [r.to_dict() for r in run_full_suite(prob, ScmConfig(), samples=100)]
        b = [r.to_dict() for r in run_full_suite(prob, ScmConfig(), samples=100)]
        assert a == b

    def test_empty_stack_rejected_upstream(self):
        with pytest.raises(ValueError):
            OperatorStack(())
