import math

import numpy as np
import pytest

from conftest import make_fuzz_run
from gradagrad import (
    SGD,
    AdaGrad,
    Adam,
    CoordState,
    Domain,
    GradaGrad,
    HyperParams,
    ScalarGradaGrad,
    accumulate_positive,
    apply_reparam,
    clip_negative_v,
    compute_v_coord,
    compute_v_scalar,
    preconditioner_entry,
    project,
)


class TestHyperParams:
    def test_defaults_valid(self):
        p = HyperParams()
        assert p.gamma0 == 1.0 and p.rho == 2.0 and p.r_fixed == 1.0

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(gamma0=0.0),
            dict(rho=-0.1),
            dict(beta=1.0),
            dict(beta=-0.2),
            dict(g_inf=0.0),
            dict(d_inf=0.0),
            dict(r_fixed=-1.0),
            dict(mode="other"),
        ],
    )
    def test_rejects_bad_values(self, kwargs):
        with pytest.raises(ValueError):
            HyperParams(**kwargs)

    def test_theory_mode_needs_reachable_cap(self):
        with pytest.raises(ValueError):
            HyperParams(mode="theory", gamma0=2.0, d_inf=1.0)
        HyperParams(mode="theory", gamma0=1.0, d_inf=1.0)  # equal is fine


class TestComputeVScalar:
    def test_first_step_convention(self):
        # g_prev = 0 forces v = ||g||^2
        assert compute_v_scalar([3.0], [0.0], 2.0) == 9.0

    def test_direct_substitution(self):
        assert compute_v_scalar([1.0, 1.0], [1.0, 1.0], 2.0) == -2.0

    def test_orthogonal_gradients(self):
        assert compute_v_scalar([1.0, -1.0], [1.0, 1.0], 1.0) == 2.0

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            compute_v_scalar([1.0, 2.0], [1.0], 2.0)


class TestComputeVCoord:
    def test_theory_init(self):
        p = HyperParams(mode="theory", g_inf=4.0)
        assert compute_v_coord(0.5, 0.0, 2.0, 0, 1.0, p) == (16.0, "init")

    def test_practical_init(self):
        p = HyperParams(mode="practical")
        assert compute_v_coord(3.0, 0.0, 2.0, 0, 1.0, p) == (9.0, "init")

    def test_capped(self):
        p = HyperParams(d_inf=5.0)
        assert compute_v_coord(3.0, 100.0, 2.0, 4, 5.0, p) == (9.0, "capped")
        # cap comparison is >=, not exact equality
        assert compute_v_coord(3.0, 100.0, 2.0, 4, 5.0 + 1e-9, p) == (9.0, "capped")

    def test_negative(self):
        p = HyperParams()
        v, branch = compute_v_coord(1.0, 1.0, 2.0, 1, 1.0, p)
        assert v == -1.0 and branch == "negative"

    def test_zero_ties_to_positive(self):
        p = HyperParams()
        v, branch = compute_v_coord(2.0, 1.0, 2.0, 1, 1.0, p)
        assert v == 0.0 and branch == "positive"


class TestClipNegativeV:
    def test_adaptive_clip_binds(self):
        v_clip, r = clip_negative_v(-1.0, 1.0, 1.0, 2.0, 0.2)
        assert r == pytest.approx(3.0)
        assert v_clip == pytest.approx(-0.6)
        # preconditioner ratio after reparam equals the critical ratio exactly
        ratio = 1.0 / math.sqrt(1.0 - v_clip / 0.2)
        h = 1.0 ** 2 / (2.0 * 1.0 * 1.0)
        assert ratio == pytest.approx(h, rel=1e-12)

    def test_adaptive_clip_loose(self):
        v_clip, r = clip_negative_v(-1.0, 1.0, 1.0, 2.0, 0.5)
        assert (v_clip, r) == (-1.0, 3.0)
        # ratio stays above the critical one: growth was already safe
        assert 1.0 / math.sqrt(1.0 - v_clip / 0.5) >= 0.5

    def test_fixed_r(self):
        assert clip_negative_v(-0.5, 0.0, 0.0, 0.0, 1.0, r_fixed=0.25) == (-0.25, 0.25)

    def test_zero_alpha_is_contract_violation(self):
        with pytest.raises(ValueError):
            clip_negative_v(-1.0, 1.0, 1.0, 2.0, 0.0)

    def test_nonnegative_v_rejected(self):
        with pytest.raises(ValueError):
            clip_negative_v(0.0, 1.0, 1.0, 2.0, 1.0)


class TestApplyReparam:
    def test_direct(self):
        assert apply_reparam(1.0, 0.5, -1.0) == pytest.approx(math.sqrt(3.0))

    def test_identity_at_zero(self):
        assert apply_reparam(2.5, 7.0, 0.0) == 2.5

    def test_continues_clip_example(self):
        gamma_new = apply_reparam(1.0, 0.2, -0.6)
        assert gamma_new == pytest.approx(2.0)
        # the implied accumulator keeps the step size unchanged
        assert gamma_new / math.sqrt(0.2 - (-0.6)) == pytest.approx(1.0 / math.sqrt(0.2), rel=1e-12)

    def test_bad_alpha(self):
        with pytest.raises(ValueError):
            apply_reparam(1.0, 0.0, -0.1)

    def test_positive_v_rejected(self):
        with pytest.raises(ValueError):
            apply_reparam(1.0, 1.0, 0.5)


class TestAccumulatePositive:
    @pytest.mark.parametrize("alpha,v,expected", [(0.0, 9.0, 9.0), (5.0, 0.0, 5.0), (1.0, 2.0, 3.0)])
    def test_values(self, alpha, v, expected):
        assert accumulate_positive(alpha, v) == expected

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            accumulate_positive(1.0, -0.1)


class TestPreconditionerEntry:
    @pytest.mark.parametrize(
        "alpha,gamma,expected", [(4.0, 2.0, 1.0), (9.0, 1.0, 3.0), (2.0, math.sqrt(2.0), 1.0)]
    )
    def test_values(self, alpha, gamma, expected):
        assert preconditioner_entry(CoordState(gamma=gamma, alpha=alpha)) == pytest.approx(expected)

    def test_unbootstrapped(self):
        with pytest.raises(ValueError, match="unbootstrapped"):
            preconditioner_entry(CoordState(gamma=1.0, alpha=0.0))


class TestProject:
    def test_box_clamp(self):
        box = Domain.box([-1.0, -1.0], [1.0, 1.0])
        np.testing.assert_array_equal(project([5.0, -5.0], box), [1.0, -1.0])

    def test_unconstrained_identity(self):
        p = np.array([3.0, -7.0, 0.0])
        np.testing.assert_array_equal(project(p, Domain()), p)

    def test_interior_fixed_point_and_idempotence(self):
        box = Domain.box([0.0], [1.0])
        np.testing.assert_array_equal(project([0.5], box), [0.5])
        once = project([3.0], box)
        np.testing.assert_array_equal(project(once, box), once)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            project([1.0, 2.0], Domain.box([0.0], [1.0]))

    def test_bad_box(self):
        with pytest.raises(ValueError):
            Domain.box([1.0], [1.0])


class TestScalarStepper:
    def test_hand_trace(self):
        opt = ScalarGradaGrad([0.0], HyperParams(gamma0=1.0, rho=2.0, r_fixed=1.0))
        tr0 = opt.step([3.0])
        assert tr0.v_raw[0] == 9.0
        assert opt.coord.alpha == 9.0
        assert opt.coord.gamma == 1.0
        assert tr0.a_after[0] == 3.0
        np.testing.assert_allclose(opt.x, [-1.0])

        tr1 = opt.step([3.0])
        assert tr1.v_raw[0] == -9.0
        assert tr1.v_clipped[0] == -9.0  # -r*alpha = -9 exactly
        assert tr1.branch == ["negative"]
        assert opt.coord.gamma == pytest.approx(math.sqrt(2.0))
        assert opt.coord.alpha == 9.0
        assert tr1.a_after[0] == pytest.approx(3.0 / math.sqrt(2.0))
        np.testing.assert_allclose(opt.x, [-1.0 - math.sqrt(2.0)])

    def test_zero_gradient_midrun_changes_nothing(self):
        opt = ScalarGradaGrad([0.0], HyperParams(rho=2.0, r_fixed=1.0))
        opt.step([3.0])
        x_before = opt.x.copy()
        gamma, alpha = opt.coord.gamma, opt.coord.alpha
        tr = opt.step([0.0])
        assert tr.v_raw[0] == 0.0 and tr.branch == ["positive"]
        assert (opt.coord.gamma, opt.coord.alpha) == (gamma, alpha)
        np.testing.assert_array_equal(opt.x, x_before)

    def test_zero_gradient_start_is_zero_step(self):
        opt = ScalarGradaGrad([2.0])
        tr = opt.step([0.0])
        assert opt.coord.alpha == 0.0
        assert tr.a_after[0] == 0.0
        np.testing.assert_array_equal(opt.x, [2.0])
        # a later real gradient bootstraps normally
        opt.step([1.0])
        assert opt.coord.alpha == 1.0

    def test_adaptive_r_opt_in(self):
        params = HyperParams(gamma0=1.0, rho=2.0, r_fixed=None)
        opt = ScalarGradaGrad([0.0], params)
        opt.step([3.0])
        tr = opt.step([3.0])
        # v = -9 with alpha = 9; adaptive r = (rho*<g,g_prev>/||g||^2)^2 - 1 = 3
        assert tr.r[0] == pytest.approx(3.0)
        assert tr.v_clipped[0] == -9.0  # -r*alpha = -27 does not bind
        assert opt.coord.gamma == pytest.approx(math.sqrt(2.0))

    def test_trace_records_gradient_norm(self):
        opt = ScalarGradaGrad([0.0, 0.0])
        tr = opt.step([3.0, 4.0])
        assert tr.g[0] == pytest.approx(5.0)


class TestDiagonalStepper:
    def test_theory_mode_first_step(self):
        params = HyperParams(gamma0=1.0, rho=2.0, beta=0.0, g_inf=1.0, mode="theory")
        opt = GradaGrad([0.0, 0.0], params)
        tr = opt.step([1.0, 0.0])
        np.testing.assert_array_equal(tr.v_raw, [1.0, 1.0])
        np.testing.assert_array_equal(opt.alpha, [1.0, 1.0])
        np.testing.assert_array_equal(tr.a_after, [1.0, 1.0])
        np.testing.assert_array_equal(opt.z, [-1.0, 0.0])
        np.testing.assert_array_equal(opt.x, [-1.0, 0.0])
        np.testing.assert_array_equal(opt.m_prev, [1.0, 0.0])
        assert tr.branch == ["init", "init"]

    def test_direction_equals_gradient_without_momentum(self):
        rng = np.random.default_rng(3)
        opt = GradaGrad(rng.standard_normal(4), HyperParams(rho=2.0))
        for _ in range(50):
            g = rng.standard_normal(4)
            opt.step(g)
            np.testing.assert_allclose(opt.m_prev, g, rtol=1e-12, atol=0.0)

    def test_z_tracks_x_without_momentum_unconstrained(self):
        rng = np.random.default_rng(14)
        opt = GradaGrad(rng.standard_normal(3), HyperParams(rho=2.0, beta=0.0))
        np.testing.assert_array_equal(opt.z, opt.x)
        for _ in range(80):
            opt.step(rng.normal(0.5, 0.5, 3))
            np.testing.assert_allclose(opt.z, opt.x, rtol=0.0, atol=0.0)

    def test_capped_coordinate_accumulates_squares(self):
        params = HyperParams(gamma0=1.0, rho=2.0, d_inf=1.2)
        opt = GradaGrad([0.0], params)
        opt.step([1.0])           # init: alpha=1
        tr1 = opt.step([1.0])     # v=-1, gamma -> min(sqrt(2), 1.2) = 1.2 (cap binds)
        assert tr1.branch == ["negative"]
        assert opt.gamma[0] == 1.2
        tr2 = opt.step([2.0])
        assert tr2.branch == ["capped"]
        assert tr2.v_raw[0] == 4.0
        assert opt.alpha[0] == 5.0
        assert opt.gamma[0] == 1.2

    def test_box_projection_keeps_z_feasible(self):
        params = HyperParams(gamma0=1.0, rho=0.0, beta=0.5)
        domain = Domain.box([-0.5], [0.5])
        opt = GradaGrad([0.0], params, domain)
        for g in ([1.0], [1.0], [-2.0], [3.0]):
            opt.step(g)
            assert -0.5 <= opt.z[0] <= 0.5

    def test_practical_zero_first_gradient_bootstraps_later(self):
        opt = GradaGrad([1.0, 1.0], HyperParams(rho=2.0))
        opt.step([0.0, 2.0])
        np.testing.assert_array_equal(opt.alpha, [0.0, 4.0])
        np.testing.assert_array_equal(opt.x, [1.0, 0.0])  # dead coordinate unmoved
        opt.step([1.0, 0.0])
        assert opt.alpha[0] == 1.0  # m_prev was 0 there, so v = g^2

    def test_gradient_shape_check(self):
        opt = GradaGrad([0.0, 0.0])
        with pytest.raises(ValueError):
            opt.step([1.0])


class TestBaselines:
    def test_adagrad_accumulation(self):
        opt = AdaGrad([0.0], gamma=1.0)
        opt.step([1.0])
        assert opt.stats()["ainv_mean"] == pytest.approx(1.0)
        opt.step([1.0])
        assert opt.stats()["ainv_mean"] == pytest.approx(1.0 / math.sqrt(2.0))

    def test_adagrad_two_grads(self):
        opt = AdaGrad([0.0], gamma=1.0)
        opt.step([3.0])
        opt.step([4.0])
        assert opt.sum_sq[0] == 25.0  # denominator sqrt(25) = 5

    def test_adagrad_zero_gradient_never_moves(self):
        opt = AdaGrad([1.5, -2.0])
        for _ in range(10):
            opt.step([0.0, 0.0])
        np.testing.assert_array_equal(opt.x, [1.5, -2.0])

    def test_sgd(self):
        opt = SGD([1.0], lr=0.5)
        opt.step([2.0])
        np.testing.assert_array_equal(opt.x, [0.0])

    def test_adam_zero_gradient_never_moves(self):
        opt = Adam([1.0, 2.0], lr=0.1)
        for _ in range(5):
            opt.step([0.0, 0.0])
        np.testing.assert_array_equal(opt.x, [1.0, 2.0])

    @pytest.mark.parametrize("g", [0.01, 1.0, 100.0])
    def test_adam_first_step_magnitude_is_lr(self, g):
        opt = Adam([0.0], lr=0.1)
        opt.step([g])
        assert abs(opt.x[0]) == pytest.approx(0.1, rel=1e-5)


class TestAveragedIterate:
    def test_two_iterates(self):
        opt = SGD([0.0], lr=1.0)
        opt.step([-2.0])  # x1 = 2
        np.testing.assert_allclose(opt.averaged_iterate(), [1.0])

    def test_constant_iterate(self):
        opt = SGD([3.0], lr=1.0)
        for _ in range(4):
            opt.step([0.0])
        np.testing.assert_allclose(opt.averaged_iterate(), [3.0])

    def test_four_iterates(self):
        opt = SGD([0.0], lr=1.0)
        for _ in range(3):
            opt.step([-1.0])  # iterates 0,1,2,3
        np.testing.assert_allclose(opt.averaged_iterate(), [1.5])

    def test_requires_a_step(self):
        with pytest.raises(ValueError):
            SGD([0.0]).averaged_iterate()


class TestInvariantsFuzz:
    def test_branch_bookkeeping(self):
        _, traces = make_fuzz_run(steps=400, seed=5)
        seen = set()
        prev = None
        for tr in traces:
            for i, branch in enumerate(tr.branch):
                seen.add(branch)
                assert branch in ("init", "capped", "positive", "negative")
                # negative <=> raw v < 0 outside init/capped
                if branch == "negative":
                    assert tr.v_raw[i] < 0
                else:
                    assert tr.v_clipped[i] == tr.v_raw[i]
                if branch in ("init", "capped", "positive"):
                    assert tr.v_raw[i] >= 0
                assert tr.a_after[i] == pytest.approx(
                    math.sqrt(tr.alpha_after[i]) / tr.gamma_after[i], rel=1e-12
                )
                if prev is not None:
                    assert tr.alpha_after[i] >= prev.alpha_after[i]
                    assert tr.gamma_after[i] >= prev.gamma_after[i]
                assert tr.gamma_after[i] <= 50.0
            prev = tr
        assert {"init", "capped", "positive", "negative"} <= seen

    def test_determinism_bit_identical(self):
        _, t1 = make_fuzz_run(steps=200, seed=11)
        _, t2 = make_fuzz_run(steps=200, seed=11)
        for a, b in zip(t1, t2):
            assert a.branch == b.branch
            for field in ("g", "v_raw", "v_clipped", "gamma_after", "alpha_after", "a_after"):
                assert np.array_equal(getattr(a, field), getattr(b, field))

    def test_scalar_monotone_alpha_gamma(self):
        rng = np.random.default_rng(2)
        opt = ScalarGradaGrad(rng.standard_normal(3), HyperParams(rho=2.0, r_fixed=None))
        gamma_prev, alpha_prev = opt.coord.gamma, opt.coord.alpha
        for _ in range(500):
            opt.step(rng.normal(0.5, 0.5, 3))
            assert opt.coord.gamma >= gamma_prev
            assert opt.coord.alpha >= alpha_prev
            gamma_prev, alpha_prev = opt.coord.gamma, opt.coord.alpha
