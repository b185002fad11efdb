import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ch6opt import ModelParams, build_grid, make_potential, simulate
from ch6opt.control import (
    BoxConstraints,
    ControlProblem,
    CostConfig,
    OptimizationError,
    OptimizeOptions,
    cost,
    gradient_check,
    l2q_inner,
    l2q_norm,
    optimize,
    project_box,
    random_directions,
    reduced_gradient,
    stationarity_residual,
)
from ch6opt.sensitivity import solve_adjoint
from ch6opt.spectral import GridField
from ch6opt.state import StepperConfig


@pytest.fixture(scope="module")
def setting():
    g = build_grid(1, [1.0], 32)
    x = g.mesh[0]
    params = ModelParams(1.0, 0.0, make_potential("quartic"))
    phi0 = GridField(g, 0.3 + 0.2 * np.cos(np.pi * x)).spectral()
    return g, x, params, phi0


def tracking_problem(setting, box=(-1.0, 1.0), alpha1=1.0, alpha3=1e-3, T=0.05):
    g, x, params, phi0 = setting
    stepper = StepperConfig(1e-3)
    u_dag = 0.3 + 0.4 * np.cos(np.pi * x)
    ref = g.inverse(simulate(phi0, u_dag, params, stepper, T, diagnostics=False).phi)
    cc = CostConfig(alpha1, 0.0, alpha3, phi_Q=ref, phi_Omega=ref[-1])
    return ControlProblem(phi0, params, stepper, T, cc, BoxConstraints(*box))


class TestCostConfig:
    def test_weights(self):
        with pytest.raises(ValueError, match="not all be zero"):
            CostConfig(0.0, 0.0, 0.0)
        with pytest.raises(ValueError):
            CostConfig(-1.0, 1.0, 1.0)

    def test_targets(self, grid1d):
        cc = CostConfig(1.0, phi_Q=np.ones((5,) + grid1d.modes))
        assert cc.target_Q_coeffs(grid1d, 5).shape == (6, 32)
        with pytest.raises(ValueError):
            cc.target_Q_coeffs(grid1d, 7)

    def test_rough_terminal_target_warns(self, grid1d, caplog):
        rough = np.where(np.arange(32) % 2, 1.0, -1.0)
        CostConfig(0.0, 1.0, phi_Omega=rough).target_Omega_coeffs(grid1d)
        assert any("phi_Omega" in r.message for r in caplog.records)


class TestBox:
    def test_empty_set_rejected(self):
        with pytest.raises(ValueError, match="admissible set"):
            BoxConstraints(1.0, -1.0)
        with pytest.raises(ValueError):
            BoxConstraints(np.nan, 1.0)

    def test_projection_example(self, grid1d):
        # -p/alpha3 with p = 2, alpha3 = 1 clamps to the lower bound
        p = np.full((3, 32), 2.0)
        np.testing.assert_array_equal(project_box(-p / 1.0, BoxConstraints(-1.0, 1.0)), -1.0)

    @given(st.integers(0, 2**31 - 1))
    @settings(max_examples=30, deadline=None)
    def test_projection_properties(self, seed):
        g = build_grid(1, [1.0], 16)
        rng = np.random.default_rng(seed)
        lo = rng.uniform(-2, 0, (4, 16))
        box = BoxConstraints(lo, lo + rng.uniform(0, 2, (4, 16)))
        a, b = 3 * rng.standard_normal((2, 4, 16))
        pa = project_box(a, box)
        assert box.contains(pa)
        np.testing.assert_array_equal(project_box(pa, box), pa)
        inside = project_box(rng.uniform(-2, 2, (4, 16)), box)
        np.testing.assert_array_equal(project_box(inside, box), inside)
        assert l2q_norm(pa - project_box(b, box), g, 0.1) <= l2q_norm(a - b, g, 0.1) + 1e-14


class TestCost:
    def test_zero(self, setting):
        g, x, params, phi0 = setting
        stt = simulate(phi0, 0.0, params, StepperConfig(1e-3), 0.01, diagnostics=False)
        nod = g.inverse(stt.phi)
        assert cost(stt, 0.0, CostConfig(1.0, 1.0, 1.0, phi_Q=nod, phi_Omega=nod[-1])) == pytest.approx(0.0, abs=1e-28)

    def test_control_term(self, grid1d, params):
        stt = simulate(grid1d.constant(0.0), 1.0, params, StepperConfig(0.1), 1.0, diagnostics=False)
        assert cost(stt, None, CostConfig(0.0, 0.0, 2.0)) == pytest.approx(1.0, rel=1e-14)

    def test_constant_offset(self, grid1d, params):
        # phi stays at 1 (u = sigma); phi - phi_Q = 0.5 everywhere
        stt = simulate(grid1d.constant(1.0), 1.0, params, StepperConfig(0.01), 0.5, diagnostics=False)
        assert cost(stt, None, CostConfig(2.0, 0.0, 0.0, phi_Q=0.5)) == pytest.approx(0.25 * 0.5, rel=1e-12)
        assert cost(stt, None, CostConfig(0.0, 4.0, 0.0, phi_Omega=0.0)) == pytest.approx(2.0, rel=1e-12)


class TestGradient:
    def test_alpha3_zero_gives_p(self, ref_problem):
        prob, u = ref_problem
        stt = prob.state(u)
        adj = solve_adjoint(stt, prob.cost)
        np.testing.assert_array_equal(reduced_gradient(stt.u, adj, 0.0), adj.p_nodal())

    def test_no_tracking(self, setting):
        g, x, params, phi0 = setting
        prob = ControlProblem(phi0, params, StepperConfig(1e-3), 0.01, CostConfig(0, 0, 0.5), BoxConstraints())
        u = np.cos(np.pi * x)
        grad, adj = prob.gradient(u)
        np.testing.assert_array_equal(grad, 0.5 * prob.schedule(u))

    def test_matches_finite_differences(self, ref_problem):
        prob, u = ref_problem
        chk = gradient_check(prob, u, directions=3, eps=1e-4, seed=9)
        assert chk.max_rel_error <= 1e-2

    def test_random_directions(self, grid1d):
        hs = random_directions(grid1d, 10, 3, seed=1)
        for h in hs:
            assert h.shape == (10, 32)
            assert l2q_norm(h, grid1d, 0.1) == pytest.approx(1.0)
        again = random_directions(grid1d, 10, 3, seed=1)
        assert all(np.array_equal(a, b) for a, b in zip(hs, again))


class TestStationarity:
    def test_interior_zero_gradient(self, grid1d):
        u = np.zeros((4, 32))
        assert stationarity_residual(u, u, BoxConstraints(-1, 1), grid1d, 0.1) == 0.0

    def test_active_lower_bound(self, grid1d):
        u = np.full((4, 32), -1.0)
        g = np.full((4, 32), 0.7)
        assert stationarity_residual(u, g, BoxConstraints(-1, 1), grid1d, 0.1) == 0.0

    def test_interior_equals_gradient_norm(self, grid1d):
        rng = np.random.default_rng(2)
        g = 0.1 * rng.standard_normal((4, 32))
        r = stationarity_residual(np.zeros((4, 32)), g, BoxConstraints(-1, 1), grid1d, 0.1)
        assert r == pytest.approx(l2q_norm(g, grid1d, 0.1), rel=1e-14)

    def test_trial_step_checked(self, grid1d):
        with pytest.raises(ValueError):
            stationarity_residual(np.zeros((1, 32)), np.zeros((1, 32)), BoxConstraints(), grid1d, 0.1, 0.0)


class TestOptimize:
    def test_already_stationary(self, setting):
        g, x, params, phi0 = setting
        prob = ControlProblem(phi0, params, StepperConfig(1e-3), 0.01, CostConfig(0, 0, 1.0), BoxConstraints(-1, 1))
        res = optimize(0.0, prob)
        assert res.iterations == 0 and res.reason == "converged"

    def test_active_constraints_vi(self, setting):
        # the box excludes both zero and the generating control, so bounds bind
        prob = tracking_problem(setting, box=(0.1, 0.25), alpha1=100.0, alpha3=1e-2, T=0.1)
        opts = OptimizeOptions(max_iters=300, tol=1e-4)
        res = optimize(0.0, prob, opts, keep_iterates=True)
        assert res.converged
        assert all(prob.box.contains(u) for u in res.iterates)
        assert np.all(np.diff(res.J_history) < 0)
        u_star = res.u_star
        assert np.mean(u_star == 0.25) > 0.5
        rng = np.random.default_rng(0)
        for _ in range(20):
            v = project_box(u_star + 0.2 * rng.standard_normal(u_star.shape), prob.box)
            vi = prob.inner(res.gradient, v - u_star)
            assert vi >= -5 * opts.tol * prob.norm(v - u_star)

    def test_callback_and_history(self, setting):
        prob = tracking_problem(setting)
        seen = []
        res = optimize(0.0, prob, OptimizeOptions(max_iters=3, tol=0.0), callback=lambda *a: seen.append(a))
        assert res.reason == "max_iters" and res.iterations == 3
        assert len(seen) == 3 and len(res.J_history) == 4 and len(res.step_history) == 3
        assert [s[1] for s in seen] == res.J_history[1:]

    def test_step_collapse(self, setting):
        prob = tracking_problem(setting)
        res = optimize(0.0, prob, OptimizeOptions(max_iters=5, tol=0.0, step0=1e-30, grow=1.0, max_backtracks=1))
        assert res.reason == "step-collapse" and res.iterations == 0

    def test_blowup_at_start(self, setting):
        g, x, params, phi0 = setting
        prob = ControlProblem(phi0, params, StepperConfig(1e-2, blowup=0.6), 0.1, CostConfig(1, 0, 1e-3),
                              BoxConstraints(5.0, 10.0))
        with pytest.raises(OptimizationError) as exc:
            optimize(0.0, prob)
        assert exc.value.iteration == 0

    def test_options_validation(self):
        for bad in ({"armijo_c1": 1.0}, {"shrink": 1.0}, {"step0": 0.0}, {"grow": 0.5}, {"max_iters": -1},
                    {"tol": -1.0}):
            with pytest.raises(ValueError):
                OptimizeOptions(**bad)


def test_l2q_inner(grid1d):
    a = np.ones((10, 32))
    assert l2q_inner(a, a, grid1d, 0.1) == pytest.approx(1.0)
