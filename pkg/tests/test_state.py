import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ch6opt import ModelParams, build_grid, make_potential
from ch6opt.spectral import GridField, SpectralField, norm
from ch6opt.state import (
    BlowUpError,
    StepperConfig,
    chemical_potential,
    chemical_potential_via_w,
    control_schedule,
    energy,
    mass_ode_reference,
    n_steps,
    residual_energy_identity,
    simulate,
    step,
    w_field,
)


def cosine(g, k=1, amp=1.0, shift=0.0):
    return GridField(g, shift + amp * np.cos(k * np.pi * g.mesh[0] / g.lengths[0])).spectral()


class TestDerivedFields:
    @pytest.mark.parametrize("nu", [-1.0, 0.0, 2.5])
    def test_pure_state_is_equilibrium(self, grid1d, quartic, nu):
        p = ModelParams(1.0, nu, quartic)
        mu = chemical_potential(grid1d.constant(1.0), p)
        assert norm(mu) < 1e-13
        assert norm(w_field(grid1d.constant(1.0), p)) < 1e-13

    def test_zero_state(self, grid1d, quartic):
        p = ModelParams(1.0, 0.0, quartic)
        assert norm(chemical_potential(grid1d.constant(0.0), p)) == 0.0
        assert norm(w_field(grid1d.constant(0.0), p)) == 0.0

    def test_linear_test_eigen_scaling(self, grid1d, linear_params):
        phi = cosine(grid1d)
        mu = chemical_potential(phi, linear_params).coeffs
        np.testing.assert_allclose(mu / np.pi**4, phi.coeffs, atol=1e-10)
        np.testing.assert_allclose(w_field(phi, linear_params).coeffs, np.pi**2 * phi.coeffs, atol=1e-12)

    @given(st.integers(0, 2**31 - 1), st.floats(-2, 2))
    @settings(max_examples=20, deadline=None)
    def test_two_assemblies_agree(self, seed, nu):
        g = build_grid(2, [1.0, 1.0], [12, 12])
        rng = np.random.default_rng(seed)
        c = rng.standard_normal(g.modes) * np.exp(-np.add.outer(np.arange(12), np.arange(12)))
        phi = SpectralField(g, c)
        p = ModelParams(1.0, nu, make_potential("quartic"))
        d = chemical_potential(phi, p) - chemical_potential_via_w(phi, p)
        assert norm(d) <= 1e-10 * max(1.0, norm(chemical_potential(phi, p)))

    def test_dealias_changes_little_for_smooth_field(self, grid1d, params):
        phi = cosine(grid1d, amp=0.5, shift=0.1)
        a = chemical_potential(phi, params)
        b = chemical_potential(phi, params, dealias=True)
        # cubic of a single mode is resolved on both grids
        assert norm(a - b) < 1e-9 * norm(a)


class TestEnergy:
    def test_pure_state(self, grid1d, quartic):
        for nu in (0.0, 3.0):
            assert energy(grid1d.constant(1.0), ModelParams(1.0, nu, quartic)) == pytest.approx(0.0, abs=1e-28)

    def test_zero_state(self, grid1d, quartic):
        assert energy(grid1d.constant(0.0), ModelParams(1.0, 1.0, quartic)) == pytest.approx(0.25)

    def test_single_mode(self, grid1d, linear_params):
        assert energy(cosine(grid1d), linear_params) == pytest.approx(np.pi**4 / 4, rel=1e-12)

    def test_gradient_term(self, grid1d):
        p = ModelParams(1.0, 2.0, make_potential("linear-test"), test_mode=True)
        # 1/2 int (pi^2 cos)^2 + 2 * 1/2 int (pi sin)^2 = pi^4/4 + pi^2/2
        assert energy(cosine(grid1d), p) == pytest.approx(np.pi**4 / 4 + np.pi**2 / 2, rel=1e-12)


class TestStep:
    def test_single_mode_factor(self, grid1d, linear_params):
        dt = 1e-3
        phi = cosine(grid1d)
        new = step(phi, 0.0, linear_params, StepperConfig(dt, 0.0, 0.0))
        np.testing.assert_allclose(new.coeffs, phi.coeffs / (1 + dt * np.pi**6), atol=1e-15)

    def test_constants_stay_constant(self, grid1d, params):
        dt = 1e-2
        new = step(grid1d.constant(0.7), 0.0, params, StepperConfig(dt))
        assert new.coeffs[0] == pytest.approx(0.7 / (1 + dt * 1.0), rel=1e-14)
        assert np.max(np.abs(new.coeffs[1:])) < 1e-15

    def test_consistency_small_dt(self, grid1d, params):
        phi = cosine(grid1d, amp=0.3, shift=0.2)
        new = step(phi, 0.5, params, StepperConfig(1e-12))
        assert norm(new - phi) < 1e-8

    def test_blowup(self, grid1d, params):
        with pytest.raises(BlowUpError) as exc:
            step(grid1d.constant(2.0), 0.0, params, StepperConfig(1e-3, blowup=1.5), t=0.25)
        assert exc.value.t == pytest.approx(0.251)


class TestSimulate:
    def test_mean_recursion(self, grid1d, params):
        dt = 1e-3
        phi0 = cosine(grid1d, amp=0.2, shift=0.5)
        rng = np.random.default_rng(0)
        u = rng.uniform(-1, 1, (50,) + grid1d.modes)
        tr = simulate(phi0, u, params, StepperConfig(dt), 0.05)
        m = tr.means()
        ubar = u.mean(axis=1)
        for n in range(50):
            assert m[n + 1] == pytest.approx((m[n] + dt * ubar[n]) / (1 + dt), abs=1e-14)

    def test_stationary(self, grid1d, params):
        tr = simulate(grid1d.constant(1.0), 1.0, params, StepperConfig(1e-3), 0.05)
        np.testing.assert_allclose(tr.diagnostics["energy"], 0.0, atol=1e-28)
        np.testing.assert_allclose(tr.means(), 1.0, rtol=1e-14)
        res, mx = residual_energy_identity(tr)
        assert mx <= 1e-12

    def test_initial_datum_kept(self, grid1d, params):
        phi0 = cosine(grid1d, amp=0.3)
        tr = simulate(phi0, 0.0, params, StepperConfig(1e-3), 0.01)
        assert np.array_equal(tr.phi[0], phi0.coeffs)
        assert tr.n_steps == 10 and tr.times[-1] == pytest.approx(0.01)

    def test_rejects_non_integer_steps(self, grid1d, params):
        with pytest.raises(ValueError, match="integer multiple"):
            simulate(grid1d.constant(0.0), 0.0, params, StepperConfig(3e-3), 0.01)

    def test_blowup_reports_time(self, grid1d, params):
        with pytest.raises(BlowUpError) as exc:
            simulate(cosine(grid1d, amp=0.5), 200.0, params, StepperConfig(1e-2, blowup=1.0), 1.0)
        assert 0.0 < exc.value.t < 1.0

    def test_stabilisation_warning(self, grid1d, params, caplog):
        with caplog.at_level(logging.WARNING, logger="ch6opt"):
            simulate(cosine(grid1d, amp=0.9), 0.0, params, StepperConfig(1e-4, stab_A=0.0), 1e-3)
        assert any("stab_A" in r.message for r in caplog.records)

    def test_energy_budget(self):
        # sigma = 0, u = 0: cumulative dissipation matches the energy drop to first order in dt
        g = build_grid(1, [2 * np.pi], 32)
        p = ModelParams(0.0, 0.0, make_potential("quartic"))
        phi0 = GridField(g, 0.5 * np.cos(g.mesh[0] / 2) + 0.2 * np.cos(g.mesh[0])).spectral()
        phi0 = simulate(phi0, 0.0, p, StepperConfig(1e-5, 4.0, 4.0), 0.01, diagnostics=False).final()
        gaps = []
        for dt in (2e-4, 1e-4):
            tr = simulate(phi0, 0.0, p, StepperConfig(dt, 4.0, 4.0), 0.1)
            om = g.eigenvalues
            diss = np.array([np.sum(om * tr.mu(n).coeffs ** 2) for n in range(tr.n_steps)])
            drop = tr.diagnostics["energy"][0] - tr.diagnostics["energy"][-1]
            gaps.append(abs(dt * diss.sum() - drop) / drop)
        assert gaps[0] < 0.05
        assert gaps[1] == pytest.approx(gaps[0] / 2, rel=0.1)

    def test_2d_runs(self, grid2d, params):
        x, y = grid2d.mesh
        phi0 = GridField(grid2d, 0.3 * np.cos(np.pi * x) * np.cos(np.pi * y / 2)).spectral()
        tr = simulate(phi0, 0.0, params, StepperConfig(1e-4, dealias=True), 2e-3)
        assert np.all(np.isfinite(tr.phi))
        assert np.all(np.diff(tr.diagnostics["energy"]) <= 1e-10)


class TestControlSchedule:
    def test_forms(self, grid1d):
        m = 4
        assert control_schedule(2.0, grid1d, m).shape == (4, 32)
        v = np.arange(32.0)
        s = control_schedule(v, grid1d, m)
        assert s.shape == (4, 32) and np.array_equal(s[3], v)
        s2 = control_schedule(GridField(grid1d, v), grid1d, m)
        np.testing.assert_array_equal(s, s2)
        full = np.zeros((4, 32))
        assert control_schedule(full, grid1d, m) is full

    def test_bad_shape(self, grid1d):
        with pytest.raises(ValueError):
            control_schedule(np.zeros((3, 32)), grid1d, 4)


class TestMassODE:
    def test_examples(self):
        assert mass_ode_reference(0.5, 0.0, 1.0, 1.0) == pytest.approx(0.5 * np.exp(-1), rel=1e-15)
        assert mass_ode_reference(0.5, 0.0, 1.0, 1.0) == pytest.approx(0.1839397, abs=1e-7)
        assert mass_ode_reference(0.3, 0.6, 2.0, 5.0) == pytest.approx(0.3)
        assert mass_ode_reference(0.0, 1.0, 0.0, 2.0) == 2.0

    def test_piecewise(self):
        ref = mass_ode_reference(0.2, [1.0, 1.0, 1.0], 0.5, 0.3, dt=0.1)
        assert ref == pytest.approx(mass_ode_reference(0.2, 1.0, 0.5, 0.3), rel=1e-14)
        with pytest.raises(ValueError):
            mass_ode_reference(0.2, [1.0], 0.5, 0.3, dt=0.1)
        with pytest.raises(ValueError):
            mass_ode_reference(0.2, 0.0, 0.5, -1.0)


def test_n_steps():
    assert n_steps(1.0, 1e-3) == 1000
    assert n_steps(0.1, 1e-3) == 100
    with pytest.raises(ValueError):
        n_steps(1.0, 0.3)
    with pytest.raises(ValueError):
        n_steps(0.0, 0.1)


def test_stepper_config_validation():
    with pytest.raises(ValueError):
        StepperConfig(0.0)
    with pytest.raises(ValueError):
        StepperConfig(1e-3, stab_A=-1.0)
    with pytest.raises(ValueError):
        StepperConfig(1e-3, blowup=0.0)
