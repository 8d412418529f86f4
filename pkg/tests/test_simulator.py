import numpy as np
import pytest

from pfmix import free_energy as fe
from pfmix import models
from pfmix import simulator as sim
from pfmix.errors import BlowupError, FitError, RangeError
from pfmix.grid import PeriodicGrid1D

L = 2 * np.pi


def stable_local(M11=0.05):
    q = fe.Quadratic(np.array([[1.0, 0.0], [0.0, 2.0]]), variables=("rho1", "rho"))
    kap = fe.GradientCoefficients(np.diag([2e-3, 2e-3]))
    return models.CompressibleLocal(q, kap, M11=M11, inv_Re_s=0.5, inv_Re_v=0.2)


def unstable_local(M11=0.05, kappa=2e-3):
    q = fe.Quadratic(np.array([[-0.5, 0.0], [0.0, 2.0]]), variables=("rho1", "rho"))
    kap = fe.GradientCoefficients(np.diag([kappa, kappa]))
    return models.CompressibleLocal(q, kap, M11=M11, inv_Re_s=0.5, inv_Re_v=0.2)


ST = models.MixtureState.total_partial(3.0, 1.0)


class TestInitialization:
    def test_dt_guard(self):
        m = stable_local()
        cfg = sim.SimulationConfig(model=m, state=ST, length=L, n=64, dt=1.0,
                                   t_end=1.0)
        with pytest.raises(RangeError):
            sim.run(cfg)

    def test_power_of_two_required(self):
        with pytest.raises(RangeError):
            sim.SimulationConfig(model=stable_local(), state=ST, length=L,
                                 n=100, dt=1e-4, t_end=1.0)

    def test_out_of_domain_perturbation_rejected(self):
        fh = fe.FloryHuggins(1.0, 1.0, 1.0, 0.0)
        tq = fe.TildeFreeEnergy(fh)
        kap = fe.GradientCoefficients(np.diag([1e-3, 1e-3]))
        m = models.CompressibleLocal(tq, kap, M11=0.01, inv_Re_s=0.1,
                                     inv_Re_v=0.1)
        st = models.MixtureState.total_partial(2.0, 0.05)
        cfg = sim.SimulationConfig(
            model=m, state=st, length=L, n=32, dt=1e-5, t_end=1e-4,
            perturbations=(sim.Perturbation("rho1", 1, 0.2),))
        with pytest.raises(BlowupError):
            sim.run(cfg)


class TestConservation:
    def test_constant_solution_stays_constant(self):
        # critical point of the bulk energy: all diagnostics frozen
        C = np.array([[1.0, 0.0], [0.0, 2.0]])
        rho_star = np.array([1.0, 3.0])
        q = fe.Quadratic(C, g=-C @ rho_star, variables=("rho1", "rho"))
        kap = fe.GradientCoefficients(np.diag([2e-3, 2e-3]))
        m = models.CompressibleLocal(q, kap, M11=0.05, inv_Re_s=0.5,
                                     inv_Re_v=0.2)
        cfg = sim.SimulationConfig(model=m, state=ST, length=L, n=32, dt=1e-3,
                                   t_end=0.5, diagnostics_every=10)
        tr = sim.run(cfg)
        assert np.max(np.abs(tr.mass - tr.mass[0])) <= 1e-12 * abs(tr.mass[0])
        assert np.max(np.abs(tr.energy - tr.energy[0])) \
            <= 1e-12 * max(1.0, abs(tr.energy[0]))

    def test_local_mass_drift_long_run(self):
        m = stable_local()
        grid = PeriodicGrid1D(L, 32)
        perts, _ = sim.eigenvector_perturbations(m, ST, grid, mode=2,
                                                 amplitude=1e-4,
                                                 track_name="alpha1")
        cfg = sim.SimulationConfig(model=m, state=ST, length=L, n=32, dt=2e-3,
                                   t_end=10.0, diagnostics_every=100,
                                   perturbations=perts)
        tr = sim.run(cfg)
        drift = np.max(np.abs(tr.mass - tr.mass[0])) / abs(tr.mass[0])
        assert drift <= 1e-10

    def test_energy_monotone_stable_run(self):
        m = stable_local()
        grid = PeriodicGrid1D(L, 64)
        perts, _ = sim.eigenvector_perturbations(m, ST, grid, mode=3,
                                                 amplitude=1e-3,
                                                 track_name="alpha1")
        cfg = sim.SimulationConfig(model=m, state=ST, length=L, n=64, dt=5e-4,
                                   t_end=2.0, diagnostics_every=20,
                                   perturbations=perts)
        tr = sim.run(cfg)
        dE = np.diff(tr.energy)
        assert np.all(dE <= 1e-8 * max(1.0, abs(tr.energy[0])))
        assert np.all(tr.dissipation <= 1e-12)


class TestGrowthRates:
    def test_stable_mode_measured(self):
        m = stable_local()
        grid = PeriodicGrid1D(L, 64)
        perts, pred = sim.eigenvector_perturbations(m, ST, grid, mode=2,
                                                    amplitude=1e-6,
                                                    track_name="alpha1")
        assert pred.real < 0
        cfg = sim.SimulationConfig(model=m, state=ST, length=L, n=64, dt=5e-4,
                                   t_end=3.0, diagnostics_every=20,
                                   perturbations=perts, track=(("rho1", 2),))
        fit = sim.extract_growth_rate(sim.run(cfg), "rho1", 2)
        assert abs(fit.alpha.real - pred.real) / abs(pred.real) < 0.05

    def test_unstable_band_mode_measured(self):
        m = unstable_local()
        grid = PeriodicGrid1D(L, 64)
        perts, pred = sim.eigenvector_perturbations(m, ST, grid, mode=6,
                                                    amplitude=1e-7,
                                                    track_name="alpha1")
        assert pred.real > 0
        cfg = sim.SimulationConfig(model=m, state=ST, length=L, n=64, dt=5e-4,
                                   t_end=4.0, diagnostics_every=20,
                                   perturbations=perts, track=(("rho1", 6),))
        fit = sim.extract_growth_rate(sim.run(cfg), "rho1", 6)
        assert abs(fit.alpha.real - pred.real) / pred.real < 0.05

    def test_transverse_viscous_mode(self):
        m = stable_local()
        grid = PeriodicGrid1D(L, 64)
        mode = 3
        k = grid.mode_wavenumber(mode)
        cfg = sim.SimulationConfig(
            model=m, state=ST, length=L, n=64, dt=5e-4, t_end=1.5,
            diagnostics_every=20,
            perturbations=(sim.Perturbation("vy", mode, 1e-5),),
            track=(("vy", mode),))
        fit = sim.extract_growth_rate(sim.run(cfg), "vy", mode)
        want = -m.inv_Re_s * k * k / ST.rho
        assert abs(fit.alpha.real - want) / abs(want) < 0.01

    def test_linear_regime_fidelity(self):
        m = unstable_local()
        grid = PeriodicGrid1D(L, 64)
        rates = []
        for amp in (1e-6, 1e-7):
            perts, _ = sim.eigenvector_perturbations(m, ST, grid, mode=6,
                                                     amplitude=amp,
                                                     track_name="alpha1")
            cfg = sim.SimulationConfig(model=m, state=ST, length=L, n=64,
                                       dt=5e-4, t_end=3.0,
                                       diagnostics_every=20,
                                       perturbations=perts,
                                       track=(("rho1", 6),))
            rates.append(sim.extract_growth_rate(sim.run(cfg), "rho1", 6).alpha.real)
        assert abs(rates[0] - rates[1]) / abs(rates[1]) < 0.01


class TestIntegrators:
    def test_rk4_fourth_order(self):
        # transverse diffusion at mode 12 puts the truncation error well
        # above roundoff for the coarser steps
        m = stable_local(M11=0.0)
        perts = (sim.Perturbation("vy", 12, 1e-2),)

        def terminal(dt):
            cfg = sim.SimulationConfig(model=m, state=ST, length=L, n=64,
                                       dt=dt, t_end=0.24,
                                       diagnostics_every=10**9,
                                       perturbations=perts,
                                       enforce_dt_guard=False)
            return sim.run(cfg).final_fields

        ref = terminal(0.0005)
        errs = [max(np.max(np.abs(terminal(dt)[k] - ref[k])) for k in ref)
                for dt in (0.03, 0.015, 0.0075)]
        orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert np.all(orders > 3.4)

    def test_semi_implicit_first_order(self):
        m = stable_local()
        grid = PeriodicGrid1D(L, 64)
        perts, _ = sim.eigenvector_perturbations(m, ST, grid, mode=2,
                                                 amplitude=1e-3,
                                                 track_name="alpha1")

        def terminal(dt):
            cfg = sim.SimulationConfig(model=m, state=ST, length=L, n=64,
                                       dt=dt, t_end=0.4,
                                       diagnostics_every=10**9,
                                       perturbations=perts,
                                       integrator="semi_implicit",
                                       enforce_dt_guard=False)
            return sim.run(cfg).final_fields

        ref = terminal(1e-5)
        errs = [max(np.max(np.abs(terminal(dt)[k] - ref[k])) for k in ref)
                for dt in (4e-3, 2e-3, 1e-3)]
        orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert np.all(np.abs(orders - 1.0) < 0.25)

    def test_semi_implicit_stable_beyond_explicit_guard(self):
        # stiff interface coefficients: explicit guard is tiny, the
        # semi-implicit step runs far beyond it without blowing up
        q = fe.Quadratic(np.array([[1.0, 0.0], [0.0, 2.0]]),
                         variables=("rho1", "rho"))
        kap = fe.GradientCoefficients(np.diag([0.05, 0.05]))
        m = models.CompressibleLocal(q, kap, M11=0.5, inv_Re_s=0.5,
                                     inv_Re_v=0.2)
        grid = PeriodicGrid1D(L, 64)
        guard = sim.stable_dt_estimate(m, ST, grid)
        cfg = sim.SimulationConfig(model=m, state=ST, length=L, n=64,
                                   dt=min(20 * guard, 2e-4), t_end=0.05,
                                   diagnostics_every=50,
                                   perturbations=(sim.Perturbation("rho1", 2,
                                                                   1e-4),),
                                   integrator="semi_implicit",
                                   enforce_dt_guard=False)
        tr = sim.run(cfg)
        assert np.all(np.isfinite(tr.energy))


class TestFailureModes:
    def test_blowup_reports_step(self):
        q = fe.Quadratic(-3.0 * np.eye(2), variables=("rho1", "rho"))
        kap = fe.GradientCoefficients(np.diag([2e-3, 2e-3]))
        m = models.CompressibleLocal(q, kap, M11=0.05, inv_Re_s=0.0,
                                     inv_Re_v=0.0)
        cfg = sim.SimulationConfig(
            model=m, state=ST, length=L, n=64, dt=1e-3, t_end=50.0,
            diagnostics_every=50,
            perturbations=(sim.Perturbation("rho1", 3, 0.4),),
            enforce_dt_guard=False)
        with pytest.raises(BlowupError) as err:
            sim.run(cfg)
        assert err.value.step is not None

    def test_fit_needs_enough_samples(self):
        m = stable_local()
        cfg = sim.SimulationConfig(model=m, state=ST, length=L, n=32, dt=1e-3,
                                   t_end=0.01, diagnostics_every=1,
                                   track=(("rho1", 1),))
        tr = sim.run(cfg)
        with pytest.raises(FitError):
            sim.extract_growth_rate(tr, "rho1", 1)

    def test_untracked_mode_raises(self):
        m = stable_local()
        cfg = sim.SimulationConfig(model=m, state=ST, length=L, n=32, dt=1e-3,
                                   t_end=0.2, diagnostics_every=2)
        tr = sim.run(cfg)
        with pytest.raises(FitError):
            sim.extract_growth_rate(tr, "rho1", 1)


class TestQuasiSimulation:
    def test_quasi_spinodal_growth(self):
        q = fe.Quadratic([[-1.0]], g=[0.4], variables=("phi",))
        m = models.QuasiIncompressible(q, kappa_phi_phi=1e-2, M11=0.2,
                                       inv_Re_s=0.5, inv_Re_v=0.5,
                                       rho_hat_1=2.0, rho_hat_2=1.0)
        st = models.MixtureState.fraction(0.4)
        grid = PeriodicGrid1D(L, 64)
        mode = 4
        perts, pred = sim.eigenvector_perturbations(m, st, grid, mode=mode,
                                                    amplitude=1e-7,
                                                    track_name="alpha1")
        assert pred.real > 0
        cfg = sim.SimulationConfig(model=m, state=st, length=L, n=64, dt=2e-4,
                                   t_end=2.5, diagnostics_every=25,
                                   perturbations=perts,
                                   track=(("phi", mode),))
        tr = sim.run(cfg)
        fit = sim.extract_growth_rate(tr, "phi", mode)
        assert abs(fit.alpha.real - pred.real) / pred.real < 0.05
        drift = np.max(np.abs(tr.mass - tr.mass[0])) / abs(tr.mass[0])
        assert drift <= 1e-10
