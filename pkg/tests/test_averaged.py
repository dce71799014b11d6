import math
import unittest

import numpy as np

from thermokam.averaged.birkhoff import EXPECTED_RESULTANT, birkhoff_nf, numerator_resultant, simultaneous_zero_scan
from thermokam.averaged.chart import local_chart
from thermokam.averaged.system import averaged_systems, equilibria
from thermokam.averaged.twist import (
    DEGENERATE_G_LO_FRAC,
    averaged_action,
    averaged_frequency,
    averaged_period,
    isochronous_control,
    level_grid,
    twist,
)
from thermokam.errors import ConfigError, InadmissibleTemperatureError, NoncompactLevelError
from thermokam.hamiltonian.families import make_hamiltonian
from thermokam.hamiltonian.reeb import reeb_graph
from thermokam.hamiltonian.temperatures import admissible_temperatures
from thermokam.quadrature.profiles import GridSpec, build_profile
from thermokam.thermostats.fields import ThermostatSpec

GRID = GridSpec(n_uniform=96, h_span=8.0, check_points=4)

# I = GAMMA h^(3/4) for H = p^2/2 + q^4
GAMMA_QUARTIC = 2.0 * math.sqrt(2.0) / math.pi * math.gamma(0.25) * math.gamma(1.5) / (4.0 * math.gamma(1.75))

_PROFILES = {}


def _profile(family, ks=(3,), **params):
    key = (family, ks, tuple(sorted(params.items())))
    if key not in _PROFILES:
        H = make_hamiltonian(family, **params)
        edge = reeb_graph(H).edges[0]
        _PROFILES[key] = (H, build_profile(H, edge, GRID, ks=ks))
    return _PROFILES[key]


def _system(family, spec, **params):
    H, profile = _profile(family, **params)
    (system,) = averaged_systems(H, profile, spec)
    return system


class TestEquilibria(unittest.TestCase):
    def test_nose_hoover_harmonic(self):
        for T in (0.5, 1.0, 2.0):
            H, profile = _profile("harmonic")
            (eq,) = equilibria(H, profile, ThermostatSpec("nh", T=T))
            self.assertAlmostEqual(eq.h0, T, places=10)
            self.assertAlmostEqual(eq.I0, T, places=10)

    def test_weighted_k3_harmonic(self):
        # Ktilde_3 = I/2 on the harmonic well
        H, profile = _profile("harmonic")
        (eq,) = equilibria(H, profile, ThermostatSpec("wk", T=0.8, k=3, l=1))
        self.assertAlmostEqual(eq.I0, 1.6, places=9)

    def test_missing_moment_is_a_config_error(self):
        H, profile = _profile("harmonic")
        with self.assertRaises(ConfigError):
            equilibria(H, profile, ThermostatSpec("wk", T=1.0, k=5))

    def test_excluded_temperature_is_rejected(self):
        H, profile = _profile("pendulum")
        T_star = admissible_temperatures(H, 3).excluded[0]
        with self.assertRaises(InadmissibleTemperatureError):
            equilibria(H, profile, ThermostatSpec("wk", T=T_star, k=3))


class TestAveragedSystem(unittest.TestCase):
    def setUp(self):
        self.system = _system("harmonic", ThermostatSpec("nh", T=1.0))

    def test_darboux_coordinate_is_log_action(self):
        for I in (0.2, 1.0, 2.0, 5.0):
            self.assertAlmostEqual(self.system.darboux_sigma(I), math.log(I), places=8)

    def test_potential_matches_closed_form(self):
        for sigma in (-1.0, -0.2, 0.3, 1.2):
            U = math.exp(sigma) - sigma - 1.0
            self.assertAlmostEqual(self.system.potential(sigma), U, places=7)
        self.assertAlmostEqual(self.system.gbar(2.0, 0.3), 0.045 + 1.0 - math.log(2.0), places=7)
        self.assertAlmostEqual(self.system.gbar_h(2.0, 0.3), 0.045 + 1.0 - math.log(2.0), places=10)

    def test_equivalent_variants_share_the_potential(self):
        wk = _system("harmonic", ThermostatSpec("wk", T=1.0, k=1, l=1))
        hsh = _system("harmonic", ThermostatSpec("hsh", T=1.0, mu_hsh=0.0))
        np.testing.assert_allclose(wk.U_nodes, self.system.U_nodes, rtol=0, atol=1e-12)
        np.testing.assert_allclose(hsh.U_nodes, self.system.U_nodes, rtol=0, atol=1e-12)
        self.assertEqual(hsh.kinetic.name, "quartic")

    def test_drift_vanishes_at_equilibrium(self):
        dI, dxi = self.system.rbar_field(1.0, 0.0)
        self.assertLess(abs(dI) + abs(dxi), 1e-10)
        _, dxi = self.system.rbar_field(2.0, 0.0)
        self.assertAlmostEqual(dxi, 1.0, places=8)
        dI, _ = self.system.rbar_field(2.0, 0.5)
        self.assertAlmostEqual(dI, -1.0, places=8)

    def test_hessian(self):
        np.testing.assert_allclose(self.system.hessian_at_equilibrium(), np.eye(2), rtol=0, atol=1e-6)
        for spec in (ThermostatSpec("wk", T=1.0, k=1, l=3), ThermostatSpec("hsh", T=1.0, mu_hsh=0.5)):
            hess = _system("harmonic", spec).hessian_at_equilibrium()
            self.assertGreater(hess[0, 0], 0.0)
            self.assertEqual(hess[1, 1], 0.0)

    def test_averaged_map_conserves_gbar(self):
        I, xi = 1.7, 0.4
        g = self.system.gbar(I, xi)
        for eps in (0.1, 1.0, 3.0):
            I1, xi1 = self.system.averaged_map(I, xi, eps)
            self.assertLess(abs(self.system.gbar(I1, xi1) - g), 1e-7 * (1.0 + eps))
        self.assertEqual(self.system.averaged_map(I, xi, 0.0), (I, xi))

    def test_turning_points(self):
        lo, hi = self.system.turning_points(0.1)
        self.assertLess(lo, 0.0)
        self.assertGreater(hi, 0.0)
        self.assertAlmostEqual(self.system.potential(lo), 0.1, places=10)
        with self.assertRaises(NoncompactLevelError):
            self.system.turning_points(10.0 * self.system.barrier())


class TestPeriods(unittest.TestCase):
    def setUp(self):
        self.chart = local_chart(_system("harmonic", ThermostatSpec("nh", T=1.0)))

    def test_small_oscillation_limit(self):
        T_avg, J = averaged_period(self.chart, 1e-8)
        self.assertAlmostEqual(T_avg, 2.0 * math.pi, places=6)
        self.assertAlmostEqual(J, 1e-8, delta=1e-12)

    def test_event_and_quadrature_agree(self):
        for g in (1e-3, 0.01, 0.04):
            T_event, J_event = averaged_period(self.chart, g)
            T_quad, _ = averaged_period(self.chart, g, method="quadrature")
            self.assertLess(abs(T_event - T_quad), 1e-9 * T_event, msg=f"g={g}")

    def test_action_derivative_is_period(self):
        g, d = 0.02, 1e-5
        slope = (averaged_action(self.chart, g + d) - averaged_action(self.chart, g - d)) / (2.0 * d)
        T_avg, _ = averaged_period(self.chart, g)
        self.assertLess(abs(slope - T_avg / (2.0 * math.pi)), 1e-5)

    def test_period_grows_with_level(self):
        periods = [averaged_period(self.chart, g)[0] for g in (0.005, 0.02, 0.05)]
        self.assertTrue(periods[0] < periods[1] < periods[2])

    def test_frequency_inverts_action(self):
        J = averaged_action(self.chart, 0.03)
        T_avg, _ = averaged_period(self.chart, 0.03)
        self.assertAlmostEqual(averaged_frequency(self.chart, J), 2.0 * math.pi / T_avg, places=9)
        with self.assertRaises(NoncompactLevelError):
            averaged_frequency(self.chart, 1e3)


class TestTwist(unittest.TestCase):
    def test_nose_hoover_harmonic_twist(self):
        for T in (1.0, 2.0):
            rep = twist(_system("harmonic", ThermostatSpec("nh", T=T)), levels=12, g_max=2e-3 * T)
            self.assertAlmostEqual(rep.freq[0], math.sqrt(T), places=5)
            self.assertAlmostEqual(rep.twist[0], -1.0 / 12.0, delta=2e-3)
            self.assertTrue(rep.all_flagged)
            self.assertIsNone(rep.birkhoff)
            self.assertEqual(list(rep.as_frame().columns), ["J", "g", "T_avg", "freq", "twist", "twist_err"])

    def test_isochronous_control(self):
        chart = isochronous_control(_system("harmonic", ThermostatSpec("nh", T=1.0)))
        rep = twist(chart, levels=8, g_max=0.04)
        self.assertLess(float(np.max(np.abs(rep.twist))), 1e-5)
        self.assertFalse(np.any(rep.nonisochronous))
        np.testing.assert_allclose(rep.T_avg, 2.0 * math.pi / math.sqrt(chart.curvature()), rtol=1e-9)

    def test_quartic_well_matches_normal_form(self):
        system = _system("monomial", ThermostatSpec("nh", T=1.0), n=2)
        self.assertAlmostEqual(system.equilibrium.h0, 0.75, places=9)
        rep = twist(system, levels=12, g_max=1e-3)
        nf = rep.birkhoff
        self.assertIsNotNone(nf)
        self.assertLess(abs(rep.freq[0] / nf.frequency_at_zero(GAMMA_QUARTIC) - 1.0), 1e-4)
        expected = nf.twist_at_zero(GAMMA_QUARTIC)
        self.assertGreater(expected, 0.0)
        self.assertLess(abs(rep.twist[0] / expected - 1.0), 0.02)

    def test_nose_hoover_pendulum_twist(self):
        H, profile = _profile("pendulum")
        # K vanishes at both ends of the well; the lower root is the elliptic one
        systems = averaged_systems(H, profile, ThermostatSpec("nh", T=0.5))
        self.assertGreaterEqual(len(systems), 1)
        self.assertLess(systems[0].equilibrium.h0, 0.0)
        rep = twist(systems[0], levels=12, g_max=1e-2)
        self.assertTrue(rep.all_flagged, msg=str(rep.nonisochronous))

    def test_logistic_harmonic_twist(self):
        rep = twist(_system("harmonic", ThermostatSpec("logistic", T=1.0)), levels=12, g_max=1e-2)
        self.assertEqual(rep.g[0], level_grid(1e-2, 12)[0])
        self.assertLess(rep.twist[0], 0.0)
        self.assertTrue(rep.all_flagged, msg=str(rep.nonisochronous))

    def test_weighted_pendulum_twist(self):
        H, profile = _profile("pendulum")
        T = 0.4
        self.assertTrue(admissible_temperatures(H, 3).is_admissible(T))
        systems = averaged_systems(H, profile, ThermostatSpec("wk", T=T, k=3, l=1))
        self.assertGreaterEqual(len(systems), 1)
        rep = twist(systems[0], levels=12, g_max=1e-2)
        self.assertTrue(rep.all_flagged, msg=str(rep.nonisochronous))

    def test_hsh_harmonic_twist_starts_off_the_bottom(self):
        system = _system("harmonic", ThermostatSpec("hsh", T=1.0, mu_hsh=1.0))
        self.assertEqual(system.kinetic.name, "quartic")
        rep = twist(system, levels=12, g_max=1e-2)
        self.assertGreaterEqual(rep.g[0], DEGENERATE_G_LO_FRAC * 1e-2)
        self.assertTrue(rep.all_flagged, msg=str(rep.nonisochronous))
        explicit = twist(system, levels=6, g_max=1e-2, g_lo_frac=0.0)
        self.assertLess(explicit.g[0], 1e-3)

    def test_level_grid_offset(self):
        g = level_grid(1.0, 8, 0.25)
        self.assertGreater(g[0], 0.25)
        self.assertLess(g[-1], 1.0)
        self.assertTrue(np.all(np.diff(g) > 0.0))
        with self.assertRaises(ValueError):
            twist(_system("harmonic", ThermostatSpec("nh", T=1.0)), levels=6, g_lo_frac=1.0)

    def test_too_few_levels(self):
        with self.assertRaises(ValueError):
            twist(_system("harmonic", ThermostatSpec("nh", T=1.0)), levels=4)


class TestBirkhoff(unittest.TestCase):
    def test_resultant(self):
        self.assertEqual(numerator_resultant(), EXPECTED_RESULTANT)
        self.assertTrue(birkhoff_nf(3, 1.0).resultant_ok)

    def test_quartic_coefficients(self):
        nf = birkhoff_nf(2, 1.0)
        self.assertAlmostEqual(nf.r, 0.75)
        self.assertAlmostEqual(nf.H0, 0.75)
        self.assertAlmostEqual(nf.A, -0.125 / (24.0 * math.sqrt(0.75)), places=14)
        self.assertAlmostEqual(nf.omega, 0.75 ** 0.25, places=14)

    def test_no_simultaneous_zero(self):
        worst, _ = simultaneous_zero_scan()
        self.assertGreater(worst, 1.0)

    def test_invalid_order(self):
        with self.assertRaises(ValueError):
            birkhoff_nf(1, 1.0)
        with self.assertRaises(ValueError):
            birkhoff_nf(2, 0.0)


if __name__ == "__main__":
    unittest.main()
