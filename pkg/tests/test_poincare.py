import math
import unittest

import numpy as np
import pandas as pd

from thermokam.averaged.system import averaged_systems
from thermokam.errors import NonwindingSequenceError, WindowEscapeError
from thermokam.hamiltonian.families import make_hamiltonian
from thermokam.hamiltonian.reeb import OSCILLATION, ROTATION, reeb_graph
from thermokam.integration.dopri import IntegratorConfig
from thermokam.poincare.scan import TORUS, ScanGrid, ScanReport, ScanThresholds, fraction_stability, torus_scan
from thermokam.poincare.sections import (
    SectionSpec,
    area_defect,
    averaging_agreement,
    return_map,
    rotation_number,
    section_density,
    section_for_edge,
)
from thermokam.quadrature.profiles import GridSpec, build_profile
from thermokam.thermostats.fields import ThermostatSpec

TIGHT = IntegratorConfig(rtol=1e-13, atol=1e-15)
WINDOW = SectionSpec(anchor=0.0, h_lo=0.05, h_hi=5.0, xi_max=3.0)


class TestReturnMap(unittest.TestCase):
    def setUp(self):
        self.H = make_hamiltonian("harmonic")

    def test_decoupled_map_is_identity(self):
        spec = ThermostatSpec("nh", epsilon=0.0, T=1.0)
        seq = return_map(self.H, spec, WINDOW, (1.3, 0.4), 5)
        np.testing.assert_allclose(seq.h, 1.3, rtol=0, atol=1e-9)
        np.testing.assert_allclose(seq.xi, 0.4, rtol=0, atol=1e-12)
        np.testing.assert_allclose(seq.times, 2.0 * math.pi, rtol=1e-8)

    def test_xi_stays_on_the_averaged_level(self):
        spec = ThermostatSpec("nh", epsilon=0.05, T=1.0)
        seq = return_map(self.H, spec, WINDOW, (1.2, 0.0), 300)
        xi_max = math.sqrt(2.0 * (0.2 - math.log(1.2)))
        self.assertLess(float(np.max(np.abs(seq.xi))), xi_max + 0.05)
        self.assertGreater(int(np.sum(np.diff(np.sign(seq.xi[1:])) != 0)), 4)

    def test_window_escape_reports_index(self):
        spec = ThermostatSpec("nh", epsilon=0.5, T=1.0)
        window = SectionSpec(anchor=0.0, h_lo=0.05, h_hi=1.1, xi_max=3.0)
        with self.assertRaises(WindowEscapeError) as ctx:
            return_map(self.H, spec, window, (1.05, 0.3), 50)
        self.assertGreaterEqual(ctx.exception.index, 1)

    def test_return_map_preserves_flux_density(self):
        for spec in (ThermostatSpec("nh", epsilon=0.1, T=1.0), ThermostatSpec("hsh", epsilon=0.1, T=1.0, mu_hsh=0.5)):
            for x0 in ((0.8, 0.2), (1.4, -0.3)):
                defect = area_defect(self.H, spec, WINDOW, x0, step=1e-5, config=TIGHT)
                self.assertLess(abs(defect), 1e-5, msg=f"{spec.variant} {x0}")

    def test_section_density(self):
        spec = ThermostatSpec("nh", epsilon=0.1, T=2.0)
        rho = section_density(self.H, spec, WINDOW, 1.5, 0.4)
        self.assertAlmostEqual(float(rho), math.exp(-(1.5 + 0.08) / 2.0), places=14)

    def test_section_for_pendulum_rotation(self):
        H = make_hamiltonian("pendulum")
        rot = [e for e in reeb_graph(H).edges if e.orientation == ROTATION]
        sections = [section_for_edge(H, e, h_hi=4.0) for e in rot]
        self.assertEqual(sorted(s.direction for s in sections), [-1, 1])
        self.assertTrue(all(s.h_lo > 1.0 for s in sections))


class TestAveragingAgreement(unittest.TestCase):
    def test_second_order_agreement(self):
        H = make_hamiltonian("harmonic")
        edge = reeb_graph(H).edges[0]
        profile = build_profile(H, edge, GridSpec(n_uniform=96, h_span=8.0, check_points=4), ks=(3,))
        (system,) = averaged_systems(H, profile, ThermostatSpec("nh", epsilon=0.1, T=1.0))
        section = section_for_edge(H, edge, h_hi=8.0)
        report = averaging_agreement(system, section, (1.5, 0.4), [0.1, 0.05, 0.025])
        self.assertTrue(report.ok, msg=f"slope {report.slope}")
        self.assertTrue(np.all(np.diff(report.defect) < 0.0))
        zero = averaging_agreement(system, section, (1.5, 0.4), [0.0])
        self.assertEqual(float(zero.defect[0]), 0.0)
        self.assertIsNone(zero.slope)

    def test_second_order_agreement_weighted_pendulum(self):
        H = make_hamiltonian("pendulum")
        edge = next(e for e in reeb_graph(H).edges if e.orientation == OSCILLATION)
        profile = build_profile(H, edge, GridSpec(n_uniform=96, check_points=4), ks=(3,))
        systems = averaged_systems(H, profile, ThermostatSpec("wk", epsilon=0.1, T=0.4, k=3, l=1))
        self.assertGreaterEqual(len(systems), 1)
        system = systems[0]
        section = section_for_edge(H, edge)
        x0 = (system.equilibrium.h0 + 0.1, 0.2)
        self.assertTrue(bool(section.contains(*x0)))
        report = averaging_agreement(system, section, x0, [0.1, 0.05, 0.025])
        self.assertTrue(report.ok, msg=f"slope {report.slope}")
        self.assertTrue(np.all(np.diff(report.defect) < 0.0))


class TestRotationNumber(unittest.TestCase):
    def test_rigid_rotation(self):
        alpha = 0.7
        k = np.arange(100)
        pts = np.stack([2.0 + np.cos(alpha * k), np.sin(alpha * k)], axis=-1)
        rho, residual = rotation_number(pts, (2.0, 0.0))
        self.assertLess(abs(rho - alpha), 1e-12)
        self.assertLess(residual, 1e-12)

    def test_residual_shrinks_on_a_distorted_circle(self):
        alpha = math.pi * (math.sqrt(5.0) - 1.0) / 5.0
        residuals = []
        for n in (16, 32, 64, 128):
            theta = alpha * np.arange(n)
            phi = theta + 0.4 * np.sin(theta)
            r = 1.0 + 0.2 * np.cos(theta)
            rho, residual = rotation_number(np.stack([r * np.cos(phi), r * np.sin(phi)], axis=-1), (0.0, 0.0))
            residuals.append(residual)
        for a, b in zip(residuals, residuals[1:]):
            self.assertLessEqual(b, a + 1e-13)
        self.assertLess(abs(rho - alpha), 1e-8)

    def test_nonwinding_sequence(self):
        pts = np.stack([np.linspace(1.0, 2.0, 20), np.zeros(20) + 0.5], axis=-1)
        with self.assertRaises(NonwindingSequenceError):
            rotation_number(pts, (0.0, 0.0))
        with self.assertRaises(NonwindingSequenceError):
            rotation_number(pts[:3], (0.0, 0.0))


class TestTorusScan(unittest.TestCase):
    def setUp(self):
        self.H = make_hamiltonian("harmonic")

    def test_decoupled_scan_is_all_tori(self):
        spec = ThermostatSpec("nh", epsilon=0.0, T=1.0)
        grid = ScanGrid.around(1.0, 0.3, 0.3, 5)
        report = torus_scan(self.H, spec, WINDOW, grid, 20, centre=(1.0, 0.0))
        self.assertEqual(report.fraction, 1.0)
        self.assertEqual(report.weighted_fraction, 1.0)
        self.assertTrue(np.all(report.points["class"] == TORUS))
        self.assertEqual(fraction_stability(report, report), 0.0)

    def test_small_coupling_has_tori(self):
        spec = ThermostatSpec("nh", epsilon=0.05, T=1.0)
        grid = ScanGrid.around(1.0, 0.2, 0.2, 4)
        report = torus_scan(self.H, spec, WINDOW, grid, 120, centre=(1.0, 0.0))
        self.assertGreaterEqual(report.fraction, 0.3)
        self.assertTrue(0.0 <= report.weighted_fraction <= 1.0)
        self.assertEqual(list(report.points.columns[:6]), ["h0", "xi0", "class", "rho", "residual", "iterations"])
        summary = report.summary()
        self.assertEqual(summary["n_points"], 16)
        self.assertEqual(summary["n_iters"], 120)

    def test_fraction_is_stable_under_grid_doubling(self):
        spec = ThermostatSpec("nh", epsilon=0.05, T=1.0)
        reports = []
        # a band off the elliptic point so every start winds around the centre
        for n in (5, 10):
            grid = ScanGrid.around(1.25, 0.05, 0.05, n)
            reports.append(torus_scan(self.H, spec, WINDOW, grid, 200, centre=(1.0, 0.0)))
        coarse, fine = reports
        self.assertEqual(len(fine.points), 4 * len(coarse.points))
        self.assertGreaterEqual(coarse.fraction, 0.3)
        self.assertGreaterEqual(fine.fraction, 0.3)
        self.assertLess(fraction_stability(coarse, fine), 0.05)

    def test_fraction_stability_is_the_absolute_change(self):
        points = pd.DataFrame({"counted": [True]})
        a = ScanReport(points=points, fraction=0.75, weighted_fraction=0.7, n_iters=10, thresholds=ScanThresholds())
        b = ScanReport(points=points, fraction=0.5, weighted_fraction=0.6, n_iters=10, thresholds=ScanThresholds())
        self.assertAlmostEqual(fraction_stability(a, b), 0.25)
        self.assertAlmostEqual(fraction_stability(b, a), 0.25)


if __name__ == "__main__":
    unittest.main()
