import math
import unittest

import numpy as np

from thermokam.errors import ConfigError, UnsupportedTopologyError
from thermokam.hamiltonian.families import CIRCLE, LINE, make_hamiltonian
from thermokam.hamiltonian.reeb import MIN, OSCILLATION, ROTATION, SADDLE, critical_points, reeb_graph
from thermokam.hamiltonian.temperatures import admissible_temperatures


class TestFamilies(unittest.TestCase):
    def test_harmonic_energy_and_gradient(self):
        H = make_hamiltonian("harmonic", omega=2.0)
        self.assertAlmostEqual(H.energy(0.5, 1.0), 0.5 + 0.5 * 4.0 * 0.25)
        Hq, Hp = H.gradient(0.5, 1.0)
        self.assertAlmostEqual(Hq, 2.0)
        self.assertAlmostEqual(Hp, 1.0)
        self.assertEqual(H.domain, LINE)

    def test_pendulum_gap_keeps_relative_accuracy(self):
        H = make_hamiltonian("pendulum")
        self.assertEqual(H.domain, CIRCLE)
        h = 1.0 - 1e-12
        gap = H.energy_gap(math.pi - 1e-3, h)
        exact = (h - 1.0) + 2.0 * math.cos(0.5 * (math.pi - 1e-3)) ** 2
        self.assertLess(abs(gap - exact), 1e-12 * abs(exact))

    def test_pendulum_gap_at_the_well_bottom(self):
        H = make_hamiltonian("pendulum")
        h = -1.0 + 1e-6
        q = np.array([0.0, 1e-4, 1e-3])
        gap = H.energy_gap(q, h)
        exact = (h + 1.0) - 2.0 * np.sin(0.5 * q) ** 2
        np.testing.assert_allclose(gap, exact, rtol=1e-13, atol=0)
        self.assertTrue(np.all(np.diff(gap) < 0.0))
        self.assertIsInstance(H.energy_gap(0.0, h), float)
        # momentum at the bottom: p^2/2 = h + 1 exactly
        p = H.momentum_at(0.0, h)
        self.assertLess(abs(0.5 * p * p - (h + 1.0)), 1e-14 * (h + 1.0))

    def test_momentum_on_level(self):
        H = make_hamiltonian("double_well")
        p = H.momentum_at(0.3, 1.0, sign=-1)
        self.assertLess(p, 0.0)
        self.assertAlmostEqual(H.energy(0.3, p), 1.0, places=13)
        with self.assertRaises(ValueError):
            H.momentum_at(3.0, 0.1)

    def test_normalize_shifts_minimum_to_zero(self):
        H = make_hamiltonian("pendulum", normalize=True)
        self.assertAlmostEqual(H.V(0.0), 0.0, places=14)

    def test_bad_configuration(self):
        with self.assertRaises(ConfigError):
            make_hamiltonian("quartic")
        with self.assertRaises(ConfigError):
            make_hamiltonian("harmonic", omega=-1.0)
        with self.assertRaises(ConfigError):
            make_hamiltonian("polynomial", coefficients=[0.0, 0.0, 0.0, 1.0])
        with self.assertRaises(ConfigError):
            make_hamiltonian("pendulum", domain=LINE)


class TestCriticalPoints(unittest.TestCase):
    def test_monomial_minimum_is_degenerate(self):
        points = critical_points(make_hamiltonian("monomial", n=2))
        self.assertEqual(len(points), 1)
        cp = points[0]
        self.assertEqual(cp.kind, MIN)
        self.assertEqual(cp.order, 4)
        self.assertEqual(cp.degeneracy, 2)
        self.assertTrue(cp.degenerate)

    def test_pendulum_saddle_at_seam(self):
        points = critical_points(make_hamiltonian("pendulum"))
        kinds = sorted((cp.kind, round(abs(cp.q), 10)) for cp in points)
        self.assertEqual(kinds, [(MIN, 0.0), (SADDLE, round(math.pi, 10))])

    def test_inflection_is_rejected(self):
        H = make_hamiltonian("polynomial", coefficients=[0.0, 0.0, 0.0, 1.0, 1.0])
        with self.assertRaises(UnsupportedTopologyError):
            reeb_graph(H)


class TestReebGraph(unittest.TestCase):
    def test_harmonic(self):
        g = reeb_graph(make_hamiltonian("harmonic"))
        self.assertEqual(len(g.vertices), 1)
        self.assertEqual(len(g.edges), 1)
        e = g.edges[0]
        self.assertEqual(e.orientation, OSCILLATION)
        self.assertFalse(e.bounded)
        self.assertEqual(e.lower, 0)

    def test_pendulum(self):
        g = reeb_graph(make_hamiltonian("pendulum"))
        self.assertEqual([v.kind for v in g.vertices], [MIN, SADDLE])
        self.assertEqual(len(g.edges), 3)
        osc = g.edges[0]
        self.assertEqual(osc.orientation, OSCILLATION)
        self.assertAlmostEqual(osc.h_lo, -1.0, places=14)
        self.assertAlmostEqual(osc.h_hi, 1.0, places=14)
        self.assertEqual(osc.upper, 1)
        rot = g.edges[1:]
        self.assertEqual([e.orientation for e in rot], [ROTATION, ROTATION])
        self.assertEqual(sorted(e.branch for e in rot), [-1, 1])
        self.assertAlmostEqual(rot[0].q_right - rot[0].q_left, 2 * math.pi, places=14)
        self.assertEqual(len(g.incident(1)), 3)

    def test_double_well(self):
        g = reeb_graph(make_hamiltonian("double_well", a=1.0))
        self.assertEqual([v.kind for v in g.vertices], [MIN, MIN, SADDLE])
        self.assertEqual(len(g.edges), 3)
        lower = g.edges[:2]
        self.assertEqual([e.upper for e in lower], [2, 2])
        self.assertAlmostEqual(lower[0].anchor, -1.0, places=12)
        self.assertAlmostEqual(lower[1].anchor, 1.0, places=12)
        top = g.edges[2]
        self.assertAlmostEqual(top.h_lo, 0.25, places=14)
        self.assertEqual(top.lower, 2)
        self.assertEqual(len(top.interior), 1)
        self.assertAlmostEqual(top.interior[0], 0.0, places=12)
        self.assertEqual(g.critical_values(), [0.0, 0.25])
        self.assertEqual(len(g.edges_at(0.1)), 2)


class TestAdmissibleTemperatures(unittest.TestCase):
    def test_pendulum_excludes_saddle_limit(self):
        H = make_hamiltonian("pendulum")
        adm = admissible_temperatures(H, 3)
        self.assertEqual(len(adm.excluded), 1)
        self.assertAlmostEqual(adm.excluded[0], 8.0 / 9.0, places=5)
        self.assertFalse(adm.is_admissible(adm.excluded[0]))
        self.assertTrue(adm.is_admissible(1.0))

    def test_harmonic_has_no_exclusion(self):
        adm = admissible_temperatures(make_hamiltonian("harmonic"), 3)
        self.assertEqual(adm.excluded, ())
        adm.check(0.7)

    def test_even_moment_rejected(self):
        with self.assertRaises(ValueError):
            admissible_temperatures(make_hamiltonian("harmonic"), 2)


if __name__ == "__main__":
    unittest.main()
