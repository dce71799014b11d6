import math
import unittest

import numpy as np

from thermokam.errors import IntegrationError, NoCrossingError
from thermokam.hamiltonian.families import make_hamiltonian
from thermokam.integration.dopri import EventSpec, IntegratorConfig, find_crossing, integrate
from thermokam.thermostats.fields import ThermostatSpec, g_density, vector_field


def _harmonic(t, y):
    return np.stack([y[..., 1], -y[..., 0]], axis=-1)


class TestIntegrate(unittest.TestCase):
    def test_harmonic_energy_conservation(self):
        traj = integrate(_harmonic, np.array([1.0, 0.0]), (0.0, 100.0))
        q, p = traj.y_final
        self.assertLess(abs(0.5 * (q * q + p * p) - 0.5), 1e-8)
        self.assertAlmostEqual(traj.t_final, 100.0, places=12)
        self.assertAlmostEqual(q, math.cos(100.0), places=7)

    def test_backward_then_forward(self):
        x0 = np.array([0.3, -1.2])
        fwd = integrate(_harmonic, x0, (0.0, 10.0))
        back = integrate(_harmonic, fwd.y_final, (10.0, 0.0))
        np.testing.assert_allclose(back.y_final, x0, rtol=0, atol=1e-8)

    def test_tightening_tolerance_reduces_error(self):
        errors = []
        for rtol in (1e-6, 1e-8, 1e-10):
            cfg = IntegratorConfig(rtol=rtol, atol=rtol * 1e-2)
            y = integrate(_harmonic, np.array([1.0, 0.0]), (0.0, 20.0), cfg).y_final
            errors.append(abs(y[0] - math.cos(20.0)))
        self.assertLess(errors[1], errors[0])
        self.assertLess(errors[2], errors[1])

    def test_weighted_volume_is_preserved(self):
        H = make_hamiltonian("harmonic")
        spec = ThermostatSpec("nh", epsilon=0.1, T=1.0)
        field = lambda t, y: vector_field(H, spec, y)
        x0 = np.array([0.5, 0.2, -0.3])
        step = 1e-5
        cfg = IntegratorConfig(rtol=1e-12, atol=1e-14)
        flow = lambda x: integrate(field, x, (0.0, 10.0), cfg).y_final
        jac = np.empty((3, 3))
        for i in range(3):
            e = np.zeros(3)
            e[i] = step
            jac[:, i] = (flow(x0 + e) - flow(x0 - e)) / (2 * step)
        x1 = flow(x0)
        weight = math.exp(-spec.beta * (float(g_density(spec, H, x1)) - float(g_density(spec, H, x0))))
        self.assertLess(abs(np.linalg.det(jac) * weight - 1.0), 1e-4)

    def test_batched_rows_escape_independently(self):
        blowup = lambda t, y: y * y
        cfg = IntegratorConfig(state_bound=1e6)
        traj = integrate(blowup, np.array([[1.0], [-1.0]]), (0.0, 2.0), cfg)
        self.assertTrue(traj.escaped[0])
        self.assertFalse(traj.escaped[1])
        self.assertAlmostEqual(float(traj.y_final[1, 0]), -1.0 / 3.0, places=9)

    def test_single_row_escape_raises(self):
        with self.assertRaises(IntegrationError):
            integrate(lambda t, y: y * y, np.array([1.0]), (0.0, 2.0), IntegratorConfig(state_bound=1e6))


class TestEvents(unittest.TestCase):
    def test_linear_event_is_exact(self):
        line = lambda t, y: np.ones_like(y) * np.array([1.0, 0.0])
        event = EventSpec(lambda t, y: y[..., 0] - 0.3, direction=1)
        traj = integrate(line, np.array([0.0, 0.0]), (0.0, 1.0), IntegratorConfig(), (event,))
        t_star, y_star = traj.crossings[0][0][0]
        self.assertAlmostEqual(t_star, 0.3, places=14)
        self.assertAlmostEqual(float(y_star[0]), 0.3, places=14)

    def test_harmonic_crossings_are_periodic(self):
        # q = sin t crosses zero upward at multiples of 2 pi
        event = EventSpec(lambda t, y: y[..., 0], direction=1)
        traj = integrate(_harmonic, np.array([-1e-3, 1.0]), (0.0, 40.0), IntegratorConfig(rtol=1e-12, atol=1e-14), (event,))
        times = np.array([c[0] for c in traj.crossings[0][0]])
        self.assertEqual(len(times), 7)
        gaps = np.diff(times)
        self.assertLess(float(np.max(np.abs(gaps - 2 * math.pi))), 1e-9)

    def test_event_count_stops_integration(self):
        event = EventSpec(lambda t, y: y[..., 0], direction=1, count=2)
        traj = integrate(_harmonic, np.array([-1e-3, 1.0]), (0.0, 1e4), IntegratorConfig(), (event,))
        self.assertEqual(len(traj.crossings[0][0]), 2)
        self.assertLess(traj.t_final, 4 * math.pi + 1.0)

    def test_find_crossing_on_dense_output(self):
        cfg = IntegratorConfig(dense=True)
        traj = integrate(_harmonic, np.array([1.0, 0.0]), (0.0, 10.0), cfg)
        t_star, y_star = find_crossing(traj, lambda t, y: y[..., 0], direction=-1)
        self.assertAlmostEqual(t_star, 0.5 * math.pi, places=9)
        self.assertLess(abs(float(y_star[0])), 1e-9)
        t_up, _ = find_crossing(traj, lambda t, y: y[..., 0], direction=1)
        self.assertAlmostEqual(t_up, 1.5 * math.pi, places=9)
        with self.assertRaises(NoCrossingError):
            find_crossing(traj, lambda t, y: y[..., 0] - 5.0, direction=1)

    def test_event_roots_sit_on_the_dense_output(self):
        cfg = IntegratorConfig(rtol=1e-12, atol=1e-14, dense=True)
        traj = integrate(_harmonic, np.array([1.0, 0.0]), (0.0, 10.0), cfg)
        t_star, y_star = find_crossing(traj, lambda t, y: y[..., 0] - 0.5, direction=-1)
        self.assertAlmostEqual(t_star, math.pi / 3.0, places=10)
        self.assertLess(abs(float(y_star[0]) - 0.5), 4e-15)
        np.testing.assert_allclose(traj.dense(t_star)[0], y_star, rtol=0, atol=1e-14)

        event = EventSpec(lambda t, y: y[..., 0] - 0.25, direction=1)
        traj = integrate(_harmonic, np.array([1.0, 0.0]), (0.0, 30.0), IntegratorConfig(rtol=1e-12, atol=1e-14), (event,))
        hits = traj.crossings[0][0]
        self.assertEqual(len(hits), 4)
        for t, y in hits:
            self.assertLess(abs(float(y[0]) - 0.25), 4e-15)
            self.assertGreater(float(y[1]), 0.0)


if __name__ == "__main__":
    unittest.main()
