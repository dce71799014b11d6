import math
import unittest

import numpy as np

from thermokam.errors import ConfigError
from thermokam.hamiltonian.families import make_hamiltonian
from thermokam.thermostats.fields import (
    ThermostatSpec,
    check_compatible,
    finite_difference_defect,
    liouville_defect,
    thermostat_checklist,
    time_reversal,
    vector_field,
)

SPECS = (
    ThermostatSpec("nh", epsilon=0.3, T=1.0),
    ThermostatSpec("logistic", epsilon=0.3, T=0.7),
    ThermostatSpec("wk", epsilon=0.3, T=1.3, k=3, l=3),
    ThermostatSpec("hsh", epsilon=0.3, T=0.9, mu_hsh=0.5),
)


class TestLiouvilleIdentity(unittest.TestCase):
    def test_defect_vanishes_for_all_variants(self):
        rng = np.random.default_rng(11)
        x = rng.uniform(-2.0, 2.0, size=(1000, 3))
        scale = 1.0 + np.linalg.norm(x, axis=-1) ** 3
        for H in (make_hamiltonian("harmonic"), make_hamiltonian("double_well")):
            for spec in SPECS:
                defect = np.abs(liouville_defect(spec, H, x)) / scale
                self.assertLess(float(np.max(defect)), 1e-12, msg=spec.variant)

    def test_finite_difference_oracle_agrees(self):
        rng = np.random.default_rng(5)
        x = rng.uniform(-1.5, 1.5, size=(200, 3))
        H = make_hamiltonian("pendulum")
        for spec in SPECS[:3]:
            fd = np.abs(finite_difference_defect(spec, H, x))
            self.assertLess(float(np.max(fd)), 1e-8, msg=spec.variant)

    def test_broken_feedback_is_detected(self):
        # doubling the temperature in the feedback but not in the density breaks invariance
        H = make_hamiltonian("harmonic")
        spec = ThermostatSpec("nh", epsilon=0.3, T=1.0)
        x = np.array([[0.4, 1.1, 0.8]])
        Y = vector_field(H, ThermostatSpec("nh", epsilon=0.3, T=2.0), x)
        Hq, Hp = H.gradient(x[..., 0], x[..., 1])
        dG = Hq * Y[..., 0] + Hp * Y[..., 1] + x[..., 2] * Y[..., 2]
        defect = -0.3 * x[..., 2] - spec.beta * dG
        self.assertGreater(abs(float(defect[0])), 1e-3)
        self.assertAlmostEqual(float(liouville_defect(spec, H, x)[0]), 0.0, places=14)


class TestFields(unittest.TestCase):
    def test_decoupled_limit_is_hamiltonian(self):
        H = make_hamiltonian("harmonic")
        x = np.array([0.3, -0.7, 2.0])
        for spec in SPECS:
            Y = vector_field(H, spec.with_epsilon(0.0), x)
            self.assertAlmostEqual(Y[0], -0.7)
            self.assertAlmostEqual(Y[1], -0.3)
            self.assertEqual(Y[2], 0.0)

    def test_time_reversal_symmetry(self):
        H = make_hamiltonian("double_well")
        spec = ThermostatSpec("nh", epsilon=0.2, T=1.0)
        x = np.array([0.4, 0.9, -0.3])
        lhs = vector_field(H, spec, time_reversal(x))
        rhs = -time_reversal(vector_field(H, spec, x))
        np.testing.assert_allclose(lhs, rhs, rtol=0, atol=1e-15)

    def test_invalid_specs(self):
        with self.assertRaises(ConfigError):
            ThermostatSpec("berendsen")
        with self.assertRaises(ConfigError):
            ThermostatSpec("wk", k=2)
        with self.assertRaises(ConfigError):
            ThermostatSpec("nh", T=0.0)
        with self.assertRaises(ConfigError):
            check_compatible(make_hamiltonian("pendulum"), ThermostatSpec("hsh"))


class TestChecklist(unittest.TestCase):
    def test_nose_hoover_harmonic(self):
        report = thermostat_checklist(make_hamiltonian("harmonic"), ThermostatSpec("nh", T=1.0), samples=500)
        self.assertLess(report.max_defect, 1e-12)
        self.assertTrue(report.proper_in_xi)
        self.assertTrue(report.pattern_ok)
        self.assertLess(report.heating_low, 0.0)
        self.assertGreater(report.cooling_high, 0.0)
        self.assertAlmostEqual(report.xi_marginal, math.sqrt(2 * math.pi), places=8)
        self.assertEqual(report.as_dict()["variant"], "nh")

    def test_quartic_marginal(self):
        spec = ThermostatSpec("hsh", T=1.0, mu_hsh=0.2)
        report = thermostat_checklist(make_hamiltonian("harmonic"), spec, samples=100)
        # integral of exp(-xi^4/4) over the line is 2^(1/2) Gamma(1/4)/2
        self.assertAlmostEqual(report.xi_marginal, math.sqrt(2.0) * math.gamma(0.25) / 2.0, places=7)
        self.assertTrue(report.pattern_ok)


if __name__ == "__main__":
    unittest.main()
