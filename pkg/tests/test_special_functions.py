import math
import unittest

import numpy as np

from thermokam.errors import DomainError
from thermokam.special.functions import (
    Zeta_l,
    Zeta_l_prime,
    Zeta_l_second,
    complementary_K,
    elliptic_E_derivative,
    elliptic_K_derivative,
    elliptic_KE,
    erfc,
    erfcx,
    zeta_coefficients,
    zeta_l,
    zeta_l_prime,
)


class TestElliptic(unittest.TestCase):
    def test_zero_modulus(self):
        pair = elliptic_KE(0.0)
        self.assertAlmostEqual(pair.K, math.pi / 2, places=15)
        self.assertAlmostEqual(pair.E, math.pi / 2, places=15)

    def test_lemniscatic_values(self):
        pair = elliptic_KE(1.0 / math.sqrt(2.0))
        self.assertAlmostEqual(pair.K, 1.8540746773013719, places=13)
        self.assertAlmostEqual(pair.E, 1.3506438810476755, places=13)

    def test_legendre_relation(self):
        for k in (0.1, 0.6, 0.95):
            kp = math.sqrt(1.0 - k * k)
            a, b = elliptic_KE(k), elliptic_KE(kp)
            self.assertAlmostEqual(a.E * b.K + b.E * a.K - a.K * b.K, math.pi / 2, places=12)

    def test_complementary_matches_direct(self):
        k = 0.3
        self.assertAlmostEqual(complementary_K(k), elliptic_KE(math.sqrt(1 - k * k)).K, places=14)

    def test_derivatives_against_central_differences(self):
        step = 1e-5
        for k in (0.2, 0.5, 0.8):
            fd_K = (elliptic_KE(k + step).K - elliptic_KE(k - step).K) / (2 * step)
            fd_E = (elliptic_KE(k + step).E - elliptic_KE(k - step).E) / (2 * step)
            self.assertAlmostEqual(elliptic_K_derivative(k), fd_K, places=7)
            self.assertAlmostEqual(elliptic_E_derivative(k), fd_E, places=7)
        self.assertEqual(elliptic_K_derivative(0.0), 0.0)

    def test_domain(self):
        with self.assertRaises(DomainError):
            elliptic_KE(1.0)
        with self.assertRaises(ValueError):
            elliptic_KE(-0.1)
        with self.assertRaises(DomainError):
            complementary_K(0.0)


class TestErfc(unittest.TestCase):
    def test_reference_values(self):
        ref = {0.0: 1.0, 0.5: 0.4795001221869535, 1.0: 0.15729920705028513,
               -1.0: 1.8427007929497148, 3.0: 2.209049699858544e-05}
        for x, v in ref.items():
            self.assertLess(abs(erfc(x) - v), 1e-13 * v, msg=f"x={x}")

    def test_scaled_matches_product(self):
        for x in (0.25, 1.0, 1.99, 2.0, 2.5, 5.0):
            direct = math.exp(x * x) * erfc(x)
            self.assertLess(abs(erfcx(x) - direct), 1e-13 * direct, msg=f"x={x}")

    def test_scaled_large_argument(self):
        # e^{x^2} erfc(x) ~ 1/(x sqrt(pi)) (1 - 1/(2x^2))
        x = 40.0
        approx = 1.0 / (x * math.sqrt(math.pi)) * (1 - 1 / (2 * x * x) + 3 / (4 * x ** 4))
        self.assertLess(abs(erfcx(x) - approx) / approx, 1e-8)

    def test_vectorised(self):
        xs = np.array([0.0, 1.0, 3.0])
        out = erfc(xs)
        self.assertEqual(out.shape, (3,))
        self.assertAlmostEqual(out[1], 0.15729920705028513, places=15)


class TestZeta(unittest.TestCase):
    def test_zeta_one_is_constant(self):
        self.assertEqual(zeta_coefficients(1, 2.0), (1.0,))
        self.assertEqual(zeta_l(0.7, 1, 2.0), 1.0)
        self.assertAlmostEqual(Zeta_l(0.7, 1, 2.0), 0.245, places=15)

    def test_zeta_three(self):
        T = 0.5
        xi = 1.3
        self.assertAlmostEqual(zeta_l(xi, 3, T), 2 * T + xi * xi, places=14)
        self.assertAlmostEqual(zeta_l_prime(xi, 3, T), 2 * xi, places=14)

    def test_kinetic_derivative_identity(self):
        for l in (1, 3, 5, 7):
            for xi in (-1.5, 0.3, 2.0):
                self.assertAlmostEqual(Zeta_l_prime(xi, l, 1.3), xi ** l / zeta_l(xi, l, 1.3), places=12)
                step = 1e-5
                fd = (Zeta_l(xi + step, l, 1.3) - Zeta_l(xi - step, l, 1.3)) / (2 * step)
                self.assertAlmostEqual(Zeta_l_prime(xi, l, 1.3), fd, places=8)

    def test_second_derivative_at_zero(self):
        self.assertAlmostEqual(Zeta_l_second(0.0, 1, 1.0), 1.0, places=15)
        for l in (3, 5):
            self.assertAlmostEqual(Zeta_l_second(0.0, l, 1.0), 0.0, places=15)

    def test_domain(self):
        with self.assertRaises(DomainError):
            zeta_l(1.0, 2, 1.0)
        with self.assertRaises(DomainError):
            zeta_l(1.0, 3, 0.0)


if __name__ == "__main__":
    unittest.main()
