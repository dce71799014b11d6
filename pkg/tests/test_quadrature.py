import math
import unittest

import numpy as np

from thermokam.errors import DomainError, NoDataError, ProfileRangeError, QuadratureError
from thermokam.hamiltonian.families import make_hamiltonian
from thermokam.hamiltonian.reeb import OSCILLATION, ROTATION, reeb_graph
from thermokam.quadrature.level_sets import (
    action,
    evaluate_level,
    k_tilde,
    kappa,
    level_cycle,
    orbit_mean,
    period,
)
from thermokam.quadrature.pendulum import pendulum_closed_forms, pendulum_convention
from thermokam.quadrature.profiles import GridSpec, action_axis_table, build_profile, limits_table


def _edge(H, orientation=OSCILLATION, branch=1):
    return next(e for e in reeb_graph(H).edges if e.orientation == orientation and e.branch == branch)


class TestHarmonicClosedForms(unittest.TestCase):
    def setUp(self):
        self.H = make_hamiltonian("harmonic")
        self.edge = _edge(self.H)

    def test_action_kappa_ktilde(self):
        for h in (0.1, 1.0, 4.0):
            row = evaluate_level(self.H, self.edge, h, ks=(3, 5, 7))
            self.assertLess(abs(row.I - h), 1e-6 * h)
            self.assertLess(abs(row.K - h), 1e-6 * h)
            self.assertLess(abs(row.T_orbit - 2 * math.pi), 1e-9)
            for k in (3, 5, 7):
                self.assertLess(abs(row.ktilde[k] - 2 * row.I / (k + 1)), 1e-6 * h)

    def test_scaled_frequency(self):
        H = make_hamiltonian("harmonic", omega=2.0)
        cycle = level_cycle(H, _edge(H), 3.0)
        self.assertAlmostEqual(action(H, cycle), 1.5, places=10)
        T, H_I = period(H, cycle)
        self.assertAlmostEqual(T, math.pi, places=10)
        self.assertAlmostEqual(H_I, 2.0, places=10)
        self.assertAlmostEqual(kappa(H, cycle), 3.0, places=10)

    def test_orbit_mean_virial(self):
        cycle = level_cycle(self.H, self.edge, 2.0)
        self.assertAlmostEqual(orbit_mean(self.H, cycle, lambda q, p: q * q), 2.0, places=9)
        self.assertAlmostEqual(orbit_mean(self.H, cycle, lambda q, p: p), 0.0, places=12)

    def test_area_moment_relations(self):
        h, d = 1.3, 1e-4
        row = evaluate_level(self.H, self.edge, h, ks=(1, 3))
        self.assertAlmostEqual(row.F[1], row.I, places=12)
        lo = evaluate_level(self.H, self.edge, h - d, ks=(3,))
        hi = evaluate_level(self.H, self.edge, h + d, ks=(3,))
        slope = (hi.F[3] - lo.F[3]) / (hi.I - lo.I)
        self.assertLess(abs(slope - row.f[3]), 1e-6 * row.f[3])
        dF_dh = (hi.F[3] - lo.F[3]) / (2 * d)
        self.assertLess(abs(row.F[3] / dF_dh - row.ktilde[3]), 1e-6 * row.ktilde[3])

    def test_out_of_range(self):
        with self.assertRaises(ProfileRangeError):
            level_cycle(self.H, self.edge, -0.5)
        with self.assertRaises(QuadratureError):
            level_cycle(self.H, self.edge, 1e-14)
        with self.assertRaises(ValueError):
            k_tilde(self.H, level_cycle(self.H, self.edge, 1.0), 2)


class TestPendulum(unittest.TestCase):
    def setUp(self):
        self.H = make_hamiltonian("pendulum")
        self.osc = _edge(self.H)
        self.rot = _edge(self.H, ROTATION, 1)

    def test_oscillation_closed_forms(self):
        for h in np.linspace(-0.99, 0.99, 20):
            row = evaluate_level(self.H, self.osc, float(h))
            ref = pendulum_closed_forms(float(h))
            self.assertLess(abs(row.I - ref.I), 1e-8 * ref.I, msg=f"h={h}")
            self.assertLess(abs(row.K - ref.K), 1e-8 * ref.K, msg=f"h={h}")

    def test_rotation_closed_forms(self):
        for h in (1.2, 2.0, 5.0):
            row = evaluate_level(self.H, self.rot, h)
            ref = pendulum_closed_forms(h)
            self.assertEqual(ref.regime, "rotation")
            self.assertLess(abs(row.I - ref.I), 1e-8 * ref.I)
            self.assertLess(abs(row.K - ref.K), 1e-8 * ref.K)
            self.assertLess(abs(row.T_orbit - ref.T_orbit), 1e-8 * ref.T_orbit)

    def test_branches_agree(self):
        other = _edge(self.H, ROTATION, -1)
        a = evaluate_level(self.H, self.rot, 2.5)
        b = evaluate_level(self.H, other, 2.5)
        self.assertAlmostEqual(a.I, b.I, places=12)
        self.assertAlmostEqual(a.K, b.K, places=12)

    def test_near_separatrix_period(self):
        h = 1.0 - 1e-9
        row = evaluate_level(self.H, self.osc, h)
        ref = pendulum_closed_forms(h)
        self.assertGreater(row.T_orbit, 45.0)
        self.assertLess(abs(row.T_orbit - ref.T_orbit), 1e-8 * ref.T_orbit)
        self.assertLess(row.K, 0.35)

    def test_kappa_vanishes_at_both_ends(self):
        low = evaluate_level(self.H, self.osc, -1.0 + 1e-6)
        high = evaluate_level(self.H, self.osc, 1.0 - 1e-10)
        above = evaluate_level(self.H, self.rot, 1.0 + 1e-10)
        self.assertLess(low.K, 1e-5)
        self.assertLess(high.K, 0.35)
        self.assertLess(above.K, 0.35)
        # the k = 3 weighted temperature stays positive at the saddle
        self.assertGreater(high.ktilde[3], 0.8)
        self.assertGreater(above.ktilde[3], 0.8)

    def test_convention_accepts_e_derivative(self):
        conv = pendulum_convention()
        self.assertEqual(conv.accepted, "E-derivative")
        self.assertLess(conv.errors["E-derivative"], 1e-8)
        self.assertGreater(max(conv.errors.values()), 1e-4)

    def test_closed_form_domain(self):
        with self.assertRaises(DomainError):
            pendulum_closed_forms(1.0)
        with self.assertRaises(DomainError):
            pendulum_closed_forms(-1.0)


class TestProfiles(unittest.TestCase):
    def test_harmonic_profile(self):
        H = make_hamiltonian("harmonic")
        edge = _edge(H)
        profile = build_profile(H, edge, GridSpec(n_uniform=48, h_span=5.0, check_points=6), ks=(3,))
        self.assertIn("I", profile.hermite_columns)
        self.assertAlmostEqual(profile.value("I", 2.345), 2.345, places=8)
        self.assertAlmostEqual(profile.value("I", 2.345, 1), 1.0, places=6)
        self.assertAlmostEqual(profile.h_of_I(1.5), 1.5, places=8)
        with self.assertRaises(ProfileRangeError):
            profile.value("I", 6.0)
        with self.assertRaises(ProfileRangeError):
            profile.h_of_I(-1.0)
        lim = profile.limits["lo"]
        self.assertEqual(lim.values["I"], 0.0)
        self.assertAlmostEqual(lim.values["H_I"], 1.0, places=12)
        axis = action_axis_table(profile)
        self.assertEqual(list(axis.columns), ["I", "K", "H_I"])

    def test_pendulum_saddle_limits(self):
        H = make_hamiltonian("pendulum")
        edge = _edge(H)
        profile = build_profile(H, edge, GridSpec(n_uniform=32, check_points=4), ks=(3,))
        hi = profile.limits["hi"].values
        self.assertEqual(hi["K"], 0.0)
        self.assertAlmostEqual(hi["Ktilde_3"], 8.0 / 9.0, places=5)
        self.assertAlmostEqual(hi["I"], 8.0 / math.pi, places=5)
        K = profile.column("K")
        self.assertGreater(K[len(K) // 2], K[-1])
        table = limits_table([profile])
        self.assertEqual(list(table["end"]), ["lo", "hi"])

    def test_pendulum_well_bottom_rows(self):
        H = make_hamiltonian("pendulum")
        profile = build_profile(H, _edge(H), GridSpec(n_uniform=32, check_points=4), ks=(3,))
        h = profile.h
        self.assertLess(h[0] + 1.0, 1e-5)
        lo = profile.limits["lo"].values
        self.assertEqual(lo["I"], 0.0)
        self.assertAlmostEqual(lo["H_I"], 1.0, places=12)
        I = profile.column("I")
        K = profile.column("K")
        for j in range(4):
            ref = pendulum_closed_forms(float(h[j]))
            self.assertLess(abs(I[j] - ref.I), 1e-8 * ref.I, msg=f"h={h[j]}")
            self.assertGreater(K[j], 0.0)
        self.assertTrue(np.all(np.diff(I) > 0.0))

    def test_empty_window(self):
        H = make_hamiltonian("harmonic")
        with self.assertRaises(NoDataError):
            build_profile(H, _edge(H), GridSpec(h_max=-1.0))


if __name__ == "__main__":
    unittest.main()
