"""Third-order Birkhoff normal form of the averaged Nose-Hoover system at a degenerate minimum.

For a well with I ~ gamma H^r near its minimum, r = (1 + 1/n)/2 and
s = 1 - r, the equilibrium sits at H0 = r T and

    Gbar ~ omega J + A J^2 + B J^3,
    omega = H0^(1/2 - s)
    A = (6 s^2 - 6 s + 1) / (24 H0^(2s))
    B = (180 s^4 - 312 s^3 + 168 s^2 - 36 s + 5) / (1728 H0^(3s + 1/2))

in the action of the coordinates rescaled by gamma. A and B have no common
zero because the resultant of their numerators is -6912.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Tuple

import numpy as np
import sympy

logger = logging.getLogger(__name__)

EXPECTED_RESULTANT = -6912

_s = sympy.Symbol("s")
A_NUMERATOR = sympy.Poly(6 * _s ** 2 - 6 * _s + 1, _s)
B_NUMERATOR = sympy.Poly(180 * _s ** 4 - 312 * _s ** 3 + 168 * _s ** 2 - 36 * _s + 5, _s)


@dataclass(frozen=True)
class BirkhoffNF:
    n: int
    T: float
    r: float
    s: float
    H0: float
    omega: float
    A: float
    B: float
    resultant: int
    resultant_ok: bool

    def frequency_at_zero(self, gamma: float) -> float:
        """Small-oscillation frequency of the averaged flow for I ~ gamma H^r."""
        return gamma * self.omega

    def twist_at_zero(self, gamma: float) -> float:
        """d nu/dJ at J -> 0 in the unscaled averaged action."""
        return -2.0 * self.A * gamma * gamma

    def as_dict(self) -> dict:
        return {
            "n": self.n, "T": self.T, "r": self.r, "s": self.s, "H0": self.H0,
            "omega": self.omega, "A": self.A, "B": self.B,
            "resultant": self.resultant, "resultant_ok": self.resultant_ok,
        }


def numerator_resultant() -> int:
    """Exact integer resultant of the A and B numerators in s."""
    return int(sympy.resultant(A_NUMERATOR.as_expr(), B_NUMERATOR.as_expr(), _s))


def birkhoff_nf(n: int, T: float) -> BirkhoffNF:
    if int(n) != n or n < 2:
        raise ValueError(f"well order n must be an integer >= 2, got {n!r}")
    if not T > 0.0:
        raise ValueError(f"temperature must be positive, got {T}")
    n = int(n)
    r = Fraction(1, 2) * (1 + Fraction(1, n))
    s = 1 - r
    rf, sf = float(r), float(s)
    H0 = rf * T
    a_num = float(A_NUMERATOR.eval(sympy.Rational(s.numerator, s.denominator)))
    b_num = float(B_NUMERATOR.eval(sympy.Rational(s.numerator, s.denominator)))
    res = numerator_resultant()
    nf = BirkhoffNF(
        n=n, T=float(T), r=rf, s=sf, H0=H0,
        omega=H0 ** (0.5 - sf),
        A=a_num / (24.0 * H0 ** (2.0 * sf)),
        B=b_num / (1728.0 * H0 ** (3.0 * sf + 0.5)),
        resultant=res,
        resultant_ok=res == EXPECTED_RESULTANT,
    )
    logger.debug("birkhoff n=%d T=%g: omega=%.12g A=%.12g B=%.12g", n, T, nf.omega, nf.A, nf.B)
    return nf


def simultaneous_zero_scan(step: float = 1e-3) -> Tuple[float, float]:
    """Smallest max(|A numerator|, |B numerator|) over s in (0, 1/2), and where it occurs."""
    s = np.arange(step, 0.5, step)
    a = np.abs(6 * s ** 2 - 6 * s + 1)
    b = np.abs(180 * s ** 4 - 312 * s ** 3 + 168 * s ** 2 - 36 * s + 5)
    worst = np.maximum(a, b)
    j = int(np.argmin(worst))
    return float(worst[j]), float(s[j])
