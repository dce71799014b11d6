"""One-degree-of-freedom Hamiltonian families H(q, p) = F(p) + V(q).

Potentials are either polynomials (harmonic, monomial well, double well,
user coefficients) on the line, or the pendulum -cos q on the circle.
Kinetic profiles are even with F(0) = 0 and F'(p)/p > 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import Polynomial

from ..errors import ConfigError

LINE = "line"
CIRCLE = "circle"

KINETIC_PROFILES = ("standard", "relativistic")
POTENTIAL_FAMILIES = ("harmonic", "monomial", "pendulum", "double_well", "polynomial")


# -----------------------------
# Kinetic profiles
# -----------------------------

@dataclass(frozen=True)
class KineticProfile:
    """Even kinetic energy F(p): standard p^2/2 or relativistic sqrt(1+p^2)-1."""
    name: str = "standard"

    def value(self, p):
        if self.name == "standard":
            return 0.5 * p * p
        return np.sqrt(1.0 + p * p) - 1.0

    def d1(self, p):
        if self.name == "standard":
            return p
        return p / np.sqrt(1.0 + p * p)

    def d2(self, p):
        if self.name == "standard":
            return np.ones_like(np.asarray(p, dtype=float))
        return (1.0 + p * p) ** -1.5

    def over_p(self, p):
        """F'(p)/p, finite and positive at p = 0."""
        if self.name == "standard":
            return np.ones_like(np.asarray(p, dtype=float))
        return 1.0 / np.sqrt(1.0 + p * p)

    def inverse(self, y):
        """Non-negative p with F(p) = y for y >= 0."""
        y = np.maximum(y, 0.0)
        if self.name == "standard":
            return np.sqrt(2.0 * y)
        return np.sqrt(y * (y + 2.0))

    @property
    def curvature_at_zero(self) -> float:
        return 1.0


# -----------------------------
# Potentials
# -----------------------------

@dataclass(frozen=True)
class PolynomialPotential:
    coefficients: Tuple[float, ...]  # ascending powers

    @property
    def poly(self) -> Polynomial:
        return Polynomial(self.coefficients)

    def derivative(self, q, order: int = 0):
        poly = self.poly.deriv(order) if order else self.poly
        return poly(q)

    def gap(self, q, h):
        return h - self.poly(q)

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def scan_window(self) -> Tuple[float, float]:
        """Interval containing every critical point (Cauchy bound on roots of V')."""
        d = self.poly.deriv().coef
        while len(d) > 1 and d[-1] == 0.0:
            d = d[:-1]
        if len(d) <= 1:
            return (-1.0, 1.0)
        bound = 1.0 + float(np.max(np.abs(d[:-1] / d[-1])))
        return (-bound - 0.5, bound + 0.5)


@dataclass(frozen=True)
class PendulumPotential:
    def derivative(self, q, order: int = 0):
        # d^m/dq^m (-cos q) = -cos(q + m*pi/2)
        return -np.cos(q + order * 0.5 * math.pi)

    def gap(self, q, h):
        # h + cos q as (h + 1) - 2 sin^2(q/2) in the lower half of the well,
        # (h - 1) + 2 cos^2(q/2) above it and on rotation levels
        h = np.asarray(h, dtype=float)
        s = np.sin(0.5 * q)
        c = np.cos(0.5 * q)
        out = np.where(h < 0.0, (h + 1.0) - 2.0 * s * s, (h - 1.0) + 2.0 * c * c)
        return out if np.ndim(out) else float(out)

    def scan_window(self) -> Tuple[float, float]:
        return (-math.pi, math.pi)


# -----------------------------
# Hamiltonian
# -----------------------------

@dataclass(frozen=True)
class HamiltonianSpec:
    """H(q,p) = F(p) + V(q) + offset with derivatives and domain."""
    family: str
    potential: object
    kinetic: KineticProfile = field(default_factory=KineticProfile)
    domain: str = LINE
    params: Tuple[Tuple[str, float], ...] = ()
    offset: float = 0.0
    analytic: bool = True

    # ---- potential ----
    def V(self, q):
        return self.potential.derivative(q, 0) + self.offset

    def dV(self, q):
        return self.potential.derivative(q, 1)

    def d2V(self, q):
        return self.potential.derivative(q, 2)

    def dnV(self, q, order: int):
        if order == 0:
            return self.V(q)
        return self.potential.derivative(q, order)

    # ---- full hamiltonian ----
    def energy(self, q, p):
        return self.kinetic.value(p) + self.V(q)

    def gradient(self, q, p):
        """(H_q, H_p)."""
        return self.dV(q), self.kinetic.d1(p)

    def hessian(self, q, p):
        """(H_qq, H_qp, H_pp)."""
        zero = np.zeros_like(np.asarray(q, dtype=float) + np.asarray(p, dtype=float))
        return self.d2V(q) + zero, zero, self.kinetic.d2(p) + zero

    def energy_gap(self, q, h):
        """h - V(q), evaluated without cancellation where the family allows."""
        return self.potential.gap(q, h - self.offset)

    def momentum_at(self, q, h, sign: int = 1):
        """Momentum with H(q, p) = h on the branch sign(p) = sign."""
        gap = self.energy_gap(q, h)
        if np.any(np.asarray(gap) < -1e-12 * (1.0 + abs(h))):
            raise ValueError(f"level h={h} is not reachable at q={q}")
        return sign * self.kinetic.inverse(gap)

    def scan_window(self) -> Tuple[float, float]:
        return self.potential.scan_window()

    def param(self, name: str, default: Optional[float] = None) -> Optional[float]:
        return dict(self.params).get(name, default)

    def with_offset(self, offset: float) -> 'HamiltonianSpec':
        return replace(self, offset=float(offset))

    def wrap(self, q):
        """Map q into [-pi, pi) on the circle; identity on the line."""
        if self.domain != CIRCLE:
            return q
        return (np.asarray(q) + math.pi) % (2.0 * math.pi) - math.pi


def eval_energy(H: HamiltonianSpec, q, p):
    return H.energy(q, p)


def eval_gradient(H: HamiltonianSpec, q, p):
    return H.gradient(q, p)


def eval_hessian(H: HamiltonianSpec, q, p):
    return H.hessian(q, p)


def make_hamiltonian(
    family: str,
    *,
    omega: float = 1.0,
    n: int = 2,
    a: float = 1.0,
    coefficients: Optional[Sequence[float]] = None,
    kinetic: str = "standard",
    domain: Optional[str] = None,
    normalize: bool = False,
) -> HamiltonianSpec:
    """Build a built-in family by name.

    harmonic: omega^2 q^2/2; monomial: (omega q)^(2n); pendulum: -cos q;
    double_well: (q^2 - a^2)^2/4; polynomial: user coefficients, ascending.
    """
    family = (family or "").strip().lower()
    if kinetic not in KINETIC_PROFILES:
        raise ConfigError([f"unknown kinetic profile {kinetic!r}; expected one of {KINETIC_PROFILES}"])
    kin = KineticProfile(kinetic)
    params: Tuple[Tuple[str, float], ...]
    if family == "harmonic":
        if omega <= 0:
            raise ConfigError([f"harmonic omega must be positive, got {omega}"])
        pot = PolynomialPotential((0.0, 0.0, 0.5 * omega * omega))
        params = (("omega", float(omega)),)
    elif family == "monomial":
        if int(n) != n or n < 1:
            raise ConfigError([f"monomial order n must be a positive integer, got {n}"])
        coeffs = [0.0] * (2 * int(n) + 1)
        coeffs[-1] = float(omega) ** (2 * int(n))
        pot = PolynomialPotential(tuple(coeffs))
        params = (("omega", float(omega)), ("n", float(n)))
    elif family == "double_well":
        if a <= 0:
            raise ConfigError([f"double_well a must be positive, got {a}"])
        pot = PolynomialPotential((0.25 * a ** 4, 0.0, -0.5 * a * a, 0.0, 0.25))
        params = (("a", float(a)),)
    elif family == "polynomial":
        coeffs = [float(c) for c in (coefficients or [])]
        while coeffs and coeffs[-1] == 0.0:
            coeffs.pop()
        if len(coeffs) < 3 or (len(coeffs) - 1) % 2 or coeffs[-1] <= 0:
            raise ConfigError([
                "polynomial potential needs an even degree >= 2 with positive leading coefficient "
                f"(proper and bounded below), got coefficients={coefficients}"
            ])
        pot = PolynomialPotential(tuple(coeffs))
        params = tuple((f"c{i}", c) for i, c in enumerate(coeffs))
    elif family == "pendulum":
        pot = PendulumPotential()
        params = ()
    else:
        raise ConfigError([f"unknown hamiltonian family {family!r}; expected one of {POTENTIAL_FAMILIES}"])

    default_domain = CIRCLE if family == "pendulum" else LINE
    domain = domain or default_domain
    if domain != default_domain:
        raise ConfigError([f"family {family!r} is only supported on the {default_domain} domain"])

    H = HamiltonianSpec(family=family, potential=pot, kinetic=kin, domain=domain, params=params)
    if normalize:
        from .reeb import critical_points

        lowest = min(cp.h for cp in critical_points(H))
        H = H.with_offset(-lowest)
    return H
