"""Thermostated vector fields Y = X_H + eps * T on (q, p, xi).

Variants:
    nh        q' = H_p                 p' = -H_q - eps xi p
              xi' = eps (p H_p - T)                              G = H + xi^2/2
    logistic  p' = -H_q - eps tanh(xi) p, xi' as nh              G = H + ln cosh xi
    wk        p' = -H_q - eps xi^l p^k
              xi' = eps p^(k-1) (p H_p - k T) zeta_l(xi)         G = H + xi^2/2
    hsh       q' = H_p - eps xi^3 q     p' = -H_q - eps mu xi^3 p^3
              xi' = eps ([q H_q - T] + mu p^2 [p H_p - 3T])      G = H + xi^4/4

Every variant preserves exp(-G/T) dq dp dxi; liouville_defect measures the
failure of that identity pointwise.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import quad

from ..errors import ConfigError
from ..hamiltonian.families import CIRCLE, HamiltonianSpec
from ..special.functions import zeta_l, zeta_l_prime

logger = logging.getLogger(__name__)

VARIANTS = ("nh", "logistic", "wk", "hsh")
FD_STEP = 1e-4


@dataclass(frozen=True)
class ThermostatSpec:
    variant: str = "nh"
    epsilon: float = 0.1
    T: float = 1.0
    k: int = 1
    l: int = 1
    mu_hsh: float = 0.0

    def __post_init__(self):
        errors = []
        if self.variant not in VARIANTS:
            errors.append(f"thermostat must be one of {VARIANTS}, got {self.variant!r}")
        if not self.epsilon >= 0.0:
            errors.append(f"epsilon must be >= 0, got {self.epsilon}")
        if not self.T > 0.0:
            errors.append(f"temperature must be > 0, got {self.T}")
        for name in ("k", "l"):
            v = getattr(self, name)
            if int(v) != v or v < 1 or v % 2 == 0:
                errors.append(f"{name} must be an odd positive integer, got {v}")
        if not self.mu_hsh >= 0.0:
            errors.append(f"mu must be >= 0, got {self.mu_hsh}")
        if errors:
            raise ConfigError(errors)

    @property
    def beta(self) -> float:
        return 1.0 / self.T

    def with_epsilon(self, epsilon: float) -> 'ThermostatSpec':
        return ThermostatSpec(self.variant, float(epsilon), self.T, self.k, self.l, self.mu_hsh)


def check_compatible(H: HamiltonianSpec, spec: ThermostatSpec) -> None:
    if spec.variant == "hsh" and H.domain == CIRCLE:
        raise ConfigError(["the hsh thermostat couples through q H_q and needs the line domain"])


def _split(x):
    x = np.asarray(x, dtype=float)
    return x[..., 0], x[..., 1], x[..., 2]


# -----------------------------
# Field, density, defect
# -----------------------------

def vector_field(H: HamiltonianSpec, spec: ThermostatSpec, x) -> np.ndarray:
    """(q', p', xi') at states x of shape (..., 3)."""
    q, p, xi = _split(x)
    H_q, H_p = H.gradient(q, p)
    eps, T = spec.epsilon, spec.T
    dq = H_p + 0.0 * q
    if spec.variant == "nh":
        dp = -H_q - eps * xi * p
        dxi = eps * (p * H_p - T)
    elif spec.variant == "logistic":
        dp = -H_q - eps * np.tanh(xi) * p
        dxi = eps * (p * H_p - T)
    elif spec.variant == "wk":
        k, l = spec.k, spec.l
        dp = -H_q - eps * xi ** l * p ** k
        dxi = eps * p ** (k - 1) * (p * H_p - k * T) * zeta_l(xi, l, T)
    else:
        mu = spec.mu_hsh
        xi3 = xi ** 3
        dq = H_p - eps * xi3 * q
        dp = -H_q - eps * mu * xi3 * p ** 3
        dxi = eps * ((q * H_q - T) + mu * p * p * (p * H_p - 3.0 * T))
    return np.stack(np.broadcast_arrays(dq, dp, dxi), axis=-1)


def kinetic_part(spec: ThermostatSpec, xi):
    """G - H as a function of xi."""
    xi = np.asarray(xi, dtype=float)
    if spec.variant == "logistic":
        # ln cosh without overflow
        a = np.abs(xi)
        return a + np.log1p(np.exp(-2.0 * a)) - math.log(2.0)
    if spec.variant == "hsh":
        return 0.25 * xi ** 4
    return 0.5 * xi * xi


def kinetic_slope(spec: ThermostatSpec, xi):
    xi = np.asarray(xi, dtype=float)
    if spec.variant == "logistic":
        return np.tanh(xi)
    if spec.variant == "hsh":
        return xi ** 3
    return xi


def g_density(spec: ThermostatSpec, H: HamiltonianSpec, x):
    """G(q, p, xi); the invariant density is exp(-G/T)."""
    q, p, xi = _split(x)
    return H.energy(q, p) + kinetic_part(spec, xi)


def divergence(H: HamiltonianSpec, spec: ThermostatSpec, x):
    """Analytic div Y."""
    q, p, xi = _split(x)
    eps, T = spec.epsilon, spec.T
    if spec.variant == "nh":
        return -eps * xi + 0.0 * q * p
    if spec.variant == "logistic":
        return -eps * np.tanh(xi) + 0.0 * q * p
    if spec.variant == "wk":
        k, l = spec.k, spec.l
        _, H_p = H.gradient(q, p)
        return eps * p ** (k - 1) * (-k * xi ** l + (p * H_p - k * T) * zeta_l_prime(xi, l, T))
    mu = spec.mu_hsh
    return -eps * xi ** 3 * (1.0 + 3.0 * mu * p * p) + 0.0 * q


def liouville_defect(spec: ThermostatSpec, H: HamiltonianSpec, x):
    """div Y - beta <dG, Y>; zero wherever exp(-beta G) is invariant."""
    q, p, xi = _split(x)
    Y = vector_field(H, spec, x)
    H_q, H_p = H.gradient(q, p)
    dG = H_q * Y[..., 0] + H_p * Y[..., 1] + kinetic_slope(spec, xi) * Y[..., 2]
    return divergence(H, spec, x) - spec.beta * dG


def finite_difference_divergence(H: HamiltonianSpec, spec: ThermostatSpec, x, *, step: float = FD_STEP):
    """Fourth-order central-difference div Y, independent of the analytic path."""
    x = np.asarray(x, dtype=float)
    total = np.zeros(x.shape[:-1])
    for i in range(3):
        h = step * np.maximum(1.0, np.abs(x[..., i]))
        e = np.zeros_like(x)
        e[..., i] = h
        f = lambda y: vector_field(H, spec, y)[..., i]
        total = total + (-f(x + 2 * e) + 8.0 * f(x + e) - 8.0 * f(x - e) + f(x - 2 * e)) / (12.0 * h)
    return total


def finite_difference_defect(spec: ThermostatSpec, H: HamiltonianSpec, x, *, step: float = FD_STEP):
    q, p, xi = _split(x)
    Y = vector_field(H, spec, x)
    H_q, H_p = H.gradient(q, p)
    dG = H_q * Y[..., 0] + H_p * Y[..., 1] + kinetic_slope(spec, xi) * Y[..., 2]
    return finite_difference_divergence(H, spec, x, step=step) - spec.beta * dG


def time_reversal(x) -> np.ndarray:
    """(q, p, xi) -> (q, -p, -xi)."""
    x = np.array(x, dtype=float, copy=True)
    x[..., 1] *= -1.0
    x[..., 2] *= -1.0
    return x


# -----------------------------
# Checklist
# -----------------------------

@dataclass(frozen=True)
class ChecklistReport:
    variant: str
    samples: int
    max_defect: float              # scaled by 1 + |x|^3
    max_fd_defect: float
    proper_in_xi: bool
    heating_low: Optional[float]   # averaged balance below equilibrium (negative = heated)
    cooling_high: Optional[float]  # averaged balance above equilibrium (positive = cooled)
    pattern_ok: Optional[bool]
    xi_marginal: float             # integral of exp(-beta (G - H)) d xi

    def as_dict(self) -> dict:
        return {
            "variant": self.variant,
            "samples": self.samples,
            "max_defect": self.max_defect,
            "max_fd_defect": self.max_fd_defect,
            "proper_in_xi": self.proper_in_xi,
            "heating_low": self.heating_low,
            "cooling_high": self.cooling_high,
            "pattern_ok": self.pattern_ok,
            "xi_marginal": self.xi_marginal,
        }


def averaged_balance(spec: ThermostatSpec, row) -> float:
    """Sign-carrying averaged xi' (divided by eps and a positive factor) on a level row."""
    if spec.variant in ("nh", "logistic") or (spec.variant == "wk" and spec.k == 1):
        return row.K - spec.T
    if spec.variant == "wk":
        return row.ktilde[spec.k] - spec.T
    return (row.K - spec.T) + spec.mu_hsh * row.f[3] * (row.ktilde[3] - spec.T)


def thermostat_checklist(H: HamiltonianSpec, spec: ThermostatSpec, samples: int = 1000, *,
                         seed: int = 7, box: float = 2.0) -> ChecklistReport:
    """Liouville identity, properness, heating/cooling pattern and xi-marginal."""
    from ..hamiltonian.reeb import MIN, reeb_graph
    from ..quadrature.level_sets import evaluate_level

    check_compatible(H, spec)
    rng = np.random.default_rng(seed)
    x = rng.uniform(-box, box, size=(samples, 3))
    scale = 1.0 + np.linalg.norm(x, axis=-1) ** 3
    defect = float(np.max(np.abs(liouville_defect(spec, H, x)) / scale))
    fd = float(np.max(np.abs(finite_difference_defect(spec, H, x)) / scale))

    far = np.array([1.0, 10.0, 100.0, 1000.0])
    g = kinetic_part(spec, far)
    proper = bool(np.all(np.diff(g) > 0.0) and np.allclose(kinetic_part(spec, -far), g))

    ks = (spec.k, 3) if spec.variant == "wk" else (3,)
    graph = reeb_graph(H)
    low = high = None
    bottom = [e for e in graph.edges if e.lower is not None and graph.vertices[e.lower].kind == MIN]
    top = graph.unbounded_edges
    if bottom and top:
        e_lo = min(bottom, key=lambda e: e.h_lo)
        span = (e_lo.h_hi - e_lo.h_lo) if e_lo.bounded else 1.0
        low = averaged_balance(spec, evaluate_level(H, e_lo, e_lo.h_lo + 1e-3 * span, ks))
        e_hi = top[0]
        high = averaged_balance(spec, evaluate_level(H, e_hi, e_hi.h_lo + max(10.0, 20.0 * spec.T), ks))
    pattern = None if low is None else bool(low < 0.0 < high)

    beta = spec.beta
    marginal = quad(lambda s: math.exp(-beta * float(kinetic_part(spec, s))), -np.inf, np.inf)[0]
    report = ChecklistReport(spec.variant, samples, defect, fd, proper, low, high, pattern, marginal)
    logger.info("checklist %s: defect=%.3e fd=%.3e proper=%s pattern=%s",
                spec.variant, defect, fd, proper, pattern)
    return report
