"""Elliptic closed forms for the planar pendulum H = p^2/2 - cos q.

Oscillation (-1 < h < 1), modulus kappa^2 = (h + 1)/2:
    I = (8/pi) (E - kappa'^2 K),   K_avg = 4 (E/K - kappa'^2),   T = 4 K

Rotation (h > 1), modulus k^2 = 2/(h + 1), one momentum branch:
    I = 4 E / (pi k),   K_avg = 2 (h + 1) E / K,   T = 2 k K

The printed kinetic-energy formula 2(H+1) / (1 - k C'(k)/C(k)) leaves C and
the prime ambiguous. pendulum_convention evaluates all four readings against
the quadrature engine.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional, Sequence

import numpy as np

from ..errors import DomainError
from ..special.functions import (
    complementary_K,
    elliptic_E_derivative,
    elliptic_K_derivative,
    elliptic_KE,
)

logger = logging.getLogger(__name__)

CONVENTION_RTOL = 1e-8
READINGS = ("K-derivative", "K-complementary", "E-derivative", "E-complementary")


@dataclass(frozen=True)
class PendulumClosedForm:
    h: float
    regime: str          # oscillation | rotation
    modulus: float
    I: float
    K: float
    H_I: float
    T_orbit: float


@dataclass(frozen=True)
class PendulumConvention:
    h_grid: tuple
    errors: Dict[str, float]         # max relative error vs quadrature, per reading
    accepted: Optional[str]
    rtol: float = CONVENTION_RTOL


def pendulum_closed_forms(h: float) -> PendulumClosedForm:
    """(I, K_avg) and the period from complete elliptic integrals."""
    h = float(h)
    if not h > -1.0 or h == 1.0 or not math.isfinite(h):
        raise DomainError(f"pendulum closed forms need h in (-1, 1) or (1, inf), got h={h!r}")
    if h < 1.0:
        kappa = math.sqrt(0.5 * (h + 1.0))
        pair = elliptic_KE(kappa)
        kp2 = 0.5 * (1.0 - h)
        I = 8.0 / math.pi * (pair.E - kp2 * pair.K)
        T = 4.0 * pair.K
        Kavg = 4.0 * (pair.E / pair.K - kp2)
        return PendulumClosedForm(h, "oscillation", kappa, I, Kavg, 2.0 * math.pi / T, T)
    k = math.sqrt(2.0 / (h + 1.0))
    pair = elliptic_KE(k)
    I = 4.0 * pair.E / (math.pi * k)
    T = 2.0 * k * pair.K
    Kavg = 2.0 * (h + 1.0) * pair.E / pair.K
    return PendulumClosedForm(h, "rotation", k, I, Kavg, 2.0 * math.pi / T, T)


def printed_formula(h: float, reading: str) -> float:
    """2(h+1) / (1 - k C'(k)/C(k)) with k^2 = 2/(h+1), under one reading of C and '."""
    if not h > 1.0:
        raise DomainError(f"the printed formula is evaluated on rotation energies h > 1, got h={h!r}")
    if reading not in READINGS:
        raise ValueError(f"unknown reading {reading!r}; expected one of {READINGS}")
    k = math.sqrt(2.0 / (h + 1.0))
    pair = elliptic_KE(k)
    base, prime = reading.split("-")
    C = pair.K if base == "K" else pair.E
    if prime == "derivative":
        Cp = elliptic_K_derivative(k) if base == "K" else elliptic_E_derivative(k)
    else:
        kc = math.sqrt((1.0 - k) * (1.0 + k))
        Cp = complementary_K(k) if base == "K" else elliptic_KE(kc).E
    return 2.0 * (h + 1.0) / (1.0 - k * Cp / C)


def pendulum_convention(h_grid: Sequence[float] = (1.5, 2.0, 3.0, 5.0, 10.0)) -> PendulumConvention:
    """Compare every reading of the printed formula with quadrature on the rotation edge."""
    from ..hamiltonian.families import make_hamiltonian
    from ..hamiltonian.reeb import ROTATION, reeb_graph
    from .level_sets import evaluate_level

    H = make_hamiltonian("pendulum")
    graph = reeb_graph(H)
    edge = next(e for e in graph.edges if e.orientation == ROTATION and e.branch == 1)
    reference = np.array([evaluate_level(H, edge, h).K for h in h_grid])

    errors = {}
    for reading in READINGS:
        values = np.array([printed_formula(h, reading) for h in h_grid])
        errors[reading] = float(np.max(np.abs(values - reference) / np.abs(reference)))
    best = min(errors, key=errors.get)
    accepted = best if errors[best] <= CONVENTION_RTOL else None
    logger.info("pendulum convention: accepted=%s errors=%s", accepted, errors)
    return PendulumConvention(h_grid=tuple(float(h) for h in h_grid), errors=errors, accepted=accepted)
