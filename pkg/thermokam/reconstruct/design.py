"""Hamiltonians designed from a prescribed Nose-Hoover averaged potential.

Given Utilde on (sigma1, inf) with its minimum 0 at sigma = 0, the level
function H(sigma) and the action I(sigma) = dH/dsigma are chosen so that

    H - T ln I = Utilde + T ln(W_a / T)

where S(sigma) is the integral of exp(-beta Utilde) from sigma to infinity,
W_a = S(sigma1) and W_b = S(0). This gives

    H = -T ln(S / W_a),   I = T exp(-beta Utilde) / S,   H_I = T / (I - Utilde')
    H0 = T ln(W_a / W_b), I0 = T / W_b

so H(sigma1) = 0 and the averaged equilibrium sits at sigma = 0.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.integrate import quad
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from ..averaged.system import _density_columns, darboux_potential
from ..errors import ConfigError, NoncompactLevelError, NonintegrableTailError, NonunimodalError
from ..hamiltonian.reeb import OSCILLATION, ReebEdge
from ..quadrature.profiles import ActionProfile, _interpolant
from ..special.functions import erfc, erfcx
from ..thermostats.fields import ThermostatSpec

logger = logging.getLogger(__name__)

Potential = Callable[[np.ndarray], np.ndarray]

SPLIT_SCALE = 4.0           # improper integrals split at SPLIT_SCALE / sqrt(beta)
MAX_EXPONENT = 300.0        # rows with beta * Utilde above this are dropped
TAIL_EXPONENT = 40.0
TAIL_PROBES = 40
DEFAULT_POINTS = 1600
GEOMETRIC_MARGIN = 1e-6
GEOMETRIC_RATIO = 2.0 ** 0.25
ROUND_TRIP_WINDOW = 4.0     # compared where beta * Utilde <= this
WIDTH_SCAN = 2049


@dataclass(frozen=True)
class DesignedHamiltonian:
    beta: float
    U_tilde: Potential
    sigma1: float
    W_a: float
    W_b: float
    H0: float
    I0: float
    table: pd.DataFrame             # sigma, U, H, I, H_I
    residuals: Dict[str, float] = field(default_factory=dict)
    checks: Dict[str, float] = field(default_factory=dict)

    @property
    def T(self) -> float:
        return 1.0 / self.beta

    @property
    def W0(self) -> float:
        """W_b / W_a."""
        return self.W_b / self.W_a

    def column(self, name: str) -> np.ndarray:
        return self.table[name].to_numpy()

    def summary(self) -> Dict[str, float]:
        out = {
            "beta": self.beta, "T": self.T, "sigma1": self.sigma1,
            "W_a": self.W_a, "W_b": self.W_b, "W0": self.W0, "H0": self.H0, "I0": self.I0,
            "rows": int(len(self.table)),
        }
        out.update({f"residual_{k}": v for k, v in self.residuals.items()})
        out.update({f"check_{k}": v for k, v in self.checks.items()})
        return out


# -----------------------------
# Design
# -----------------------------

def _weight(U_tilde: Potential, beta: float) -> Callable[[float], float]:
    return lambda s: float(np.exp(-beta * np.asarray(U_tilde(s), dtype=float)))


def _check_tail(U_tilde: Potential, beta: float, start: float) -> None:
    for j in range(TAIL_PROBES):
        x = start + 2.0 ** j
        u = float(beta * U_tilde(x))
        if u - math.log1p(x - start) > TAIL_EXPONENT:
            return
    raise NonintegrableTailError(
        f"exp(-beta Utilde) does not decay beyond sigma={start:.6g} "
        f"(beta*Utilde={u:.6g} at sigma={x:.6g})"
    )


def _derivative(U_tilde: Potential, sigma: np.ndarray) -> np.ndarray:
    d = 1e-4 * np.maximum(1.0, np.abs(sigma))
    return (8.0 * (U_tilde(sigma + d) - U_tilde(sigma - d))
            - (U_tilde(sigma + 2.0 * d) - U_tilde(sigma - 2.0 * d))) / (12.0 * d)


def design_grid(sigma1: float, sigma_max: float, n: int = DEFAULT_POINTS) -> np.ndarray:
    """Uniform grid on (sigma1, sigma_max] refined geometrically toward sigma1, with 0 included."""
    width = sigma_max - sigma1
    margin = GEOMETRIC_MARGIN * width
    points = [np.linspace(sigma1 + margin, sigma_max, n), [0.0]]
    steps = []
    d = margin
    while d < width / n:
        steps.append(d)
        d *= GEOMETRIC_RATIO
    points.append(sigma1 + np.array(steps))
    return np.unique(np.concatenate(points))


def design(U_tilde: Potential, beta: float, sigma1: float, *, dU: Optional[Potential] = None,
           sigma_max: Optional[float] = None, n: int = DEFAULT_POINTS) -> DesignedHamiltonian:
    """Tabulate the hamiltonian whose Nose-Hoover averaged potential is U_tilde."""
    if not beta > 0.0:
        raise ValueError(f"beta must be positive, got {beta}")
    if not (math.isfinite(sigma1) and sigma1 < 0.0):
        raise ValueError(f"sigma1 must be finite and negative, got {sigma1}")
    T = 1.0 / beta
    split = SPLIT_SCALE / math.sqrt(beta)
    sigma_max = max(split, 1.0) if sigma_max is None else float(sigma_max)
    if not sigma_max > 0.0:
        raise ValueError(f"sigma_max must be positive, got {sigma_max}")
    _check_tail(U_tilde, beta, sigma_max)

    w = _weight(U_tilde, beta)
    sigma = design_grid(sigma1, sigma_max, n)
    cells = np.array([quad(w, a, b, epsabs=0.0, epsrel=1e-13, limit=200)[0]
                      for a, b in zip(sigma[:-1], sigma[1:])])
    head = quad(w, sigma1, sigma[0], epsabs=0.0, epsrel=1e-13, limit=200)[0]
    tail, tail_err = quad(w, sigma_max, np.inf, epsabs=0.0, epsrel=1e-13, limit=400)
    if not (math.isfinite(tail) and tail_err <= 1e-8 * max(tail, 1e-300)):
        raise NonintegrableTailError(f"tail integral beyond sigma={sigma_max:.6g} did not converge ({tail_err:.3e})")

    # C from the left, S from the right, each where it keeps full relative precision
    C = head + np.concatenate([[0.0], np.cumsum(cells)])
    S_right = tail + np.concatenate([np.cumsum(cells[::-1])[::-1], [0.0]])
    W_a = float(C[-1] + tail)
    j0 = int(np.searchsorted(sigma, 0.0))
    W_b = float(S_right[j0])
    left = C <= 0.5 * W_a
    S = np.where(left, W_a - C, S_right)
    logS = np.log(S)
    H = np.where(left, -T * np.log1p(-C / W_a), -T * (logS - math.log(W_a)))

    U = np.asarray(U_tilde(sigma), dtype=float)
    Up = np.asarray(dU(sigma) if dU is not None else _derivative(U_tilde, sigma), dtype=float)
    I = T * np.exp(-beta * U - logS)
    with np.errstate(divide="ignore", invalid="ignore"):
        H_I = T / (I - Up)

    keep = (beta * U <= MAX_EXPONENT) & (I > 0.0) & np.isfinite(H_I) & (H_I > 0.0)
    if not keep[j0]:
        raise ValueError("the designed action is not increasing at the equilibrium")
    table = pd.DataFrame({"sigma": sigma, "U": U, "H": H, "I": I, "H_I": H_I})[keep].reset_index(drop=True)
    if np.any(np.diff(table["H"].to_numpy()) <= 0.0):
        raise ValueError("designed H is not strictly increasing in sigma")

    H0 = T * math.log(W_a / W_b)
    I0 = T / W_b
    c = T * math.log(W_a / T)
    Ht, It, Ut = table["H"].to_numpy(), table["I"].to_numpy(), table["U"].to_numpy()
    k0 = int(np.searchsorted(table["sigma"].to_numpy(), 0.0))
    residuals = {
        "identity": float(np.max(np.abs(Ht - T * np.log(It) - Ut - c))),
        "H0": abs(float(Ht[k0]) - H0),
        "I0": abs(float(It[k0]) - I0) / I0,
        "tail": float(tail_err),
    }
    logger.info("designed hamiltonian beta=%g on (%g, %g): W_a=%.12g W_b=%.12g H0=%.12g I0=%.12g, %d rows",
                beta, sigma1, sigma_max, W_a, W_b, H0, I0, len(table))
    return DesignedHamiltonian(beta=beta, U_tilde=U_tilde, sigma1=sigma1, W_a=W_a, W_b=W_b,
                               H0=H0, I0=I0, table=table, residuals=residuals)


# -----------------------------
# Rational example
# -----------------------------

def rational_potential(sigma):
    tau = np.asarray(sigma, dtype=float) + 1.0
    return (tau - 1.0 / tau) ** 2


def rational_potential_prime(sigma):
    tau = np.asarray(sigma, dtype=float) + 1.0
    return 2.0 * (tau - 1.0 / tau) * (1.0 + 1.0 / tau ** 2)


def rational_closed_forms(beta: float, sigma) -> Tuple[np.ndarray, np.ndarray]:
    """(H, I) of the rational example from the erfc formulas."""
    T = 1.0 / beta
    rb = math.sqrt(beta)
    tau = np.asarray(sigma, dtype=float) + 1.0
    u = tau - 1.0 / tau
    v = tau + 1.0 / tau
    damped = np.exp(-beta * u * u) * erfcx(rb * v)
    W = 0.5 * (erfc(rb * u) + damped)
    # below tau = 1, W = 1 - deficit with both deficit terms small
    deficit = 0.5 * (erfc(-rb * u) - damped)
    with np.errstate(divide="ignore", invalid="ignore"):
        H = np.where(u >= 0.0, -T * np.log(W), -T * np.log1p(-deficit))
    I = 2.0 * math.sqrt(T) * np.exp(-beta * u * u) / (math.sqrt(math.pi) * W)
    return H, I


def rational_constants(beta: float) -> Dict[str, float]:
    T = 1.0 / beta
    W0 = 0.5 * (float(erfcx(2.0 * math.sqrt(beta))) + 1.0)
    return {
        "W_a": math.sqrt(math.pi / (4.0 * beta)),
        "W0": W0,
        "H0": -T * math.log(W0),
        "I0": 2.0 * math.sqrt(T) / (math.sqrt(math.pi) * W0),
    }


def rational_example(beta: float, *, n: int = DEFAULT_POINTS, compare_above: float = -0.8) -> DesignedHamiltonian:
    """Design for Utilde = (tau - 1/tau)^2, tau = sigma + 1, checked against its closed forms."""
    if not beta > 0.0:
        raise ValueError(f"beta must be positive, got {beta}")
    designed = design(rational_potential, beta, -1.0, dU=rational_potential_prime, n=n)
    exact = rational_constants(beta)
    sigma = designed.column("sigma")
    sel = sigma >= compare_above
    H_cf, I_cf = rational_closed_forms(beta, sigma[sel])
    checks = {
        "W_a_closed": exact["W_a"],
        "W_a_error": abs(designed.W_a - exact["W_a"]),
        "W_b_error": abs(designed.W_b - exact["W_a"] * exact["W0"]),
        "H0_error": abs(designed.H0 - exact["H0"]),
        "I0_error": abs(designed.I0 - exact["I0"]),
        "H_error": float(np.max(np.abs(designed.column("H")[sel] - H_cf))),
        "I_rel_error": float(np.max(np.abs(designed.column("I")[sel] / I_cf - 1.0))),
    }
    logger.info("rational example beta=%g: integral %.6f vs %.6f", beta, designed.W_a, exact["W_a"])
    return replace(designed, checks=checks)


# -----------------------------
# Named potentials
# -----------------------------

def quadratic_potential(sigma):
    s = np.asarray(sigma, dtype=float)
    return s * s


def quadratic_potential_prime(sigma):
    return 2.0 * np.asarray(sigma, dtype=float)


@dataclass(frozen=True)
class NamedPotential:
    """Built-in Utilde; its isochrone at level u has width width_scale * sqrt(u)."""
    U: Potential
    dU: Potential
    width_scale: float
    sigma1: float
    sigma1_fixed: bool = False      # the lower end is a singularity of U


NAMED_POTENTIALS: Dict[str, NamedPotential] = {
    "rational": NamedPotential(rational_potential, rational_potential_prime, 1.0, -1.0, sigma1_fixed=True),
    "quadratic": NamedPotential(quadratic_potential, quadratic_potential_prime, 2.0, -6.0),
}


def named_design(name: str, beta: float, *, sigma1: Optional[float] = None,
                 n: int = DEFAULT_POINTS) -> Tuple[DesignedHamiltonian, NamedPotential]:
    """Design for a built-in potential by name; the rational one carries its closed-form checks."""
    pot = NAMED_POTENTIALS.get(name)
    if pot is None:
        raise ConfigError([f"reconstruct potential must be one of {tuple(NAMED_POTENTIALS)}, got {name!r}"])
    if pot.sigma1_fixed and sigma1 is not None and sigma1 != pot.sigma1:
        raise ConfigError([f"the {name} potential is defined on ({pot.sigma1:g}, inf); sigma1={sigma1:g} is not allowed"])
    if name == "rational":
        return rational_example(beta, n=n), pot
    lower = pot.sigma1 if sigma1 is None else float(sigma1)
    return design(pot.U, beta, lower, dU=pot.dU, n=n), pot


# -----------------------------
# Isochrone widths
# -----------------------------

def _unimodal_minimum(U: Potential, lo: float, hi: float) -> float:
    xs = np.linspace(lo, hi, WIDTH_SCAN)
    ys = np.asarray(U(xs), dtype=float)
    j = int(np.argmin(ys))
    if np.any(np.diff(ys[: j + 1]) > 0.0) or np.any(np.diff(ys[j:]) < 0.0):
        raise NonunimodalError(f"potential is not unimodal on [{lo:.6g}, {hi:.6g}]")
    a, b = xs[max(j - 1, 0)], xs[min(j + 1, len(xs) - 1)]
    if j in (0, len(xs) - 1):
        raise NonunimodalError(f"potential has no interior minimum on [{lo:.6g}, {hi:.6g}]")
    d = lambda s: float(_derivative(U, np.array([s]))[0])
    if d(a) < 0.0 < d(b):
        return float(brentq(d, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps))
    return float(xs[j])


def isochrone_width(U: Potential, sigma_lo: float, sigma_hi: float, u_values: Sequence[float]) -> pd.DataFrame:
    """Delta(u) = sigma_+(u) - sigma_-(u) on the sublevel sets of a unimodal potential."""
    hi_scan = sigma_hi if math.isfinite(sigma_hi) else sigma_lo + 64.0
    s_min = _unimodal_minimum(U, sigma_lo, hi_scan)
    floor = float(U(s_min))
    f = lambda s, u: float(U(s)) - floor - u
    rows = []
    for u in u_values:
        u = float(u)
        if not u > 0.0:
            raise ValueError(f"width level must be positive, got {u}")
        if f(sigma_lo, u) < 0.0:
            raise NoncompactLevelError(f"level u={u:.6g} exceeds U at sigma={sigma_lo:.6g}")
        right = hi_scan
        while f(right, u) < 0.0:
            if math.isfinite(sigma_hi):
                raise NoncompactLevelError(f"level u={u:.6g} exceeds U at sigma={sigma_hi:.6g}")
            right = s_min + 2.0 * (right - s_min)
        minus = brentq(f, sigma_lo, s_min, args=(u,), xtol=1e-15, rtol=4 * np.finfo(float).eps)
        plus = brentq(f, s_min, right, args=(u,), xtol=1e-15, rtol=4 * np.finfo(float).eps)
        rows.append({"u": u, "sigma_minus": minus, "sigma_plus": plus, "width": plus - minus,
                     "width_over_sqrt_u": (plus - minus) / math.sqrt(u)})
    return pd.DataFrame(rows, columns=["u", "sigma_minus", "sigma_plus", "width", "width_over_sqrt_u"])


@dataclass(frozen=True)
class ShearedParabola:
    """U defined implicitly by u = (sigma - shear(u))^2."""
    shear: Callable[[float], float]
    u_max: float

    def branch(self, u, side: int):
        u = np.asarray(u, dtype=float)
        return np.vectorize(self.shear, otypes=[float])(u) + side * np.sqrt(u)

    @property
    def sigma_range(self) -> Tuple[float, float]:
        return float(self.branch(self.u_max, -1)), float(self.branch(self.u_max, 1))

    def _level(self, s: float) -> float:
        side = 1 if s >= 0.0 else -1
        g = lambda u: float(self.branch(u, side)) - s
        if g(self.u_max) * side < 0.0:
            raise NoncompactLevelError(f"sigma={s:.6g} lies beyond the sheared parabola range {self.sigma_range}")
        if s == 0.0:
            return 0.0
        return float(brentq(g, 0.0, self.u_max, xtol=1e-15, rtol=4 * np.finfo(float).eps))

    def __call__(self, sigma):
        out = np.vectorize(self._level, otypes=[float])(sigma)
        return float(out) if np.ndim(sigma) == 0 else out


def sheared_parabola(shear: Callable[[float], float], u_max: float) -> ShearedParabola:
    if shear(0.0) != 0.0:
        raise ValueError("the shear must vanish at u = 0")
    parabola = ShearedParabola(shear, float(u_max))
    us = np.linspace(0.0, u_max, 257)
    if np.any(np.diff(parabola.branch(us, 1)) <= 0.0) or np.any(np.diff(parabola.branch(us, -1)) >= 0.0):
        raise NonunimodalError(f"shear is too strong for a unimodal potential below u={u_max:.6g}")
    return parabola


# -----------------------------
# Round trip through the averaged pipeline
# -----------------------------

def designed_profile(designed: DesignedHamiltonian) -> ActionProfile:
    """ActionProfile (h, I, H_I, K) of a designed hamiltonian on a synthetic edge."""
    t = designed.table
    h = t["H"].to_numpy()
    I = t["I"].to_numpy()
    H_I = t["H_I"].to_numpy()
    table = pd.DataFrame({"h": h, "I": I, "H_I": H_I, "K": I * H_I})
    edge = ReebEdge(index=0, h_lo=0.0, h_hi=math.inf, lower=None, upper=None, orientation=OSCILLATION,
                    anchor=0.0, q_left=-math.inf, q_right=math.inf)
    spline, used = _interpolant(h, I, 1.0 / H_I)
    interpolants = {
        "I": spline,
        "H_I": PchipInterpolator(h, H_I),
        "K": PchipInterpolator(h, table["K"].to_numpy()),
    }
    return ActionProfile(edge=edge, ks=(), table=table, interpolants=interpolants,
                         hermite_columns=("I",) if used else ())


def round_trip(designed: DesignedHamiltonian, *, window: float = ROUND_TRIP_WINDOW) -> Dict[str, float]:
    """Rebuild (sigma, U) from the designed profile with the Nose-Hoover density and compare."""
    profile = designed_profile(designed)
    D, DH = _density_columns(ThermostatSpec("nh", T=designed.T), profile)
    sigma = designed.column("sigma")
    j0 = int(np.searchsorted(sigma, 0.0))
    sigma_rec, U_rec, _ = darboux_potential(profile.h, D, DH, designed.T, j0)
    U = designed.column("U")
    sel = designed.beta * U <= window
    U_shift = np.asarray(designed.U_tilde(sigma_rec[sel]), dtype=float) - float(designed.U_tilde(0.0))
    out = {
        "sigma": float(np.max(np.abs(sigma_rec[sel] - sigma[sel]))),
        "potential": float(np.max(np.abs(U_rec[sel] - U_shift))),
        "points": int(sel.sum()),
    }
    logger.info("design round trip: sigma %.3e, potential %.3e over %d points",
                out["sigma"], out["potential"], out["points"])
    return out
