"""Periods, actions and twist of the averaged system."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Tuple, Union

import numpy as np
import pandas as pd
from scipy.optimize import brentq

from ..errors import NoncompactLevelError
from ..integration.dopri import EventSpec, IntegratorConfig, integrate
from .birkhoff import BirkhoffNF, birkhoff_nf
from .chart import LocalChart, local_chart
from .system import AveragedSystem

logger = logging.getLogger(__name__)

PERIOD_CONFIG = IntegratorConfig(rtol=1e-12, atol=1e-14)
PERIOD_NOISE = 1e-10
AREA_RTOL = 1e-12
TWIST_FLAG_FACTOR = 10.0
# degenerate kinetic parts (xi^4/4, Zeta_l with l > 1) make the twist blow up as g -> 0
DEGENERATE_G_LO_FRAC = 0.25
_TAYLOR_FRACTION = 1e-6

Averaged = Union[AveragedSystem, LocalChart]


def as_chart(system: Averaged) -> LocalChart:
    return system if isinstance(system, LocalChart) else local_chart(system)


@lru_cache(maxsize=None)
def _gauss(n: int) -> Tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(n)


def _nodes(n: int, a: float, b: float) -> Tuple[np.ndarray, np.ndarray]:
    x, w = _gauss(n)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


# -----------------------------
# Period and action
# -----------------------------

def _period_event(chart: LocalChart, g: float) -> float:
    xi_g = float(chart.kinetic.inverse(g))
    chart.turning_points(g)
    h0 = chart.h0
    # downward return to h0 after one loop; the start itself is not counted
    event = EventSpec(lambda t, y: y[..., 0] - h0, direction=-1, count=1)
    omega = math.sqrt(max(chart.curvature(), 1e-300))
    bound = 1e3 * 2.0 * math.pi / omega + 1e6
    traj = integrate(chart.field, np.array([h0, xi_g]), (0.0, bound), PERIOD_CONFIG, (event,))
    hits = traj.crossings[0][0]
    if not hits:
        raise NoncompactLevelError(f"averaged orbit at g={g:.6g} did not return to its equilibrium")
    return hits[0][0]


def _period_quadrature(chart: LocalChart, g: float, n: int = 256) -> float:
    if chart.kinetic.name != "quadratic":
        raise ValueError(f"quadrature period needs the quadratic kinetic part, got {chart.kinetic.name}")
    lo, hi = chart.turning_points(g)
    r = 0.5 * (hi - lo)
    u, w = _nodes(n, 0.0, math.pi)
    h = lo + 2.0 * r * np.sin(0.5 * u) ** 2
    gap = g - chart.U(h)
    # Taylor from the nearer turning point where the direct gap cancels
    for end, sign in ((lo, 1.0), (hi, -1.0)):
        d = np.abs(h - end)
        near = d < _TAYLOR_FRACTION * (hi - lo)
        if np.any(near):
            dd = sign * d[near]
            gap[near] = -(float(chart.dU_dh(end)) * dd + 0.5 * chart.d2U_dh2(end) * dd * dd)
    integrand = r * np.sin(u) * chart.inv_D(h) / np.sqrt(2.0 * np.maximum(gap, 1e-300))
    return 2.0 * float(np.dot(w, integrand))


def _width(chart: LocalChart, y: float) -> float:
    if y <= 0.0:
        return 0.0
    lo, hi = chart.turning_points(y)
    return float(chart.sigma(hi) - chart.sigma(lo))


def averaged_action(system: Averaged, g: float) -> float:
    """Area/2pi inside {Gbar = g} in the Darboux pair (sigma, chi)."""
    chart = as_chart(system)
    chart.turning_points(g)
    xi_max = float(chart.kinetic.inverse(g))
    previous = None
    for n in (64, 128, 256, 512):
        u, w = _nodes(n, 0.0, 0.5 * math.pi)
        xi = xi_max * np.sin(u)
        y = g - chart.kinetic.value(xi)
        widths = np.array([_width(chart, float(v)) for v in y])
        integrand = widths * xi_max * np.cos(u) / chart.kinetic.metric(xi)
        J = float(np.dot(w, integrand)) / math.pi
        if previous is not None and abs(J - previous) <= AREA_RTOL * abs(J):
            return J
        previous = J
    logger.debug("averaged action at g=%.6g converged only to %.3e", g, abs(J - previous))
    return J


def averaged_period(system: Averaged, g: float, *, method: str = "event") -> Tuple[float, float]:
    """(T_avg, J) on the level {Gbar = g}."""
    chart = as_chart(system)
    if method == "event":
        T = _period_event(chart, g)
    elif method == "quadrature":
        T = _period_quadrature(chart, g)
    else:
        raise ValueError(f"unknown period method {method!r}")
    return T, averaged_action(chart, g)


def averaged_frequency(system: Averaged, J: float) -> float:
    """nu = 2 pi/T_avg on the level whose action is J."""
    chart = as_chart(system)
    g_hi = 0.999 * chart.barrier()
    if not 0.0 < J < averaged_action(chart, g_hi):
        raise NoncompactLevelError(f"action J={J:.6g} outside the compact range of the averaged system")
    g = brentq(lambda x: averaged_action(chart, x) - J, 1e-14 * g_hi, g_hi, xtol=1e-15, rtol=1e-13)
    return 2.0 * math.pi / averaged_period(chart, g)[0]


# -----------------------------
# Twist
# -----------------------------

@dataclass(frozen=True)
class TwistReport:
    variant: str
    T: float
    g: np.ndarray
    J: np.ndarray
    T_avg: np.ndarray
    freq: np.ndarray
    twist: np.ndarray
    twist_err: np.ndarray
    nonisochronous: np.ndarray
    birkhoff: Optional[BirkhoffNF] = None

    def as_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "J": self.J, "g": self.g, "T_avg": self.T_avg, "freq": self.freq,
            "twist": self.twist, "twist_err": self.twist_err,
        })

    @property
    def all_flagged(self) -> bool:
        return bool(np.all(self.nonisochronous))


def level_grid(g_hi: float, n: int, g_lo_frac: float = 0.0) -> np.ndarray:
    """Chebyshev-like levels in (g_lo, g_hi), clustered at both ends."""
    g_lo = g_lo_frac * g_hi
    j = np.arange(n)
    return g_lo + (g_hi - g_lo) * 0.5 * (1.0 - np.cos(math.pi * (j + 0.5) / n))


def _derivative(x: np.ndarray, y: np.ndarray, i: int, width: int) -> float:
    n = len(x)
    half = width // 2
    a = min(max(i - half, 0), n - width)
    xs, ys = x[a:a + width], y[a:a + width]
    scale = float(np.max(np.abs(xs - x[i]))) or 1.0
    coef = np.polynomial.polynomial.polyfit((xs - x[i]) / scale, ys, width - 1)
    return float(coef[1]) / scale


def _level_row(args):
    chart, g, method = args
    return averaged_period(chart, g, method=method)


def twist(system: Averaged, *, levels: int = 20, g_max: Optional[float] = None,
          g_max_frac: float = 0.5, g_lo_frac: Optional[float] = None, method: str = "event",
          workers: int = 1) -> TwistReport:
    """d^2 Gbar/dJ^2 = d nu/dJ on a level grid, with a 5-vs-3 point error estimate.

    The grid starts at g_lo_frac * g_max; by default 0 for a quadratic kinetic
    part and DEGENERATE_G_LO_FRAC otherwise.
    """
    if levels < 5:
        raise ValueError(f"twist needs at least 5 levels, got {levels}")
    chart = as_chart(system)
    g_hi = g_max if g_max is not None else g_max_frac * chart.barrier()
    if g_lo_frac is None:
        g_lo_frac = 0.0 if chart.kinetic.name in ("quadratic", "logcosh") else DEGENERATE_G_LO_FRAC
    if not 0.0 <= g_lo_frac < 1.0:
        raise ValueError(f"g_lo_frac must lie in [0, 1), got {g_lo_frac}")
    g = level_grid(g_hi, levels, g_lo_frac)
    jobs = [(chart, float(x), method) for x in g]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_level_row, jobs))
    else:
        rows = [_level_row(j) for j in jobs]
    T_avg = np.array([r[0] for r in rows])
    J = np.array([r[1] for r in rows])
    if np.any(np.diff(J) <= 0.0):
        raise NoncompactLevelError("averaged action is not increasing on the level grid")
    freq = 2.0 * math.pi / T_avg

    floor = PERIOD_NOISE * float(np.max(np.abs(freq))) / float(np.min(np.diff(J)))
    d5 = np.array([_derivative(J, freq, i, 5) for i in range(levels)])
    d3 = np.array([_derivative(J, freq, i, 3) for i in range(levels)])
    err = np.abs(d5 - d3) + floor
    flags = np.abs(d5) > TWIST_FLAG_FACTOR * err

    nf = None
    H = chart.H
    # the closed forms cover the Nose-Hoover potential on a monomial well
    if H.family == "monomial" and chart.spec.variant == "nh" and chart.quadratic is None and int(H.param("n")) >= 2:
        nf = birkhoff_nf(int(H.param("n")), chart.spec.T)

    logger.info("twist %s T=%g: %d levels, J in [%.4g, %.4g], %d/%d flagged",
                chart.spec.variant, chart.spec.T, levels, J[0], J[-1], int(flags.sum()), levels)
    return TwistReport(
        variant=chart.spec.variant, T=chart.spec.T, g=g, J=J, T_avg=T_avg, freq=freq,
        twist=d5, twist_err=err, nonisochronous=flags, birkhoff=nf,
    )


def isochronous_control(system: Averaged) -> LocalChart:
    """Same chart with U replaced by the parabola of equal curvature at the equilibrium."""
    return as_chart(system).isochronous()
