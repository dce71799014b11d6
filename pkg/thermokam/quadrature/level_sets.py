"""Level-cycle quadrature: actions, periods, orbit means and area moments.

Every quantity reduces to two families of 1-D integrals over the upper
branch p+(q) of a level cycle:

    A_k = int p+^k dq            B_k = int p+^(k-1) / H_p(p+) dq

with c = 2 on oscillation cycles (both branches) and c = 1 on rotation
cycles (one branch). Then

    I = c A_1 / 2pi       T = c B_1       H_I = 2pi / T       K = A_1 / B_1
    f_k = k B_k / B_1     Ktilde_k = A_k / (k B_k)             F_k = c A_k / 2pi

Oscillation integrals use q = q- + (q+ - q-)(1 - cos u)/2 on u in [0, pi],
which turns the inverse square-root endpoint behaviour into an analytic
integrand. Rotation integrals use the same map over one period cell
starting at the saddle.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Dict, Iterable, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from ..errors import ProfileRangeError, QuadratureError
from ..hamiltonian.families import HamiltonianSpec
from ..hamiltonian.reeb import OSCILLATION, ROTATION, ReebEdge

logger = logging.getLogger(__name__)

BASE_NODES = 128
SINGLE_RULE_MAX = 512
MAX_PANELS = 128
QUAD_RTOL = 1e-11
VERTEX_GUARD = 1e-12
_TAYLOR_FRACTION = 1e-6


@dataclass(frozen=True)
class LevelCycle:
    edge: int
    h: float
    orientation: str
    q_minus: float
    q_plus: float
    branch: int = 1
    breaks: Tuple[float, ...] = ()   # interior saddles; nodes cluster at them too

    @property
    def width(self) -> float:
        return self.q_plus - self.q_minus

    @property
    def pieces(self) -> Tuple[Tuple[float, float], ...]:
        points = (self.q_minus,) + tuple(self.breaks) + (self.q_plus,)
        return tuple(zip(points[:-1], points[1:]))

    @property
    def multiplicity(self) -> int:
        return 2 if self.orientation == OSCILLATION else 1


@dataclass(frozen=True)
class CycleIntegrals:
    cycle: LevelCycle
    A: Dict[int, float]
    B: Dict[int, float]
    means: Tuple[float, ...] = ()
    nodes: int = 0


@dataclass(frozen=True)
class LevelRow:
    """All profile columns at one energy, by direct quadrature."""
    h: float
    I: float
    T_orbit: float
    H_I: float
    K: float
    f: Dict[int, float] = field(default_factory=dict)
    ktilde: Dict[int, float] = field(default_factory=dict)
    F: Dict[int, float] = field(default_factory=dict)

    def as_record(self, ks: Sequence[int]) -> Dict[str, float]:
        row = {"h": self.h, "I": self.I, "H_I": self.H_I, "K": self.K}
        for k in ks:
            row[f"f_{k}"] = self.f[k]
        for k in ks:
            row[f"Ktilde_{k}"] = self.ktilde[k]
        for k in ks:
            row[f"F_{k}"] = self.F[k]
        return row


# -----------------------------
# Turning points
# -----------------------------

def _turning_point(H: HamiltonianSpec, h: float, inner: float, bound: float, direction: int) -> float:
    gap = lambda q: float(H.energy_gap(q, h))
    if math.isfinite(bound):
        outer = bound
    else:
        step = 1.0
        outer = inner + direction * step
        while gap(outer) > 0.0:
            inner = outer
            step *= 2.0
            outer = inner + direction * step
            if step > 1e12:
                raise QuadratureError(f"no turning point found for h={h} (potential not proper?)")
    if gap(outer) > 0.0:
        raise QuadratureError(f"level h={h} is not bounded by q={outer}")
    a, b = sorted((inner, outer))
    return float(brentq(gap, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=300))


def level_cycle(H: HamiltonianSpec, edge: ReebEdge, h: float) -> LevelCycle:
    """The level cycle of an edge at energy h, with its turning points."""
    h = float(h)
    if not (edge.h_lo < h < edge.h_hi):
        raise ProfileRangeError(f"h={h} outside edge {edge.index} interval ({edge.h_lo}, {edge.h_hi})")
    for end in (edge.h_lo, edge.h_hi):
        if math.isfinite(end) and abs(h - end) <= VERTEX_GUARD * max(1.0, abs(end)):
            raise QuadratureError(f"h={h!r} is within {VERTEX_GUARD} of the critical value {end!r}")
    if edge.orientation == ROTATION:
        return LevelCycle(edge.index, h, ROTATION, edge.q_left, edge.q_right, edge.branch, edge.interior)
    q_minus = _turning_point(H, h, edge.anchor, edge.q_left, -1)
    q_plus = _turning_point(H, h, edge.anchor, edge.q_right, +1)
    breaks = tuple(q for q in edge.interior if q_minus < q < q_plus)
    return LevelCycle(edge.index, h, OSCILLATION, q_minus, q_plus, 1, breaks)


# -----------------------------
# Gauss-Legendre machinery
# -----------------------------

@lru_cache(maxsize=16)
def _gauss_rule(n: int) -> Tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def _nodes(n: int, panels: int = 1) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [0, pi]: one n-point rule, or n-point panels."""
    x, w = _gauss_rule(n)
    width = math.pi / panels
    starts = width * np.arange(panels)
    u = (starts[:, None] + 0.5 * width * (x[None, :] + 1.0)).ravel()
    wt = np.tile(0.5 * width * w, panels)
    return u, wt


def _schedule():
    n = BASE_NODES
    while n <= SINGLE_RULE_MAX:
        yield n, 1
        n *= 2
    panels = 2
    while panels <= MAX_PANELS:
        yield SINGLE_RULE_MAX, panels
        panels *= 2


def _integrate(rows: Callable[[np.ndarray], np.ndarray], *, fixed: Optional[int] = None,
               rtol: float = QUAD_RTOL) -> Tuple[np.ndarray, int]:
    """Integrate each row of rows(u) over [0, pi] with node doubling."""
    if fixed is not None:
        u, w = _nodes(int(fixed))
        return rows(u) @ w, int(fixed)
    prev = None
    for n, panels in _schedule():
        u, w = _nodes(n, panels)
        values = rows(u)
        current = values @ w
        scale = np.abs(values) @ w
        if prev is not None:
            err = np.abs(current - prev)
            if np.all(err <= rtol * np.maximum(scale, 1e-300)):
                return current, n * panels
        prev = current
    raise QuadratureError(
        f"quadrature did not converge to rtol={rtol} with {SINGLE_RULE_MAX * MAX_PANELS} nodes"
    )


# -----------------------------
# Cycle integrals
# -----------------------------

def _piece_points(H: HamiltonianSpec, h: float, a: float, b: float, u: np.ndarray,
                  turn_lo: bool, turn_hi: bool):
    """q(u), dq/du and the energy gap h - V(q(u)) on [a, b] with q = a + (b - a) sin^2(u/2)."""
    width = b - a
    s = np.sin(0.5 * u)
    c = np.cos(0.5 * u)
    d_lo = width * s * s
    d_hi = width * c * c
    q = a + d_lo
    jac = 0.5 * width * np.sin(u)
    gap = np.asarray(H.energy_gap(q, h), dtype=float)

    # near a turning point the gap is taken from the Taylor expansion of V
    cut = _TAYLOR_FRACTION * width
    if turn_lo:
        lo = d_lo < cut
        if np.any(lo):
            d = d_lo[lo]
            gap[lo] = -(H.dV(a) * d + H.d2V(a) * d * d / 2.0 + H.dnV(a, 3) * d ** 3 / 6.0)
    if turn_hi:
        hi = d_hi < cut
        if np.any(hi):
            d = d_hi[hi]
            gap[hi] = H.dV(b) * d - H.d2V(b) * d * d / 2.0 + H.dnV(b, 3) * d ** 3 / 6.0
    return q, jac, np.maximum(gap, 0.0)


def cycle_integrals(
    H: HamiltonianSpec,
    cycle: LevelCycle,
    ks: Iterable[int] = (1,),
    observables: Sequence[Callable] = (),
    *,
    fixed_nodes: Optional[int] = None,
) -> CycleIntegrals:
    """A_k, B_k for each k, plus time means of the given observables phi(q, p)."""
    ks = sorted(set(int(k) for k in ks) | {1})
    kin = H.kinetic
    osc = cycle.orientation == OSCILLATION

    pieces = cycle.pieces
    last = len(pieces) - 1

    def piece_rows(u, j, a, b):
        q, jac, gap = _piece_points(H, cycle.h, a, b, u, osc and j == 0, osc and j == last)
        p = kin.inverse(gap)
        # p^(k-1)/H_p written as p^(k-2)/(H_p/p) so that k = 1 stays finite
        inv_hp_over_p = 1.0 / kin.over_p(p)
        with np.errstate(divide="ignore", invalid="ignore"):
            dt = np.where(p > 0.0, jac / p, 0.0) * inv_hp_over_p
        out = [p ** k * jac for k in ks]
        out += [dt if k == 1 else p ** (k - 2) * inv_hp_over_p * jac for k in ks]
        for phi in observables:
            if osc:
                val = np.asarray(phi(q, p), dtype=float) + np.asarray(phi(q, -p), dtype=float)
            else:
                val = np.asarray(phi(q, cycle.branch * p), dtype=float)
            out.append(val * dt)
        return np.vstack([np.broadcast_to(r, u.shape) for r in out])

    def rows(u):
        return sum(piece_rows(u, j, a, b) for j, (a, b) in enumerate(pieces))

    values, used = _integrate(rows, fixed=fixed_nodes)
    n = len(ks)
    A = {k: float(values[i]) for i, k in enumerate(ks)}
    B = {k: float(values[n + i]) for i, k in enumerate(ks)}
    means = ()
    if observables:
        denom = (2.0 if osc else 1.0) * B[1]
        means = tuple(float(v) / denom for v in values[2 * n:])
    logger.debug("cycle h=%.16g edge=%d integrated with %d nodes", cycle.h, cycle.edge, used)
    return CycleIntegrals(cycle=cycle, A=A, B=B, means=means, nodes=used)


# -----------------------------
# Public quantities
# -----------------------------

def action(H: HamiltonianSpec, cycle: LevelCycle) -> float:
    """I = (1/2pi) * area enclosed (oscillation) or swept over a period cell (rotation)."""
    ci = cycle_integrals(H, cycle)
    return cycle.multiplicity * ci.A[1] / (2.0 * math.pi)


def period(H: HamiltonianSpec, cycle: LevelCycle) -> Tuple[float, float]:
    """(T_orbit, H_I = 2pi/T_orbit)."""
    ci = cycle_integrals(H, cycle)
    T = cycle.multiplicity * ci.B[1]
    return T, 2.0 * math.pi / T


def kappa(H: HamiltonianSpec, cycle: LevelCycle) -> float:
    """Twice the mean kinetic energy for mechanical H: mean(p H_p) = I H_I."""
    ci = cycle_integrals(H, cycle)
    return ci.A[1] / ci.B[1]


def orbit_mean(H: HamiltonianSpec, cycle: LevelCycle, phi: Callable) -> float:
    """Time mean of phi(q, p) over one period of the cycle."""
    return cycle_integrals(H, cycle, observables=(phi,)).means[0]


def _check_k(k: int) -> int:
    if int(k) != k or k < 1 or k % 2 == 0:
        raise ValueError(f"moment order k must be an odd positive integer, got {k!r}")
    return int(k)


def k_tilde(H: HamiltonianSpec, cycle: LevelCycle, k: int) -> float:
    """Weighted mean temperature mean(p^k H_p) / f_k."""
    k = _check_k(k)
    ci = cycle_integrals(H, cycle, ks=(k,))
    return ci.A[k] / (k * ci.B[k])


def area_moment(H: HamiltonianSpec, cycle: LevelCycle, k: int) -> float:
    """F_k = (1/2pi) double integral of k p^(k-1) over the region under the cycle."""
    k = _check_k(k)
    ci = cycle_integrals(H, cycle, ks=(k,))
    return cycle.multiplicity * ci.A[k] / (2.0 * math.pi)


def row_from_integrals(ci: CycleIntegrals, ks: Sequence[int]) -> LevelRow:
    c = ci.cycle.multiplicity
    A, B = ci.A, ci.B
    T = c * B[1]
    f = {k: k * B[k] / B[1] for k in ks}
    kt = {k: A[k] / (k * B[k]) for k in ks}
    F = {k: c * A[k] / (2.0 * math.pi) for k in ks}
    return LevelRow(
        h=ci.cycle.h, I=c * A[1] / (2.0 * math.pi), T_orbit=T, H_I=2.0 * math.pi / T,
        K=A[1] / B[1], f=f, ktilde=kt, F=F,
    )


def evaluate_level(H: HamiltonianSpec, edge: ReebEdge, h: float, ks: Sequence[int] = (3,)) -> LevelRow:
    """Every profile column at h on the given edge, by direct quadrature."""
    ks = tuple(_check_k(k) for k in ks)
    cycle = level_cycle(H, edge, h)
    return row_from_integrals(cycle_integrals(H, cycle, ks=ks), ks)
