"""Return maps of the thermostated flow on the section {q = q*, sign(q') = direction}.

Section points are written in (h, xi) with h = H(q*, p). The flow preserves
exp(-G/T) dq dp dxi, so the return map preserves the flux density

    rho(h, xi) = exp(-G/T) q' / H_p

on the section; for nh, logistic and wk this is exp(-G/T).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..averaged.system import AveragedSystem
from ..errors import ConfigError, NonwindingSequenceError, WindowEscapeError
from ..hamiltonian.families import CIRCLE, HamiltonianSpec
from ..hamiltonian.reeb import OSCILLATION, ReebEdge
from ..integration.dopri import EventSpec, IntegratorConfig, integrate
from ..thermostats.fields import ThermostatSpec, check_compatible, kinetic_part, vector_field

logger = logging.getLogger(__name__)

SECTION_CONFIG = IntegratorConfig(rtol=1e-11, atol=1e-13)
DEFAULT_XI_MAX = 10.0
DEFAULT_RETURN_TIME = 1e3
JACOBIAN_STEP = 1e-6


@dataclass(frozen=True)
class SectionSpec:
    anchor: float
    direction: int = 1
    h_lo: float = -math.inf
    h_hi: float = math.inf
    xi_max: float = DEFAULT_XI_MAX
    domain: str = "line"
    max_return_time: float = DEFAULT_RETURN_TIME

    def event(self, t, y):
        d = y[..., 0] - self.anchor
        return np.sin(d) if self.domain == CIRCLE else d

    def contains(self, h, xi):
        h = np.asarray(h, dtype=float)
        xi = np.asarray(xi, dtype=float)
        return (h > self.h_lo) & (h < self.h_hi) & (np.abs(xi) < self.xi_max)

    def state(self, H: HamiltonianSpec, h, xi) -> np.ndarray:
        """(q*, p, xi) on the section for section coordinates (h, xi)."""
        h = np.asarray(h, dtype=float)
        xi = np.asarray(xi, dtype=float)
        p = H.momentum_at(self.anchor, h, sign=self.direction)
        q = np.full(np.broadcast(h, xi).shape, self.anchor)
        return np.stack(np.broadcast_arrays(q, p, xi), axis=-1)

    def coordinates(self, H: HamiltonianSpec, y) -> Tuple[np.ndarray, np.ndarray]:
        y = np.asarray(y, dtype=float)
        return H.energy(y[..., 0], y[..., 1]), y[..., 2]

    def margin_mask(self, h, xi, fraction: float) -> np.ndarray:
        """Points at least `fraction` of the window span away from its boundary."""
        h = np.asarray(h, dtype=float)
        xi = np.asarray(xi, dtype=float)
        dh = fraction * (self.h_hi - self.h_lo)
        dxi = fraction * 2.0 * self.xi_max
        return (h > self.h_lo + dh) & (h < self.h_hi - dh) & (np.abs(xi) < self.xi_max - dxi)


def section_for_edge(H: HamiltonianSpec, edge: ReebEdge, *, h_hi: Optional[float] = None,
                     xi_max: float = DEFAULT_XI_MAX, margin: float = 1e-3,
                     max_return_time: float = DEFAULT_RETURN_TIME) -> SectionSpec:
    """Section through the edge anchor, crossing in the direction of the edge's motion."""
    top = edge.h_hi if edge.bounded else (h_hi if h_hi is not None else edge.h_lo + 10.0)
    width = top - edge.h_lo
    direction = 1 if edge.orientation == OSCILLATION else edge.branch
    section = SectionSpec(
        anchor=float(edge.anchor), direction=direction,
        h_lo=edge.h_lo + margin * width, h_hi=top - margin * width,
        xi_max=xi_max, domain=H.domain, max_return_time=max_return_time,
    )
    check_transverse(H, section)
    return section


def check_transverse(H: HamiltonianSpec, section: SectionSpec) -> None:
    """H_p must keep the crossing sign on the whole window."""
    lo = section.h_lo if math.isfinite(section.h_lo) else float(H.V(section.anchor))
    try:
        p = H.momentum_at(section.anchor, lo, sign=section.direction)
    except ValueError as exc:
        raise ConfigError([f"section q*={section.anchor} is not reached at h={lo}: {exc}"])
    _, H_p = H.gradient(section.anchor, p)
    if not float(H_p) * section.direction > 0.0:
        raise ConfigError([f"section q*={section.anchor} is not transverse at h={lo} (H_p={float(H_p):.3e})"])


def section_density(H: HamiltonianSpec, spec: ThermostatSpec, section: SectionSpec, h, xi):
    """exp(-G/T) q'/H_p at section points (h, xi)."""
    y = section.state(H, h, xi)
    q, p = y[..., 0], y[..., 1]
    _, H_p = H.gradient(q, p)
    qdot = vector_field(H, spec, y)[..., 0]
    G = np.asarray(h, dtype=float) + kinetic_part(spec, xi)
    return np.exp(-spec.beta * G) * qdot / H_p


# -----------------------------
# Return map
# -----------------------------

@dataclass(frozen=True)
class ReturnSequence:
    h: np.ndarray                   # (n + 1,), starting point first
    xi: np.ndarray
    times: np.ndarray               # (n,), time between successive returns
    states: np.ndarray              # (n + 1, 3)

    def points(self) -> np.ndarray:
        return np.stack([self.h, self.xi], axis=-1)


def _flow(H: HamiltonianSpec, spec: ThermostatSpec):
    return lambda t, y: vector_field(H, spec, y)


def return_map(H: HamiltonianSpec, spec: ThermostatSpec, section: SectionSpec, x0: Sequence[float], n: int,
               *, config: IntegratorConfig = SECTION_CONFIG) -> ReturnSequence:
    """n successive section crossings starting from section point x0 = (h, xi)."""
    check_compatible(H, spec)
    h0, xi0 = float(x0[0]), float(x0[1])
    if not bool(section.contains(h0, xi0)):
        raise WindowEscapeError(0, (h0, xi0))
    y0 = section.state(H, h0, xi0)
    hits: List[Tuple[float, np.ndarray]] = []

    def on_cross(rows, t_star, y_star):
        hits.append((float(t_star[0]), y_star[0].copy()))
        h, xi = section.coordinates(H, y_star[0])
        inside = bool(section.contains(h, xi))
        return np.array([not inside or len(hits) >= n])

    event = EventSpec(section.event, direction=section.direction, count=n, callback=on_cross)
    traj = integrate(_flow(H, spec), y0[None, :], (0.0, n * section.max_return_time), config, (event,))

    states = [y0] + [y for _, y in hits]
    for j, y in enumerate(states[1:], start=1):
        h, xi = section.coordinates(H, y)
        if not bool(section.contains(h, xi)):
            raise WindowEscapeError(j, (float(h), float(xi)))
    if len(hits) < n:
        index = len(hits) + 1
        state = tuple(float(v) for v in traj.y_final[0])
        raise WindowEscapeError(index, state)

    states = np.array(states)
    h, xi = section.coordinates(H, states)
    times = np.diff(np.concatenate([[0.0], [t for t, _ in hits]]))
    logger.debug("return map: %d returns, mean return time %.6g", n, float(np.mean(times)))
    return ReturnSequence(h=h, xi=xi, times=times, states=states)


def first_return(H: HamiltonianSpec, spec: ThermostatSpec, section: SectionSpec, x0: Sequence[float],
                 *, config: IntegratorConfig = SECTION_CONFIG) -> Tuple[float, float]:
    seq = return_map(H, spec, section, x0, 1, config=config)
    return float(seq.h[1]), float(seq.xi[1])


def map_jacobian(H: HamiltonianSpec, spec: ThermostatSpec, section: SectionSpec, x0: Sequence[float],
                 *, step: float = JACOBIAN_STEP, config: IntegratorConfig = SECTION_CONFIG) -> np.ndarray:
    """Central-difference Jacobian of the first-return map in (h, xi)."""
    x0 = np.asarray(x0, dtype=float)
    jac = np.empty((2, 2))
    for i in range(2):
        e = np.zeros(2)
        e[i] = step * max(1.0, abs(x0[i]))
        plus = np.array(first_return(H, spec, section, x0 + e, config=config))
        minus = np.array(first_return(H, spec, section, x0 - e, config=config))
        jac[:, i] = (plus - minus) / (2.0 * e[i])
    return jac


def area_defect(H: HamiltonianSpec, spec: ThermostatSpec, section: SectionSpec, x0: Sequence[float],
                *, step: float = JACOBIAN_STEP, config: IntegratorConfig = SECTION_CONFIG) -> float:
    """det(D psi) rho(psi(x0))/rho(x0) - 1 for the first-return map psi."""
    x1 = first_return(H, spec, section, x0, config=config)
    det = float(np.linalg.det(map_jacobian(H, spec, section, x0, step=step, config=config)))
    ratio = float(section_density(H, spec, section, *x1)) / float(section_density(H, spec, section, *x0))
    return det * ratio - 1.0


# -----------------------------
# Averaging agreement
# -----------------------------

@dataclass(frozen=True)
class AgreementReport:
    eps: np.ndarray
    defect: np.ndarray
    slope: Optional[float]
    slope_range: Tuple[float, float] = (1.8, 2.3)

    @property
    def ok(self) -> bool:
        return self.slope is not None and self.slope_range[0] <= self.slope <= self.slope_range[1]

    def as_records(self) -> List[dict]:
        return [{"eps": float(e), "defect": float(d)} for e, d in zip(self.eps, self.defect)]

    def summary(self) -> dict:
        return {"slope": self.slope, "ok": self.ok, "n_eps": len(self.eps)}


def averaging_agreement(system: AveragedSystem, section: SectionSpec, x0: Sequence[float],
                        eps_list: Sequence[float], *, config: IntegratorConfig = SECTION_CONFIG) -> AgreementReport:
    """|one full return - time-2pi map of eps*Rbar| in (I, xi) for each eps, with the log-log slope."""
    H, base = system.H, system.spec
    profile = system.profile
    h0, xi0 = float(x0[0]), float(x0[1])
    I0 = profile.value("I", h0)
    defects = []
    for eps in eps_list:
        if eps == 0.0:
            defects.append(0.0)
            continue
        h1, xi1 = first_return(H, base.with_epsilon(eps), section, (h0, xi0), config=config)
        I_avg, xi_avg = system.averaged_map(I0, xi0, eps)
        defects.append(math.hypot(profile.value("I", h1) - I_avg, xi1 - xi_avg))
        logger.info("agreement %s eps=%g: defect %.6e", base.variant, eps, defects[-1])
    eps = np.asarray(eps_list, dtype=float)
    defect = np.asarray(defects)
    fit = (eps > 0.0) & (defect > 0.0)
    slope = None
    if np.count_nonzero(fit) >= 2:
        slope = float(np.polyfit(np.log(eps[fit]), np.log(defect[fit]), 1)[0])
    return AgreementReport(eps=eps, defect=defect, slope=slope)


# -----------------------------
# Rotation numbers
# -----------------------------

def birkhoff_weights(n: int) -> np.ndarray:
    """exp(-1/(x(1-x))) at x = (k + 1/2)/n, normalised to sum 1."""
    x = (np.arange(n) + 0.5) / n
    w = np.exp(-1.0 / (x * (1.0 - x)))
    return w / w.sum()


def angle_increments(points: np.ndarray, centre: Sequence[float], scale: Sequence[float] = (1.0, 1.0)) -> np.ndarray:
    pts = (np.asarray(points, dtype=float) - np.asarray(centre, dtype=float)) / np.asarray(scale, dtype=float)
    if np.any(np.hypot(pts[:, 0], pts[:, 1]) == 0.0):
        raise NonwindingSequenceError("section sequence passes through its centre")
    phi = np.arctan2(pts[:, 1], pts[:, 0])
    d = np.diff(phi)
    return (d + math.pi) % (2.0 * math.pi) - math.pi


def rotation_number(points, centre: Sequence[float], scale: Sequence[float] = (1.0, 1.0)) -> Tuple[float, float]:
    """Weighted Birkhoff average of angle increments around `centre`, and |first half - second half|."""
    points = np.asarray(points, dtype=float)
    if len(points) < 5:
        raise NonwindingSequenceError(f"need at least 5 section points, got {len(points)}")
    d = angle_increments(points, centre, scale)
    if abs(float(np.sum(d))) < 2.0 * math.pi:
        raise NonwindingSequenceError(f"sequence of {len(points)} points does not complete a turn around {tuple(centre)}")
    rho = float(np.dot(birkhoff_weights(len(d)), d))
    half = len(d) // 2
    first = float(np.dot(birkhoff_weights(half), d[:half]))
    second = float(np.dot(birkhoff_weights(len(d) - half), d[half:]))
    return rho, abs(first - second)
