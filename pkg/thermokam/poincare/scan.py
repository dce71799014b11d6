"""Invariant-torus scans on a Poincare section.

A chunk of grid points and their companions (offset by COMPANION_OFFSET in
xi) is integrated as one batched system. Rotation sums, boundedness and the
companion separation are accumulated at each crossing, so orbits are never
stored.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ..errors import IntegrationError, NoDataError
from ..hamiltonian.families import HamiltonianSpec
from ..integration.dopri import EventSpec, IntegratorConfig, integrate
from ..thermostats.fields import ThermostatSpec, check_compatible, vector_field
from .sections import SECTION_CONFIG, SectionSpec, birkhoff_weights, section_density

logger = logging.getLogger(__name__)

TORUS = "torus-candidate"
ESCAPED = "escaped"
IRREGULAR = "irregular"

COMPANION_OFFSET = 1e-8
DEFAULT_CHUNK = 64


@dataclass(frozen=True)
class ScanThresholds:
    residual: float = 1e-4
    separation: float = 1e-3
    boundary_fraction: float = 0.02


@dataclass(frozen=True)
class ScanGrid:
    h: np.ndarray
    xi: np.ndarray

    @classmethod
    def around(cls, h0: float, h_half: float, xi_half: float, n_h: int, n_xi: Optional[int] = None) -> 'ScanGrid':
        """Uniform n_h x n_xi grid on [h0 - h_half, h0 + h_half] x [-xi_half, xi_half]."""
        n_xi = n_xi or n_h
        hs = np.linspace(h0 - h_half, h0 + h_half, n_h)
        xis = np.linspace(-xi_half, xi_half, n_xi)
        H, X = np.meshgrid(hs, xis, indexing="ij")
        return cls(h=H.ravel(), xi=X.ravel())

    def __len__(self) -> int:
        return len(self.h)


@dataclass(frozen=True)
class ScanReport:
    points: pd.DataFrame            # h0, xi0, class, rho, residual, iterations, separation, weight, counted
    fraction: float
    weighted_fraction: float
    n_iters: int
    thresholds: ScanThresholds
    params: Dict[str, float] = field(default_factory=dict)

    def summary(self) -> Dict[str, float]:
        counted = self.points["counted"].to_numpy()
        classes = self.points["class"].to_numpy()[counted]
        out = {
            "fraction": self.fraction,
            "weighted_fraction": self.weighted_fraction,
            "n_points": int(len(self.points)),
            "n_counted": int(counted.sum()),
            "n_torus": int(np.sum(classes == TORUS)),
            "n_escaped": int(np.sum(classes == ESCAPED)),
            "n_irregular": int(np.sum(classes == IRREGULAR)),
            "n_iters": self.n_iters,
            "residual_threshold": self.thresholds.residual,
            "separation_threshold": self.thresholds.separation,
            "boundary_fraction": self.thresholds.boundary_fraction,
        }
        out.update(self.params)
        return out


class _Accumulator:
    """Online per-row statistics updated at every section crossing."""

    def __init__(self, H: HamiltonianSpec, section: SectionSpec, n_points: int, n_iters: int,
                 centre: Tuple[float, float], scale: Tuple[float, float]):
        self.H = H
        self.section = section
        self.n_points = n_points
        self.n_iters = n_iters
        self.centre = centre
        self.scale = scale
        rows = 2 * n_points
        self.count = np.zeros(rows, dtype=int)
        self.phi = np.zeros(rows)
        self.last = np.zeros((rows, 2))
        self.left = np.zeros(rows, dtype=bool)
        self.w_all = birkhoff_weights(n_iters)
        half = n_iters // 2
        self.half = half
        self.w_first = birkhoff_weights(half) if half else np.zeros(0)
        self.w_second = birkhoff_weights(n_iters - half) if half else np.zeros(0)
        self.rho = np.zeros(rows)
        self.first = np.zeros(rows)
        self.second = np.zeros(rows)
        self.separation = np.zeros(n_points)

    def start(self, h: np.ndarray, xi: np.ndarray) -> None:
        self.last[:, 0], self.last[:, 1] = h, xi
        self.phi = self._angle(h, xi)

    def _angle(self, h, xi):
        return np.arctan2((xi - self.centre[1]) / self.scale[1], (h - self.centre[0]) / self.scale[0])

    def __call__(self, rows, t_star, y_star):
        h, xi = self.section.coordinates(self.H, y_star)
        freeze = np.zeros(len(rows), dtype=bool)
        inside = self.section.contains(h, xi)
        for j, r in enumerate(rows):
            k = self.count[r]
            if k >= self.n_iters:
                freeze[j] = True
                continue
            if not inside[j]:
                self.left[r] = True
                freeze[j] = True
                continue
            phi = float(self._angle(h[j], xi[j]))
            d = (phi - self.phi[r] + math.pi) % (2.0 * math.pi) - math.pi
            self.phi[r] = phi
            self.rho[r] += self.w_all[k] * d
            if k < self.half:
                self.first[r] += self.w_first[k] * d
            elif self.half:
                self.second[r] += self.w_second[k - self.half] * d
            self.last[r] = (h[j], xi[j])
            self.count[r] = k + 1
            if self.count[r] >= self.n_iters:
                freeze[j] = True
            self._compare(r)
        return freeze

    def _compare(self, r: int) -> None:
        i = r % self.n_points
        a, b = i, i + self.n_points
        if self.count[a] == self.count[b]:
            d = (self.last[a] - self.last[b]) / np.asarray(self.scale)
            self.separation[i] = max(self.separation[i], float(np.hypot(d[0], d[1])))


def _scan_chunk(args) -> List[dict]:
    H, spec, section, h, xi, n_iters, thresholds, centre, scale, config = args
    n = len(h)
    hh = np.concatenate([h, h])
    xx = np.concatenate([xi, xi + COMPANION_OFFSET])
    y0 = section.state(H, hh, xx)
    acc = _Accumulator(H, section, n, n_iters, centre, scale)
    acc.start(hh, xx)
    event = EventSpec(section.event, direction=section.direction, count=n_iters, callback=acc)
    field_ = lambda t, y: vector_field(H, spec, y)
    escaped = np.zeros(2 * n, dtype=bool)
    try:
        traj = integrate(field_, y0, (0.0, n_iters * section.max_return_time), config, (event,))
        escaped = traj.escaped
    except IntegrationError as exc:
        logger.warning("scan chunk stopped early: %s", exc)
        escaped = acc.count < n_iters

    out = []
    for i in range(n):
        lost = acc.left[i] or acc.left[i + n] or escaped[i] or escaped[i + n]
        done = acc.count[i]
        residual = abs(acc.first[i] - acc.second[i])
        if lost or done < n_iters:
            cls = ESCAPED
        elif residual < thresholds.residual and acc.separation[i] < thresholds.separation:
            cls = TORUS
        else:
            cls = IRREGULAR
        out.append({
            "h0": float(h[i]), "xi0": float(xi[i]), "class": cls,
            "rho": float(acc.rho[i]) if done >= n_iters else float("nan"),
            "residual": float(residual) if done >= n_iters else float("nan"),
            "iterations": int(done), "separation": float(acc.separation[i]),
        })
    return out


def torus_scan(H: HamiltonianSpec, spec: ThermostatSpec, section: SectionSpec, grid: ScanGrid, n_iters: int, *,
               centre: Tuple[float, float], scale: Tuple[float, float] = (1.0, 1.0),
               thresholds: ScanThresholds = ScanThresholds(), workers: int = 1, chunk: int = DEFAULT_CHUNK,
               config: IntegratorConfig = SECTION_CONFIG) -> ScanReport:
    """Classify every grid point as torus-candidate, escaped or irregular after n_iters returns."""
    check_compatible(H, spec)
    if len(grid) == 0:
        raise NoDataError("torus scan grid is empty")
    if n_iters < 4:
        raise ValueError(f"torus scan needs at least 4 returns, got {n_iters}")
    inside = section.contains(grid.h, grid.xi)
    if not np.all(inside):
        raise NoDataError(f"{int(np.sum(~inside))} grid points lie outside the section window")

    jobs = []
    for a in range(0, len(grid), chunk):
        sl = slice(a, a + chunk)
        jobs.append((H, spec, section, grid.h[sl], grid.xi[sl], n_iters, thresholds, centre, scale, config))
    logger.info("torus scan %s eps=%g: %d points in %d chunks, %d returns",
                spec.variant, spec.epsilon, len(grid), len(jobs), n_iters)
    rows: List[dict] = []
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for j, part in enumerate(pool.map(_scan_chunk, jobs)):
                rows.extend(part)
                logger.info("torus scan chunk %d/%d done", j + 1, len(jobs))
    else:
        for j, job in enumerate(jobs):
            rows.extend(_scan_chunk(job))
            logger.info("torus scan chunk %d/%d done", j + 1, len(jobs))

    points = pd.DataFrame(rows, columns=["h0", "xi0", "class", "rho", "residual", "iterations", "separation"])
    weight = np.asarray(section_density(H, spec, section, grid.h, grid.xi), dtype=float)
    counted = section.margin_mask(grid.h, grid.xi, thresholds.boundary_fraction)
    points["weight"] = weight
    points["counted"] = counted

    torus = (points["class"] == TORUS).to_numpy() & counted
    n_counted = int(counted.sum())
    fraction = float(torus.sum()) / n_counted if n_counted else 0.0
    w_total = float(weight[counted].sum())
    weighted = float(weight[torus].sum()) / w_total if w_total > 0.0 else 0.0
    logger.info("torus scan %s eps=%g: fraction %.4f (weighted %.4f) of %d counted points",
                spec.variant, spec.epsilon, fraction, weighted, n_counted)
    return ScanReport(
        points=points, fraction=fraction, weighted_fraction=weighted, n_iters=n_iters, thresholds=thresholds,
        params={"eps": spec.epsilon, "T": spec.T, "anchor": section.anchor},
    )


def fraction_stability(coarse: ScanReport, fine: ScanReport) -> float:
    """|change in torus fraction| between a scan and its grid refinement."""
    return abs(coarse.fraction - fine.fraction)
