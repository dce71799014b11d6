"""Spectral chart of the averaged system around its equilibrium.

Periods, actions and twist are small differences of large numbers near the
equilibrium, so they are computed in (h, xi) with D and D_H expanded in
Chebyshev series on a window [h0 - w, h0 + w] evaluated by direct quadrature:

    h'  = -m F_kin'(xi) D(h)
    xi' =  m (D(h) - T D_H(h))
    sigma(h) = integral of dh/D from h0,   U(h) = h - h0 - T ln(D/D0)

With `quadratic` set, U is replaced by c sigma^2 in the same coordinates.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np
from numpy.polynomial import Chebyshev
from scipy.optimize import brentq

from ..errors import NoncompactLevelError
from ..hamiltonian.families import HamiltonianSpec
from ..quadrature.level_sets import evaluate_level
from ..thermostats.fields import ThermostatSpec
from .system import AveragedSystem, KineticPart, _row_ks, density

logger = logging.getLogger(__name__)

CHART_NODES = 48
CHART_WINDOW = 0.5


@dataclass(frozen=True)
class LocalChart:
    spec: ThermostatSpec
    H: HamiltonianSpec
    kinetic: KineticPart
    h0: float
    window: Tuple[float, float]
    D: Chebyshev
    DH: Chebyshev
    inv_D: Chebyshev
    sigma: Chebyshev
    D0: float
    quadratic: Optional[float] = None

    # ---- potential ----
    def U(self, h):
        if self.quadratic is not None:
            return self.quadratic * self.sigma(h) ** 2
        return (h - self.h0) - self.spec.T * np.log(self.D(h) / self.D0)

    def dU_dsigma(self, h):
        if self.quadratic is not None:
            return 2.0 * self.quadratic * self.sigma(h)
        return self.D(h) - self.spec.T * self.DH(h)

    def dU_dh(self, h):
        return self.dU_dsigma(h) * self.inv_D(h)

    def d2U_dh2(self, h, step_rel: float = 1e-5) -> float:
        a, b = self.window
        d = step_rel * (b - a)
        return float((self.dU_dh(h + d) - self.dU_dh(h - d)) / (2.0 * d))

    def curvature(self) -> float:
        """U''(sigma) at the equilibrium."""
        if self.quadratic is not None:
            return 2.0 * self.quadratic
        return float(self.D0 * (self.D.deriv()(self.h0) - self.spec.T * self.DH.deriv()(self.h0)))

    def barrier(self) -> float:
        a, b = self.window
        return float(min(self.U(a), self.U(b)))

    def isochronous(self) -> 'LocalChart':
        """Parabola in sigma with the equilibrium curvature."""
        return replace(self, quadratic=0.5 * self.curvature())

    # ---- level sets ----
    def turning_points(self, g: float) -> Tuple[float, float]:
        """h_- < h0 < h_+ with U(h_pm) = g."""
        if not g > 0.0:
            raise ValueError(f"level g must be positive, got {g}")
        a, b = self.window
        if self.U(a) < g or self.U(b) < g:
            raise NoncompactLevelError(
                f"level g={g:.6g} leaves the equilibrium chart (barrier {self.barrier():.6g})"
            )
        f = lambda x: float(self.U(x)) - g
        tol = 4 * np.finfo(float).eps
        return (float(brentq(f, a, self.h0, xtol=1e-15, rtol=tol)),
                float(brentq(f, self.h0, b, xtol=1e-15, rtol=tol)))

    def field(self, t, y):
        """Vectorised (h', xi')."""
        h, xi = y[..., 0], y[..., 1]
        m = self.kinetic.metric(xi)
        return np.stack([-m * self.kinetic.d1(xi) * self.D(h), m * self.dU_dsigma(h)], axis=-1)


def local_chart(system: AveragedSystem, *, nodes: int = CHART_NODES, window: float = CHART_WINDOW) -> LocalChart:
    """Chebyshev chart of `system` on h0 +- window * (distance to the nearest edge end)."""
    edge = system.profile.edge
    h0 = system.equilibrium.h0
    top = edge.h_hi if edge.bounded else system.profile.h_range[1]
    w = window * min(h0 - edge.h_lo, top - h0)
    a, b = h0 - w, h0 + w
    x = np.cos(math.pi * (np.arange(nodes) + 0.5) / nodes)
    hs = 0.5 * (a + b) + 0.5 * (b - a) * x
    ks = _row_ks(system.spec)
    pairs = np.array([density(system.spec, evaluate_level(system.H, edge, float(h), ks)) for h in hs])
    deg = nodes - 1
    D = Chebyshev.fit(hs, pairs[:, 0], deg, domain=[a, b])
    DH = Chebyshev.fit(hs, pairs[:, 1], deg, domain=[a, b])
    inv_D = Chebyshev.fit(hs, 1.0 / pairs[:, 0], deg, domain=[a, b])
    chart = LocalChart(
        spec=system.spec, H=system.H, kinetic=system.kinetic, h0=h0, window=(a, b),
        D=D, DH=DH, inv_D=inv_D, sigma=inv_D.integ(lbnd=h0), D0=float(D(h0)),
    )
    logger.debug("equilibrium chart h in [%.12g, %.12g], %d nodes, barrier %.6g", a, b, nodes, chart.barrier())
    return chart
