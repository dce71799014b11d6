"""Critical structure of V and the Reeb graph of H.

Level-set components are tracked by turning-point bookkeeping: for a level h
the sublevel set {V < h} splits at every local maximum of V with value >= h,
and each piece that contains a minimum below h is one component. Components
that keep the same set of minima across a critical value belong to the same
edge.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.optimize import brentq

from ..errors import UnsupportedTopologyError
from .families import CIRCLE, HamiltonianSpec

logger = logging.getLogger(__name__)

MIN = "local-min"
SADDLE = "saddle"
INFLECTION = "inflection"

OSCILLATION = "oscillation"
ROTATION = "rotation"

DEFAULT_SCAN_POINTS = 4096
_DERIVATIVE_TOL = 1e-10
_MAX_ORDER = 12


@dataclass(frozen=True)
class CriticalPoint:
    q: float
    h: float
    kind: str
    order: int = 2          # order of the first non-vanishing derivative of V
    degenerate: bool = False

    @property
    def degeneracy(self) -> int:
        """n with V - h ~ c (q - q_c)^(2n); 1 for a Morse point."""
        return max(1, self.order // 2)


@dataclass(frozen=True)
class ReebVertex:
    index: int
    h: float
    kind: str
    q: float
    degeneracy: int = 1


@dataclass(frozen=True)
class ReebEdge:
    index: int
    h_lo: float
    h_hi: float
    lower: Optional[int]            # vertex index
    upper: Optional[int]            # vertex index, None for unbounded edges
    orientation: str                # oscillation | rotation
    anchor: float                   # q of the lowest minimum, or of the top saddle for rotations
    q_left: float                   # bounding maxima of V (may be +-inf)
    q_right: float
    branch: int = 1
    minima: Tuple[int, ...] = ()
    interior: Tuple[float, ...] = ()  # saddles of V crossed by every level cycle of the edge

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.h_hi)

    def contains(self, h: float) -> bool:
        return self.h_lo < h < self.h_hi


@dataclass(frozen=True)
class ReebGraph:
    domain: str
    vertices: Tuple[ReebVertex, ...]
    edges: Tuple[ReebEdge, ...]

    def edges_at(self, h: float) -> List[ReebEdge]:
        return [e for e in self.edges if e.contains(h)]

    def incident(self, vertex: int) -> List[Tuple[ReebEdge, str]]:
        """Edges meeting a vertex, tagged with the edge end ('lo' or 'hi')."""
        out = []
        for e in self.edges:
            if e.lower == vertex:
                out.append((e, "lo"))
            if e.upper == vertex:
                out.append((e, "hi"))
        return out

    @property
    def unbounded_edges(self) -> List[ReebEdge]:
        return [e for e in self.edges if not e.bounded]

    def critical_values(self) -> List[float]:
        return sorted({v.h for v in self.vertices})


# -----------------------------
# Critical points
# -----------------------------

def _classify(H: HamiltonianSpec, q: float) -> Tuple[str, int]:
    scale = 1.0
    for order in range(2, _MAX_ORDER + 1):
        d = float(H.dnV(q, order))
        scale = max(scale, abs(d))
        if abs(d) > _DERIVATIVE_TOL * scale:
            if order % 2:
                return INFLECTION, order
            return (MIN if d > 0 else SADDLE), order
    return INFLECTION, _MAX_ORDER


def critical_points(H: HamiltonianSpec, *, n_scan: int = DEFAULT_SCAN_POINTS) -> List[CriticalPoint]:
    """All critical points of V in the scan window, refined to |V'| < 1e-12."""
    lo, hi = H.scan_window()
    if H.domain == CIRCLE:
        # cell-centred and wrapped once, so a root at the seam is bracketed
        grid = lo + (hi - lo) * (np.arange(n_scan + 1) + 0.5) / n_scan
    else:
        grid = np.linspace(lo, hi, n_scan)
    dv = np.asarray(H.dV(grid), dtype=float)
    roots: List[float] = []
    for i in range(len(grid) - 1):
        a, b = grid[i], grid[i + 1]
        fa, fb = dv[i], dv[i + 1]
        if fa == 0.0:
            roots.append(float(a))
        elif fa * fb < 0.0:
            roots.append(float(brentq(H.dV, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)))
    if dv[-1] == 0.0 and H.domain != CIRCLE:
        roots.append(float(grid[-1]))

    # tangential zeros of V' (no sign change) are inflection points
    absdv = np.abs(dv)
    scale = max(1.0, float(np.max(absdv)))
    for i in range(1, len(grid) - 1):
        if absdv[i] < absdv[i - 1] and absdv[i] < absdv[i + 1] and dv[i - 1] * dv[i + 1] > 0:
            if absdv[i] < 1e-6 * scale:
                roots.append(float(grid[i]))

    if H.domain == CIRCLE:
        roots = [float(H.wrap(r)) for r in roots]
    roots = sorted(set(round(r, 13) for r in roots))

    points = []
    for q in roots:
        kind, order = _classify(H, q)
        if abs(float(H.dV(q))) >= 1e-12 * max(1.0, abs(float(H.d2V(q)))) and kind != INFLECTION:
            logger.debug("critical point at q=%.16g has |V'|=%.3e", q, abs(float(H.dV(q))))
        points.append(CriticalPoint(q=q, h=float(H.V(q)), kind=kind, order=order, degenerate=order > 2))
    for cp in points:
        if cp.degenerate:
            logger.info("degenerate %s at q=%.6g (first non-zero derivative of order %d)", cp.kind, cp.q, cp.order)
    return points


# -----------------------------
# Reeb graph
# -----------------------------

def _components(minima: List[CriticalPoint], saddles: List[CriticalPoint], h: float, circle: bool):
    """Groups of minima below h separated by maxima of V with value >= h."""
    items = sorted([(cp.q, "m", i) for i, cp in enumerate(minima)] + [(cp.q, "s", i) for i, cp in enumerate(saddles)])
    blocking = [k for k, it in enumerate(items) if it[1] == "s" and saddles[it[2]].h >= h]
    groups: List[Tuple[Tuple[int, ...], Optional[int], Optional[int]]] = []
    if circle:
        if not blocking:
            return None
        n = len(items)
        for bi, start in enumerate(blocking):
            stop = blocking[(bi + 1) % len(blocking)]
            span = []
            k = (start + 1) % n
            while k != stop:
                span.append(k)
                k = (k + 1) % n
            mins = tuple(items[k][2] for k in span if items[k][1] == "m" and minima[items[k][2]].h < h)
            if mins:
                groups.append((mins, items[start][2], items[stop][2]))
        return groups
    cuts = [-1] + blocking + [len(items)]
    for a, b in zip(cuts[:-1], cuts[1:]):
        mins = tuple(items[k][2] for k in range(a + 1, b) if items[k][1] == "m" and minima[items[k][2]].h < h)
        if mins:
            left = items[a][2] if a >= 0 else None
            right = items[b][2] if b < len(items) else None
            groups.append((mins, left, right))
    return groups


def _between(saddles: List[CriticalPoint], a: float, b: float, circle: bool) -> Tuple[float, ...]:
    out = []
    for s in saddles:
        q = s.q
        if circle:
            q = a + (q - a) % (2.0 * math.pi)
        if a < q < b:
            out.append(q)
    return tuple(sorted(out))


def reeb_graph(H: HamiltonianSpec, *, n_scan: int = DEFAULT_SCAN_POINTS) -> ReebGraph:
    """Reeb graph: rooted tree on the line, two rotation edges above the top saddle on the circle."""
    points = critical_points(H, n_scan=n_scan)
    bad = [cp for cp in points if cp.kind == INFLECTION]
    if bad:
        raise UnsupportedTopologyError(
            f"level-set tracking needs Morse or monomially degenerate extrema; "
            f"inflection critical point at q={bad[0].q:.6g}"
        )
    minima = [cp for cp in points if cp.kind == MIN]
    saddles = [cp for cp in points if cp.kind == SADDLE]
    if not minima:
        raise UnsupportedTopologyError("potential has no local minimum in the scan window")
    circle = H.domain == CIRCLE

    vertices: List[ReebVertex] = []
    vid_min: Dict[int, int] = {}
    vid_saddle: Dict[int, int] = {}
    for i, cp in sorted(enumerate(minima), key=lambda t: (t[1].h, t[1].q)):
        vid_min[i] = len(vertices)
        vertices.append(ReebVertex(len(vertices), cp.h, MIN, cp.q, cp.degeneracy))
    for i, cp in sorted(enumerate(saddles), key=lambda t: (t[1].h, t[1].q)):
        vid_saddle[i] = len(vertices)
        vertices.append(ReebVertex(len(vertices), cp.h, SADDLE, cp.q, cp.degeneracy))

    levels = sorted({cp.h for cp in points})
    bands = [(levels[i], levels[i + 1]) for i in range(len(levels) - 1)] + [(levels[-1], math.inf)]

    open_edges: Dict[Tuple[int, ...], dict] = {}
    closed: List[dict] = []
    rotations: List[dict] = []

    def saddle_vertex_at(level: float, near_minima: Tuple[int, ...]) -> Optional[int]:
        qs = [minima[i].q for i in near_minima]
        best = None
        for j, s in enumerate(saddles):
            if abs(s.h - level) <= 1e-12 * max(1.0, abs(level)):
                if circle or (min(qs) <= s.q <= max(qs)) or len(near_minima) == 1:
                    d = min(abs(s.q - q) for q in qs)
                    if best is None or d < best[0]:
                        best = (d, vid_saddle[j])
        return None if best is None else best[1]

    for lo, hi in bands:
        h_mid = lo + 1.0 if math.isinf(hi) else 0.5 * (lo + hi)
        groups = _components(minima, saddles, h_mid, circle)
        if groups is None:
            for key, rec in open_edges.items():
                rec["h_hi"] = lo
                rec["upper"] = saddle_vertex_at(lo, key)
                closed.append(rec)
            open_edges = {}
            top = max(saddles, key=lambda s: s.h)
            top_vid = vid_saddle[saddles.index(top)]
            crossed = _between(saddles, top.q, top.q + 2.0 * math.pi, circle)
            for branch in (1, -1):
                rotations.append(dict(
                    h_lo=lo, h_hi=math.inf, lower=top_vid, upper=None, orientation=ROTATION,
                    anchor=top.q, q_left=top.q, q_right=top.q + 2.0 * math.pi, branch=branch, minima=(),
                    interior=crossed,
                ))
            break
        current: Dict[Tuple[int, ...], dict] = {}
        for mins, left, right in groups:
            key = tuple(sorted(mins))
            if key in open_edges:
                current[key] = open_edges.pop(key)
                continue
            if len(key) == 1 and abs(minima[key[0]].h - lo) <= 1e-12 * max(1.0, abs(lo)):
                lower = vid_min[key[0]]
            else:
                lower = saddle_vertex_at(lo, key)
            anchor_min = min(key, key=lambda i: (minima[i].h, minima[i].q))
            q_left = saddles[left].q if left is not None else -math.inf
            q_right = saddles[right].q if right is not None else math.inf
            anchor = minima[anchor_min].q
            if circle:
                while q_left >= anchor:
                    q_left -= 2.0 * math.pi
                while q_right <= anchor:
                    q_right += 2.0 * math.pi
            current[key] = dict(
                h_lo=lo, h_hi=math.inf, lower=lower, upper=None, orientation=OSCILLATION,
                anchor=anchor, q_left=q_left, q_right=q_right, branch=1, minima=key,
                interior=_between(saddles, q_left, q_right, circle),
            )
        for key, rec in open_edges.items():
            rec["h_hi"] = lo
            rec["upper"] = saddle_vertex_at(lo, key)
            closed.append(rec)
        open_edges = current
    closed.extend(open_edges.values())
    closed.extend(rotations)

    closed.sort(key=lambda r: (r["h_lo"], r["anchor"], -r["branch"]))
    edges = tuple(
        ReebEdge(
            index=i, h_lo=r["h_lo"], h_hi=r["h_hi"], lower=r["lower"], upper=r["upper"],
            orientation=r["orientation"], anchor=r["anchor"], q_left=r["q_left"], q_right=r["q_right"],
            branch=r["branch"],
            minima=tuple(vid_min[m] for m in r["minima"]),
            interior=r["interior"],
        )
        for i, r in enumerate(closed)
    )
    graph = ReebGraph(domain=H.domain, vertices=tuple(vertices), edges=edges)
    logger.info("reeb graph: %d vertices, %d edges (%s domain)", len(vertices), len(edges), H.domain)
    return graph
