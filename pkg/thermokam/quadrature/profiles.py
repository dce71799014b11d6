"""Per-edge action profiles: tabulated columns, interpolants and vertex limits."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.interpolate import BarycentricInterpolator, CubicHermiteSpline, PchipInterpolator
from scipy.optimize import brentq

from ..errors import NoDataError, ProfileConsistencyError, ProfileRangeError
from ..hamiltonian.families import HamiltonianSpec
from ..hamiltonian.reeb import MIN, ReebEdge, ReebGraph, ReebVertex, reeb_graph
from .level_sets import LevelRow, evaluate_level

logger = logging.getLogger(__name__)

DEFAULT_KS = (3, 5, 7, 9)
MIDPOINT_RTOL = 1e-5
IDENTITY_RTOL = 1e-8
_RANGE_SLACK = 1e-12


@dataclass(frozen=True)
class GridSpec:
    n_uniform: int = 192
    margin: float = 1e-6            # relative to the edge width
    ratio: float = 2.0 ** 0.25      # geometric refinement toward vertices
    h_span: float = 10.0            # height covered above h_lo on unbounded edges
    h_max: Optional[float] = None
    limit_delta: float = 1e-8       # relative offset of the extrapolation ladder
    check_points: int = 16

    def grid(self, edge: ReebEdge) -> np.ndarray:
        lo = edge.h_lo
        if edge.bounded:
            hi = edge.h_hi
        else:
            hi = self.h_max if self.h_max is not None else lo + self.h_span
        width = hi - lo
        if not width > 0.0:
            raise NoDataError(f"edge {edge.index} has an empty energy window ({lo}, {hi})")
        delta = self.margin * width
        points = [np.linspace(lo + delta, hi - delta, self.n_uniform)]
        stop = width / max(self.n_uniform, 1)
        steps = []
        d = delta
        while d < stop:
            steps.append(d)
            d *= self.ratio
        steps = np.array(steps)
        points.append(lo + steps)
        if edge.bounded:
            points.append(hi - steps)
        grid = np.unique(np.concatenate(points))
        return grid[(grid > lo) & (grid < hi)]


@dataclass(frozen=True)
class VertexLimits:
    edge: int
    end: str                    # lo | hi
    h: float
    kind: str
    values: Dict[str, float]


@dataclass(frozen=True)
class ActionProfile:
    edge: ReebEdge
    ks: Tuple[int, ...]
    table: pd.DataFrame
    interpolants: Dict[str, object]
    limits: Dict[str, VertexLimits] = field(default_factory=dict)
    hermite_columns: Tuple[str, ...] = ()

    @property
    def h(self) -> np.ndarray:
        return self.table["h"].to_numpy()

    @property
    def h_range(self) -> Tuple[float, float]:
        h = self.h
        return float(h[0]), float(h[-1])

    def column(self, name: str) -> np.ndarray:
        return self.table[name].to_numpy()

    def _check(self, h):
        lo, hi = self.h_range
        slack = _RANGE_SLACK * max(1.0, abs(hi))
        arr = np.asarray(h, dtype=float)
        if np.any(arr < lo - slack) or np.any(arr > hi + slack):
            raise ProfileRangeError(f"h={h} outside the tabulated range [{lo}, {hi}] of edge {self.edge.index}")

    def value(self, name: str, h, nu: int = 0):
        """Interpolated column (or its nu-th h-derivative)."""
        self._check(h)
        out = self.interpolants[name](h, nu)
        return float(out) if np.ndim(h) == 0 else out

    def I_range(self) -> Tuple[float, float]:
        I = self.column("I")
        return float(I[0]), float(I[-1])

    def h_of_I(self, I: float) -> float:
        """Inverse of the monotone I(h) interpolant."""
        Is = self.column("I")
        if not (Is[0] <= I <= Is[-1]):
            raise ProfileRangeError(f"I={I} outside the tabulated range [{Is[0]}, {Is[-1]}] of edge {self.edge.index}")
        j = int(np.clip(np.searchsorted(Is, I), 1, len(Is) - 1))
        h = self.h
        f = lambda x: float(self.interpolants["I"](x)) - I
        a, b = h[j - 1], h[j]
        if f(a) >= 0.0:
            return float(a)
        if f(b) <= 0.0:
            return float(b)
        return float(brentq(f, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps))


# -----------------------------
# Interpolation
# -----------------------------

def _fritsch_carlson_ok(x: np.ndarray, y: np.ndarray, dydx: np.ndarray) -> bool:
    secant = np.diff(y) / np.diff(x)
    if np.any(secant <= 0.0):
        return False
    alpha = dydx[:-1] / secant
    beta = dydx[1:] / secant
    return bool(np.all(alpha >= 0.0) and np.all(beta >= 0.0) and np.all(alpha * alpha + beta * beta <= 9.0))


def _interpolant(x: np.ndarray, y: np.ndarray, dydx: Optional[np.ndarray] = None):
    if dydx is not None and _fritsch_carlson_ok(x, y, dydx):
        return CubicHermiteSpline(x, y, dydx), True
    return PchipInterpolator(x, y), False


# -----------------------------
# Vertex limits
# -----------------------------

def _ladder_limit(H: HamiltonianSpec, edge: ReebEdge, h_v: float, side: int, delta: float,
                  ks: Sequence[int]) -> Dict[str, float]:
    # h_j = h_v + side * 2^-j delta, j = 0..3, extrapolated to delta -> 0
    offsets = np.array([delta * 2.0 ** -j for j in range(4)])
    rows = [evaluate_level(H, edge, h_v + side * d, ks) for d in offsets]
    columns = {"I": [r.I for r in rows]}
    for k in ks:
        columns[f"F_{k}"] = [r.F[k] for r in rows]
        columns[f"Ktilde_{k}"] = [r.ktilde[k] for r in rows]
    return {name: float(BarycentricInterpolator(offsets, vals)(0.0)) for name, vals in columns.items()}


def vertex_limits(H: HamiltonianSpec, edge: ReebEdge, vertex: ReebVertex, end: str,
                  ks: Sequence[int] = DEFAULT_KS, *, delta_rel: float = 1e-8,
                  width: Optional[float] = None) -> VertexLimits:
    """Limits of every profile column at one end of an edge."""
    ks = tuple(ks)
    if width is None:
        width = edge.h_hi - edge.h_lo if edge.bounded else 10.0
    values: Dict[str, float] = {}
    if vertex.kind == MIN:
        values["I"] = 0.0
        values["K"] = 0.0
        if vertex.degeneracy == 1:
            values["H_I"] = math.sqrt(float(H.d2V(vertex.q)) * H.kinetic.curvature_at_zero)
        else:
            values["H_I"] = 0.0
        for k in ks:
            values[f"f_{k}"] = 1.0 if k == 1 else 0.0
            values[f"Ktilde_{k}"] = 0.0
            values[f"F_{k}"] = 0.0
    else:
        side = 1 if end == "lo" else -1
        values.update(_ladder_limit(H, edge, vertex.h, side, delta_rel * width, ks))
        values["H_I"] = 0.0
        values["K"] = 0.0
        for k in ks:
            values[f"f_{k}"] = 1.0 if k == 1 else 0.0
    ordered = {name: values[name] for name in _columns(ks)}
    return VertexLimits(edge=edge.index, end=end, h=vertex.h, kind=vertex.kind, values=ordered)


# -----------------------------
# Profile construction
# -----------------------------

def _columns(ks: Sequence[int]) -> List[str]:
    return ["I", "H_I", "K"] + [f"f_{k}" for k in ks] + [f"Ktilde_{k}" for k in ks] + [f"F_{k}" for k in ks]


def _evaluate_row(args) -> LevelRow:
    H, edge, h, ks = args
    return evaluate_level(H, edge, h, ks)


def _evaluate_rows(H: HamiltonianSpec, edge: ReebEdge, grid: np.ndarray, ks: Sequence[int],
                   workers: int) -> List[LevelRow]:
    jobs = [(H, edge, float(h), tuple(ks)) for h in grid]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_evaluate_row, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    return [_evaluate_row(job) for job in jobs]


def _consistency(profile: ActionProfile, H: HamiltonianSpec, check_points: int) -> None:
    table = profile.table
    I = table["I"].to_numpy()
    H_I = table["H_I"].to_numpy()
    K = table["K"].to_numpy()
    problems = []
    if np.any(np.diff(I) <= 0.0):
        problems.append("I is not strictly increasing in h")
    if np.any(H_I <= 0.0):
        problems.append("H_I is not positive in the edge interior")
    ident = np.abs(K - I * H_I) / np.maximum(np.abs(K), 1e-300)
    if np.max(ident) > IDENTITY_RTOL:
        problems.append(f"K differs from I*H_I by {np.max(ident):.3e}")
    h = profile.h
    n_cells = len(h) - 1
    picks = np.unique(np.linspace(0, n_cells - 1, min(check_points, n_cells)).astype(int))
    for j in picks:
        mid = 0.5 * (h[j] + h[j + 1])
        row = evaluate_level(H, profile.edge, mid, profile.ks)
        I_int = float(profile.interpolants["I"](mid))
        if abs(I_int - row.I) > MIDPOINT_RTOL * abs(row.I):
            problems.append(f"interpolated I at h={mid:.12g} is {I_int:.12g}, quadrature gives {row.I:.12g}")
        slope = float(profile.interpolants["I"](mid, 1))
        if abs(slope * row.H_I - 1.0) > MIDPOINT_RTOL:
            problems.append(f"dI/dh at h={mid:.12g} differs from 1/H_I by {abs(slope * row.H_I - 1.0):.3e}")
    if problems:
        raise ProfileConsistencyError(f"edge {profile.edge.index}: " + "; ".join(problems))


def build_profile(
    H: HamiltonianSpec,
    edge: ReebEdge,
    grid: Optional[GridSpec] = None,
    *,
    ks: Sequence[int] = DEFAULT_KS,
    graph: Optional[ReebGraph] = None,
    workers: int = 1,
    check: bool = True,
) -> ActionProfile:
    """Tabulate I, H_I, K, f_k, Ktilde_k and F_k on one Reeb edge."""
    grid = grid or GridSpec()
    ks = tuple(int(k) for k in ks)
    graph = graph or reeb_graph(H)
    hs = grid.grid(edge)
    if len(hs) < 4:
        raise NoDataError(f"edge {edge.index}: grid has {len(hs)} points, need at least 4")
    logger.info("building profile for edge %d (%s) on %d energies", edge.index, edge.orientation, len(hs))

    rows = _evaluate_rows(H, edge, hs, ks, workers)
    table = pd.DataFrame([r.as_record(ks) for r in rows], columns=["h"] + _columns(ks))
    x = table["h"].to_numpy()

    interpolants: Dict[str, object] = {}
    hermite: List[str] = []
    inv_HI = 1.0 / table["H_I"].to_numpy()
    spline, used = _interpolant(x, table["I"].to_numpy(), inv_HI)
    interpolants["I"] = spline
    if used:
        hermite.append("I")
    for k in ks:
        name = f"F_{k}"
        spline, used = _interpolant(x, table[name].to_numpy(), table[f"f_{k}"].to_numpy() * inv_HI)
        interpolants[name] = spline
        if used:
            hermite.append(name)
    for name in _columns(ks):
        if name not in interpolants:
            interpolants[name] = PchipInterpolator(x, table[name].to_numpy())

    width = (edge.h_hi if edge.bounded else x[-1]) - edge.h_lo
    limits: Dict[str, VertexLimits] = {}
    if edge.lower is not None:
        limits["lo"] = vertex_limits(H, edge, graph.vertices[edge.lower], "lo", ks,
                                     delta_rel=grid.limit_delta, width=width)
    if edge.upper is not None:
        limits["hi"] = vertex_limits(H, edge, graph.vertices[edge.upper], "hi", ks,
                                     delta_rel=grid.limit_delta, width=width)

    profile = ActionProfile(edge=edge, ks=ks, table=table, interpolants=interpolants,
                            limits=limits, hermite_columns=tuple(hermite))
    if check:
        _consistency(profile, H, grid.check_points)
    logger.info("edge %d profile: I in [%.6g, %.6g], hermite columns=%s",
                edge.index, table["I"].iloc[0], table["I"].iloc[-1], ",".join(hermite) or "-")
    return profile


def build_profiles(H: HamiltonianSpec, grid: Optional[GridSpec] = None, *, ks: Sequence[int] = DEFAULT_KS,
                   graph: Optional[ReebGraph] = None, workers: int = 1) -> List[ActionProfile]:
    """One profile per Reeb edge, in edge order."""
    graph = graph or reeb_graph(H)
    return [build_profile(H, e, grid, ks=ks, graph=graph, workers=workers) for e in graph.edges]


def limits_table(profiles: Sequence[ActionProfile]) -> pd.DataFrame:
    records = []
    for prof in profiles:
        for end in ("lo", "hi"):
            lim = prof.limits.get(end)
            if lim is None:
                continue
            records.append({"edge": lim.edge, "end": end, "h": lim.h, "kind": lim.kind, **lim.values})
    return pd.DataFrame.from_records(records)


def action_axis_table(profile: ActionProfile) -> pd.DataFrame:
    """(I, K, H_I) columns for plotting against the action."""
    return profile.table[["I", "K", "H_I"]].copy()
