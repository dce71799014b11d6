"""Admissible temperatures for the weighted (k-th moment) thermostat."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from ..errors import InadmissibleTemperatureError
from .families import HamiltonianSpec
from .reeb import ReebGraph, reeb_graph

logger = logging.getLogger(__name__)

AGREEMENT_RTOL = 1e-3
MATCH_RTOL = 1e-6


@dataclass(frozen=True)
class AdmissibleTemperatures:
    k: int
    excluded: Tuple[float, ...]
    # vertex index -> limits of Ktilde_k along each incident edge
    vertex_limits: Dict[int, Tuple[float, ...]]

    def is_admissible(self, T: float, rtol: float = MATCH_RTOL) -> bool:
        return T > 0.0 and all(abs(T - x) > rtol * x for x in self.excluded)

    def check(self, T: float, rtol: float = MATCH_RTOL) -> None:
        """Raise InadmissibleTemperatureError when T hits an excluded value."""
        for x in self.excluded:
            if abs(T - x) <= rtol * x:
                raise InadmissibleTemperatureError(T, x, self.k)


def admissible_temperatures(
    H: HamiltonianSpec,
    k: int,
    *,
    graph: Optional[ReebGraph] = None,
    profiles: Optional[Sequence] = None,
    delta_rel: float = 1e-8,
) -> AdmissibleTemperatures:
    """Collect the positive vertex limits of Ktilde_k that are the same along every incident edge.

    A value that differs between incident edges is not attained continuously
    and so does not obstruct the equilibrium analysis; a limit of 0 is never
    excluded.
    """
    from ..quadrature.profiles import vertex_limits

    if int(k) != k or k < 1 or k % 2 == 0:
        raise ValueError(f"moment order k must be an odd positive integer, got {k!r}")
    k = int(k)
    graph = graph or reeb_graph(H)
    name = f"Ktilde_{k}"

    known: Dict[Tuple[int, str], float] = {}
    for prof in profiles or ():
        for end, lim in prof.limits.items():
            if name in lim.values:
                known[(prof.edge.index, end)] = lim.values[name]

    per_vertex: Dict[int, List[float]] = {}
    for vertex in graph.vertices:
        values = []
        for edge, end in graph.incident(vertex.index):
            if (edge.index, end) in known:
                values.append(known[(edge.index, end)])
                continue
            lim = vertex_limits(H, edge, vertex, end, (k,), delta_rel=delta_rel)
            values.append(lim.values[name])
        per_vertex[vertex.index] = values

    excluded: List[float] = []
    for vid, values in per_vertex.items():
        if not values:
            continue
        top = max(values)
        if top <= 0.0:
            continue
        if all(abs(v - top) <= AGREEMENT_RTOL * top for v in values):
            value = sum(values) / len(values)
            logger.info("k=%d: vertex %d excludes T=%.12g", k, vid, value)
            excluded.append(value)
    return AdmissibleTemperatures(
        k=k,
        excluded=tuple(sorted(excluded)),
        vertex_limits={vid: tuple(v) for vid, v in per_vertex.items()},
    )
