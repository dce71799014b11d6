"""Dormand-Prince 5(4) integrator, batched over rows, with dense output and events.

States are arrays of shape (N, d): N independent trajectories sharing one
step-size sequence. The step is controlled by the worst row. Rows can be
frozen (escaped, finished) so that they stop influencing the step control.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import NoCrossingError, StateEscapeError, StepUnderflowError

logger = logging.getLogger(__name__)

# nodes
C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0])

# extended butcher table
BT = {
    0: [1 / 5],
    1: [3 / 40, 9 / 40],
    2: [44 / 45, -56 / 15, 32 / 9],
    3: [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    4: [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
}

# 5th-order weights (also the last stage row, FSAL)
B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])

# coefficients for the local truncation error estimate
TR = np.array([-71 / 57600, 0.0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40])

# free 4th-order interpolant: y(t0 + theta h) = y0 + h * sum_j (K^T P)_j theta^(j+1)
P = np.array([
    [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

ORDER = 5
SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0
# events: bisection down to a 2^-BRACKET_ITERS bracket, then Newton on the dense output
BRACKET_ITERS = 40
NEWTON_ITERS = 3


@dataclass(frozen=True)
class IntegratorConfig:
    rtol: float = 1e-10
    atol: float = 1e-12
    max_step: float = math.inf
    first_step: Optional[float] = None
    max_steps: int = 5_000_000
    state_bound: float = 1e8
    min_step_rel: float = 1e-14
    dense: bool = False

    def __post_init__(self):
        if not (self.rtol > 0.0 and self.atol > 0.0):
            raise ValueError(f"tolerances must be positive, got rtol={self.rtol}, atol={self.atol}")


@dataclass
class EventSpec:
    """Scalar event g(t, y) -> (N,), detected per row on sign change.

    direction: +1 for upward crossings, -1 downward, 0 both.
    count: rows stop being required once they have this many crossings;
    integration ends when every active row has reached it.
    callback(rows, t, y): called per step with the rows that crossed; may
    return a boolean mask (over those rows) of rows to freeze.
    """
    function: Callable[[float, np.ndarray], np.ndarray]
    direction: int = 1
    count: Optional[int] = None
    callback: Optional[Callable] = None


@dataclass
class DenseSolution:
    """Piecewise quartic interpolant over accepted steps (all rows)."""
    t_old: List[float] = field(default_factory=list)
    h: List[float] = field(default_factory=list)
    y_old: List[np.ndarray] = field(default_factory=list)
    Q: List[np.ndarray] = field(default_factory=list)

    def append(self, t_old: float, h: float, y_old: np.ndarray, Q: np.ndarray) -> None:
        self.t_old.append(t_old)
        self.h.append(h)
        self.y_old.append(y_old)
        self.Q.append(Q)

    def segment(self, t: float) -> int:
        starts = np.asarray(self.t_old)
        if not len(starts):
            raise ValueError("dense solution is empty")
        if self.h[0] > 0:
            j = int(np.searchsorted(starts, t, side="right")) - 1
        else:
            j = int(np.searchsorted(-starts, -t, side="right")) - 1
        return min(max(j, 0), len(starts) - 1)

    def __call__(self, t: float) -> np.ndarray:
        j = self.segment(t)
        theta = (t - self.t_old[j]) / self.h[j]
        return _dense_eval(self.y_old[j], self.Q[j], self.h[j], np.full(self.y_old[j].shape[0], theta))


@dataclass
class Trajectory:
    t: np.ndarray                       # accepted step times
    y: Optional[np.ndarray]             # (steps, N, d) when recorded
    y_final: np.ndarray
    t_final: float
    crossings: List[List[List[Tuple[float, np.ndarray]]]]   # [event][row] -> [(t, y)]
    frozen: np.ndarray
    escaped: np.ndarray
    dense: Optional[DenseSolution] = None
    n_steps: int = 0
    n_rejected: int = 0
    nfev: int = 0


def _dense_eval(y_old: np.ndarray, Q: np.ndarray, h: float, theta: np.ndarray) -> np.ndarray:
    # Q: (N, d, 4); theta: (N,)
    powers = np.stack([theta, theta ** 2, theta ** 3, theta ** 4], axis=-1)   # (N, 4)
    return y_old + h * np.einsum("ndj,nj->nd", Q, powers)


def _rms(x: np.ndarray) -> np.ndarray:
    return np.sqrt(np.mean(x * x, axis=-1))


class DormandPrince:
    """Single-use stepper for fun(t, y) with y of shape (N, d)."""

    def __init__(self, fun: Callable, t0: float, y0, t_bound: float, config: IntegratorConfig = IntegratorConfig()):
        y0 = np.asarray(y0, dtype=float)
        self.single = y0.ndim == 1
        self.y = np.atleast_2d(y0).copy()
        self.t = float(t0)
        self.t_bound = float(t_bound)
        self.direction = 1.0 if self.t_bound >= self.t else -1.0
        self.span = abs(self.t_bound - self.t)
        self.config = config
        self.frozen = np.zeros(self.y.shape[0], dtype=bool)
        self.escaped = np.zeros(self.y.shape[0], dtype=bool)
        self._fun = fun
        self.nfev = 0
        self.n_rejected = 0
        self.f = self.fun(self.t, self.y)
        self.h_abs = config.first_step or self._initial_step()
        self.K = np.empty((7,) + self.y.shape)
        self.t_old = self.t
        self.y_old = self.y
        self.h_last = 0.0

    def fun(self, t: float, y: np.ndarray) -> np.ndarray:
        self.nfev += 1
        out = np.asarray(self._fun(t, y), dtype=float)
        if np.any(self.frozen):
            out = out.copy()
            out[self.frozen] = 0.0
        return out

    def _scale(self, a: np.ndarray, b: Optional[np.ndarray] = None) -> np.ndarray:
        m = np.abs(a) if b is None else np.maximum(np.abs(a), np.abs(b))
        return self.config.atol + self.config.rtol * m

    def _initial_step(self) -> float:
        if self.span == 0.0:
            return 0.0
        sc = self._scale(self.y)
        d0 = float(np.max(_rms(self.y / sc)))
        d1 = float(np.max(_rms(self.f / sc)))
        h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
        h0 = min(h0, self.span)
        y1 = self.y + self.direction * h0 * self.f
        f1 = self.fun(self.t + self.direction * h0, y1)
        d2 = float(np.max(_rms((f1 - self.f) / sc))) / h0
        if d1 <= 1e-15 and d2 <= 1e-15:
            h1 = max(1e-6, h0 * 1e-3)
        else:
            h1 = (0.01 / max(d1, d2)) ** (1.0 / ORDER)
        return min(100.0 * h0, h1, self.config.max_step, self.span)

    def _attempt(self, h: float):
        t, y, K = self.t, self.y, self.K
        K[0] = self.f
        for s, row in BT.items():
            dy = sum(a * K[j] for j, a in enumerate(row))
            K[s + 1] = self.fun(t + C[s + 1] * h, y + h * dy)
        y_new = y + h * np.tensordot(B, K[:6], axes=1)
        f_new = self.fun(t + h, y_new)
        K[6] = f_new
        err = h * np.tensordot(TR, K, axes=1)
        sc = self._scale(y, y_new)
        active = ~self.frozen
        norms = _rms(err / sc)
        err_norm = float(np.max(norms[active])) if np.any(active) else 0.0
        return y_new, f_new, err_norm

    def step(self) -> None:
        """Take one accepted step (or raise)."""
        cfg = self.config
        floor = cfg.min_step_rel * max(self.span, abs(self.t), 1.0)
        h_abs = min(self.h_abs, cfg.max_step)
        while True:
            if h_abs < floor:
                raise StepUnderflowError(
                    f"step size {h_abs:.3e} fell below {floor:.3e} at t={self.t:.12g}"
                )
            remaining = abs(self.t_bound - self.t)
            last = h_abs >= remaining
            if last:
                h_abs = remaining
            h = self.direction * h_abs
            y_new, f_new, err = self._attempt(h)
            if err <= 1.0 and np.all(np.isfinite(y_new[~self.frozen])):
                factor = MAX_FACTOR if err == 0.0 else min(MAX_FACTOR, SAFETY * err ** (-1.0 / ORDER))
                self.h_abs = h_abs * max(factor, MIN_FACTOR)
                break
            self.n_rejected += 1
            if not np.isfinite(err):
                h_abs *= MIN_FACTOR
            else:
                h_abs *= min(1.0, max(MIN_FACTOR, SAFETY * err ** (-1.0 / ORDER)))
        self.t_old, self.y_old = self.t, self.y
        self.h_last = h
        self.t = self.t_bound if last else self.t + h
        self.y, self.f = y_new, f_new

        norms = np.max(np.abs(self.y), axis=-1)
        blown = (norms > cfg.state_bound) & ~self.frozen
        if np.any(blown):
            self.escaped |= blown
            self.frozen |= blown

    def dense_coefficients(self) -> np.ndarray:
        # (7, N, d) x (7, 4) -> (N, d, 4)
        return np.einsum("snd,sj->ndj", self.K, P)

    def dense_at(self, theta: np.ndarray, rows: Optional[np.ndarray] = None) -> np.ndarray:
        Q = self.dense_coefficients()
        y_old = self.y_old
        if rows is not None:
            Q, y_old = Q[rows], y_old[rows]
        return _dense_eval(y_old, Q, self.h_last, theta)

    def freeze(self, rows: np.ndarray) -> None:
        self.frozen[rows] = True
        self.f[rows] = 0.0

    @property
    def finished(self) -> bool:
        return self.direction * (self.t - self.t_bound) >= 0.0


def _crossed(g_old: np.ndarray, g_new: np.ndarray, direction: int) -> np.ndarray:
    up = (g_old < 0.0) & (g_new >= 0.0)
    down = (g_old > 0.0) & (g_new <= 0.0)
    if direction > 0:
        return up
    if direction < 0:
        return down
    return up | down


def _dense_root(g_of: Callable[[np.ndarray], np.ndarray], g_lo: np.ndarray, g_hi: np.ndarray) -> np.ndarray:
    """Per-row theta in [0, 1] where g_of changes sign, given its values at 0 and 1."""
    n = len(g_lo)
    lo, hi = np.zeros(n), np.ones(n)
    g_lo = np.array(g_lo, dtype=float)
    g_hi = np.array(g_hi, dtype=float)
    for _ in range(BRACKET_ITERS):
        mid = 0.5 * (lo + hi)
        g_mid = g_of(mid)
        same = (np.sign(g_mid) == np.sign(g_lo)) & (g_mid != 0.0)
        lo, g_lo = np.where(same, mid, lo), np.where(same, g_mid, g_lo)
        hi, g_hi = np.where(same, hi, mid), np.where(same, g_hi, g_mid)
    theta = np.where(g_hi == 0.0, hi, 0.5 * (lo + hi))
    # on a bracket this narrow the quartic is linear to rounding: its chord is the derivative
    slope = (g_hi - g_lo) / (hi - lo)
    for _ in range(NEWTON_ITERS):
        g = g_of(theta)
        move = (g != 0.0) & (slope != 0.0)
        nxt = theta - np.where(move, g / np.where(move, slope, 1.0), 0.0)
        theta = np.where((nxt >= lo) & (nxt <= hi), nxt, theta)
    return theta


def _locate(solver: DormandPrince, event: EventSpec, rows: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorised root of g along the dense output of the last step."""
    t_old, h = solver.t_old, solver.h_last
    Q = solver.dense_coefficients()[rows]
    y_old = solver.y_old[rows]
    g_lo = np.asarray(event.function(t_old, y_old), dtype=float)
    g_hi = _row_event(event, t_old + h, solver.y[rows])
    theta = _dense_root(lambda th: _row_event(event, t_old + th * h, _dense_eval(y_old, Q, h, th)), g_lo, g_hi)
    return t_old + theta * h, _dense_eval(y_old, Q, h, theta)


def _row_event(event: EventSpec, t, y):
    # per-row times are allowed: evaluate with a scalar t when all rows agree
    t_arr = np.atleast_1d(t)
    if np.all(t_arr == t_arr[0]):
        return np.asarray(event.function(float(t_arr[0]), y), dtype=float)
    return np.asarray(event.function(t_arr, y), dtype=float)


def integrate(
    field: Callable,
    x0,
    t_span: Tuple[float, float],
    config: IntegratorConfig = IntegratorConfig(),
    events: Sequence[EventSpec] = (),
    *,
    record: bool = False,
) -> Trajectory:
    """Integrate field(t, y) from t_span[0] to t_span[1] (or until every event count is met)."""
    solver = DormandPrince(field, t_span[0], x0, t_span[1], config)
    n_rows = solver.y.shape[0]
    counts = [np.zeros(n_rows, dtype=int) for _ in events]
    crossings: List[List[List[Tuple[float, np.ndarray]]]] = [[[] for _ in range(n_rows)] for _ in events]
    dense = DenseSolution() if config.dense else None
    ts = [solver.t]
    ys = [solver.y.copy()] if record else None
    g_prev = [np.asarray(ev.function(solver.t, solver.y), dtype=float) for ev in events]
    steps = 0

    while not solver.finished:
        if steps >= config.max_steps:
            raise StepUnderflowError(f"exceeded {config.max_steps} steps before t={solver.t_bound}")
        solver.step()
        steps += 1
        if dense is not None:
            dense.append(solver.t_old, solver.h_last, solver.y_old.copy(), solver.dense_coefficients())
        ts.append(solver.t)
        if record:
            ys.append(solver.y.copy())

        done = True
        for i, ev in enumerate(events):
            g_new = np.asarray(ev.function(solver.t, solver.y), dtype=float)
            hit = _crossed(g_prev[i], g_new, ev.direction) & ~solver.frozen
            g_prev[i] = g_new
            if np.any(hit):
                rows = np.flatnonzero(hit)
                t_star, y_star = _locate(solver, ev, rows)
                counts[i][rows] += 1
                if ev.callback is not None:
                    freeze = ev.callback(rows, t_star, y_star)
                    if freeze is not None and np.any(freeze):
                        solver.freeze(rows[np.asarray(freeze, dtype=bool)])
                else:
                    for r, tt, yy in zip(rows, t_star, y_star):
                        crossings[i][r].append((float(tt), yy.copy()))
            if ev.count is None:
                done = False
            else:
                need = ~solver.frozen & (counts[i] < ev.count)
                if np.any(need):
                    done = False
        if events and done:
            break
        if np.all(solver.frozen):
            break

    if config.state_bound and np.any(solver.escaped) and solver.single:
        raise StateEscapeError(f"state norm exceeded {config.state_bound:g} at t={solver.t:.12g}")

    logger.debug("integrated %d rows over %d steps (%d rejected, %d evaluations)",
                 n_rows, steps, solver.n_rejected, solver.nfev)
    y_final = solver.y[0] if solver.single else solver.y
    return Trajectory(
        t=np.asarray(ts),
        y=np.asarray(ys) if record else None,
        y_final=y_final,
        t_final=solver.t,
        crossings=crossings,
        frozen=solver.frozen.copy(),
        escaped=solver.escaped.copy(),
        dense=dense,
        n_steps=steps,
        n_rejected=solver.n_rejected,
        nfev=solver.nfev,
    )


def find_crossing(trajectory: Trajectory, event: Callable, *, direction: int = 1, row: int = 0,
                  after: Optional[float] = None) -> Tuple[float, np.ndarray]:
    """First crossing of event(t, y) on a trajectory integrated with dense output."""
    dense = trajectory.dense
    if dense is None:
        raise ValueError("find_crossing needs a trajectory integrated with dense=True")
    spec = EventSpec(event, direction)
    for j in range(len(dense.t_old)):
        t0, h = dense.t_old[j], dense.h[j]
        if after is not None and (t0 + h - after) * np.sign(h) <= 0.0:
            continue
        y0 = dense.y_old[j][row:row + 1]
        Q = dense.Q[j][row:row + 1]
        y1 = _dense_eval(y0, Q, h, np.ones(1))
        g0 = _row_event(spec, t0, y0)
        g1 = _row_event(spec, t0 + h, y1)
        if not _crossed(g0, g1, direction)[0]:
            continue
        theta = _dense_root(lambda th: _row_event(spec, t0 + th * h, _dense_eval(y0, Q, h, th)), g0, g1)
        return t0 + float(theta[0]) * h, _dense_eval(y0, Q, h, theta)[0]
    raise NoCrossingError(f"no crossing with direction {direction:+d} within the integrated span")
