"""First-order averaged thermostat dynamics on one Reeb edge.

Each variant averages to a one-degree-of-freedom system

    Gbar(sigma, xi) = F_kin(xi) + U(sigma),      U(h) = h - T ln D(h) + const

in Darboux coordinates, where D is the variant's density

    nh, logistic:  D = I           D_H = 1/H_I
    wk:            D = F_k         D_H = f_k/H_I
    hsh:           D = I + mu F_3  D_H = (1 + mu f_3)/H_I

and d sigma/dh = 1/D. The averaged drift is
    sigma' = -m(xi) F_kin'(xi),  xi' = m(xi) U'(sigma)
with m = zeta_l for wk and m = 1 otherwise. In (I, xi) it reads
    I' = -m F_kin' D/H_I,        xi' = m (D - T D_H).
Equilibria solve D = T D_H, i.e. the variant's balance equation.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from ..errors import ConfigError, NoncompactLevelError, ProfileRangeError
from ..hamiltonian.families import HamiltonianSpec
from ..hamiltonian.temperatures import admissible_temperatures
from ..integration.dopri import IntegratorConfig, integrate
from ..quadrature.level_sets import LevelRow, evaluate_level
from ..quadrature.profiles import ActionProfile
from ..special.functions import Zeta_l, Zeta_l_prime, Zeta_l_second, zeta_l
from ..thermostats.fields import ThermostatSpec, averaged_balance

logger = logging.getLogger(__name__)

ROOT_XTOL = 1e-12
CELL_NODES = 8


# -----------------------------
# Kinetic part of Gbar
# -----------------------------

@dataclass(frozen=True)
class KineticPart:
    name: str                    # quadratic | logcosh | zeta | quartic
    l: int = 1
    T: float = 1.0

    @classmethod
    def for_spec(cls, spec: ThermostatSpec) -> 'KineticPart':
        if spec.variant == "logistic":
            return cls("logcosh")
        if spec.variant == "hsh":
            return cls("quartic")
        if spec.variant == "wk" and spec.l > 1:
            return cls("zeta", spec.l, spec.T)
        return cls("quadratic")

    def value(self, xi):
        xi = np.asarray(xi, dtype=float)
        if self.name == "logcosh":
            a = np.abs(xi)
            return a + np.log1p(np.exp(-2.0 * a)) - math.log(2.0)
        if self.name == "quartic":
            return 0.25 * xi ** 4
        if self.name == "zeta":
            return Zeta_l(xi, self.l, self.T)
        return 0.5 * xi * xi

    def d1(self, xi):
        xi = np.asarray(xi, dtype=float)
        if self.name == "logcosh":
            return np.tanh(xi)
        if self.name == "quartic":
            return xi ** 3
        if self.name == "zeta":
            return Zeta_l_prime(xi, self.l, self.T)
        return xi

    def d2(self, xi):
        xi = np.asarray(xi, dtype=float)
        if self.name == "logcosh":
            return 1.0 / np.cosh(xi) ** 2
        if self.name == "quartic":
            return 3.0 * xi * xi
        if self.name == "zeta":
            return Zeta_l_second(xi, self.l, self.T)
        return np.ones_like(xi)

    def metric(self, xi):
        """m(xi): zeta_l for the weighted thermostat, 1 otherwise."""
        if self.name == "zeta":
            return zeta_l(xi, self.l, self.T)
        return np.ones_like(np.asarray(xi, dtype=float))

    def inverse(self, y):
        """Non-negative xi with F_kin(xi) = y."""
        y = np.maximum(np.asarray(y, dtype=float), 0.0)
        if self.name == "logcosh":
            return y + np.log1p(np.sqrt(-np.expm1(-2.0 * y)))
        if self.name == "quartic":
            return (4.0 * y) ** 0.25
        if self.name == "zeta":
            return np.vectorize(self._zeta_inverse, otypes=[float])(y)
        return np.sqrt(2.0 * y)

    def _zeta_inverse(self, y: float) -> float:
        if y <= 0.0:
            return 0.0
        f = lambda x: float(self.value(x)) - y
        b = 1.0
        while f(b) < 0.0:
            b *= 2.0
        return float(brentq(f, 0.0, b, xtol=1e-15, rtol=4 * np.finfo(float).eps))

    def chi(self, xi: float) -> float:
        """Darboux partner of sigma: integral of d xi / m(xi) from 0."""
        if self.name != "zeta":
            return float(xi)
        return float(quad(lambda s: 1.0 / zeta_l(s, self.l, self.T), 0.0, xi, epsabs=1e-14, epsrel=1e-13)[0])


# -----------------------------
# Densities and balance
# -----------------------------

def required_k(spec: ThermostatSpec) -> Optional[int]:
    if spec.variant == "wk" and spec.k > 1:
        return spec.k
    if spec.variant == "hsh":
        return 3
    return None


def density(spec: ThermostatSpec, row: LevelRow) -> Tuple[float, float]:
    """(D, D_H) at a level row."""
    if spec.variant == "wk" and spec.k > 1:
        k = spec.k
        return row.F[k], row.f[k] / row.H_I
    if spec.variant == "hsh":
        mu = spec.mu_hsh
        return row.I + mu * row.F[3], (1.0 + mu * row.f[3]) / row.H_I
    return row.I, 1.0 / row.H_I


def _density_columns(spec: ThermostatSpec, profile: ActionProfile) -> Tuple[np.ndarray, np.ndarray]:
    t = profile.table
    inv_HI = 1.0 / t["H_I"].to_numpy()
    if spec.variant == "wk" and spec.k > 1:
        k = spec.k
        return t[f"F_{k}"].to_numpy(), t[f"f_{k}"].to_numpy() * inv_HI
    if spec.variant == "hsh":
        mu = spec.mu_hsh
        return t["I"].to_numpy() + mu * t["F_3"].to_numpy(), (1.0 + mu * t["f_3"].to_numpy()) * inv_HI
    return t["I"].to_numpy(), inv_HI


def _row_ks(spec: ThermostatSpec) -> Tuple[int, ...]:
    k = required_k(spec)
    return (k,) if k else (3,)


def _check_profile(spec: ThermostatSpec, profile: ActionProfile) -> None:
    k = required_k(spec)
    if k and k not in profile.ks:
        raise ConfigError([f"profile for edge {profile.edge.index} lacks moment k={k} needed by {spec.variant}"])


def _balance_column(spec: ThermostatSpec, profile: ActionProfile) -> np.ndarray:
    D, DH = _density_columns(spec, profile)
    # sign of D - T D_H equals the sign of the balance equation
    return D - spec.T * DH


@dataclass(frozen=True)
class Equilibrium:
    edge: int
    h0: float
    I0: float
    row: LevelRow


def equilibria(H: HamiltonianSpec, profile: ActionProfile, spec: ThermostatSpec, *,
               check_admissible: bool = True) -> List[Equilibrium]:
    """All sign changes of the balance equation on the edge, refined by direct quadrature."""
    _check_profile(spec, profile)
    if check_admissible and spec.variant == "wk" and spec.k > 1:
        admissible_temperatures(H, spec.k).check(spec.T)
    ks = _row_ks(spec)
    edge = profile.edge
    h = profile.h
    b = _balance_column(spec, profile)

    def balance(x: float) -> float:
        return averaged_balance(spec, evaluate_level(H, edge, x, ks))

    out = []
    for j in np.flatnonzero(np.sign(b[:-1]) * np.sign(b[1:]) <= 0.0):
        if b[j] == 0.0 and j > 0 and b[j - 1] == 0.0:
            continue
        a, c = float(h[j]), float(h[j + 1])
        fa, fc = balance(a), balance(c)
        if fa == 0.0:
            root = a
        elif fc == 0.0:
            root = c
        elif fa * fc > 0.0:
            continue
        else:
            root = float(brentq(balance, a, c, xtol=ROOT_XTOL * max(1.0, abs(a)), rtol=4 * np.finfo(float).eps))
        if out and abs(out[-1].h0 - root) <= 1e-10 * max(1.0, abs(root)):
            continue
        row = evaluate_level(H, edge, root, ks)
        out.append(Equilibrium(edge=edge.index, h0=root, I0=row.I, row=row))
        logger.info("equilibrium on edge %d: h0=%.15g I0=%.15g (%s, T=%g)",
                    edge.index, root, row.I, spec.variant, spec.T)
    return out


# -----------------------------
# Averaged system
# -----------------------------

def _cumulative_sigma(h: np.ndarray, D: np.ndarray, DH: np.ndarray) -> np.ndarray:
    """Cumulative integral of dh/D with D taken from its Hermite interpolant."""
    density_spline = CubicHermiteSpline(h, D, DH)
    x, w = np.polynomial.legendre.leggauss(CELL_NODES)
    mid = 0.5 * (h[:-1] + h[1:])
    half = 0.5 * np.diff(h)
    points = mid[:, None] + half[:, None] * x[None, :]
    cells = half * np.sum(w[None, :] / density_spline(points), axis=1)
    return np.concatenate([[0.0], np.cumsum(cells)])


def darboux_potential(h: np.ndarray, D: np.ndarray, DH: np.ndarray, T: float, j0: int
                      ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(sigma, U, dU/dsigma) on the nodes h, normalised to zero at node j0."""
    sigma = _cumulative_sigma(h, D, DH)
    sigma = sigma - sigma[j0]
    U = (h - h[j0]) - T * (np.log(D) - math.log(D[j0]))
    dU = D - T * DH
    dU[j0] = 0.0
    return sigma, U, dU


@dataclass(frozen=True)
class AveragedSystem:
    spec: ThermostatSpec
    H: HamiltonianSpec
    profile: ActionProfile
    equilibrium: Equilibrium
    kinetic: KineticPart
    h_nodes: np.ndarray
    sigma_nodes: np.ndarray
    U_nodes: np.ndarray
    D_nodes: np.ndarray
    DH_nodes: np.ndarray
    U_spline: CubicHermiteSpline
    h_spline: CubicHermiteSpline
    sigma_spline: CubicHermiteSpline

    @classmethod
    def build(cls, H: HamiltonianSpec, profile: ActionProfile, spec: ThermostatSpec,
              equilibrium: Equilibrium) -> 'AveragedSystem':
        _check_profile(spec, profile)
        D, DH = _density_columns(spec, profile)
        h = profile.h
        D0, DH0 = density(spec, equilibrium.row)
        h0 = equilibrium.h0
        keep = np.abs(h - h0) > 1e-13 * max(1.0, abs(h0))
        j0 = int(np.searchsorted(h[keep], h0))
        h = np.insert(h[keep], j0, h0)
        D = np.insert(D[keep], j0, D0)
        DH = np.insert(DH[keep], j0, DH0)

        sigma, U, dU = darboux_potential(h, D, DH, spec.T, j0)
        return cls(
            spec=spec, H=H, profile=profile, equilibrium=equilibrium,
            kinetic=KineticPart.for_spec(spec),
            h_nodes=h, sigma_nodes=sigma, U_nodes=U, D_nodes=D, DH_nodes=DH,
            U_spline=CubicHermiteSpline(sigma, U, dU),
            h_spline=CubicHermiteSpline(sigma, h, D),
            sigma_spline=CubicHermiteSpline(h, sigma, 1.0 / D),
        )

    def with_potential(self, U: np.ndarray, dU: np.ndarray) -> 'AveragedSystem':
        """Same coordinates, different U on the sigma nodes (used for controls)."""
        return replace(self, U_nodes=np.asarray(U, dtype=float),
                       U_spline=CubicHermiteSpline(self.sigma_nodes, U, dU))

    # ---- ranges ----
    @property
    def sigma_range(self) -> Tuple[float, float]:
        return float(self.sigma_nodes[0]), float(self.sigma_nodes[-1])

    def _check_sigma(self, sigma):
        lo, hi = self.sigma_range
        arr = np.asarray(sigma, dtype=float)
        if np.any(arr < lo) or np.any(arr > hi):
            raise ProfileRangeError(f"sigma={sigma} outside the Darboux range [{lo}, {hi}]")

    # ---- coordinates ----
    def darboux_sigma(self, I: float) -> float:
        """sigma(I), zero at the equilibrium."""
        return float(self.sigma_spline(self.profile.h_of_I(I)))

    def darboux_chi(self, xi: float) -> float:
        return self.kinetic.chi(xi)

    def h_of_sigma(self, sigma):
        self._check_sigma(sigma)
        return self.h_spline(sigma)

    def I_of_sigma(self, sigma):
        h = self.h_of_sigma(sigma)
        return self.profile.value("I", np.clip(h, *self.profile.h_range))

    # ---- potential and Gbar ----
    def potential(self, sigma, nu: int = 0):
        """U(sigma) (or its nu-th derivative), U(0) = 0."""
        self._check_sigma(sigma)
        out = self.U_spline(sigma, nu)
        return float(out) if np.ndim(sigma) == 0 else out

    def gbar(self, I: float, xi: float) -> float:
        """Averaged Hamiltonian, zero at (I0, 0)."""
        return float(self.kinetic.value(xi)) + self.potential(self.darboux_sigma(I))

    def gbar_sigma(self, sigma, xi):
        return self.kinetic.value(xi) + self.potential(sigma)

    def gbar_h(self, h: float, xi: float = 0.0) -> float:
        """Gbar at energy h by direct quadrature of D (no interpolation)."""
        row = evaluate_level(self.H, self.profile.edge, h, _row_ks(self.spec))
        D, _ = density(self.spec, row)
        D0, _ = density(self.spec, self.equilibrium.row)
        return float(self.kinetic.value(xi)) + (h - self.equilibrium.h0) - self.spec.T * (math.log(D) - math.log(D0))

    # ---- fields ----
    def rbar_field(self, I: float, xi: float) -> Tuple[float, float]:
        """(I', xi') of the averaged drift, vanishing at (I0, 0)."""
        h = self.profile.h_of_I(I)
        if abs(h - self.equilibrium.h0) <= 1e-14 * max(1.0, abs(h)):
            row = self.equilibrium.row
        else:
            row = evaluate_level(self.H, self.profile.edge, h, _row_ks(self.spec))
        D, DH = density(self.spec, row)
        m = float(self.kinetic.metric(xi))
        dI = -m * float(self.kinetic.d1(xi)) * D / row.H_I
        dxi = m * (D - self.spec.T * DH)
        return dI, dxi

    def darboux_field(self, t, y):
        """Vectorised (sigma', xi') for states y of shape (N, 2)."""
        sigma, xi = y[..., 0], y[..., 1]
        m = self.kinetic.metric(xi)
        return np.stack([-m * self.kinetic.d1(xi), m * self.U_spline(sigma, 1)], axis=-1)

    def averaged_map(self, I: float, xi: float, eps: float,
                     config: IntegratorConfig = IntegratorConfig(rtol=1e-12, atol=1e-14)) -> Tuple[float, float]:
        """Flow of R0bar for time 2 pi eps from (I, xi), returned in (I, xi)."""
        if eps == 0.0:
            return float(I), float(xi)
        y0 = np.array([self.darboux_sigma(I), xi])
        traj = integrate(self.darboux_field, y0, (0.0, 2.0 * math.pi * eps), config)
        sigma, xi1 = traj.y_final
        return float(self.I_of_sigma(sigma)), float(xi1)

    # ---- local structure ----
    def hessian_at_equilibrium(self, step_rel: float = 1e-3) -> np.ndarray:
        """diag(T Khat'(h0)/Khat^2, F_kin''(0)) in (h, xi), Khat = D/D_H."""
        edge = self.profile.edge
        h0 = self.equilibrium.h0
        hi = edge.h_hi if edge.bounded else self.profile.h_range[1]
        delta = step_rel * min(h0 - edge.h_lo, hi - h0)
        ks = _row_ks(self.spec)

        def khat(x):
            D, DH = density(self.spec, evaluate_level(self.H, edge, x, ks))
            return D / DH

        slope = (-khat(h0 + 2 * delta) + 8 * khat(h0 + delta) - 8 * khat(h0 - delta) + khat(h0 - 2 * delta)) / (12 * delta)
        D0, DH0 = density(self.spec, self.equilibrium.row)
        k0 = D0 / DH0
        return np.array([[self.spec.T * slope / (k0 * k0), 0.0], [0.0, float(self.kinetic.d2(0.0))]])

    def barrier(self) -> float:
        """Largest g whose level set stays inside the tabulated sigma range."""
        left, right = self._branch_limits()
        return float(min(self.U_spline(left), self.U_spline(right)))

    def _branch_limits(self) -> Tuple[float, float]:
        # the potential well around sigma = 0 ends at the first local maximum on each side
        s = self.sigma_nodes
        dU = self.U_spline(s, 1)
        j0 = int(np.argmin(np.abs(s)))
        right = s[-1]
        for j in range(j0 + 1, len(s)):
            if dU[j] < 0.0:
                right = s[j - 1]
                break
        left = s[0]
        for j in range(j0 - 1, -1, -1):
            if dU[j] > 0.0:
                left = s[j + 1]
                break
        return float(left), float(right)

    def turning_points(self, g: float) -> Tuple[float, float]:
        """sigma_- < 0 < sigma_+ with U(sigma_pm) = g."""
        left, right = self._branch_limits()
        U = lambda x: float(self.U_spline(x)) - g
        if not g > 0.0:
            raise ValueError(f"level g must be positive, got {g}")
        if U(left) < 0.0 or U(right) < 0.0:
            raise NoncompactLevelError(
                f"level g={g:.6g} leaves the tabulated Darboux range (barrier {self.barrier():.6g})"
            )
        lo = brentq(U, left, 0.0, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        hi = brentq(U, 0.0, right, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        return float(lo), float(hi)


def averaged_systems(H: HamiltonianSpec, profile: ActionProfile, spec: ThermostatSpec, *,
                     check_admissible: bool = True) -> List[AveragedSystem]:
    """One averaged system per equilibrium on the edge."""
    return [AveragedSystem.build(H, profile, spec, eq)
            for eq in equilibria(H, profile, spec, check_admissible=check_admissible)]
