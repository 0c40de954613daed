"""Second-order (Fokker-Planck) stationary analysis of the single-topic model.

Posts arrive as a Poisson process of rate ``lam``; a post from influencer
``i`` moves a user at ``x`` (prejudice ``z``) by
``dx_i = alpha (z - x_i) + (1 - beta)(x_i - x)`` with probability
``f_i theta_i omega_i``. The drift is ``v = lam sum_i f_i theta_i omega_i dx_i``
and the variance ``sigma2 = lam^k sum_i f_i theta_i omega_i (dx_i - v/lam)^2``
with ``k = 1`` (jump-moment scaling, default) or ``k = 2``.

The stationary density with zero probability flux solves
``-v p + (1/2) d(sigma2 p)/dx = 0``, i.e. ``p ~ exp(A)`` with
``A' = 2 (v - sigma2'/2) / sigma2``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid
from scipy.optimize import brentq

from .fluid import FluidScenario
from .model import ContractError

DEFAULT_NODES = 2001
SIGMA2_FLOOR = 1e-12
SCALINGS = ("jump-moment", "printed")


class DegenerateDiffusion(ContractError):
    """Variance vanishes on the grid; use the fluid equilibrium points instead."""


def _jump_terms(x, z, pi, scen: FluidScenario):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    w = scen.attraction(x, pi)  # f_i theta_i omega_i, shape (N_i, len(x))
    a, b = scen.weights.alpha, scen.weights.beta
    dx = a * (np.asarray(z, dtype=float) - scen.positions[:, None]) + (1.0 - b) * (scen.positions[:, None] - x[None, :])
    return w, dx


def drift(x, z, pi, scen: FluidScenario, lam: float = 1.0):
    """Mean opinion velocity ``lam sum_i f_i theta_i omega_i dx_i``."""
    w, dx = _jump_terms(x, z, pi, scen)
    v = lam * (w * dx).sum(axis=0)
    return v if np.ndim(x) else float(v[0])


def velocity_variance(x, z, pi, scen: FluidScenario, lam: float = 1.0, scaling: str = "jump-moment"):
    """Variance of the opinion velocity; see the module docstring for ``scaling``."""
    if scaling not in SCALINGS:
        raise ContractError(f"scaling must be one of {SCALINGS}")
    w, dx = _jump_terms(x, z, pi, scen)
    v = lam * (w * dx).sum(axis=0)
    power = 1.0 if scaling == "jump-moment" else 2.0
    s2 = lam**power * (w * (dx - v / lam) ** 2).sum(axis=0)
    return s2 if np.ndim(x) else float(s2[0])


@dataclass
class DriftDiffusionField:
    grid: np.ndarray
    drift: np.ndarray
    variance: np.ndarray
    dvariance: np.ndarray

    @classmethod
    def compute(cls, z, pi, scen: FluidScenario, grid=None, lam: float = 1.0, scaling: str = "jump-moment"):
        grid = default_grid(scen) if grid is None else np.asarray(grid, dtype=float)
        if grid.ndim != 1 or grid.size < 3 or np.any(np.diff(grid) <= 0):
            raise ContractError("grid must be strictly increasing with at least 3 nodes")
        v = drift(grid, z, pi, scen, lam)
        s2 = velocity_variance(grid, z, pi, scen, lam, scaling)
        ds2 = np.gradient(s2, grid, edge_order=2)
        return cls(grid, v, s2, ds2)


def default_grid(scen: FluidScenario, n: int = DEFAULT_NODES) -> np.ndarray:
    return np.linspace(scen.lower, scen.upper, n)


@dataclass
class StationaryDensity:
    grid: np.ndarray
    z: np.ndarray
    density: np.ndarray  # (len(z), len(grid)); conditional on z
    c1: np.ndarray  # normalization constants
    log_density: np.ndarray

    def mode(self, k: int = 0) -> float:
        return float(self.grid[np.argmax(self.density[k])])

    def joint(self, z_weights) -> np.ndarray:
        """Marginal over prejudices: ``sum_z h(z) p(x | z)``."""
        return np.asarray(z_weights) @ self.density


def _density_slice(z, pi, scen, grid, lam, scaling, floor):
    fld = DriftDiffusionField.compute(z, pi, scen, grid, lam, scaling)
    if fld.variance.min() < floor:
        raise DegenerateDiffusion(
            f"velocity variance drops to {fld.variance.min():.3g} (< {floor:g}) for z={z}; "
            "the diffusion description degenerates here, use the fluid equilibrium points"
        )
    eta = 2.0 * (fld.drift - 0.5 * fld.dvariance) / fld.variance
    A = cumulative_trapezoid(eta, fld.grid, initial=0.0)
    A = A - A.max()
    p = np.exp(A)
    norm = trapezoid(p, fld.grid)
    return p / norm, A - np.log(norm), 1.0 / norm


def stationary_density(z, pi, scen: FluidScenario, grid=None, lam: float = 1.0, scaling: str = "jump-moment",
                       floor: float = SIGMA2_FLOOR) -> StationaryDensity:
    """Conditional stationary densities ``p(x | z)`` for each prejudice in ``z``."""
    grid = default_grid(scen) if grid is None else np.asarray(grid, dtype=float)
    zs = np.atleast_1d(np.asarray(z, dtype=float))
    dens, logs, c1 = [], [], []
    for zz in zs:
        p, logp, c = _density_slice(float(zz), pi, scen, grid, lam, scaling, floor)
        dens.append(p)
        logs.append(logp)
        c1.append(c)
    return StationaryDensity(grid, zs, np.array(dens), np.array(c1), np.array(logs))


def zero_flux_residual(dens: StationaryDensity, pi, scen: FluidScenario, lam: float = 1.0,
                       scaling: str = "jump-moment", k: int = 0) -> np.ndarray:
    """``-v p + (1/2) d(sigma2 p)/dx`` on the grid for slice ``k``."""
    z = dens.z[k]
    v = drift(dens.grid, z, pi, scen, lam)
    s2 = velocity_variance(dens.grid, z, pi, scen, lam, scaling)
    p = dens.density[k]
    return -v * p + 0.5 * np.gradient(s2 * p, dens.grid, edge_order=2)


@dataclass
class EquilibriumPoint:
    x: float
    stable: bool
    slope: float


def equilibrium_points(z, pi, scen: FluidScenario, grid=None, lam: float = 1.0, xtol: float = 1e-13):
    """Zeros of the drift; a zero is stable when the drift decreases through it."""
    grid = default_grid(scen) if grid is None else np.asarray(grid, dtype=float)
    v = drift(grid, z, pi, scen, lam)
    fn = lambda x: drift(x, z, pi, scen, lam)  # noqa: E731
    roots = [float(grid[k]) for k in np.flatnonzero(v == 0.0)]
    for k in np.flatnonzero(v[:-1] * v[1:] < 0):
        roots.append(brentq(fn, grid[k], grid[k + 1], xtol=xtol, rtol=4 * np.finfo(float).eps))
    roots.sort()
    h = 1e-6 * (scen.upper - scen.lower)
    out = []
    for r in roots:
        lo, hi = max(r - h, scen.lower), min(r + h, scen.upper)
        slope = (fn(hi) - fn(lo)) / (hi - lo)
        out.append(EquilibriumPoint(r, bool(slope < 0), float(slope)))
    return out


def popularity_rate(i: int, pi, scen: FluidScenario, density: StationaryDensity | None = None, xbar=None,
                    lam: float = 1.0) -> float:
    """``lam f_i`` times the mass-weighted delivery-and-like probability of influencer ``i``.

    The user distribution is either a stationary density (slices weighted by
    the scenario's prejudice weights) or point masses at ``xbar`` per node.
    """
    pi = np.asarray(pi, dtype=float)
    if (density is None) == (xbar is None):
        raise ContractError("give exactly one of density or xbar")
    if xbar is not None:
        xbar = np.atleast_1d(np.asarray(xbar, dtype=float))
        w = scen.attraction(xbar, pi)[i]
        return float(lam * w @ scen.z_weights)
    w = scen.attraction(density.grid, pi)[i]
    per_z = trapezoid(density.density * w[None, :], density.grid, axis=1)
    zw = scen.z_weights if len(per_z) == len(scen.z_weights) else np.full(len(per_z), 1.0 / len(per_z))
    return float(lam * per_z @ zw)


def write_density_csv(path, dens: StationaryDensity) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["z", "x", "f"])
        for zz, row in zip(dens.z, dens.density):
            for x, f in zip(dens.grid, row):
                w.writerow([repr(float(zz)), repr(float(x)), repr(float(f))])
