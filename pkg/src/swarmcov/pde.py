"""Mean-field solver: conservative explicit finite volumes on uniform grids.

The swarm's population density obeys an advection-diffusion-reaction system

    dy1/dt = lap(w*y1) - div(a*y1) - H*y1 + k*y2
    dy2/dt = H*y1 - k*y2

with zero total flux through the walls (w = D^2 is the squared diffusion
coefficient of the agent process, y1/y2 the moving/stopped densities).  Pure
diffusion is the special case a = H = 0, y2 = 0.  Fluxes live on cell faces,
so mass is conserved to round-off by construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import _pde_kernels as _pk
from .errors import DegenerateFitError
from .fields import ControlLaws
from .grids import Grid, GridFunction

__all__ = [
    "AdrCoefficients",
    "SolveReport",
    "cfl_max_dt",
    "step_diffusion",
    "step_adr",
    "solve",
    "steady_state",
    "decay_rate",
    "coefficients_from_laws",
]

_NORM_FLOOR = 1e-12


@dataclass(frozen=True)
class AdrCoefficients:
    """Cellwise coefficients: diffusion weight w > 0, optional drift per axis,
    optional stop rate H >= 0 with reactivation rate k >= 0."""

    w: GridFunction
    a: Optional[tuple[GridFunction, ...]] = None
    H: Optional[GridFunction] = None
    k: float = 0.0

    def __post_init__(self):
        shape = self.w.grid.shape
        if (self.w.values <= 0).any():
            raise ValueError("diffusion weight w must be strictly positive")
        if self.a is not None:
            if len(self.a) != self.w.grid.dim:
                raise ValueError("drift needs one component per axis")
            for comp in self.a:
                if comp.grid.shape != shape:
                    raise ValueError("drift components must share the w grid")
        if self.H is not None:
            if self.H.grid.shape != shape:
                raise ValueError("H must share the w grid")
            if (self.H.values < 0).any():
                raise ValueError("stop rate H must be nonnegative")
        if self.k < 0:
            raise ValueError("reactivation rate k must be nonnegative")

    @property
    def reactive(self) -> bool:
        return self.H is not None or self.k > 0


@dataclass
class SolveReport:
    """Snapshots plus bookkeeping from one explicit solve."""

    times: list[float]
    active: list[GridFunction]
    passive: Optional[list[GridFunction]]
    dt: float
    n_steps: int
    mass_drift: float

    def totals(self) -> list[GridFunction]:
        if self.passive is None:
            return self.active
        return [
            GridFunction(a.grid, a.values + p.values)
            for a, p in zip(self.active, self.passive)
        ]

    def pairs(self) -> list[tuple[float, GridFunction]]:
        return list(zip(self.times, self.totals()))

    @property
    def final(self) -> GridFunction:
        return self.totals()[-1]


def cfl_max_dt(w: GridFunction, a: Optional[Sequence[GridFunction]] = None) -> float:
    """Largest stable explicit step: 1 / (sum_ax 2*max(w)/h^2 + sum_ax max|a|/h)."""
    rate = 0.0
    wmax = float(w.values.max())
    for ax, h in enumerate(w.grid.spacing):
        rate += 2.0 * wmax / h**2
        if a is not None:
            rate += float(np.abs(a[ax].values).max()) / h
    return 1.0 / rate


def _max_stable_dt(coeffs: AdrCoefficients) -> float:
    """Combined diffusion/advection/reaction positivity bound."""
    rate = 1.0 / cfl_max_dt(coeffs.w, coeffs.a)
    if coeffs.H is not None:
        rate += float(coeffs.H.values.max())
    dt = 1.0 / rate
    if coeffs.k > 0:
        dt = min(dt, 1.0 / coeffs.k)
    return dt


def _zeros_like(gf: GridFunction) -> np.ndarray:
    return np.zeros(gf.grid.shape)


def _march_diffusion(values, w, spacing, dt, nsteps):
    if values.ndim == 1:
        return _pk.march_diffusion_1d(values, w, spacing[0], dt, nsteps)
    return _pk.march_diffusion_2d(values, w, spacing[0], spacing[1], dt, nsteps)


def _march_adr(v1, v2, w, a, H, k, spacing, dt, nsteps):
    if v1.ndim == 1:
        return _pk.march_adr_1d(v1, v2, w, a[0], H, k, spacing[0], dt, nsteps)
    return _pk.march_adr_2d(
        v1, v2, w, a[0], a[1], H, k, spacing[0], spacing[1], dt, nsteps
    )


def step_diffusion(y: GridFunction, w: GridFunction, dt: float) -> GridFunction:
    """One explicit step of dy/dt = lap(w*y) with zero-flux walls."""
    if y.grid.shape != w.grid.shape:
        raise ValueError("y and w must share a grid")
    limit = cfl_max_dt(w)
    if dt > limit * (1.0 + 1e-12):
        raise ValueError(f"dt = {dt:g} violates the stability bound {limit:g}")
    vals = _march_diffusion(
        np.ascontiguousarray(y.values), np.ascontiguousarray(w.values),
        y.grid.spacing, dt, 1,
    )
    return GridFunction(y.grid, vals)


def step_adr(
    y1: GridFunction, y2: GridFunction, coeffs: AdrCoefficients, dt: float
) -> tuple[GridFunction, GridFunction]:
    """One explicit step of the two-state system (fluxes and rates at pre-step values)."""
    grid = y1.grid
    if grid.shape != coeffs.w.grid.shape or y2.grid.shape != grid.shape:
        raise ValueError("states and coefficients must share a grid")
    limit = _max_stable_dt(coeffs)
    if dt > limit * (1.0 + 1e-12):
        raise ValueError(f"dt = {dt:g} violates the stability bound {limit:g}")
    a = (
        tuple(np.ascontiguousarray(c.values) for c in coeffs.a)
        if coeffs.a is not None
        else tuple(_zeros_like(coeffs.w) for _ in range(grid.dim))
    )
    H = np.ascontiguousarray(coeffs.H.values) if coeffs.H is not None else _zeros_like(coeffs.w)
    v1, v2 = _march_adr(
        np.ascontiguousarray(y1.values), np.ascontiguousarray(y2.values),
        np.ascontiguousarray(coeffs.w.values), a, H, coeffs.k,
        grid.spacing, dt, 1,
    )
    return GridFunction(grid, v1), GridFunction(grid, v2)


def _snapshot_steps(times: Sequence[float], dt: float, n_steps: int) -> list[int]:
    idx = sorted({min(max(int(np.ceil(t / dt - 1e-9)), 0), n_steps) for t in times})
    return idx


def solve(
    y0: GridFunction,
    coeffs: AdrCoefficients,
    t_end: float,
    snapshot_times: Sequence[float] = (),
    y2_init: Optional[GridFunction] = None,
    safety: float = 0.9,
) -> SolveReport:
    """March to t_end with dt = safety * (stability bound); snapshot at the
    nearest step time >= each requested time (t_end is always included)."""
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    if not 0 < safety < 1:
        raise ValueError("safety factor must sit in (0, 1)")
    for t in snapshot_times:
        if not 0 <= t <= t_end:
            raise ValueError(f"snapshot time {t} outside [0, t_end]")
    grid = y0.grid
    if grid.shape != coeffs.w.grid.shape:
        raise ValueError("y0 and coefficients must share a grid")

    dt = safety * _max_stable_dt(coeffs)
    n_steps = int(np.ceil(t_end / dt - 1e-9))
    snap_idx = _snapshot_steps(tuple(snapshot_times) + (t_end,), dt, n_steps)

    keep_passive = coeffs.reactive or y2_init is not None
    use_adr = keep_passive or coeffs.a is not None
    v1 = np.ascontiguousarray(y0.values).copy()
    v2 = (
        np.ascontiguousarray(y2_init.values).copy()
        if y2_init is not None
        else np.zeros(grid.shape)
    )
    w = np.ascontiguousarray(coeffs.w.values)
    if use_adr:
        a = (
            tuple(np.ascontiguousarray(c.values) for c in coeffs.a)
            if coeffs.a is not None
            else tuple(np.zeros(grid.shape) for _ in range(grid.dim))
        )
        H = (
            np.ascontiguousarray(coeffs.H.values)
            if coeffs.H is not None
            else np.zeros(grid.shape)
        )

    cellvol = grid.cell_volume
    mass0 = float((v1.sum() + v2.sum()) * cellvol)
    drift = 0.0

    times: list[float] = []
    active: list[GridFunction] = []
    passive: list[GridFunction] = []

    def record(step: int):
        nonlocal drift
        times.append(step * dt)
        active.append(GridFunction(grid, v1.copy()))
        passive.append(GridFunction(grid, v2.copy()))
        mass = float((v1.sum() + v2.sum()) * cellvol)
        drift = max(drift, abs(mass - mass0) / abs(mass0)) if mass0 != 0 else drift

    prev = 0
    if snap_idx and snap_idx[0] == 0:
        record(0)
        snap_idx = snap_idx[1:]
    for target in snap_idx:
        seg = target - prev
        if seg > 0:
            if use_adr:
                v1, v2 = _march_adr(v1, v2, w, a, H, coeffs.k, grid.spacing, dt, seg)
            else:
                v1 = _march_diffusion(v1, w, grid.spacing, dt, seg)
        prev = target
        record(target)

    return SolveReport(
        times=times,
        active=active,
        passive=passive if keep_passive else None,
        dt=dt,
        n_steps=n_steps,
        mass_drift=drift,
    )


def steady_state(w: GridFunction) -> GridFunction:
    """Stationary density of dy/dt = lap(w*y): proportional to 1/w, unit mass."""
    inv = 1.0 / w.values
    z = inv.sum() * w.grid.cell_volume
    return GridFunction(w.grid, inv / z)


def decay_rate(
    snapshots: Sequence[tuple[float, GridFunction]], target: GridFunction
) -> tuple[float, float]:
    """Exponential approach rate to a target state.

    Least-squares slope of log ||y(t) - target||_2 (discrete L2) against t,
    over snapshots whose norm exceeds 1e-12.  Returns (rate, r_squared) with
    rate = -slope.
    """
    if len(snapshots) < 4:
        raise ValueError("decay fit needs at least 4 snapshots")
    cellvol = target.grid.cell_volume
    ts, logs = [], []
    for t, gf in snapshots:
        if gf.grid.shape != target.grid.shape:
            raise ValueError("snapshot grid does not match target grid")
        norm = float(np.sqrt(((gf.values - target.values) ** 2).sum() * cellvol))
        if norm > _NORM_FLOOR:
            ts.append(t)
            logs.append(np.log(norm))
    if len(ts) < 2:
        raise DegenerateFitError("all residual norms at or below the fit floor")
    t = np.asarray(ts)
    y = np.asarray(logs)
    slope, intercept = np.polyfit(t, y, 1)
    resid = y - (slope * t + intercept)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    if ss_tot == 0.0:
        raise DegenerateFitError("residual norms show no variation")
    r2 = 1.0 - float((resid**2).sum()) / ss_tot
    return float(-slope), float(r2)


def coefficients_from_laws(laws: ControlLaws, grid: Grid) -> AdrCoefficients:
    """Sample control laws at cell centers: w = D^2, drift a, stop rate H."""
    pts = grid.center_points()
    D = laws.D_at(pts)
    w = GridFunction(grid, (D**2).reshape(grid.shape))
    a = None
    if laws.a is not None:
        av = laws.a_at(pts)
        a = tuple(
            GridFunction(grid, av[:, ax].reshape(grid.shape)) for ax in range(grid.dim)
        )
    H = None
    if laws.H is not None:
        H = GridFunction(grid, laws.H_at(pts).reshape(grid.shape))
    return AdrCoefficients(w=w, a=a, H=H, k=laws.k)
