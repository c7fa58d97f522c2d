"""Radial solver for the truncated Dirichlet problem on a geodesic ball.

Solves ``u_t = div(|grad u|^{p-2} grad u) + T_k(u^sigma)`` (plap) or
``u_t = Laplacian(u^m) + T_k(u^sigma)`` (pme) for radial ``u`` on ``B_R`` with
``u = 0`` on the boundary sphere.

One step is a Lie splitting: the nodewise reaction ODE ``v' = T_k(v^sigma)``
is advanced by its closed-form flow, then diffusion is advanced by backward
Euler.  The diffusion update is a finite-volume scheme on the cells
``[r_{j-1/2}, r_{j+1/2}]`` (``[0, dr/2]`` for the origin node) with exact cell
volumes; the inner face of the origin cell has zero area, which imposes
``u_r(0) = 0``.  Recorded norms use the same cell volumes as quadrature
weights (:func:`plaplab.geometry.cell_weights`), the measure in which the
discrete diffusion contracts every L^q norm; they agree with the trapezoid
norms of :func:`plaplab.geometry.lq_norm` to second order in ``dr``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.linalg import solve_banded

from .exponents import PLAP, ProblemParams
from .geometry import ManifoldSpec, RadialGrid, cell_weights, density

GAUSSIAN = "gaussian"
BUMP = "bump"
INDICATOR = "indicator"

COMPLETED = "completed"
BLOWUP = "blowup"
DT_COLLAPSE = "dt_collapse"

DT_MIN = 1e-12


class StepRejected(RuntimeError):
    """The inner nonlinear solve failed; the caller should retry with a smaller dt."""


def truncate(v, k: float):
    """``T_k``: clamp to ``[-k, k]``."""
    if not k > 0:
        raise ValueError("truncation level must be positive")
    out = np.clip(v, -k, k)
    return float(out) if np.ndim(v) == 0 else out


def excess(v, k: float):
    """``G_k(v) = v - T_k(v)``."""
    return v - truncate(v, k)


@dataclass(frozen=True)
class Datum:
    kind: str = GAUSSIAN
    amplitude: float = 1.0
    width: float = 1.0

    def __post_init__(self):
        if self.kind not in (GAUSSIAN, BUMP, INDICATOR):
            raise ValueError(f"unknown datum kind {self.kind!r}")
        if not self.amplitude >= 0:
            raise ValueError("amplitude must be nonnegative")
        if not self.width > 0:
            raise ValueError("width must be positive")

    def __call__(self, r: np.ndarray) -> np.ndarray:
        x = np.asarray(r, dtype=float) / self.width
        if self.kind == GAUSSIAN:
            prof = np.exp(-x * x)
        elif self.kind == BUMP:
            inside = x < 1
            prof = np.zeros_like(x)
            prof[inside] = np.exp(1.0 - 1.0 / (1.0 - x[inside] ** 2))
        else:
            prof = (x <= 1).astype(float)
        return self.amplitude * prof


@dataclass
class RadialState:
    grid: RadialGrid
    values: np.ndarray
    time: float = 0.0
    clipped: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.nr + 2,):
            raise ValueError("values must have one entry per grid node")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("state has non-finite entries")
        if np.any(self.values < 0):
            raise ValueError("state must be nonnegative")
        if self.values[-1] != 0:
            raise ValueError("boundary value must be zero")


@dataclass(frozen=True)
class RunConfig:
    manifold: ManifoldSpec
    params: ProblemParams
    grid: RadialGrid
    datum: Datum = Datum()
    t_end: float = 10.0
    dt0: float = 1e-4
    truncation_k: float = 1e12
    reaction_on: bool = True
    diffusion_on: bool = True
    blowup_threshold: float = 1e8
    record_qs: Tuple[float, ...] = (2.0,)
    dt_rel: float = 0.02
    outputs_per_decade: int = 20
    output_start: Optional[float] = None
    solver: str = "picard"
    max_iter: int = 50
    tol: float = 1e-10
    eps_reg: Optional[float] = None

    def __post_init__(self):
        if self.manifold.dim != self.params.N:
            raise ValueError("manifold dimension and params.N differ")
        for name in ("t_end", "dt0", "truncation_k", "blowup_threshold", "dt_rel"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.solver not in ("picard", "newton"):
            raise ValueError(f"unknown solver {self.solver!r}")
        if self.outputs_per_decade < 1:
            raise ValueError("outputs_per_decade must be >= 1")
        if any(not (q >= 1) for q in self.record_qs):
            raise ValueError("record_qs must be >= 1")

    @property
    def regularization(self) -> float:
        if self.eps_reg is not None:
            return self.eps_reg
        return 1e-8 * max(1.0, self.datum.amplitude) / self.grid.R

    @property
    def norm_qs(self) -> List[float]:
        extra = [float(q) for q in self.record_qs if q != 1 and not math.isinf(q)]
        return [math.inf, 1.0] + sorted(set(extra))


def initial_state(config: RunConfig) -> RadialState:
    values = config.datum(config.grid.nodes)
    values[-1] = 0.0
    return RadialState(config.grid, values, 0.0)


# --- reaction ---------------------------------------------------------------


def reaction_flow(u: np.ndarray, dt: float, sigma: float, k: float) -> np.ndarray:
    """Exact flow of ``v' = T_k(v^sigma)`` over ``dt`` for nonnegative ``v``.

    Below ``k^{1/sigma}`` the ODE is the pure power law; above it the rate is
    the constant ``k``.  Zero is kept fixed.
    """
    u = np.asarray(u, dtype=float)
    out = u.copy()
    uk = k ** (1.0 / sigma)
    high = u >= uk
    out[high] = u[high] + k * dt
    low = (u > 0) & ~high
    if not np.any(low):
        return out
    v = u[low]
    if sigma == 1.0:
        t_hit = np.log(uk / v)
        grow = v * np.exp(np.minimum(dt, t_hit))
    else:
        a = 1.0 - sigma
        with np.errstate(over="ignore", divide="ignore"):
            va = v ** a
            t_hit = (uk ** a - va) / a
            base = va + a * np.minimum(dt, t_hit)
            grow = np.where(base > 0, np.abs(base) ** (1.0 / a), uk)
        # v**a overflows only for values far too small to move
        grow = np.where(np.isfinite(va), grow, v)
    grow = np.minimum(grow, uk)
    with np.errstate(invalid="ignore", over="ignore"):
        res = np.where(dt > t_hit, uk + k * (dt - t_hit), grow)
    out[low] = res
    return out


# --- diffusion --------------------------------------------------------------


class _Operator:
    """Finite-volume pieces for the unknowns at nodes ``0..nr``."""

    def __init__(self, manifold: ManifoldSpec, grid: RadialGrid):
        r = grid.nodes
        self.dr = grid.dr
        faces = 0.5 * (r[:-1] + r[1:])  # r_{j+1/2} for j = 0..nr
        self.mass = cell_weights(manifold, grid)[:-1] / manifold.omega
        self.area = density(manifold, faces)


def _plap_flux(g, p, eps):
    a = (g * g + eps * eps) ** ((p - 2) / 2)
    dflux = (g * g + eps * eps) ** ((p - 4) / 2) * ((p - 1) * g * g + eps * eps)
    return a * g, a, dflux


def _face_gradient(u, dr):
    # u holds nodes 0..nr; the boundary value is 0.
    return (np.append(u[1:], 0.0) - u) / dr


def _assemble(diag_c, upper_c, lower_c, rhs):
    n = diag_c.size
    ab = np.zeros((3, n))
    ab[0, 1:] = upper_c[:-1]
    ab[1] = diag_c
    ab[2, :-1] = lower_c[1:]
    return solve_banded((1, 1), ab, rhs, check_finite=False)


def _linear_step(op, w, dt, coef):
    """Solve ``mass (u - w)/dt = div(coef * grad u)`` for a face coefficient array."""
    c = dt * op.area * coef / op.dr  # per face j+1/2, j = 1..nr
    c_left = np.concatenate(([0.0], c[:-1]))  # face j-1/2; none left of the origin
    diag = op.mass + c + c_left
    # -c couples j to j+1, -c_left couples j to j-1
    return _assemble(diag, -c, -c_left, op.mass * w)


def _newton_step(op, w, dt, u, flux_and_derivs):
    """One Newton update for ``mass (u - w) - dt * div F(u) = 0``."""
    F, dF_right, dF_left = flux_and_derivs(u)
    divF = op.area * F - np.concatenate(([0.0], op.area[:-1] * F[:-1]))
    resid = op.mass * (u - w) - dt * divF
    # dF_right = dF/du_{j+1}, dF_left = dF/du_j for face j+1/2
    A = dt * op.area
    A_left = np.concatenate(([0.0], A[:-1]))
    dFl_prev = np.concatenate(([0.0], dF_left[:-1]))
    dFr_prev = np.concatenate(([0.0], dF_right[:-1]))
    diag = op.mass - A * dF_left + A_left * dFr_prev
    upper = -A * dF_right
    lower = A_left * dFl_prev
    return u - _assemble(diag, upper, lower, resid)


def diffusion_step(w: np.ndarray, dt: float, op: _Operator, params: ProblemParams,
                   eps: float, solver: str = "picard", max_iter: int = 50,
                   tol: float = 1e-10) -> np.ndarray:
    """Backward-Euler diffusion from values ``w`` at nodes ``0..nr``."""
    dr = op.dr
    plap = params.mode == PLAP
    expo = params.p if plap else params.m
    u = w.copy()
    for _ in range(max_iter):
        if solver == "picard":
            if plap:
                _, coef, _ = _plap_flux(_face_gradient(u, dr), expo, eps)
            else:
                right = np.append(u[1:], 0.0)
                num = right ** expo - u ** expo
                den = right - u
                safe = np.abs(den) > 1e-300
                mid = 0.5 * (right + u)
                coef = np.where(safe, num / np.where(safe, den, 1.0), expo * mid ** (expo - 1))
            new = _linear_step(op, w, dt, coef)
        else:
            if plap:
                def fd(v):
                    F, _, dF = _plap_flux(_face_gradient(v, dr), expo, eps)
                    return F, dF / dr, -dF / dr
            else:
                def fd(v):
                    vp = np.maximum(v, 0.0)
                    right = np.append(vp[1:], 0.0)
                    F = (right ** expo - vp ** expo) / dr
                    dR = np.append(expo * right[:-1] ** (expo - 1), 0.0) / dr
                    dL = -expo * vp ** (expo - 1) / dr
                    return F, dR, dL
            new = _newton_step(op, w, dt, u, fd)
        if not np.all(np.isfinite(new)):
            raise StepRejected("non-finite iterate")
        change = np.max(np.abs(new - u))
        u = new
        if change <= tol * max(np.max(np.abs(u)), 1e-300):
            return u
    raise StepRejected(f"inner solve did not converge in {max_iter} iterations")


# --- stepping and runs ------------------------------------------------------


def _advance(values: np.ndarray, dt: float, config: RunConfig, op: _Operator,
             weights: np.ndarray) -> Tuple[np.ndarray, float]:
    """Advance nodal values by ``dt``; return new values and clipped mass."""
    params = config.params
    u = values.copy()
    if config.reaction_on:
        u = reaction_flow(u, dt, params.sigma, config.truncation_k)
        u[-1] = 0.0
    if config.diffusion_on:
        inner = diffusion_step(u[:-1], dt, op, params, config.regularization,
                               config.solver, config.max_iter, config.tol)
        u = np.append(inner, 0.0)
    neg = u < 0
    clipped = float(np.dot(weights[neg], -u[neg])) if np.any(neg) else 0.0
    u[neg] = 0.0
    return u, clipped


def step(state: RadialState, dt: float, config: RunConfig) -> RadialState:
    """One splitting step; raises :class:`StepRejected` if the inner solve fails."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    op = _Operator(config.manifold, state.grid)
    weights = cell_weights(config.manifold, state.grid)
    values, clipped = _advance(state.values, dt, config, op, weights)
    return RadialState(state.grid, values, state.time + dt, state.clipped + clipped)


@dataclass
class SeriesRow:
    t: float
    dt: float
    norms: Dict[float, float]
    s_monitor: float


@dataclass
class RunRecord:
    config: RunConfig
    series: List[SeriesRow] = field(default_factory=list)
    status: str = COMPLETED
    t_stop: float = 0.0
    clipped_mass: float = 0.0
    initial_l1: float = 0.0
    steps: int = 0
    rejections: int = 0
    max_s: float = 0.0
    wallclock_s: float = 0.0
    final_state: Optional[RadialState] = None

    @property
    def t_star(self) -> Optional[float]:
        return self.t_stop if self.status == BLOWUP else None

    def column(self, q: float) -> Tuple[np.ndarray, np.ndarray]:
        """Recorded ``(t, ||u(t)||_q)`` pairs."""
        t = np.array([row.t for row in self.series])
        v = np.array([row.norms[float(q)] for row in self.series])
        return t, v


def output_times(config: RunConfig) -> np.ndarray:
    start = config.output_start if config.output_start is not None else config.t_end * 1e-4
    start = min(start, config.t_end)
    decades = math.log10(config.t_end / start)
    n = max(int(round(decades * config.outputs_per_decade)), 0)
    return np.geomspace(start, config.t_end, n + 1) if n > 0 else np.array([config.t_end])


def _norms(values, weights, qs) -> Dict[float, float]:
    out = {}
    for q in qs:
        if math.isinf(q):
            out[q] = float(np.max(values))
        else:
            out[q] = float(np.dot(weights, values ** q) ** (1.0 / q))
    return out


def run(config: RunConfig) -> RunRecord:
    """Integrate from ``t = 0`` to ``t_end`` with adaptive steps.

    ``dt`` halves on a rejected inner solve and grows by 1.2 after a success,
    never exceeding ``max(dt_rel * t, dt0)`` nor, with reaction on,
    ``0.5 * ||u||_inf / T_k(||u||_inf^sigma) / max(sigma - 1, 1)``; without
    truncation that is half the remaining blow-up time of the reaction ODE.
    """
    wall = time.perf_counter()
    grid, manifold, params = config.grid, config.manifold, config.params
    op = _Operator(manifold, grid)
    weights = cell_weights(manifold, grid)
    qs = config.norm_qs
    sigma = params.sigma

    u = initial_state(config).values
    rec = RunRecord(config=config)
    rec.initial_l1 = float(np.dot(weights, u))
    t, dt, s_mon = 0.0, config.dt0, 0.0
    rec.series.append(SeriesRow(0.0, 0.0, _norms(u, weights, qs), 0.0))
    outs = list(output_times(config))
    out_idx = 0
    status = COMPLETED

    while t < config.t_end:
        umax = float(np.max(u))
        cap = max(config.dt_rel * t, config.dt0)
        if config.reaction_on and umax > 0:
            rate = min(umax ** sigma, config.truncation_k)
            cap = min(cap, 0.5 * umax / rate / max(sigma - 1.0, 1.0))
        dt = min(dt, cap)
        target = outs[out_idx] if out_idx < len(outs) else config.t_end
        h = min(dt, target - t)
        hit = h == target - t
        try:
            new, clipped = _advance(u, h, config, op, weights)
        except StepRejected:
            rec.rejections += 1
            dt = 0.5 * h
            if dt < DT_MIN:
                status = DT_COLLAPSE
                break
            continue
        u = new
        t = target if hit else t + h
        rec.steps += 1
        rec.clipped_mass += clipped
        umax = float(np.max(u))
        s_mon = max(s_mon, t * umax ** (sigma - 1.0))
        if hit:
            out_idx += 1
            rec.series.append(SeriesRow(t, h, _norms(u, weights, qs), s_mon))
        if umax >= config.blowup_threshold or not np.isfinite(umax):
            status = BLOWUP
            if not hit:
                rec.series.append(SeriesRow(t, h, _norms(u, weights, qs), s_mon))
            break
        if not hit or h >= dt:
            dt = 1.2 * dt
    rec.status = status
    rec.t_stop = t
    rec.max_s = s_mon
    rec.final_state = RadialState(grid, u, t, rec.clipped_mass) if np.all(np.isfinite(u)) else None
    rec.wallclock_s = time.perf_counter() - wall
    return rec


def s_monitor(record_or_series, sigma: float) -> np.ndarray:
    """Running supremum of ``t * ||u(t)||_inf^{sigma-1}`` over recorded rows.

    Accepts a :class:`RunRecord` or a sequence of ``(t, linf)`` pairs.
    """
    if isinstance(record_or_series, RunRecord):
        pairs = [(row.t, row.norms[math.inf]) for row in record_or_series.series]
    else:
        pairs = list(record_or_series)
    vals = np.array([t * linf ** (sigma - 1.0) for t, linf in pairs])
    return np.maximum.accumulate(vals) if vals.size else vals


def with_overrides(config: RunConfig, **changes) -> RunConfig:
    return replace(config, **changes)
