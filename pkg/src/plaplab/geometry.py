"""Rotationally symmetric model manifolds.

A model manifold carries the metric ``dr^2 + psi(r)^2 dtheta^2`` on
``[0, inf) x S^{N-1}``.  Only two warping functions are supported:
``psi(r) = r`` (Euclidean space) and ``psi(r) = sinh(r)`` (hyperbolic space).
Radial functions are sampled on a uniform grid of a geodesic ball ``B_R``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import integrate, linalg, optimize

EUCLIDEAN = "euclidean"
HYPERBOLIC = "hyperbolic"


class GeometryError(ValueError):
    """Raised for inadmissible geometric inputs."""


def sphere_area(dim: int) -> float:
    """Area of the unit sphere S^{dim-1} in R^dim."""
    return 2.0 * math.pi ** (dim / 2.0) / math.gamma(dim / 2.0)


@dataclass(frozen=True)
class ManifoldSpec:
    kind: str
    dim: int

    def __post_init__(self):
        if self.kind not in (EUCLIDEAN, HYPERBOLIC):
            raise GeometryError(f"unknown manifold kind {self.kind!r}")
        if int(self.dim) != self.dim or self.dim < 3:
            raise GeometryError(f"dimension must be an integer >= 3, got {self.dim}")

    @property
    def omega(self) -> float:
        return sphere_area(self.dim)


@dataclass(frozen=True)
class RadialGrid:
    """Uniform grid ``r_j = j*dr`` for ``j = 0..nr+1`` with ``r_{nr+1} = R``."""

    R: float
    nr: int

    def __post_init__(self):
        if not self.R > 0:
            raise GeometryError(f"ball radius must be positive, got {self.R}")
        if int(self.nr) != self.nr or self.nr < 16:
            raise GeometryError(f"need at least 16 interior nodes, got {self.nr}")

    @property
    def dr(self) -> float:
        return self.R / (self.nr + 1)

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.nr + 2) * self.dr


def warping(manifold: ManifoldSpec, r):
    """Return ``(psi(r), psi'(r))``; accepts scalars or arrays."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0):
        raise GeometryError("radius must be nonnegative")
    if manifold.kind == EUCLIDEAN:
        psi, dpsi = r_arr.copy(), np.ones_like(r_arr)
    else:
        psi, dpsi = np.sinh(r_arr), np.cosh(r_arr)
    if np.ndim(r) == 0:
        return float(psi), float(dpsi)
    return psi, dpsi


def density(manifold: ManifoldSpec, r) -> np.ndarray:
    """Radial density ``psi(r)^{N-1}`` without the sphere-area factor."""
    psi, _ = warping(manifold, r)
    return np.asarray(psi, dtype=float) ** (manifold.dim - 1)


def quadrature_weights(manifold: ManifoldSpec, grid: RadialGrid) -> np.ndarray:
    """Trapezoid weights of the measure on the grid nodes.

    The origin carries zero weight because ``psi(0) = 0``; the end node gets
    the usual half weight.
    """
    w = grid.dr * manifold.omega * density(manifold, grid.nodes)
    w[-1] *= 0.5
    return w


_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


def cell_weights(manifold: ManifoldSpec, grid: RadialGrid) -> np.ndarray:
    """Measure of the cells ``[r_{j-1/2}, r_{j+1/2}]`` around each node.

    The origin owns ``[0, dr/2]`` and the boundary node ``[R - dr/2, R]``.
    Each cell is integrated with 8-point Gauss-Legendre.
    """
    r = grid.nodes
    edges = np.concatenate(([0.0], 0.5 * (r[:-1] + r[1:]), [grid.R]))
    lo, hi = edges[:-1], edges[1:]
    mid, half = 0.5 * (hi + lo), 0.5 * (hi - lo)
    pts = mid[:, None] + half[:, None] * _GL_X[None, :]
    return manifold.omega * half * (density(manifold, pts) @ _GL_W)


def _norm(values: np.ndarray, weights: np.ndarray, q: float) -> float:
    if q < 1:
        raise GeometryError(f"q must be >= 1 or inf, got {q}")
    if math.isinf(q):
        return float(np.max(np.abs(values))) if values.size else 0.0
    return float(np.dot(weights, np.abs(values) ** q) ** (1.0 / q))


def lq_norm(state, manifold: ManifoldSpec, q: float) -> float:
    """L^q norm of a radial state on its ball, trapezoid quadrature.

    ``state`` is anything with ``values`` and ``grid`` attributes (normally a
    :class:`plaplab.dynamics.RadialState`).
    """
    values = np.asarray(state.values, dtype=float)
    if np.any(values < 0):
        raise GeometryError("state values must be nonnegative")
    return _norm(values, quadrature_weights(manifold, state.grid), float(q))


def ball_volume(manifold: ManifoldSpec, R: float) -> float:
    if not R > 0:
        raise GeometryError(f"radius must be positive, got {R}")
    n = manifold.dim
    if manifold.kind == EUCLIDEAN:
        f = lambda r: r ** (n - 1)
    else:
        f = lambda r: math.sinh(r) ** (n - 1)
    val, _ = integrate.quad(f, 0.0, R, epsabs=0.0, epsrel=1e-12, limit=200)
    return manifold.omega * val


# --- functional inequalities -------------------------------------------------


def _bump_family(grid: RadialGrid, rng: np.random.Generator, size: int):
    """Random compactly supported radial bumps and their r-derivatives.

    Each bump is ``(1 - ((r - c)/w)^2)^3`` on ``|r - c| < w``, with support
    kept inside ``[0, R)``.
    """
    r = grid.nodes
    R = grid.R
    phis, dphis = [], []
    for _ in range(size):
        w = rng.uniform(0.02, 0.5) * R
        c = rng.uniform(0.0, R - w)
        x = (r - c) / w
        inside = np.abs(x) < 1.0
        base = np.where(inside, 1.0 - x * x, 0.0)
        phis.append(base ** 3)
        dphis.append(np.where(inside, -6.0 * x * base ** 2 / w, 0.0))
    return np.array(phis), np.array(dphis)


def _quotient(coef, phis, dphis, weights, p, qd):
    v = coef @ phis
    dv = coef @ dphis
    num = _norm(dv, weights, p)
    den = _norm(v, weights, qd)
    return num / den if den > 0 else math.inf


def _minimize_quotient(phis, dphis, weights, p, qd, rng) -> float:
    k = phis.shape[0]
    if p == 2 and qd == 2:
        # Quadratic in both numerator and denominator: generalized eigenproblem.
        B = (phis * weights) @ phis.T
        scale = 1.0 / np.sqrt(np.diag(B))
        phis, dphis = phis * scale[:, None], dphis * scale[:, None]
        A = (dphis * weights) @ dphis.T
        B = (phis * weights) @ phis.T
        # Drop near-dependent directions before the generalized solve.
        bval, bvec = linalg.eigh(B)
        keep = bval > 1e-10 * bval[-1]
        P = bvec[:, keep] / np.sqrt(bval[keep])
        _, vecs = linalg.eigh(P.T @ A @ P)
        coef = P @ vecs[:, 0]
        # Re-evaluate on the actual function so the value is an honest quotient.
        return _quotient(coef, phis, dphis, weights, p, qd)
    # Nonnegative mixtures keep the search away from sign cancellations.
    obj = lambda a: _quotient(a * a, phis, dphis, weights, p, qd)
    x0 = rng.uniform(0.5, 1.5, size=k)
    res = optimize.minimize(obj, x0, method="Nelder-Mead",
                            options={"maxiter": 400 * k, "xatol": 1e-6, "fatol": 1e-9})
    return float(min(res.fun, obj(x0)))


def _ratio_floor(manifold, p, qd, grid, trials, seed, family_size):
    rng = np.random.default_rng(seed)
    weights = quadrature_weights(manifold, grid)
    best = math.inf
    for _ in range(trials):
        phis, dphis = _bump_family(grid, rng, family_size)
        best = min(best, _minimize_quotient(phis, dphis, weights, p, qd, rng))
    return best


def poincare_rayleigh(manifold: ManifoldSpec, p: float, grid: RadialGrid,
                      trials: int = 200, seed: int = 0, family_size: int = 6) -> float:
    """Smallest observed ``||grad v||_p / ||v||_p`` over random radial mixtures.

    Every test function is admissible, so the result is an upper bound for the
    best Poincare constant; on hyperbolic space the sharp value is
    ``(N-1)/p``.  Euclidean space has no Poincare inequality and is rejected.
    """
    if manifold.kind != HYPERBOLIC:
        raise GeometryError("the Poincare inequality fails on Euclidean space")
    if not 1 < p < manifold.dim:
        raise GeometryError(f"need 1 < p < N, got p={p}")
    return _ratio_floor(manifold, p, p, grid, trials, seed, family_size)


def sobolev_exponent(p: float, dim: int) -> float:
    return p * dim / (dim - p)


def sobolev_ratio_floor(manifold: ManifoldSpec, p: float, grid: RadialGrid,
                        trials: int = 50, seed: int = 0, family_size: int = 4) -> float:
    """Smallest observed ``||grad v||_p / ||v||_{p*}`` over random radial mixtures.

    Any Sobolev constant ``C_sp`` supplied to the model must not exceed this.
    """
    n = manifold.dim
    if not 2 * n / (n + 1) < p < n:
        raise GeometryError(f"need 2N/(N+1) < p < N, got p={p}, N={n}")
    return _ratio_floor(manifold, p, sobolev_exponent(p, n), grid, trials, seed, family_size)


def sobolev_ratio(manifold: ManifoldSpec, p: float, grid: RadialGrid,
                  profile: Callable[[np.ndarray], np.ndarray],
                  dprofile: Optional[Callable[[np.ndarray], np.ndarray]] = None) -> float:
    """Sobolev quotient of a single radial profile (derivative by differences if absent)."""
    n = manifold.dim
    r = grid.nodes
    v = np.asarray(profile(r), dtype=float)
    dv = np.gradient(v, grid.dr) if dprofile is None else np.asarray(dprofile(r), dtype=float)
    w = quadrature_weights(manifold, grid)
    return _norm(dv, w, p) / _norm(v, w, sobolev_exponent(p, n))


def validate_constants(manifold: ManifoldSpec, p: float, grid: RadialGrid, C_sp: float,
                       C_p: Optional[float] = None, trials: int = 20, seed: int = 0) -> None:
    """Reject user constants larger than the numerically observed quotient floors."""
    floor = sobolev_ratio_floor(manifold, p, grid, trials=trials, seed=seed)
    if C_sp > floor:
        raise GeometryError(f"C_sp={C_sp} exceeds observed Sobolev floor {floor:.6g}")
    if C_p is not None:
        pfloor = poincare_rayleigh(manifold, p, grid, trials=trials, seed=seed)
        if C_p > pfloor:
            raise GeometryError(f"C_p={C_p} exceeds observed Poincare floor {pfloor:.6g}")
