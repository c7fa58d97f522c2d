"""Closed-form exponents, iteration ladders and smallness thresholds.

Everything here is plain arithmetic on a :class:`ProblemParams`.  The
porous-medium formulas coincide with the p-Laplacian ones under the formal
substitution

    ============  ====================  ===============
    quantity      p-Laplacian (plap)    PME
    ============  ====================  ===============
    ``P``         ``p``                 ``2``
    ``D``         ``p - 2``             ``m - 1``
    ``E``         ``sigma - p + 1``     ``sigma - m``
    ============  ====================  ===============

so most functions are written once in terms of ``P``, ``D`` and ``E``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

PLAP = "plap"
PME = "pme"

SOBOLEV_ONLY = "sobolev_only"
SOBOLEV_POINCARE = "sobolev_poincare"

FAMILIES = ("thm1ii", "prop42", "thm2", "thm3", "prop71", "pme_thm")

CORRECTED = "corrected"
AS_WRITTEN = "as_written"

INF = math.inf


class ParameterError(ValueError):
    """Raised when parameters violate the admissibility gates of a formula."""


@dataclass(frozen=True)
class ProblemParams:
    """Physical parameters of the reaction-diffusion problem.

    ``p`` is used in ``plap`` mode and ``m`` in ``pme`` mode.  ``C_sp`` and
    ``C_p`` are the Sobolev and Poincare constants, taken as given inputs.
    """

    mode: str
    sigma: float
    N: int
    p: Optional[float] = None
    m: Optional[float] = None
    C_sp: float = 1.0
    C_p: Optional[float] = None

    def __post_init__(self):
        N = self.N
        if int(N) != N or N < 1:
            raise ParameterError(f"N must be a positive integer, got {N}")
        if not self.C_sp > 0:
            raise ParameterError("C_sp must be positive")
        if self.C_p is not None and not self.C_p > 0:
            raise ParameterError("C_p must be positive")
        if self.mode == PLAP:
            p = self.p
            if p is None or not 2 * N / (N + 1) < p < N:
                raise ParameterError(f"plap mode needs 2N/(N+1) < p < N, got p={p}, N={N}")
            if not self.sigma > p - 1:
                raise ParameterError(f"plap mode needs sigma > p-1, got sigma={self.sigma}")
        elif self.mode == PME:
            m = self.m
            if m is None or not m > 1:
                raise ParameterError(f"pme mode needs m > 1, got m={m}")
            if not self.sigma > m:
                raise ParameterError(f"pme mode needs sigma > m, got sigma={self.sigma}")
            if N < 3:
                raise ParameterError("pme mode needs N >= 3")
        else:
            raise ParameterError(f"unknown mode {self.mode!r}")

    # formal substitution table
    @property
    def P(self) -> float:
        return self.p if self.mode == PLAP else 2.0

    @property
    def D(self) -> float:
        return self.p - 2.0 if self.mode == PLAP else self.m - 1.0

    @property
    def E(self) -> float:
        return self.sigma - self.p + 1.0 if self.mode == PLAP else self.sigma - self.m

    @property
    def fujita_exponent(self) -> float:
        """``p - 1 + p/N`` (plap) or ``m + 2/N`` (pme)."""
        if self.mode == PLAP:
            return self.p - 1 + self.p / self.N
        return self.m + 2 / self.N

    @property
    def above_fujita(self) -> bool:
        return self.sigma > self.fujita_exponent


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ParameterError(msg)


def _require_plap(params: ProblemParams, what: str) -> None:
    _require(params.mode == PLAP, f"{what} is defined for the p-Laplacian only")


def critical_exponent(params: ProblemParams) -> float:
    """``sigma_0`` in plap mode, ``sigma_1`` in pme mode."""
    return params.E * params.N / params.P


def sigma_zero(params: ProblemParams) -> float:
    _require_plap(params, "sigma_0")
    return (params.sigma - params.p + 1) * params.N / params.p


def sigma_one(params: ProblemParams) -> float:
    _require(params.mode == PME, "sigma_1 is defined for the porous medium equation only")
    return (params.sigma - params.m) * params.N / 2


def alpha_smoothing(params: ProblemParams) -> float:
    """L^1 -> L^inf decay exponent ``N / (N*D + P)``."""
    return params.N / (params.N * params.D + params.P)


def _thm1_pair(q: float, params: ProblemParams) -> Tuple[float, float]:
    s, N, P, D, E = params.sigma, params.N, params.P, params.D, params.E
    gamma = (1 - N * E / (P * q)) / (s - 1)
    delta = E / (s - 1) * (1 + N * D / (P * q))
    return gamma, delta


def _prop42_pair(q0: float, q: float, params: ProblemParams) -> Tuple[float, float]:
    N, P, D = params.N, params.P, params.D
    gamma = (1 / q0 - 1 / q) * N * q0 / (P * q0 + N * D)
    delta = q0 / q * (q + N * D / P) / (q0 + N * D / P)
    return gamma, delta


def _require_gate(params: ProblemParams, family: str) -> None:
    _require(params.above_fujita,
             f"{family} needs sigma > {params.fujita_exponent:.6g} (got {params.sigma})")


def smoothing_pair(family: str, q0_or_s: Optional[float], q: float,
                   params: ProblemParams) -> Tuple[float, float]:
    """Return ``(gamma, delta)`` in ``||u(t)||_q <= C t^-gamma ||u0||^delta``.

    ``q0_or_s`` is the datum exponent for ``prop42``/``prop71`` and ``s`` for
    ``thm3``; ``thm1ii``, ``pme_thm`` and ``thm2`` fix it to the critical
    exponent and ignore the argument.  ``q = inf`` is accepted only by
    ``thm2``.
    """
    if family not in FAMILIES:
        raise ParameterError(f"unknown family {family!r}")
    q = float(q)
    if family == "thm2":
        _require(math.isinf(q), "thm2 is an L^inf estimate; pass q=inf")
        _require_gate(params, family)
        s = params.sigma
        return 1 / (s - 1), params.E / (s - 1)
    _require(not math.isinf(q), f"{family} does not extend to q = inf")
    if family in ("thm1ii", "pme_thm"):
        _require((family == "thm1ii") == (params.mode == PLAP),
                 f"{family} does not apply in {params.mode} mode")
        _require_gate(params, family)
        _require(q >= critical_exponent(params), f"{family} needs q >= critical exponent")
        return _thm1_pair(q, params)
    _require(q0_or_s is not None, f"{family} needs a datum exponent")
    q0 = float(q0_or_s)
    if family == "prop42":
        _require_gate(params, family)
        _require(1 <= q0 <= q, f"prop42 needs 1 <= q0 <= q, got q0={q0}, q={q}")
        return _prop42_pair(q0, q, params)
    _require(params.D > 0, f"{family} needs p > 2 (m > 1)")
    if family == "thm3":
        _require(q0 > max(critical_exponent(params), 1.0), "thm3 needs s > max(sigma_0, 1)")
        _require(q >= q0, "thm3 needs q >= s")
    else:
        _require(1 < q0 <= q, f"prop71 needs 1 < q0 <= q, got q0={q0}, q={q}")
    return q0 / params.D * (1 / q0 - 1 / q), q0 / q


def beta_qs(s: float, q: float, params: ProblemParams) -> float:
    """Time exponent of the L^s -> L^inf bound under Sobolev + Poincare."""
    _require(params.D > 0, "beta_qs needs p > 2 (m > 1)")
    _require(q >= s > max(critical_exponent(params), 1.0), "beta_qs needs q >= s > max(sigma_0, 1)")
    N, P, D = params.N, params.P, params.D
    return (1 - P * s / (N * D + P * q)) / D


def linfty_bound_exponents(r: float, params: ProblemParams) -> Tuple[float, float]:
    """``(N/(N(p-2)+pr), p/(N(p-2)+pr))`` of the L^r -> L^inf level-set bound."""
    _require(r >= 1, "r must be >= 1")
    denom = params.N * params.D + params.P * r
    return params.N / denom, params.P / denom


# --- iteration ladders ------------------------------------------------------


def qn_sequence(q0: float, n: int, params: ProblemParams) -> float:
    """Sobolev ladder ``q_n = N/(N-p) (p + q_{n-1} - 2)`` by recursion."""
    _require_plap(params, "the Sobolev ladder")
    _require(q0 > 1, "q0 must exceed 1")
    _require(n >= 0, "n must be nonnegative")
    ratio = params.N / (params.N - params.p)
    q = float(q0)
    for _ in range(n):
        q = ratio * (params.p + q - 2)
    return q


def qn_closed_form(q0: float, n: int, params: ProblemParams) -> float:
    _require_plap(params, "the Sobolev ladder")
    ratio = params.N / (params.N - params.p)
    geometric = sum(ratio ** i for i in range(n))
    return ratio ** n * q0 + ratio * (params.p - 2) * geometric


def qm_sequence(q0: float, m_idx: int, params: ProblemParams) -> float:
    """Poincare ladder ``q_m = q0 + m (p - 2)``."""
    _require_plap(params, "the Poincare ladder")
    _require(params.p > 2, "the Poincare ladder needs p > 2")
    _require(q0 > 1, "q0 must exceed 1")
    return q0 + m_idx * (params.p - 2)


def _ladder_until(first: float, step, q: float, cap: int = 10_000):
    """Ladder values up to and including the first one that reaches ``q``."""
    out = [first]
    while out[-1] < q:
        out.append(step(out[-1]))
        if len(out) > cap:
            raise ParameterError("ladder does not reach q")
    return out


def sobolev_ladder(q0: float, q: float, params: ProblemParams):
    ratio = params.N / (params.N - params.p)
    return _ladder_until(q0, lambda x: ratio * (params.p + x - 2), q)


def poincare_ladder(q0: float, q: float, params: ProblemParams):
    return _ladder_until(q0, lambda x: x + params.p - 2, q)


# --- smallness thresholds ---------------------------------------------------


def _energy_factor(qn: float, p: float) -> float:
    return (p * (qn - 1) ** (1 / p) / (p + qn - 2)) ** p


def _sigma0_factor(params: ProblemParams, mode: str) -> float:
    p, s0 = params.p, sigma_zero(params)
    denom = p + s0 - 2 if mode == CORRECTED else p - s0 - 2
    _require(denom != 0, "threshold denominator vanishes")
    base = p * (s0 - 1) ** (1 / p) / denom
    value = base ** p
    if isinstance(value, complex) or not value > 0:
        raise ParameterError("threshold is not a positive real for these parameters "
                             f"in {mode} mode")
    return value


def _thm1_threshold_gates(params: ProblemParams) -> None:
    _require_plap(params, "eps_0 thresholds")
    _require_gate(params, "eps_0")


def threshold_eps0(q: float, q0: float, params: ProblemParams, mode: str = CORRECTED) -> float:
    """Explicit smallness level for the L^{q0} -> L^q Moser iteration.

    ``corrected`` uses ``p + sigma_0 - 2`` in the second factor;
    ``as_written`` keeps the literal ``p - sigma_0 - 2``.
    """
    _thm1_threshold_gates(params)
    _require(mode in (CORRECTED, AS_WRITTEN), f"unknown mode {mode!r}")
    _require(q0 > 1 and q >= q0, "need q >= q0 > 1")
    p = params.p
    ladder_min = min(_energy_factor(qn, p) for qn in sobolev_ladder(q0, q, params))
    inner = min(ladder_min, _sigma0_factor(params, mode)) * params.C_sp ** p / 2
    return inner ** (1 / params.E)


def threshold_eps_bar0(q: float, params: ProblemParams, mode: str = CORRECTED) -> float:
    _thm1_threshold_gates(params)
    _require(q > 1, "need q > 1")
    p = params.p
    inner = min(_energy_factor(q, p), _sigma0_factor(params, mode)) * params.C_sp ** p
    return inner ** (1 / params.E)


def threshold_eps_hat0(q: float, params: ProblemParams, mode: str = CORRECTED) -> float:
    return threshold_eps0(q, sigma_zero(params), params, mode)


def threshold_eps(q: float, params: ProblemParams, mode: str = CORRECTED,
                  at: str = "q") -> float:
    """``eps_bar0 ^ eps_hat0`` with ``eps_hat0`` taken at ``q`` or at ``sigma_0``."""
    _require(at in ("q", "sigma0"), "at must be 'q' or 'sigma0'")
    q_hat = q if at == "q" else sigma_zero(params)
    return min(threshold_eps_bar0(q, params, mode), threshold_eps_hat0(q_hat, params, mode))


def theta_interp(q: float, params: ProblemParams) -> float:
    """Interpolation weight ``(p-1)(p+q-2) / (sigma(sigma+q-1))``."""
    _require_plap(params, "theta")
    p, s = params.p, params.sigma
    return (p - 1) * (p + q - 2) / (s * (s + q - 1))


def c_tilde(q: float, params: ProblemParams) -> float:
    p, s = params.p, params.sigma
    th = theta_interp(q, params)
    return (1 / params.C_sp) ** (p * (1 - th) * (s + q - 1) / (s + p + q - 2))


def _eps1_term(qm: float, params: ProblemParams, mode: str) -> float:
    p, s = params.p, params.sigma
    C = c_tilde(qm, params) * params.C_p ** (p * (p - 1) / s)
    weight = (p - 1) if mode == CORRECTED else p
    denom = s * (s + qm - 1) - weight * (p + qm - 2)
    _require(denom > 0, f"eps_1 exponent denominator is {denom:.6g} <= 0 at q={qm:.6g} "
                        f"({mode} mode)")
    return (_energy_factor(qm, p) * C) ** ((s + p + qm - 2) / denom)


def threshold_eps1(q: float, q0: float, params: ProblemParams, mode: str = AS_WRITTEN) -> float:
    """Smallness level of the Poincare-assisted iteration.

    Each ladder term is raised to its own exponent and the minimum is taken
    together with the term at ``sigma N / p``.  ``as_written`` keeps the
    literal ``p (p + q - 2)`` in the exponent denominator, ``corrected`` uses
    ``(p - 1)(p + q - 2)``.
    """
    _require_plap(params, "eps_1")
    _require(params.p > 2, "eps_1 needs p > 2")
    _require(params.C_p is not None, "eps_1 needs the Poincare constant C_p")
    _require(mode in (CORRECTED, AS_WRITTEN), f"unknown mode {mode!r}")
    _require(q0 > 1 and q >= q0, "need q >= q0 > 1")
    terms = [_eps1_term(qm, params, mode) for qm in poincare_ladder(q0, q, params)]
    terms.append(_eps1_term(params.sigma * params.N / params.p, params, mode))
    return min(terms)


# --- De Giorgi bookkeeping --------------------------------------------------


def _degiorgi_gates(a1, a2, tau1, tau2):
    _require(a1 > a2 > 0, "need a1 > a2 > 0")
    _require(tau1 > tau2 > 0, "need tau1 > tau2 > 0")


def degiorgi_sequences(a1: float, a2: float, tau1: float, tau2: float,
                       i: int) -> Tuple[float, float]:
    _degiorgi_gates(a1, a2, tau1, tau2)
    _require(i >= 0, "i must be nonnegative")
    h = 2.0 ** (-i)
    return a2 + (a1 - a2) * h, tau2 + (tau1 - tau2) * h


def degiorgi_c1(S_t: float, tau1: float, tau2: float, a1: float, a2: float) -> float:
    _degiorgi_gates(a1, a2, tau1, tau2)
    _require(S_t >= 0, "S(t) must be nonnegative")
    return 1 / (tau1 - tau2) + S_t / tau1 * 2 * a1 / (a1 - a2)


# --- reports ----------------------------------------------------------------


@dataclass
class ExponentReport:
    critical: float
    alpha: float
    gamma_q: Dict[float, float] = field(default_factory=dict)
    delta_q: Dict[float, float] = field(default_factory=dict)
    beta_qs: Optional[float] = None
    thresholds: Dict[str, float] = field(default_factory=dict)
    regime: str = SOBOLEV_ONLY
    gate: bool = False
    linf_rate: Optional[Tuple[float, float]] = None


def exponent_report(params: ProblemParams, qs=(), s: Optional[float] = None,
                    q_beta: Optional[float] = None) -> ExponentReport:
    """Collect the exponents that apply to ``params``.

    ``qs`` feed the L^{crit} -> L^q pair (when above the Fujita exponent) or the
    L^s -> L^q pair (when ``s`` is given and ``D > 0``).
    """
    crit = critical_exponent(params)
    rep = ExponentReport(critical=crit, alpha=alpha_smoothing(params), gate=params.above_fujita,
                         regime=SOBOLEV_ONLY if params.C_p is None else SOBOLEV_POINCARE)
    family = "thm1ii" if params.mode == PLAP else "pme_thm"
    if rep.gate:
        rep.linf_rate = smoothing_pair("thm2", None, INF, params)
    for q in qs:
        if rep.gate and q >= crit:
            rep.gamma_q[q], rep.delta_q[q] = smoothing_pair(family, None, q, params)
        elif s is not None and params.D > 0:
            rep.gamma_q[q], rep.delta_q[q] = smoothing_pair("thm3", s, q, params)
    if s is not None and params.D > 0:
        rep.beta_qs = beta_qs(s, q_beta if q_beta is not None else s, params)
    if params.mode == PLAP and rep.gate:
        q_top = max([q for q in qs if q >= crit], default=crit)
        rep.thresholds["eps_tilde0"] = threshold_eps0(q_top, crit, params)
        rep.thresholds["eps_bar0"] = threshold_eps_bar0(q_top, params)
        rep.thresholds["eps_hat0"] = threshold_eps_hat0(q_top, params)
        rep.thresholds["eps"] = threshold_eps(q_top, params)
    if params.mode == PLAP and params.p > 2 and params.C_p is not None and s is not None:
        try:
            rep.thresholds["eps_tilde1"] = threshold_eps1(max([s, *qs]), s, params)
        except ParameterError:
            pass
    return rep


# --- identity suite ---------------------------------------------------------


@dataclass
class IdentityReport:
    samples: int
    residuals: Dict[str, float]
    tolerance: float = 1e-12

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values()) if self.residuals else 0.0

    @property
    def passed(self) -> bool:
        return self.max_residual <= self.tolerance


def _res(a: float, b: float) -> float:
    return abs(a - b) / max(1.0, abs(a), abs(b))


def random_thm1_params(rng: np.random.Generator, C_sp: float = 1.0) -> ProblemParams:
    """Draw a plap parameter set strictly above the Fujita exponent."""
    N = int(rng.integers(3, 11))
    lo, hi = 2 * N / (N + 1), N
    p = lo + (hi - lo) * rng.uniform(0.02, 0.98)
    sigma = p - 1 + p / N + rng.uniform(0.05, 3.0)
    return ProblemParams(PLAP, sigma=sigma, N=N, p=p, C_sp=C_sp)


def random_thm3_params(rng: np.random.Generator) -> ProblemParams:
    N = int(rng.integers(3, 11))
    p = 2 + (N - 2) * rng.uniform(0.02, 0.98)
    sigma = p - 1 + rng.uniform(0.05, 3.0)
    return ProblemParams(PLAP, sigma=sigma, N=N, p=p, C_sp=1.0, C_p=1.0)


def identity_suite(samples: int = 1000, seed: int = 0) -> IdentityReport:
    """Check the exponent identities linking the theorems to the iteration algebra.

    Residuals are relative, ``|a - b| / max(1, |a|, |b|)``; the suite passes when
    the largest one is at most 1e-12.
    """
    rng = np.random.default_rng(seed)
    worst: Dict[str, float] = {}

    def note(name, a, b):
        worst[name] = max(worst.get(name, 0.0), _res(a, b))

    for _ in range(samples):
        pr = random_thm1_params(rng)
        N, p, s = pr.N, pr.p, pr.sigma
        s0 = sigma_zero(pr)
        q = s0 * (1 + rng.uniform(1e-3, 10.0))
        g1, d1 = smoothing_pair("thm1ii", None, q, pr)
        g2, d2 = smoothing_pair("prop42", s0, q, pr)
        note("thm1ii_vs_prop42_gamma", g1, g2)
        note("thm1ii_vs_prop42_delta", d1, d2)
        denom = N * (p - 2) + p * q
        t_exp, m_exp = linfty_bound_exponents(q, pr)
        note("linf_time_exponent", t_exp + g2 * q * m_exp, 1 / (s - 1))
        note("linf_datum_exponent", d2 * p * q / denom, (s - p + 1) / (s - 1))
        note("blowup_time_cancellation",
             1 - N * (s - 1) / denom - g2 * p * q * (s - 1) / denom, 0.0)
        note("blowup_datum_cancellation", d2 * p * q * (s - 1) / denom, s - p + 1)

        # Interpolation step of the Moser ladder from q0 to q.
        q0 = 1 + rng.uniform(1e-3, 5.0)
        qq = q0 * (1 + rng.uniform(1e-3, 5.0))
        ladder = sobolev_ladder(q0, qq, pr)
        nbar = len(ladder) - 1
        if nbar > 0:
            A = (N / (N - p)) ** nbar - 1
            B = N * (p - 2) * A + p * q0 * (A + 1)
            th = q0 / qq * (ladder[-1] - qq) / (ladder[-1] - q0)
            gm, dm = _prop42_pair(q0, qq, pr)
            note("moser_time_exponent", N * A / B * (1 - th), gm)
            note("moser_datum_exponent", p * q0 * (A + 1) / B * (1 - th) + th, dm)

        n = int(rng.integers(0, 31))
        note("qn_closed_form", qn_sequence(q0, n, pr), qn_closed_form(q0, n, pr))

        pr3 = random_thm3_params(rng)
        N3, p3 = pr3.N, pr3.p
        s_exp = max(critical_exponent(pr3), 1.0) * (1 + rng.uniform(1e-3, 3.0))
        q3 = s_exp * (1 + rng.uniform(1e-3, 5.0))
        g3, _ = smoothing_pair("thm3", s_exp, q3, pr3)
        t3, _ = linfty_bound_exponents(q3, pr3)
        d3 = N3 * (p3 - 2) + p3 * q3
        note("beta_identity", t3 + g3 * p3 * q3 / d3, beta_qs(s_exp, q3, pr3))
    return IdentityReport(samples=samples, residuals=worst)
