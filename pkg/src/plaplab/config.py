"""Flat ``section.key = value`` configuration documents.

One key per line, ``#`` starts a comment.  Every key has a documented
default; unknown keys are rejected and the physical parameter gates are
re-checked whenever a document is turned into a run configuration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Mapping, Optional, Tuple

from . import exponents as ex
from .dynamics import GAUSSIAN, Datum, RunConfig
from .geometry import EUCLIDEAN, ManifoldSpec, RadialGrid


class ConfigError(ValueError):
    pass


def fmt_number(x: float) -> str:
    """Shortest round-trip text for ``x`` with integral values trimmed (3.0 -> 3)."""
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if x.is_integer() and abs(x) < 1e16:
        return str(int(x))
    return repr(x)


def _float(text: str) -> float:
    return float(text)


def _opt_float(text: str) -> Optional[float]:
    return None if text.lower() in ("none", "auto", "") else float(text)


def _int(text: str) -> int:
    v = float(text)
    if not v.is_integer():
        raise ValueError(f"expected an integer, got {text!r}")
    return int(v)


def _bool(text: str) -> bool:
    t = text.lower()
    if t in ("true", "yes", "on", "1"):
        return True
    if t in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _str(text: str) -> str:
    return text


def _floats(text: str) -> Tuple[float, ...]:
    return tuple(float(t) for t in text.replace(" ", "").split(",") if t)


def _strs(text: str) -> Tuple[str, ...]:
    return tuple(t for t in text.replace(" ", "").split(",") if t)


def _show(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return fmt_number(value)
    if isinstance(value, tuple):
        return ",".join(_show(v) for v in value)
    return str(value)


@dataclass(frozen=True)
class Key:
    name: str
    parse: Callable[[str], object]
    default: object
    help: str

    @property
    def flag(self) -> str:
        return self.name.rsplit(".", 1)[-1]


KEYS: List[Key] = [
    Key("params.mode", _str, ex.PLAP, "plap (p-Laplacian) or pme (porous medium)"),
    Key("params.p", _opt_float, 3.0, "p-Laplacian exponent, 2N/(N+1) < p < N"),
    Key("params.m", _opt_float, None, "porous-medium exponent m > 1"),
    Key("params.sigma", _float, 3.0, "reaction exponent"),
    Key("params.N", _int, 4, "dimension N >= 3"),
    Key("params.C_sp", _float, 1.0, "Sobolev constant"),
    Key("params.C_p", _opt_float, None, "Poincare constant (none on Euclidean space)"),
    Key("manifold.kind", _str, EUCLIDEAN, "euclidean or hyperbolic"),
    Key("grid.R", _opt_float, None, "ball radius; none means 20 x datum width"),
    Key("grid.nr", _int, 400, "interior radial nodes"),
    Key("datum.profile", _str, GAUSSIAN, "gaussian, bump or indicator"),
    Key("datum.amplitude", _float, 1e-2, "datum amplitude"),
    Key("datum.width", _float, 3.0, "gaussian width or bump/indicator radius"),
    Key("run.t_end", _float, 50.0, "final time"),
    Key("run.dt0", _float, 1e-4, "initial and minimum capped step"),
    Key("run.dt_rel", _float, 0.02, "step cap relative to t"),
    Key("run.truncation_k", _float, 1e12, "truncation level k of the reaction"),
    Key("run.reaction_on", _bool, True, "include the reaction term"),
    Key("run.diffusion_on", _bool, True, "include the diffusion term"),
    Key("run.blowup_threshold", _float, 1e8, "sup-norm level declared blow-up"),
    Key("run.record_qs", _floats, (2.0,), "extra L^q norms recorded (inf and 1 always)"),
    Key("run.outputs_per_decade", _int, 20, "output times per decade of t"),
    Key("run.output_start", _opt_float, None, "first output time; none means t_end/1e4"),
    Key("run.solver", _str, "picard", "picard or newton inner solver"),
    Key("run.max_iter", _int, 50, "inner iterations before a step is rejected"),
    Key("run.tol", _float, 1e-10, "inner relative tolerance"),
    Key("run.eps_reg", _opt_float, None, "gradient regularization; none means 1e-8 max(1,A)/R"),
    Key("query.qs", _floats, (), "target exponents q for exponents/thresholds"),
    Key("query.q0", _opt_float, None, "datum exponent; none means the critical exponent"),
    Key("query.s", _opt_float, None, "datum exponent s for the L^s -> L^q family"),
    Key("query.threshold_mode", _str, ex.CORRECTED, "corrected or as_written for eps_0"),
    Key("query.eps1_mode", _str, ex.AS_WRITTEN, "as_written or corrected for eps_1"),
    Key("query.families", _strs, ("thm1i:inf",), "verify families as family:q[:q0]"),
    Key("sweep.axis", _str, "amplitude", "amplitude, sigma, p, m or N"),
    Key("sweep.values", _floats, (), "comma separated axis values"),
    Key("sweep.workers", _int, 1, "worker processes"),
    Key("seed", _int, 0, "seed for randomized checks"),
]

KEY_INDEX: Dict[str, Key] = {k.name: k for k in KEYS}
RUN_SECTIONS = ("params", "manifold", "grid", "datum", "run")


def defaults() -> Dict[str, object]:
    return {k.name: k.default for k in KEYS}


def parse_values(pairs: Mapping[str, str], base: Optional[Dict[str, object]] = None
                 ) -> Dict[str, object]:
    """Parse textual ``key -> value`` pairs on top of ``base`` (defaults if omitted)."""
    doc = dict(base) if base is not None else defaults()
    for name, text in pairs.items():
        key = KEY_INDEX.get(name)
        if key is None:
            raise ConfigError(f"unknown config key {name!r}")
        try:
            doc[name] = key.parse(str(text).strip())
        except ValueError as exc:
            raise ConfigError(f"bad value for {name}: {exc}") from None
    return doc


def parse_text(text: str, base: Optional[Dict[str, object]] = None) -> Dict[str, object]:
    pairs = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'section.key = value'")
        name, value = (s.strip() for s in line.split("=", 1))
        if name in pairs:
            raise ConfigError(f"line {lineno}: duplicate key {name!r}")
        pairs[name] = value
    return parse_values(pairs, base)


def load(path: str, base: Optional[Dict[str, object]] = None) -> Dict[str, object]:
    with open(path) as fh:
        return parse_text(fh.read(), base)


def dump(doc: Mapping[str, object]) -> str:
    return "".join(f"{k.name} = {_show(doc[k.name])}\n" for k in KEYS if k.name in doc)


def to_flat(doc: Mapping[str, object]) -> Dict[str, str]:
    return {k.name: _show(doc[k.name]) for k in KEYS if k.name in doc}


def problem_params(doc: Mapping[str, object]) -> ex.ProblemParams:
    mode = doc["params.mode"]
    try:
        return ex.ProblemParams(
            mode=mode, sigma=doc["params.sigma"], N=doc["params.N"],
            p=doc["params.p"] if mode == ex.PLAP else None,
            m=doc["params.m"] if mode == ex.PME else None,
            C_sp=doc["params.C_sp"], C_p=doc["params.C_p"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def run_config(doc: Mapping[str, object]) -> RunConfig:
    """Build a validated :class:`RunConfig`; gates are re-checked here."""
    params = problem_params(doc)
    try:
        datum = Datum(doc["datum.profile"], doc["datum.amplitude"], doc["datum.width"])
        R = doc["grid.R"] if doc["grid.R"] is not None else 20.0 * datum.width
        return RunConfig(
            manifold=ManifoldSpec(doc["manifold.kind"], params.N),
            params=params,
            grid=RadialGrid(R, doc["grid.nr"]),
            datum=datum,
            t_end=doc["run.t_end"], dt0=doc["run.dt0"], dt_rel=doc["run.dt_rel"],
            truncation_k=doc["run.truncation_k"],
            reaction_on=doc["run.reaction_on"], diffusion_on=doc["run.diffusion_on"],
            blowup_threshold=doc["run.blowup_threshold"],
            record_qs=tuple(doc["run.record_qs"]),
            outputs_per_decade=doc["run.outputs_per_decade"],
            output_start=doc["run.output_start"],
            solver=doc["run.solver"], max_iter=doc["run.max_iter"], tol=doc["run.tol"],
            eps_reg=doc["run.eps_reg"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def config_to_flat(config: RunConfig) -> Dict[str, str]:
    """Flat textual echo of a run configuration (resolved values, all run keys)."""
    params = config.params
    doc = {
        "params.mode": params.mode, "params.p": params.p, "params.m": params.m,
        "params.sigma": params.sigma, "params.N": params.N,
        "params.C_sp": params.C_sp, "params.C_p": params.C_p,
        "manifold.kind": config.manifold.kind,
        "grid.R": config.grid.R, "grid.nr": config.grid.nr,
        "datum.profile": config.datum.kind, "datum.amplitude": config.datum.amplitude,
        "datum.width": config.datum.width,
        "run.t_end": config.t_end, "run.dt0": config.dt0, "run.dt_rel": config.dt_rel,
        "run.truncation_k": config.truncation_k, "run.reaction_on": config.reaction_on,
        "run.diffusion_on": config.diffusion_on,
        "run.blowup_threshold": config.blowup_threshold,
        "run.record_qs": tuple(config.record_qs),
        "run.outputs_per_decade": config.outputs_per_decade,
        "run.output_start": config.output_start, "run.solver": config.solver,
        "run.max_iter": config.max_iter, "run.tol": config.tol, "run.eps_reg": config.eps_reg,
    }
    return to_flat(doc)


def run_config_from_flat(flat: Mapping[str, str]) -> RunConfig:
    return run_config(parse_values(flat))
