"""Sectioned key=value run configuration.

A run is described by four sections so the spec file can be archived next to
its outputs:

    [domain]  dim, lengths, counts
    [model]   preset, variant, d1, d2, d3, a, b, alpha, beta, q, r, J, c
    [run]     dt, t_end, scheme, linear_tol, monitor_every, snapshot_every,
              probe, ic, seed
    [output]  dir

[model] and [run] are required. Unknown sections or keys are errors, not
warnings. An optional [sweep] section holds dotted-key override grids for the
sweep command and is ignored by the plain parser.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass

import numpy as np

from .grid import Domain, Field, make_grid, read_field
from .integrate import SolverConfig
from .model import HRParameters, State

_DOMAIN_KEYS = ("dim", "lengths", "counts")
_MODEL_KEYS = ("preset", "variant", "d1", "d2", "d3", "a", "b", "alpha", "beta",
               "q", "r", "J", "c")
_RUN_KEYS = ("dt", "t_end", "scheme", "linear_tol", "monitor_every",
             "snapshot_every", "probe", "ic", "seed")
_OUTPUT_KEYS = ("dir",)
_SECTION_KEYS = {
    "domain": _DOMAIN_KEYS,
    "model": _MODEL_KEYS,
    "run": _RUN_KEYS,
    "output": _OUTPUT_KEYS,
}

VARIANTS = ("full", "phr", "qhr", "ode")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ICSpec:
    """Initial-condition recipe: constant triple, seeded uniform noise, or snapshot."""

    kind: str  # constant | uniform | snapshot
    constant: tuple[float, float, float] | None = None
    lo: float = -1.0
    hi: float = 1.0
    prefix: str | None = None

    def to_string(self) -> str:
        if self.kind == "constant":
            return "constant:" + ",".join(repr(x) for x in self.constant)
        if self.kind == "uniform":
            return f"uniform:{self.lo!r},{self.hi!r}"
        return f"snapshot:{self.prefix}"


@dataclass(frozen=True)
class RunSpec:
    domain: Domain
    params: HRParameters
    variant: str
    solver: SolverConfig
    ic: ICSpec
    seed: int
    out_dir: str

    def to_text(self) -> str:
        return serialize_config(self)


def _parse_ic(text: str) -> ICSpec:
    kind, _, rest = text.partition(":")
    kind = kind.strip()
    if kind == "constant":
        vals = tuple(float(x) for x in rest.split(","))
        if len(vals) != 3:
            raise ConfigError(f"ic constant needs 3 values, got {rest!r}")
        return ICSpec("constant", constant=vals)
    if kind == "uniform":
        parts = [float(x) for x in rest.split(",")]
        if len(parts) != 2 or parts[0] >= parts[1]:
            raise ConfigError(f"ic uniform needs lo,hi with lo < hi, got {rest!r}")
        return ICSpec("uniform", lo=parts[0], hi=parts[1])
    if kind == "snapshot":
        if not rest:
            raise ConfigError("ic snapshot needs a file prefix")
        return ICSpec("snapshot", prefix=rest.strip())
    raise ConfigError(f"unknown ic kind {kind!r}")


def _read_sections(text: str) -> dict:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ConfigError(f"malformed config: {e}") from None
    sections = {}
    for name in cp.sections():
        if name not in _SECTION_KEYS and name != "sweep":
            raise ConfigError(f"unknown section [{name}]")
        sections[name] = dict(cp.items(name))
    return sections


def apply_overrides(sections: dict, overrides) -> dict:
    out = {k: dict(v) for k, v in sections.items()}
    for item in overrides:
        key, _, value = item.partition("=")
        sect, _, opt = key.strip().partition(".")
        if sect not in _SECTION_KEYS or opt not in _SECTION_KEYS[sect]:
            raise ConfigError(f"override targets unknown key {key.strip()!r}")
        out.setdefault(sect, {})[opt] = value.strip()
    return out


def _floats(text: str):
    return [float(x) for x in text.replace(",", " ").split()]


def parse_config(text: str, overrides=()) -> RunSpec:
    """Parse config text (plus optional section.key=value overrides) into a RunSpec."""
    sections = apply_overrides(_read_sections(text), overrides)
    for required in ("model", "run"):
        if required not in sections:
            raise ConfigError(f"missing required section [{required}]")
    for name, kv in sections.items():
        if name == "sweep":
            continue
        for key in kv:
            if key not in _SECTION_KEYS[name]:
                raise ConfigError(f"unknown key {key!r} in section [{name}]")

    dsec = sections.get("domain", {})
    dim = int(dsec.get("dim", 1))
    lengths = _floats(dsec["lengths"]) if "lengths" in dsec else [1.0] * dim
    counts = [int(x) for x in dsec["counts"].replace(",", " ").split()] if "counts" in dsec else [64] * dim
    try:
        domain = make_grid(dim, lengths, counts)
    except ValueError as e:
        raise ConfigError(str(e)) from None

    msec = dict(sections["model"])
    preset = msec.pop("preset", None)
    if preset is not None and preset != "typical":
        raise ConfigError(f"unknown model preset {preset!r}")
    variant_label = msec.pop("variant", None)
    kwargs = {}
    for key, value in msec.items():
        kwargs[key] = float(value)
    try:
        params = HRParameters(**kwargs)
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from None
    if variant_label is not None:
        if variant_label not in VARIANTS:
            raise ConfigError(f"unknown variant {variant_label!r}")
        if params.variant != variant_label:
            raise ConfigError(
                f"variant={variant_label} is inconsistent with diffusion coefficients "
                f"d=({params.d1:g}, {params.d2:g}, {params.d3:g}) which select "
                f"{params.variant!r}"
            )
    variant = variant_label if variant_label is not None else params.variant

    rsec = sections["run"]
    if "t_end" not in rsec:
        raise ConfigError("missing required key t_end in [run]")
    try:
        solver = SolverConfig(
            dt=float(rsec.get("dt", 1e-3)),
            t_end=float(rsec["t_end"]),
            scheme=rsec.get("scheme", "imex_euler"),
            linear_tol=float(rsec.get("linear_tol", 1e-10)),
            monitor_every=int(rsec.get("monitor_every", 100)),
            snapshot_every=int(rsec["snapshot_every"]) if "snapshot_every" in rsec else None,
            probe=int(rsec["probe"]) if "probe" in rsec else None,
        )
    except ValueError as e:
        raise ConfigError(str(e)) from None
    ic = _parse_ic(rsec.get("ic", "uniform:-1,1"))
    seed = int(rsec.get("seed", 0))
    if not 0 <= seed < 2**64:
        raise ConfigError("seed must fit an unsigned 64-bit integer")

    out_dir = sections.get("output", {}).get("dir", "hr_out")
    return RunSpec(domain=domain, params=params, variant=variant, solver=solver,
                   ic=ic, seed=seed, out_dir=out_dir)


def serialize_config(spec: RunSpec) -> str:
    """Emit config text that parses back to an equal RunSpec."""
    dom, p, s = spec.domain, spec.params, spec.solver
    buf = io.StringIO()
    buf.write("[domain]\n")
    buf.write(f"dim = {dom.dim}\n")
    buf.write("lengths = " + ", ".join(repr(x) for x in dom.lengths) + "\n")
    buf.write("counts = " + ", ".join(str(n) for n in dom.counts) + "\n")
    buf.write("\n[model]\n")
    for key in ("d1", "d2", "d3", "a", "b", "alpha", "beta", "q", "r", "J", "c"):
        buf.write(f"{key} = {getattr(p, key)!r}\n")
    buf.write(f"variant = {spec.variant}\n")
    buf.write("\n[run]\n")
    buf.write(f"dt = {s.dt!r}\n")
    buf.write(f"t_end = {s.t_end!r}\n")
    buf.write(f"scheme = {s.scheme}\n")
    buf.write(f"linear_tol = {s.linear_tol!r}\n")
    buf.write(f"monitor_every = {s.monitor_every}\n")
    if s.snapshot_every is not None:
        buf.write(f"snapshot_every = {s.snapshot_every}\n")
    if s.probe is not None:
        buf.write(f"probe = {s.probe}\n")
    buf.write(f"ic = {spec.ic.to_string()}\n")
    buf.write(f"seed = {spec.seed}\n")
    buf.write("\n[output]\n")
    buf.write(f"dir = {spec.out_dir}\n")
    return buf.getvalue()


def read_sweep_grid(text: str):
    """Extract the [sweep] override grid: list of (dotted key, value list)."""
    sections = _read_sections(text)
    grid = []
    for key, value in sections.get("sweep", {}).items():
        sect, _, opt = key.partition(".")
        if sect not in _SECTION_KEYS or opt not in _SECTION_KEYS[sect]:
            raise ConfigError(f"sweep key {key!r} does not name a config key")
        values = [v.strip() for v in value.split(",") if v.strip()]
        if not values:
            raise ConfigError(f"sweep key {key!r} has no values")
        grid.append((key, values))
    return grid


def initial_state(spec: RunSpec) -> State:
    """Materialize the initial condition on the run's domain.

    Uniform noise draws from a PCG64 generator seeded with the recorded seed,
    one independent stream per component, so reruns are bit-identical.
    """
    dom = spec.domain
    ic = spec.ic
    if ic.kind == "constant":
        u0, v0, w0 = ic.constant
        return State(
            Field(dom, np.full(dom.counts, u0)),
            Field(dom, np.full(dom.counts, v0)),
            Field(dom, np.full(dom.counts, w0)),
        )
    if ic.kind == "uniform":
        rng = np.random.default_rng(spec.seed)
        return State(*(Field(dom, rng.uniform(ic.lo, ic.hi, dom.counts)) for _ in range(3)))
    fields = {}
    for comp in "uvw":
        f, label, _t = read_field(f"{ic.prefix}_{comp}.hrfield", dom)
        if label != comp:
            raise ConfigError(
                f"snapshot {ic.prefix}_{comp}.hrfield labels component {label!r}"
            )
        fields[comp] = f
    return State(fields["u"], fields["v"], fields["w"])
