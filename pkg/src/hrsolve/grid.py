"""Cell-centered rectangular grids, Neumann-consistent discrete calculus, field I/O.

All fields are sampled at cell centers of an axis-aligned box split into
uniform cells per axis. The Laplacian uses mirror ghost cells (ghost value
equals the adjacent interior value), which makes the discrete normal
derivative vanish on every face and keeps the operator symmetric and
conservative under the plain cell-weighted inner product.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import _kernels

# total cells must stay addressable with signed 32-bit offsets per axis product
MAX_CELLS = 2**31 - 1

_COMPONENTS = ("u", "v", "w")


@dataclass(frozen=True)
class Domain:
    """Axis-aligned box partitioned into uniform cells (1, 2, or 3 axes)."""

    dim: int
    lengths: tuple[float, ...]
    counts: tuple[int, ...]
    spacing: tuple[float, ...]
    volume: float

    @property
    def ncells(self) -> int:
        return int(np.prod(self.counts))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def shape3(self) -> tuple[int, int, int]:
        """Counts padded with trailing 1-cell axes, used by the stencil kernels."""
        return tuple(self.counts) + (1,) * (3 - self.dim)

    def inv_h2(self) -> tuple[float, float, float]:
        ih = [1.0 / h**2 for h in self.spacing] + [0.0] * (3 - self.dim)
        return tuple(ih)


@dataclass
class Field:
    """One real value per cell of a Domain, row-major cell order."""

    domain: Domain
    values: np.ndarray
    meta: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.values.shape != self.domain.counts:
            if self.values.size == self.domain.ncells:
                self.values = self.values.reshape(self.domain.counts)
            else:
                raise ValueError(
                    f"field has {self.values.size} values, domain has "
                    f"{self.domain.ncells} cells"
                )

    def copy(self) -> "Field":
        return Field(self.domain, self.values.copy(), dict(self.meta))


def make_grid(dim: int, lengths, counts) -> Domain:
    """Build a Domain from per-axis extents and cell counts.

    Raises ValueError on dimension/list mismatch, nonpositive extents or
    counts below 2, and on grids larger than the index range.
    """
    if not isinstance(dim, (int, np.integer)) or not 1 <= dim <= 3:
        raise ValueError(f"dim must be 1, 2 or 3, got {dim!r}")
    lengths = tuple(float(L) for L in lengths)
    counts = tuple(int(n) for n in counts)
    if len(lengths) != dim or len(counts) != dim:
        raise ValueError(
            f"expected {dim} lengths and counts, got {len(lengths)} and {len(counts)}"
        )
    if any(L <= 0 for L in lengths):
        raise ValueError(f"all extents must be positive, got {lengths}")
    if any(n < 2 for n in counts):
        raise ValueError(f"all cell counts must be at least 2, got {counts}")
    total = math.prod(counts)
    if total > MAX_CELLS:
        raise ValueError(f"{total} cells exceeds the supported index range")
    spacing = tuple(L / n for L, n in zip(lengths, counts))
    return Domain(dim, lengths, counts, spacing, math.prod(lengths))


def _require_same_domain(dom: Domain, f: Field):
    if f.domain != dom:
        raise ValueError("field does not live on the given domain")


def _check_finite(values: np.ndarray, what: str):
    if not np.isfinite(values).all():
        raise FloatingPointError(f"{what} produced non-finite values")


def constant_field(dom: Domain, value: float) -> Field:
    return Field(dom, np.full(dom.counts, float(value)))


def laplacian_neumann(dom: Domain, f: Field) -> Field:
    """Second-order central Laplacian with mirror ghosts (zero normal derivative)."""
    _require_same_domain(dom, f)
    out = np.empty(dom.shape3())
    ih0, ih1, ih2 = dom.inv_h2()
    _kernels.lap3(f.values.reshape(dom.shape3()), ih0, ih1, ih2, out)
    out = out.reshape(dom.counts)
    _check_finite(out, "laplacian_neumann")
    return Field(dom, out)


def norm_lp(dom: Domain, f: Field, p) -> float:
    """Cell-volume weighted L^p norm; p = inf gives the max norm."""
    _require_same_domain(dom, f)
    if p == math.inf or p == np.inf:
        return float(np.abs(f.values).max())
    p = float(p)
    if p < 1.0:
        raise ValueError(f"norm_lp requires p >= 1, got {p}")
    return float((np.abs(f.values) ** p).sum() * dom.cell_volume) ** (1.0 / p)


def h1_seminorm(dom: Domain, f: Field) -> float:
    """Gradient L2 norm from face-centered differences, zero at boundary faces.

    Satisfies h1_seminorm(f)**2 == -<laplacian_neumann(f), f> up to rounding.
    """
    _require_same_domain(dom, f)
    acc = 0.0
    for ax in range(dom.dim):
        d = np.diff(f.values, axis=ax) / dom.spacing[ax]
        acc += float((d * d).sum())
    return math.sqrt(acc * dom.cell_volume)


def inner(dom: Domain, f: Field, g: Field) -> float:
    """Cell-weighted L2 inner product."""
    _require_same_domain(dom, f)
    _require_same_domain(dom, g)
    return float((f.values * g.values).sum() * dom.cell_volume)


def mean(dom: Domain, f: Field) -> float:
    _require_same_domain(dom, f)
    return float(f.values.mean())


def shift_field(dom: Domain, f: Field, y) -> Field:
    """Return x -> f(x + y) with zero extension outside the box.

    Offsets are snapped per axis to the nearest whole number of cells; the
    snapped offset is recorded in the result's meta under "shift_offset".
    Interpolation is deliberately avoided so the compactness diagnostic is
    not polluted by interpolation error.
    """
    _require_same_domain(dom, f)
    y = tuple(float(c) for c in y)
    if len(y) != dom.dim:
        raise ValueError(f"offset has {len(y)} components, domain has {dom.dim}")
    shifts = [int(round(c / h)) for c, h in zip(y, dom.spacing)]
    out = np.zeros_like(f.values)
    src = []
    dst = []
    for ax, (k, n) in enumerate(zip(shifts, dom.counts)):
        if abs(k) >= n:
            src = None
            break
        if k >= 0:
            src.append(slice(k, n))
            dst.append(slice(0, n - k))
        else:
            src.append(slice(0, n + k))
            dst.append(slice(-k, n))
    if src is not None:
        out[tuple(dst)] = f.values[tuple(src)]
    snapped = tuple(k * h for k, h in zip(shifts, dom.spacing))
    return Field(dom, out, {"shift_offset": snapped})


def write_field(path, f: Field, component: str, t: float):
    """Write the HRFIELD snapshot format (ASCII header + little-endian f8 payload)."""
    if component not in _COMPONENTS:
        raise ValueError(f"component must be one of {_COMPONENTS}, got {component!r}")
    dom = f.domain
    header = "HRFIELD {} {} {} {!r}\n".format(
        dom.dim, " ".join(str(n) for n in dom.counts), component, float(t)
    )
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())


def read_field(path, dom: Domain):
    """Read an HRFIELD snapshot; returns (Field, component, t).

    The header carries counts but not extents, so the target Domain must be
    supplied and its counts must match.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    nl = raw.find(b"\n")
    if nl < 0 or not raw.startswith(b"HRFIELD "):
        raise ValueError(f"{path}: not an HRFIELD snapshot")
    parts = raw[:nl].decode("ascii").split()
    dim = int(parts[1])
    counts = tuple(int(x) for x in parts[2 : 2 + dim])
    component = parts[2 + dim]
    t = float(parts[3 + dim])
    if component not in _COMPONENTS:
        raise ValueError(f"{path}: bad component {component!r}")
    if dim != dom.dim or counts != dom.counts:
        raise ValueError(
            f"{path}: snapshot is {dim}D {counts}, domain is {dom.dim}D {dom.counts}"
        )
    payload = raw[nl + 1 :]
    values = np.frombuffer(payload, dtype="<f8", count=dom.ncells).astype(np.float64)
    return Field(dom, values.reshape(counts)), component, t
